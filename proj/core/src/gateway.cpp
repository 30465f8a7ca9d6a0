#include "paqa/gateway.hpp"

#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "paqa/errors.hpp"
#include "paqa/tokenizer.hpp"

namespace paqa {

using nlohmann::json;

// ---------------- Mock script ----------------

namespace {

constexpr std::string_view kGarbageResponse =
    "I am sorry, but I am unable to provide a structured answer for this request.";

MockRule rule_from_json(const json& entry) {
  MockRule rule;
  const json& match = entry.at("match");
  if (!match.is_object()) throw ConfigError("mock script: \"match\" must be an object");
  if (match.contains("record_id")) rule.record_id = match["record_id"].get<std::string>();
  if (match.contains("strategy")) {
    auto strategy = strategy_from_id(match["strategy"].get<std::string>());
    if (!strategy) {
      throw ConfigError("mock script: unknown strategy \"" +
                        match["strategy"].get<std::string>() + "\"");
    }
    rule.strategy = *strategy;
  }
  if (match.contains("question_ids")) {
    rule.question_ids = match["question_ids"].get<std::vector<std::string>>();
  }

  const bool has_response = entry.contains("response");
  const bool has_inject = entry.contains("inject");
  if (has_response == has_inject) {
    throw ConfigError("mock script: each rule needs exactly one of \"response\" or \"inject\"");
  }
  if (has_response) {
    rule.response = entry["response"].get<std::string>();
  } else {
    std::string inject = entry["inject"].get<std::string>();
    if (inject == "transport_error") {
      rule.inject = MockRule::Inject::kTransportError;
    } else if (inject == "parse_garbage") {
      rule.inject = MockRule::Inject::kParseGarbage;
    } else {
      throw ConfigError("mock script: inject must be transport_error or parse_garbage, got \"" +
                        inject + "\"");
    }
  }
  return rule;
}

}  // namespace

std::string_view mock_garbage_response() { return kGarbageResponse; }

MockScript MockScript::from_json(const std::string& text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_array()) {
    throw ConfigError("mock script: file must be a JSON array");
  }
  MockScript script;
  for (const json& entry : doc) {
    if (!entry.is_object()) throw ConfigError("mock script: entries must be objects");
    if (entry.contains("default_response")) {
      script.default_response = entry["default_response"].get<std::string>();
      continue;
    }
    if (!entry.contains("match")) {
      throw ConfigError("mock script: entry needs \"match\" or \"default_response\"");
    }
    script.rules.push_back(rule_from_json(entry));
  }
  return script;
}

MockScript MockScript::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open mock script: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

std::string mock_script_to_json(const MockScript& script) {
  json entries = json::array();
  for (const MockRule& rule : script.rules) {
    json match = json::object();
    if (rule.record_id) match["record_id"] = *rule.record_id;
    if (rule.strategy) match["strategy"] = std::string(strategy_id(*rule.strategy));
    if (rule.question_ids) match["question_ids"] = *rule.question_ids;
    json entry = {{"match", std::move(match)}};
    switch (rule.inject) {
      case MockRule::Inject::kNone: entry["response"] = rule.response; break;
      case MockRule::Inject::kTransportError: entry["inject"] = "transport_error"; break;
      case MockRule::Inject::kParseGarbage: entry["inject"] = "parse_garbage"; break;
    }
    entries.push_back(std::move(entry));
  }
  if (!script.default_response.empty()) {
    entries.push_back(json{{"default_response", script.default_response}});
  }
  return entries.dump(2);
}

MockScript make_perfect_script(const std::vector<GoldLabel>& labels) {
  std::vector<std::string> order;
  std::map<std::string, json> answers_by_record;
  for (const GoldLabel& label : labels) {
    auto [it, inserted] = answers_by_record.try_emplace(label.record_id, json::object());
    if (inserted) order.push_back(label.record_id);
    it->second[label.question_id] = std::string(to_canonical(label.answer));
  }
  MockScript script;
  for (const std::string& record_id : order) {
    MockRule rule;
    rule.record_id = record_id;
    rule.response = json{{"answers", answers_by_record[record_id]}}.dump();
    script.rules.push_back(std::move(rule));
  }
  return script;
}

// ---------------- Mock backend ----------------

MockBackend::MockBackend(MockScript script) : script_(std::move(script)) {}

int MockBackend::call_count() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return call_count_;
}

CompletionResult MockBackend::attempt(const RenderedPrompt& prompt,
                                      const CompletionConfig& config) {
  (void)config;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    ++call_count_;
  }

  const MockRule* hit = nullptr;
  for (const MockRule& rule : script_.rules) {
    if (rule.record_id && *rule.record_id != prompt.record_id) continue;
    if (rule.strategy && *rule.strategy != prompt.strategy) continue;
    if (rule.question_ids && *rule.question_ids != prompt.question_ids) continue;
    hit = &rule;
    break;
  }

  std::string raw;
  if (hit == nullptr) {
    raw = script_.default_response;
  } else {
    switch (hit->inject) {
      case MockRule::Inject::kTransportError:
        throw TransientError("injected transport error for record " + prompt.record_id);
      case MockRule::Inject::kParseGarbage: raw = std::string(kGarbageResponse); break;
      case MockRule::Inject::kNone: raw = hit->response; break;
    }
  }

  CompletionResult result;
  result.raw_text = std::move(raw);
  result.prompt_tokens = static_cast<int>(token_count(prompt.text));
  result.completion_tokens = static_cast<int>(token_count(result.raw_text));
  result.backend_id = id();
  return result;
}

// ---------------- HTTP backend ----------------

HttpBackend::HttpBackend(HttpOptions options) : options_(std::move(options)) {
  const std::string& url = options_.base_url;
  std::size_t scheme_end = url.find("://");
  std::size_t path_start =
      url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  if (path_start == std::string::npos) {
    host_ = url;
  } else {
    host_ = url.substr(0, path_start);
    path_prefix_ = url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  }
  if (host_.empty()) throw ConfigError("http backend: empty base URL");
}

HttpOptions HttpBackend::options_from_env() {
  const char* base_url = std::getenv("LLM_BASE_URL");
  const char* api_key = std::getenv("LLM_API_KEY");
  if (base_url == nullptr || *base_url == '\0') {
    throw ConfigError("http backend requires LLM_BASE_URL");
  }
  if (api_key == nullptr || *api_key == '\0') {
    throw ConfigError("http backend requires LLM_API_KEY");
  }
  HttpOptions options;
  options.base_url = base_url;
  options.api_key = api_key;
  return options;
}

std::string HttpBackend::id() const { return "http:" + options_.base_url; }

CompletionResult HttpBackend::attempt(const RenderedPrompt& prompt,
                                      const CompletionConfig& config) {
  json body = {{"model", config.model_name},
               {"messages", json::array({json{{"role", "user"}, {"content", prompt.text}}})},
               {"temperature", config.temperature},
               {"frequency_penalty", config.frequency_penalty},
               {"presence_penalty", config.presence_penalty},
               {"max_tokens", config.max_tokens}};

  httplib::Client client(host_);
  client.set_connection_timeout(options_.timeout_seconds, 0);
  client.set_read_timeout(options_.timeout_seconds, 0);
  httplib::Headers headers = {{"Authorization", "Bearer " + options_.api_key}};

  auto res = client.Post(path_prefix_ + "/chat/completions", headers, body.dump(),
                         "application/json");
  if (!res) {
    throw TransientError("transport: " + httplib::to_string(res.error()));
  }
  if (res->status == 429 || res->status >= 500) {
    throw TransientError("HTTP " + std::to_string(res->status));
  }
  if (res->status < 200 || res->status >= 300) {
    std::string message = res->body;
    json err = json::parse(res->body, nullptr, false);
    if (err.is_object() && err.contains("error") && err["error"].contains("message")) {
      message = err["error"]["message"].get<std::string>();
    }
    throw ProviderError("provider error (HTTP " + std::to_string(res->status) + "): " + message);
  }

  json doc = json::parse(res->body, nullptr, false);
  if (doc.is_discarded() || !doc.contains("choices") || !doc["choices"].is_array() ||
      doc["choices"].empty()) {
    throw ProviderError("malformed provider response: missing choices");
  }
  const json& choice = doc["choices"][0];
  if (!choice.contains("message") || !choice["message"].contains("content") ||
      !choice["message"]["content"].is_string()) {
    throw ProviderError("malformed provider response: missing message content");
  }

  CompletionResult result;
  result.raw_text = choice["message"]["content"].get<std::string>();
  result.backend_id = id();
  if (doc.contains("usage") && doc["usage"].is_object()) {
    result.prompt_tokens = doc["usage"].value("prompt_tokens", 0);
    result.completion_tokens = doc["usage"].value("completion_tokens", 0);
  }
  if (result.prompt_tokens == 0) {
    result.prompt_tokens = static_cast<int>(token_count(prompt.text));
  }
  if (result.completion_tokens == 0) {
    result.completion_tokens = static_cast<int>(token_count(result.raw_text));
  }
  return result;
}

// ---------------- Retrying client ----------------

namespace {

class Semaphore {
 public:
  explicit Semaphore(int count) : count_(count) {}

  void acquire() {
    std::unique_lock<std::mutex> lock(mutex_);
    cv_.wait(lock, [&] { return count_ > 0; });
    --count_;
  }

  void release() {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      ++count_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  int count_;
};

struct SemaphoreGuard {
  Semaphore& sem;
  explicit SemaphoreGuard(Semaphore& s) : sem(s) { sem.acquire(); }
  ~SemaphoreGuard() { sem.release(); }
};

}  // namespace

struct CompletionClient::Impl {
  Semaphore in_flight;
  std::mutex rng_mutex;
  std::mt19937_64 rng;

  Impl(int limit, std::uint64_t seed) : in_flight(limit), rng(seed) {}
};

CompletionClient::CompletionClient(std::shared_ptr<Backend> backend, RetryPolicy retry,
                                   int in_flight_limit)
    : backend_(std::move(backend)), retry_(std::move(retry)) {
  if (!backend_) throw ConfigError("completion client needs a backend");
  if (in_flight_limit < 1) in_flight_limit = 1;
  if (!retry_.sleep_fn) {
    retry_.sleep_fn = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
  impl_ = std::make_unique<Impl>(in_flight_limit, std::random_device{}());
}

CompletionClient::~CompletionClient() = default;

CompletionResult CompletionClient::complete(const RenderedPrompt& prompt,
                                            const CompletionConfig& config) {
  const std::size_t estimate = token_count(prompt.text);
  const std::size_t window = static_cast<std::size_t>(config.context_window);
  const std::size_t reserved = static_cast<std::size_t>(config.max_tokens);
  if (estimate + reserved > window) {
    throw BudgetError("prompt estimate " + std::to_string(estimate) + " + max_tokens " +
                      std::to_string(reserved) + " exceeds context window " +
                      std::to_string(window) + " by " +
                      std::to_string(estimate + reserved - window) + " tokens");
  }

  SemaphoreGuard guard(impl_->in_flight);
  int failures = 0;
  for (;;) {
    try {
      return backend_->attempt(prompt, config);
    } catch (const TransientError& e) {
      ++failures;
      if (failures > retry_.max_retries) {
        throw TransportError("transport failure after " + std::to_string(failures) +
                             " attempts: " + e.what());
      }
      // Full jitter: uniform in [0, base * 2^(failures-1)].
      auto cap = retry_.base_delay.count() * (1LL << (failures - 1));
      long long delay = 0;
      if (cap > 0) {
        std::lock_guard<std::mutex> lock(impl_->rng_mutex);
        delay = static_cast<long long>(impl_->rng() % static_cast<std::uint64_t>(cap + 1));
      }
      retry_.sleep_fn(std::chrono::milliseconds(delay));
    }
  }
}

// ---------------- Budget truncation ----------------

TruncationResult truncate_to_budget(const PatientRecord& record, std::size_t overhead_tokens,
                                    const CompletionConfig& config) {
  const long long budget = static_cast<long long>(config.context_window) -
                           static_cast<long long>(config.max_tokens) -
                           static_cast<long long>(overhead_tokens);
  if (budget <= 0) {
    throw BudgetError("overhead " + std::to_string(overhead_tokens) + " tokens plus max_tokens " +
                      std::to_string(config.max_tokens) + " leaves no room in context window " +
                      std::to_string(config.context_window));
  }
  if (record.token_count <= static_cast<std::size_t>(budget)) {
    return {record.text, false};
  }
  auto spans = tokenize_spans(record.text);
  const std::size_t cut = spans[static_cast<std::size_t>(budget) - 1].end;
  return {record.text.substr(0, cut), true};
}

}  // namespace paqa

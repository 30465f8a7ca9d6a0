#include "paqa/run.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <future>
#include <set>
#include <sstream>

#include <json.hpp>

#include "paqa/errors.hpp"
#include "paqa/prompt.hpp"
#include "paqa/tokenizer.hpp"

namespace paqa {

using nlohmann::json;
using nlohmann::ordered_json;

// ---------------- Hashing ----------------

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::string fnv1a64_hex(std::string_view bytes) {
  static const char* kHex = "0123456789abcdef";
  std::uint64_t hash = fnv1a64(bytes);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kHex[hash & 0xF];
    hash >>= 4;
  }
  return out;
}

// ---------------- Config ----------------

namespace {

std::string trim(std::string_view text) {
  std::size_t begin = text.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) return "";
  std::size_t end = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(begin, end - begin + 1));
}

std::string unquote(std::string value) {
  if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
    return value.substr(1, value.size() - 2);
  }
  return value;
}

int parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    int parsed = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer for " + key + ": \"" + value + "\"");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    unsigned long long parsed = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer for " + key + ": \"" + value + "\"");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    double parsed = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    throw ConfigError("config: bad number for " + key + ": \"" + value + "\"");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config: bad boolean for " + key + ": \"" + value + "\"");
}

}  // namespace

void apply_config_entry(RunConfig& config, const std::string& key, const std::string& value) {
  if (key == "corpus") config.corpus_path = value;
  else if (key == "labels") config.labels_path = value;
  else if (key == "questions") config.questions_path = value;
  else if (key == "strategy") config.strategy = value;
  else if (key == "backend") config.backend = value;
  else if (key == "mock_script") config.mock_script_path = value;
  else if (key == "output_dir") config.output_dir = value;
  else if (key == "model") config.completion.model_name = value;
  else if (key == "temperature") config.completion.temperature = parse_double(key, value);
  else if (key == "frequency_penalty") config.completion.frequency_penalty = parse_double(key, value);
  else if (key == "presence_penalty") config.completion.presence_penalty = parse_double(key, value);
  else if (key == "max_tokens") config.completion.max_tokens = parse_int(key, value);
  else if (key == "context_window") config.completion.context_window = parse_int(key, value);
  else if (key == "parallelism") config.parallelism = parse_int(key, value);
  else if (key == "truncation") config.truncation = parse_bool(key, value);
  else if (key == "max_retries") config.max_retries = parse_int(key, value);
  else if (key == "retry_base_ms") config.retry_base_ms = parse_int(key, value);
  else if (key == "seed") config.seed = parse_u64(key, value);
  else throw ConfigError("config: unknown key \"" + key + "\"");
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  RunConfig config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string entry = trim(line);
    if (entry.empty() || entry[0] == '#') continue;
    std::size_t eq = entry.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(entry.substr(0, eq));
    std::string value = unquote(trim(entry.substr(eq + 1)));
    try {
      apply_config_entry(config, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return config;
}

void validate_run_config(const RunConfig& config) {
  if (config.strategy != "all" && !strategy_from_id(config.strategy)) {
    throw ConfigError("unknown strategy \"" + config.strategy + "\"");
  }
  if (config.backend == "mock") {
    if (config.mock_script_path.empty()) throw ConfigError("backend=mock requires mock_script");
  } else if (config.backend == "http") {
    HttpBackend::options_from_env();  // throws ConfigError when env is missing
  } else {
    throw ConfigError("backend must be mock or http, got \"" + config.backend + "\"");
  }
  if (config.corpus_path.empty()) throw ConfigError("corpus path is required");
  if (config.parallelism < 1) throw ConfigError("parallelism must be >= 1");
  if (config.max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (config.retry_base_ms < 0) throw ConfigError("retry_base_ms must be >= 0");
  if (config.completion.max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
  if (config.completion.context_window < 1) throw ConfigError("context_window must be >= 1");
}

namespace {

std::string double_repr(double x) { return json(x).dump(); }

std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& config) {
  std::vector<std::pair<std::string, std::string>> entries = {
      {"backend", config.backend},
      {"context_window", std::to_string(config.completion.context_window)},
      {"corpus", config.corpus_path.string()},
      {"frequency_penalty", double_repr(config.completion.frequency_penalty)},
      {"labels", config.labels_path.string()},
      {"max_retries", std::to_string(config.max_retries)},
      {"max_tokens", std::to_string(config.completion.max_tokens)},
      {"mock_script", config.mock_script_path.string()},
      {"model", config.completion.model_name},
      {"output_dir", config.output_dir.string()},
      {"parallelism", std::to_string(config.parallelism)},
      {"presence_penalty", double_repr(config.completion.presence_penalty)},
      {"questions", config.questions_path.string()},
      {"retry_base_ms", std::to_string(config.retry_base_ms)},
      {"seed", std::to_string(config.seed)},
      {"strategy", config.strategy},
      {"temperature", double_repr(config.completion.temperature)},
      {"truncation", config.truncation ? "true" : "false"},
  };
  std::sort(entries.begin(), entries.end());
  return entries;
}

}  // namespace

std::string canonical_config_lines(const RunConfig& config) {
  std::string out;
  for (const auto& [key, value] : config_entries(config)) {
    out += key + "=" + value + "\n";
  }
  return out;
}

std::string config_hash(const RunConfig& config) {
  return fnv1a64_hex(canonical_config_lines(config));
}

// ---------------- Outcome file I/O ----------------

std::vector<ParsedOutcome> load_outcomes_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open outcomes: " + path.string());
  std::vector<ParsedOutcome> outcomes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      outcomes.push_back(outcome_from_json_line(line));
    } catch (const Error& e) {
      throw CorpusError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return outcomes;
}

// ---------------- Batch execution ----------------

RenderedPrompt render_for_run(const RunConfig& config, StrategyKind strategy,
                              const std::vector<GuidelineQuestion>& questions,
                              const PatientRecord& record, bool* truncated) {
  if (truncated != nullptr) *truncated = false;
  if (!config.truncation) return render(strategy, questions, record);
  // Overhead = everything around the record text: render once with the text
  // blank, then fit the record into what remains of the window.
  PatientRecord scaffold_record = PatientRecord::make(record.record_id, "");
  RenderedPrompt scaffold = render(strategy, questions, scaffold_record);
  TruncationResult cut =
      truncate_to_budget(record, token_count(scaffold.text), config.completion);
  if (!cut.was_truncated) return render(strategy, questions, record);
  if (truncated != nullptr) *truncated = true;
  PatientRecord working = PatientRecord::make(record.record_id, cut.text);
  return render(strategy, questions, working);
}

namespace {

std::string task_key(const std::string& record_id, const std::vector<std::string>& question_ids) {
  std::string key = record_id;
  key += '\x1f';
  for (const std::string& qid : question_ids) {
    key += qid;
    key += ',';
  }
  return key;
}

struct Task {
  const PatientRecord* record = nullptr;
  std::vector<GuidelineQuestion> questions;
  std::vector<std::string> question_ids;
};

struct TaskOutput {
  std::string line;  // empty when the prompt failed
  PromptTelemetry telemetry;
};

TaskOutput execute_task(CompletionClient& client, const RunConfig& config, StrategyKind strategy,
                        const Task& task) {
  TaskOutput output;
  output.telemetry.record_id = task.record->record_id;
  output.telemetry.question_ids = task.question_ids;
  try {
    RenderedPrompt prompt = render_for_run(config, strategy, task.questions, *task.record,
                                           &output.telemetry.truncated);
    output.telemetry.prompt_tokens = token_count(prompt.text);
    CompletionResult result = client.complete(prompt, config.completion);
    ParsedOutcome outcome =
        parse_response(task.record->record_id, result.raw_text, strategy, task.questions);
    output.line = outcome_to_json_line(outcome);
  } catch (const Error& e) {
    output.telemetry.error = e.what();
  }
  return output;
}

StrategyRunResult run_strategy(CompletionClient& client, const RunConfig& config,
                               StrategyKind strategy, const std::vector<PatientRecord>& records,
                               const std::vector<GuidelineQuestion>& questions) {
  StrategyRunResult result;
  result.strategy = strategy;
  result.outcomes_path =
      config.output_dir / ("outcomes_" + std::string(strategy_id(strategy)) + ".jsonl");

  std::set<std::string> done;
  if (std::filesystem::exists(result.outcomes_path)) {
    for (const ParsedOutcome& outcome : load_outcomes_file(result.outcomes_path)) {
      done.insert(task_key(outcome.record_id, outcome.question_ids));
    }
  }

  std::vector<Task> tasks;
  for (const PatientRecord& record : records) {
    if (binds_all_questions(strategy)) {
      Task task;
      task.record = &record;
      task.questions = questions;
      for (const GuidelineQuestion& q : questions) task.question_ids.push_back(q.question_id);
      tasks.push_back(std::move(task));
    } else {
      for (const GuidelineQuestion& q : questions) {
        Task task;
        task.record = &record;
        task.questions = {q};
        task.question_ids = {q.question_id};
        tasks.push_back(std::move(task));
      }
    }
  }

  std::vector<const Task*> pending;
  for (const Task& task : tasks) {
    if (done.count(task_key(task.record->record_id, task.question_ids))) {
      ++result.skipped;
    } else {
      pending.push_back(&task);
    }
  }

  std::ofstream out(result.outcomes_path, std::ios::app | std::ios::binary);
  if (!out) throw ConfigError("cannot open for append: " + result.outcomes_path.string());

  // Chunked fan-out: up to `parallelism` tasks in flight, results appended in
  // task order so identical runs write identical bytes.
  const std::size_t chunk = static_cast<std::size_t>(config.parallelism);
  std::size_t next = 0;
  while (next < pending.size()) {
    const std::size_t end = std::min(next + chunk, pending.size());
    std::vector<std::future<TaskOutput>> futures;
    futures.reserve(end - next);
    for (std::size_t i = next; i < end; ++i) {
      const Task* task = pending[i];
      futures.push_back(std::async(std::launch::async, [&client, &config, strategy, task] {
        return execute_task(client, config, strategy, *task);
      }));
    }
    for (auto& future : futures) {
      TaskOutput output = future.get();
      ++result.executed;
      if (output.telemetry.error.empty()) {
        out << output.line << "\n";
      } else {
        ++result.failed;
      }
      result.telemetry.push_back(std::move(output.telemetry));
    }
    out.flush();
    next = end;
  }
  return result;
}

ordered_json telemetry_to_json(const std::vector<PromptTelemetry>& telemetry) {
  ordered_json out = ordered_json::array();
  for (const PromptTelemetry& t : telemetry) {
    ordered_json entry;
    entry["record_id"] = t.record_id;
    entry["question_ids"] = t.question_ids;
    entry["prompt_tokens"] = t.prompt_tokens;
    entry["truncated"] = t.truncated;
    entry["error"] = t.error;
    out.push_back(std::move(entry));
  }
  return out;
}

}  // namespace

RunResult run_batch(const RunConfig& config) {
  validate_run_config(config);

  std::vector<PatientRecord> records = ingest_corpus(config.corpus_path);
  std::vector<GuidelineQuestion> questions = config.questions_path.empty()
                                                 ? default_question_set()
                                                 : load_questions(config.questions_path);

  std::vector<StrategyKind> strategies;
  if (config.strategy == "all") {
    strategies.assign(kAllStrategies.begin(), kAllStrategies.end());
  } else {
    strategies.push_back(*strategy_from_id(config.strategy));
  }

  std::shared_ptr<Backend> backend;
  if (config.backend == "mock") {
    backend = std::make_shared<MockBackend>(MockScript::from_file(config.mock_script_path));
  } else {
    backend = std::make_shared<HttpBackend>(HttpBackend::options_from_env());
  }
  RetryPolicy retry;
  retry.max_retries = config.max_retries;
  retry.base_delay = std::chrono::milliseconds(config.retry_base_ms);
  CompletionClient client(backend, retry, config.parallelism);

  std::filesystem::create_directories(config.output_dir);

  RunResult result;
  result.manifest_path = config.output_dir / "run_manifest.json";
  for (StrategyKind strategy : strategies) {
    StrategyRunResult strategy_result = run_strategy(client, config, strategy, records, questions);
    if (strategy_result.failed > 0) result.partial = true;
    result.strategies.push_back(std::move(strategy_result));
  }

  ordered_json manifest;
  manifest["config_hash"] = config_hash(config);
  ordered_json config_map;
  for (const auto& [key, value] : config_entries(config)) config_map[key] = value;
  manifest["config"] = std::move(config_map);
  manifest["backend_id"] = backend->id();
  manifest["n_records"] = records.size();
  ordered_json template_hashes;
  for (StrategyKind strategy : kAllStrategies) {
    template_hashes[std::string(strategy_id(strategy))] = fnv1a64_hex(golden_template(strategy));
  }
  template_hashes["response_format"] = fnv1a64_hex(response_format_template());
  manifest["template_hashes"] = std::move(template_hashes);
  ordered_json strategy_entries = ordered_json::array();
  for (const StrategyRunResult& s : result.strategies) {
    ordered_json entry;
    entry["strategy"] = std::string(strategy_id(s.strategy));
    entry["outcomes_file"] = s.outcomes_path.filename().string();
    entry["executed"] = s.executed;
    entry["skipped"] = s.skipped;
    entry["failed"] = s.failed;
    entry["prompts"] = telemetry_to_json(s.telemetry);
    strategy_entries.push_back(std::move(entry));
  }
  manifest["strategies"] = std::move(strategy_entries);

  std::ofstream manifest_out(result.manifest_path, std::ios::binary | std::ios::trunc);
  if (!manifest_out) throw ConfigError("cannot write manifest: " + result.manifest_path.string());
  manifest_out << manifest.dump(2) << "\n";
  return result;
}

EvalReport evaluate_outcomes_file(const std::filesystem::path& outcomes_path,
                                  const RunConfig& config) {
  std::vector<ParsedOutcome> outcomes = load_outcomes_file(outcomes_path);
  if (outcomes.empty()) throw ConfigError("no outcomes in " + outcomes_path.string());
  std::vector<PatientRecord> records = ingest_corpus(config.corpus_path);
  std::vector<GuidelineQuestion> questions = config.questions_path.empty()
                                                 ? default_question_set()
                                                 : load_questions(config.questions_path);
  std::vector<GoldLabel> labels = load_gold_labels(config.labels_path, questions);
  return evaluate(outcomes, labels, questions, records.size());
}

}  // namespace paqa

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "paqa/corpus.hpp"
#include "paqa/prompt.hpp"

namespace paqa {

// Decoding configuration. Defaults pin temperature and both penalties to 0
// with max_tokens 1000 against a 32k context window.
struct CompletionConfig {
  std::string model_name = "gpt-4-32k";
  double temperature = 0.0;
  double frequency_penalty = 0.0;
  double presence_penalty = 0.0;
  int max_tokens = 1000;
  int context_window = 32768;
};

struct CompletionResult {
  std::string raw_text;  // may be empty if the backend returned an empty choice
  int prompt_tokens = 0;
  int completion_tokens = 0;
  std::string backend_id;
};

// ---------------- Scripted mock backend ----------------

// One scripted rule. Omitted match fields are wildcards; rules are tried in
// order and the first match wins.
struct MockRule {
  std::optional<std::string> record_id;
  std::optional<StrategyKind> strategy;
  std::optional<std::vector<std::string>> question_ids;

  enum class Inject { kNone, kTransportError, kParseGarbage };
  Inject inject = Inject::kNone;
  std::string response;  // used when inject == kNone
};

struct MockScript {
  std::vector<MockRule> rules;
  std::string default_response;  // returned when no rule matches

  // File format: JSON array of {"match": {...}, "response": ...} or
  // {"match": {...}, "inject": "transport_error"|"parse_garbage"} entries;
  // an entry {"default_response": ...} sets the fallback.
  static MockScript from_file(const std::filesystem::path& path);
  static MockScript from_json(const std::string& text);
};

std::string mock_script_to_json(const MockScript& script);

// Script that answers every record of a fixture with its gold labels, one
// wildcard-strategy rule per record. Valid for AQ and PQ prompts alike.
MockScript make_perfect_script(const std::vector<GoldLabel>& labels);

// The canned body returned for a parse_garbage injection; deliberately
// contains no JSON and no recognizable per-question answer line.
std::string_view mock_garbage_response();

// ---------------- Backends ----------------

// One attempt against a provider. Throws TransientError for retryable
// failures; the retry loop lives in CompletionClient.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual CompletionResult attempt(const RenderedPrompt& prompt,
                                   const CompletionConfig& config) = 0;
  virtual std::string id() const = 0;
};

class MockBackend : public Backend {
 public:
  explicit MockBackend(MockScript script);

  CompletionResult attempt(const RenderedPrompt& prompt, const CompletionConfig& config) override;
  std::string id() const override { return "mock"; }

  // Total attempt() calls, including ones that raised injected failures.
  int call_count() const;

 private:
  const MockScript script_;
  mutable std::mutex mutex_;  // guards call-count telemetry only
  int call_count_ = 0;
};

struct HttpOptions {
  std::string base_url;  // e.g. "https://api.example.com/v1"
  std::string api_key;
  int timeout_seconds = 60;
};

// OpenAI-compatible chat-completions client:
// POST {base_url}/chat/completions with a single user message.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(HttpOptions options);

  // Reads LLM_BASE_URL and LLM_API_KEY; throws ConfigError when unset.
  static HttpOptions options_from_env();

  CompletionResult attempt(const RenderedPrompt& prompt, const CompletionConfig& config) override;
  std::string id() const override;

 private:
  HttpOptions options_;
  std::string host_;         // scheme://host[:port]
  std::string path_prefix_;  // optional path portion of base_url
};

// ---------------- Retrying client ----------------

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds base_delay{1000};  // doubled per attempt, full jitter
  // Injectable for tests; defaults to std::this_thread::sleep_for.
  std::function<void(std::chrono::milliseconds)> sleep_fn;
};

// Shared handle that enforces the token budget, bounds concurrent in-flight
// calls, and retries transient failures with exponential backoff.
class CompletionClient {
 public:
  explicit CompletionClient(std::shared_ptr<Backend> backend, RetryPolicy retry = {},
                            int in_flight_limit = 4);
  ~CompletionClient();

  CompletionClient(const CompletionClient&) = delete;
  CompletionClient& operator=(const CompletionClient&) = delete;

  // Throws BudgetError when the prompt estimate plus max_tokens exceeds the
  // context window, TransportError after retries are exhausted, and
  // ProviderError verbatim from the backend.
  CompletionResult complete(const RenderedPrompt& prompt, const CompletionConfig& config);

  Backend& backend() { return *backend_; }

 private:
  struct Impl;
  std::shared_ptr<Backend> backend_;
  RetryPolicy retry_;
  std::unique_ptr<Impl> impl_;
};

// ---------------- Budget truncation ----------------

struct TruncationResult {
  std::string text;
  bool was_truncated = false;
};

// Keeps the longest record prefix, cut at a token boundary, such that
// overhead + prefix tokens + max_tokens fits the context window. Throws
// BudgetError when the overhead alone leaves no room.
TruncationResult truncate_to_budget(const PatientRecord& record, std::size_t overhead_tokens,
                                    const CompletionConfig& config);

}  // namespace paqa

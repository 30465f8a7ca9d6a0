#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "paqa/corpus.hpp"
#include "paqa/eval.hpp"
#include "paqa/gateway.hpp"
#include "paqa/parser.hpp"

namespace paqa {

// Everything a run needs, loadable from a flat key=value config file with
// CLI-flag overrides layered on top.
struct RunConfig {
  std::filesystem::path corpus_path;
  std::filesystem::path labels_path;
  std::filesystem::path questions_path;  // empty -> built-in question set
  std::string strategy = "all";          // a strategy id or "all"
  std::string backend = "mock";          // "mock" | "http"
  std::filesystem::path mock_script_path;
  std::filesystem::path output_dir = "out";
  CompletionConfig completion;
  int parallelism = 4;
  bool truncation = true;
  int max_retries = 3;
  int retry_base_ms = 1000;
  std::uint64_t seed = 0;
};

// Config file: one `key = value` per line, `#` comments, optional quotes
// around values. Unknown keys are errors.
RunConfig load_run_config(const std::filesystem::path& path);

// Applies one `key=value` override; shared by the file parser and CLI flags.
void apply_config_entry(RunConfig& config, const std::string& key, const std::string& value);

// Throws ConfigError on contradictions (mock without a script, unknown
// strategy, non-positive parallelism, http without LLM_BASE_URL/LLM_API_KEY).
void validate_run_config(const RunConfig& config);

// Sorted `key=value` lines covering every config field; the FNV-1a hash of
// these bytes identifies the run in the manifest.
std::string canonical_config_lines(const RunConfig& config);
std::string config_hash(const RunConfig& config);

std::uint64_t fnv1a64(std::string_view bytes);
std::string fnv1a64_hex(std::string_view bytes);

// Per-prompt telemetry captured for the manifest, in deterministic task order.
struct PromptTelemetry {
  std::string record_id;
  std::vector<std::string> question_ids;
  std::size_t prompt_tokens = 0;
  bool truncated = false;
  std::string error;  // empty on success; transport/provider/budget text otherwise
};

struct StrategyRunResult {
  StrategyKind strategy = StrategyKind::kBasicAq;
  std::filesystem::path outcomes_path;
  std::size_t executed = 0;  // prompts attempted in this invocation
  std::size_t skipped = 0;   // already present in the outcomes file (resume)
  std::size_t failed = 0;    // recorded errors (no outcome line written)
  std::vector<PromptTelemetry> telemetry;
};

struct RunResult {
  std::vector<StrategyRunResult> strategies;
  std::filesystem::path manifest_path;
  bool partial = false;  // true when any prompt failed; callers map this to exit 2
};

// Renders exactly what a run would send for this record: applies the budget
// truncation pre-step when config.truncation is on. Sets *truncated when the
// record text was cut.
RenderedPrompt render_for_run(const RunConfig& config, StrategyKind strategy,
                              const std::vector<GuidelineQuestion>& questions,
                              const PatientRecord& record, bool* truncated = nullptr);

// Executes the configured strategy (or all seven) over the corpus with
// bounded parallelism. Appends to outcomes_<strategy>.jsonl, skipping
// (record, bound-questions) pairs already present; per-prompt failures are
// recorded in the manifest and retried by a later resume. Rewrites
// run_manifest.json. Timestamps are deliberately absent so identical runs
// produce identical bytes.
RunResult run_batch(const RunConfig& config);

std::vector<ParsedOutcome> load_outcomes_file(const std::filesystem::path& path);

// Loads outcomes + labels and evaluates against full_corpus_size = corpus
// record count.
EvalReport evaluate_outcomes_file(const std::filesystem::path& outcomes_path,
                                  const RunConfig& config);

}  // namespace paqa

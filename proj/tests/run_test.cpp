#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "paqa/corpus.hpp"
#include "paqa/errors.hpp"
#include "paqa/gateway.hpp"
#include "paqa/run.hpp"
#include "paqa/tokenizer.hpp"
#include "test_util.hpp"

#include <json.hpp>

using namespace paqa;
using nlohmann::json;
using paqa::testing::TempDir;
using paqa::testing::slurp;
using paqa::testing::spit;

namespace {

// Writes a 4-record fixture plus a perfect mock script, returns a ready config.
RunConfig fixture_config(const TempDir& dir, const std::string& strategy = "basic_aq") {
  FixtureCorpus fixture = generate_fixture_corpus(11, 4);
  write_records_jsonl(dir.file("records.jsonl"), fixture.records);
  write_labels_jsonl(dir.file("labels.jsonl"), fixture.labels);
  spit(dir.file("script.json"), mock_script_to_json(make_perfect_script(fixture.labels)));

  RunConfig config;
  config.corpus_path = dir.file("records.jsonl");
  config.labels_path = dir.file("labels.jsonl");
  config.mock_script_path = dir.file("script.json");
  config.output_dir = dir.file("out");
  config.strategy = strategy;
  config.parallelism = 3;
  return config;
}

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (char c : text) n += c == '\n' ? 1 : 0;
  return n;
}

}  // namespace

// ---------------- Config files ----------------

TEST_CASE("config files support comments, quoting, and every key") {
  TempDir dir;
  spit(dir.file("run.conf"),
       "# comment\n"
       "\n"
       "corpus = data/records.jsonl\n"
       "labels = \"data/labels.jsonl\"\n"
       "questions = q.json\n"
       "strategy = cot_pq\n"
       "backend = mock\n"
       "mock_script = script.json\n"
       "output_dir = results\n"
       "model = test-model\n"
       "temperature = 0.5\n"
       "frequency_penalty = 0.25\n"
       "presence_penalty = 1\n"
       "max_tokens = 512\n"
       "context_window = 8192\n"
       "parallelism = 2\n"
       "truncation = false\n"
       "max_retries = 5\n"
       "retry_base_ms = 250\n"
       "seed = 99\n");
  RunConfig config = load_run_config(dir.file("run.conf"));
  CHECK(config.corpus_path == "data/records.jsonl");
  CHECK(config.labels_path == "data/labels.jsonl");
  CHECK(config.questions_path == "q.json");
  CHECK(config.strategy == "cot_pq");
  CHECK(config.backend == "mock");
  CHECK(config.mock_script_path == "script.json");
  CHECK(config.output_dir == "results");
  CHECK(config.completion.model_name == "test-model");
  CHECK(config.completion.temperature == doctest::Approx(0.5));
  CHECK(config.completion.frequency_penalty == doctest::Approx(0.25));
  CHECK(config.completion.presence_penalty == doctest::Approx(1.0));
  CHECK(config.completion.max_tokens == 512);
  CHECK(config.completion.context_window == 8192);
  CHECK(config.parallelism == 2);
  CHECK(!config.truncation);
  CHECK(config.max_retries == 5);
  CHECK(config.retry_base_ms == 250);
  CHECK(config.seed == 99);
}

TEST_CASE("config errors carry the file position") {
  TempDir dir;
  spit(dir.file("bad1.conf"), "corpus = a\nwat = 1\n");
  CHECK_THROWS_WITH_AS(load_run_config(dir.file("bad1.conf")),
                       doctest::Contains(":2: config: unknown key \"wat\""), ConfigError);

  spit(dir.file("bad2.conf"), "max_tokens = many\n");
  CHECK_THROWS_WITH_AS(load_run_config(dir.file("bad2.conf")),
                       doctest::Contains("bad integer for max_tokens"), ConfigError);

  spit(dir.file("bad3.conf"), "temperature = warm\n");
  CHECK_THROWS_WITH_AS(load_run_config(dir.file("bad3.conf")),
                       doctest::Contains("bad number for temperature"), ConfigError);

  spit(dir.file("bad4.conf"), "truncation = maybe\n");
  CHECK_THROWS_WITH_AS(load_run_config(dir.file("bad4.conf")),
                       doctest::Contains("bad boolean for truncation"), ConfigError);

  spit(dir.file("bad5.conf"), "just words\n");
  CHECK_THROWS_WITH_AS(load_run_config(dir.file("bad5.conf")),
                       doctest::Contains(":1: expected key = value"), ConfigError);

  CHECK_THROWS_AS(load_run_config(dir.file("missing.conf")), ConfigError);
}

TEST_CASE("apply_config_entry matches the file parser") {
  RunConfig config;
  apply_config_entry(config, "strategy", "ar_pq");
  apply_config_entry(config, "seed", "12345");
  apply_config_entry(config, "parallelism", "8");
  CHECK(config.strategy == "ar_pq");
  CHECK(config.seed == 12345);
  CHECK(config.parallelism == 8);
  CHECK_THROWS_AS(apply_config_entry(config, "unknown", "x"), ConfigError);
}

// ---------------- Canonical form + hashing ----------------

TEST_CASE("fnv1a64 matches the reference vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
  CHECK(fnv1a64_hex("") == "cbf29ce484222325");
  CHECK(fnv1a64_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("canonical config lines are sorted and complete") {
  RunConfig config;
  config.corpus_path = "r.jsonl";
  std::string lines = canonical_config_lines(config);
  CHECK(count_lines(lines) == 18);

  std::istringstream in(lines);
  std::string line;
  std::string prev;
  std::vector<std::string> keys;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    REQUIRE(eq != std::string::npos);
    std::string key = line.substr(0, eq);
    CHECK(prev < key);  // strictly sorted
    prev = key;
    keys.push_back(key);
  }
  for (const char* expected :
       {"backend", "context_window", "corpus", "frequency_penalty", "labels", "max_retries",
        "max_tokens", "mock_script", "model", "output_dir", "parallelism", "presence_penalty",
        "questions", "retry_base_ms", "seed", "strategy", "temperature", "truncation"}) {
    CAPTURE(expected);
    CHECK(std::find(keys.begin(), keys.end(), expected) != keys.end());
  }

  CHECK(config_hash(config) == fnv1a64_hex(lines));
  CHECK(config_hash(config) == config_hash(config));  // stable

  RunConfig other = config;
  other.seed = 1;
  CHECK(config_hash(other) != config_hash(config));  // sensitive
}

TEST_CASE("validate_run_config rejects contradictions") {
  RunConfig config;
  config.corpus_path = "r.jsonl";
  config.mock_script_path = "s.json";
  CHECK_NOTHROW(validate_run_config(config));

  RunConfig bad = config;
  bad.strategy = "super_pq";
  CHECK_THROWS_WITH_AS(validate_run_config(bad), doctest::Contains("unknown strategy"),
                       ConfigError);

  bad = config;
  bad.mock_script_path.clear();
  CHECK_THROWS_WITH_AS(validate_run_config(bad), doctest::Contains("requires mock_script"),
                       ConfigError);

  bad = config;
  bad.backend = "carrier-pigeon";
  CHECK_THROWS_AS(validate_run_config(bad), ConfigError);

  bad = config;
  bad.backend = "http";
  unsetenv("LLM_BASE_URL");
  unsetenv("LLM_API_KEY");
  CHECK_THROWS_AS(validate_run_config(bad), ConfigError);

  bad = config;
  bad.corpus_path.clear();
  CHECK_THROWS_AS(validate_run_config(bad), ConfigError);

  bad = config;
  bad.parallelism = 0;
  CHECK_THROWS_AS(validate_run_config(bad), ConfigError);

  bad = config;
  bad.max_retries = -1;
  CHECK_THROWS_AS(validate_run_config(bad), ConfigError);

  bad = config;
  bad.completion.max_tokens = 0;
  CHECK_THROWS_AS(validate_run_config(bad), ConfigError);
}

// ---------------- render_for_run ----------------

TEST_CASE("render_for_run truncates oversized records to fit the budget") {
  RunConfig config;
  auto questions = default_question_set();
  std::string text;
  for (int i = 0; i < 3000; ++i) text += "tok" + std::to_string(i) + " ";
  PatientRecord record = PatientRecord::make("r1", text);

  config.completion.context_window = 2000;
  config.completion.max_tokens = 500;
  bool truncated = false;
  RenderedPrompt prompt =
      render_for_run(config, StrategyKind::kBasicPq, {questions[0]}, record, &truncated);
  CHECK(truncated);
  CHECK(token_count(prompt.text) + static_cast<std::size_t>(config.completion.max_tokens) <=
        static_cast<std::size_t>(config.completion.context_window));
  CHECK(prompt.text.find("tok0 tok1") != std::string::npos);  // prefix survives

  // With truncation disabled the full record goes through untouched.
  config.truncation = false;
  truncated = true;
  RenderedPrompt full =
      render_for_run(config, StrategyKind::kBasicPq, {questions[0]}, record, &truncated);
  CHECK(!truncated);
  CHECK(full.text.find("tok2999") != std::string::npos);

  // Small records are not flagged.
  config.truncation = true;
  PatientRecord small = PatientRecord::make("r2", "brief note");
  truncated = true;
  RenderedPrompt unchanged =
      render_for_run(config, StrategyKind::kBasicPq, {questions[0]}, small, &truncated);
  CHECK(!truncated);
  CHECK(unchanged.text.find("brief note") != std::string::npos);
}

// ---------------- run_batch ----------------

TEST_CASE("run_batch executes an AQ strategy over the corpus") {
  TempDir dir;
  RunConfig config = fixture_config(dir);
  RunResult result = run_batch(config);

  CHECK(!result.partial);
  REQUIRE(result.strategies.size() == 1);
  const StrategyRunResult& s = result.strategies[0];
  CHECK(s.strategy == StrategyKind::kBasicAq);
  CHECK(s.executed == 4);
  CHECK(s.skipped == 0);
  CHECK(s.failed == 0);

  auto outcomes = load_outcomes_file(s.outcomes_path);
  REQUIRE(outcomes.size() == 4);
  for (const ParsedOutcome& outcome : outcomes) {
    CHECK(outcome.ok());
    CHECK(outcome.answers.size() == 5);
    CHECK(outcome.strategy == StrategyKind::kBasicAq);
  }

  // Evaluation over the run's own labels comes out perfect.
  EvalReport report = evaluate_outcomes_file(s.outcomes_path, config);
  REQUIRE(report.mean_f1.has_value());
  CHECK(*report.mean_f1 == doctest::Approx(1.0));
  for (const QuestionEval& qe : report.questions) CHECK(qe.support == 4);
}

TEST_CASE("run_batch fans a PQ strategy out to one prompt per question") {
  TempDir dir;
  RunConfig config = fixture_config(dir, "cot_pq");
  RunResult result = run_batch(config);
  REQUIRE(result.strategies.size() == 1);
  CHECK(result.strategies[0].executed == 20);  // 4 records x 5 questions

  auto outcomes = load_outcomes_file(result.strategies[0].outcomes_path);
  REQUIRE(outcomes.size() == 20);
  for (const ParsedOutcome& outcome : outcomes) {
    CHECK(outcome.question_ids.size() == 1);
    CHECK(outcome.ok());
  }
}

TEST_CASE("run manifest records config hash, template hashes, and telemetry") {
  TempDir dir;
  RunConfig config = fixture_config(dir);
  RunResult result = run_batch(config);

  json manifest = json::parse(slurp(result.manifest_path));
  CHECK(manifest["config_hash"] == config_hash(config));
  CHECK(manifest["backend_id"] == "mock");
  CHECK(manifest["n_records"] == 4);
  CHECK(manifest["config"]["strategy"] == "basic_aq");
  CHECK(manifest["config"]["parallelism"] == "3");

  for (StrategyKind strategy : kAllStrategies) {
    std::string id(strategy_id(strategy));
    CHECK(manifest["template_hashes"][id] == fnv1a64_hex(golden_template(strategy)));
  }
  CHECK(manifest["template_hashes"]["response_format"] ==
        fnv1a64_hex(response_format_template()));

  REQUIRE(manifest["strategies"].size() == 1);
  const json& entry = manifest["strategies"][0];
  CHECK(entry["strategy"] == "basic_aq");
  CHECK(entry["outcomes_file"] == "outcomes_basic_aq.jsonl");
  CHECK(entry["executed"] == 4);
  CHECK(entry["failed"] == 0);
  REQUIRE(entry["prompts"].size() == 4);
  std::vector<PatientRecord> records = ingest_corpus(config.corpus_path);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(entry["prompts"][i]["record_id"] == records[i].record_id);
    CHECK(entry["prompts"][i]["question_ids"].size() == 5);
    CHECK(entry["prompts"][i]["error"] == "");
    CHECK(entry["prompts"][i]["prompt_tokens"].get<std::size_t>() > 0);
  }
  // No wall-clock contamination anywhere.
  std::string raw = slurp(result.manifest_path);
  CHECK(raw.find("time") == std::string::npos);
  CHECK(raw.find("date") == std::string::npos);
}

TEST_CASE("run_batch resumes instead of redoing finished prompts") {
  TempDir dir;
  RunConfig config = fixture_config(dir);
  RunResult first = run_batch(config);
  CHECK(first.strategies[0].executed == 4);

  // Re-running the identical config does nothing new.
  RunResult again = run_batch(config);
  CHECK(again.strategies[0].executed == 0);
  CHECK(again.strategies[0].skipped == 4);
  CHECK(load_outcomes_file(again.strategies[0].outcomes_path).size() == 4);

  // Drop the last two lines; only those two run on resume.
  std::string text = slurp(first.strategies[0].outcomes_path);
  std::size_t keep = 0;
  std::size_t newlines = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\n' && ++newlines == 2) {
      keep = i + 1;
      break;
    }
  }
  spit(first.strategies[0].outcomes_path, text.substr(0, keep));

  RunResult resumed = run_batch(config);
  CHECK(resumed.strategies[0].executed == 2);
  CHECK(resumed.strategies[0].skipped == 2);
  auto outcomes = load_outcomes_file(resumed.strategies[0].outcomes_path);
  REQUIRE(outcomes.size() == 4);
  std::set<std::string> seen;
  for (const ParsedOutcome& outcome : outcomes) seen.insert(outcome.record_id);
  CHECK(seen.size() == 4);
}

TEST_CASE("identical runs produce identical bytes") {
  TempDir dir;
  RunConfig config = fixture_config(dir, "implicit_rag_pq");
  config.parallelism = 4;

  RunResult first = run_batch(config);
  std::string outcomes_a = slurp(first.strategies[0].outcomes_path);
  std::string manifest_a = slurp(first.manifest_path);

  std::filesystem::remove_all(config.output_dir);
  RunResult second = run_batch(config);
  CHECK(slurp(second.strategies[0].outcomes_path) == outcomes_a);
  CHECK(slurp(second.manifest_path) == manifest_a);
}

TEST_CASE("transport failures mark the run partial and resume retries them") {
  TempDir dir;
  RunConfig config = fixture_config(dir);
  config.max_retries = 1;
  config.retry_base_ms = 0;

  // Prepend an injection for one record; perfect rules handle the rest.
  std::vector<PatientRecord> records = ingest_corpus(config.corpus_path);
  MockScript script = MockScript::from_file(config.mock_script_path);
  MockRule down;
  down.record_id = records[1].record_id;
  down.inject = MockRule::Inject::kTransportError;
  script.rules.insert(script.rules.begin(), down);
  spit(dir.file("flaky.json"), mock_script_to_json(script));
  config.mock_script_path = dir.file("flaky.json");

  RunResult result = run_batch(config);
  CHECK(result.partial);
  const StrategyRunResult& s = result.strategies[0];
  CHECK(s.executed == 4);
  CHECK(s.failed == 1);
  CHECK(load_outcomes_file(s.outcomes_path).size() == 3);  // no line for the failure

  json manifest = json::parse(slurp(result.manifest_path));
  const json& prompts = manifest["strategies"][0]["prompts"];
  REQUIRE(prompts.size() == 4);
  CHECK(prompts[1]["record_id"] == records[1].record_id);
  CHECK(prompts[1]["error"].get<std::string>().find("transport failure") != std::string::npos);
  CHECK(prompts[0]["error"] == "");

  // Point back at the healthy script; resume picks up only the failed prompt.
  config.mock_script_path = dir.file("script.json");
  RunResult resumed = run_batch(config);
  CHECK(!resumed.partial);
  CHECK(resumed.strategies[0].executed == 1);
  CHECK(resumed.strategies[0].skipped == 3);
  CHECK(load_outcomes_file(resumed.strategies[0].outcomes_path).size() == 4);
}

TEST_CASE("strategy=all covers all seven strategies in one run") {
  TempDir dir;
  RunConfig config = fixture_config(dir, "all");
  config.parallelism = 6;
  RunResult result = run_batch(config);
  REQUIRE(result.strategies.size() == 7);
  std::size_t aq = 0, pq = 0;
  for (const StrategyRunResult& s : result.strategies) {
    CHECK(std::filesystem::exists(s.outcomes_path));
    if (binds_all_questions(s.strategy)) {
      CHECK(s.executed == 4);
      ++aq;
    } else {
      CHECK(s.executed == 20);
      ++pq;
    }
  }
  CHECK(aq == 2);
  CHECK(pq == 5);
}

// ---------------- Outcome file loading ----------------

TEST_CASE("outcome files report malformed lines by number") {
  TempDir dir;
  spit(dir.file("bad.jsonl"),
       R"({"record_id":"r1","strategy":"basic_pq","question_ids":["Q1"],"status":"OK","answers":{"Q1":"Y"}})"
       "\nnot json\n");
  CHECK_THROWS_WITH_AS(load_outcomes_file(dir.file("bad.jsonl")), doctest::Contains(":2:"),
                       CorpusError);
  CHECK_THROWS_AS(load_outcomes_file(dir.file("absent.jsonl")), ConfigError);
}

TEST_CASE("evaluating an empty outcomes file is a config error") {
  TempDir dir;
  RunConfig config = fixture_config(dir);
  spit(dir.file("empty.jsonl"), "");
  CHECK_THROWS_WITH_AS(evaluate_outcomes_file(dir.file("empty.jsonl"), config),
                       doctest::Contains("no outcomes"), ConfigError);
}

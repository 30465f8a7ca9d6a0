// paqa: guideline question answering over patient records, driven by
// prompting strategies against a mock or OpenAI-compatible backend.
#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "paqa/corpus.hpp"
#include "paqa/errors.hpp"
#include "paqa/eval.hpp"
#include "paqa/gateway.hpp"
#include "paqa/parser.hpp"
#include "paqa/prompt.hpp"
#include "paqa/run.hpp"

namespace {

using namespace paqa;

// Shared --config/--set handling plus convenience flags that map onto the
// same config keys.
struct ConfigCli {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value
  std::string corpus, labels, questions, strategy, backend, mock_script, output_dir;

  void attach(CLI::App* cmd, bool with_conveniences = true) {
    cmd->add_option("--config", config_path, "config file (key = value lines)");
    cmd->add_option("--set", overrides, "override a config key, e.g. --set seed=7")
        ->type_name("KEY=VALUE");
    if (!with_conveniences) return;
    cmd->add_option("--corpus", corpus, "records.jsonl path");
    cmd->add_option("--labels", labels, "labels.jsonl path");
    cmd->add_option("--questions", questions, "questions JSON path");
    cmd->add_option("--strategy", strategy, "strategy id or \"all\"");
    cmd->add_option("--backend", backend, "mock | http");
    cmd->add_option("--mock-script", mock_script, "mock script JSON path");
    cmd->add_option("--output-dir", output_dir, "run output directory");
  }

  RunConfig build() const {
    RunConfig config;
    if (!config_path.empty()) config = load_run_config(config_path);
    auto maybe = [&config](const char* key, const std::string& value) {
      if (!value.empty()) apply_config_entry(config, key, value);
    };
    maybe("corpus", corpus);
    maybe("labels", labels);
    maybe("questions", questions);
    maybe("strategy", strategy);
    maybe("backend", backend);
    maybe("mock_script", mock_script);
    maybe("output_dir", output_dir);
    for (const std::string& entry : overrides) {
      std::size_t eq = entry.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("--set expects key=value, got \"" + entry + "\"");
      }
      apply_config_entry(config, entry.substr(0, eq), entry.substr(eq + 1));
    }
    return config;
  }
};

std::vector<GuidelineQuestion> questions_for(const RunConfig& config) {
  return config.questions_path.empty() ? default_question_set()
                                       : load_questions(config.questions_path);
}

const PatientRecord& find_record(const std::vector<PatientRecord>& records,
                                 const std::string& record_id) {
  for (const PatientRecord& record : records) {
    if (record.record_id == record_id) return record;
  }
  throw ConfigError("unknown record \"" + record_id + "\"");
}

int cmd_render(const ConfigCli& cli, const std::string& record_id, const std::string& strategy_str,
               const std::string& question_id, const std::string& out_path) {
  RunConfig config = cli.build();
  auto strategy = strategy_from_id(strategy_str);
  if (!strategy) throw ConfigError("unknown strategy \"" + strategy_str + "\"");
  if (config.corpus_path.empty()) throw ConfigError("render needs a corpus (--corpus or config)");

  std::vector<PatientRecord> records = ingest_corpus(config.corpus_path);
  const PatientRecord& record = find_record(records, record_id);
  std::vector<GuidelineQuestion> questions = questions_for(config);

  std::vector<GuidelineQuestion> bound;
  if (binds_all_questions(*strategy)) {
    if (!question_id.empty()) {
      throw ConfigError("strategy " + strategy_str + " binds all questions; drop --question");
    }
    bound = questions;
  } else {
    std::string wanted = question_id.empty() ? questions.front().question_id : question_id;
    auto it = std::find_if(questions.begin(), questions.end(),
                           [&](const GuidelineQuestion& q) { return q.question_id == wanted; });
    if (it == questions.end()) throw ConfigError("unknown question \"" + wanted + "\"");
    bound = {*it};
  }

  RenderedPrompt prompt = render_for_run(config, *strategy, bound, record);
  if (out_path.empty()) {
    std::cout << prompt.text;
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + out_path);
    out << prompt.text;
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

int cmd_run(const ConfigCli& cli) {
  RunConfig config = cli.build();
  RunResult result = run_batch(config);
  for (const StrategyRunResult& s : result.strategies) {
    std::cout << strategy_id(s.strategy) << ": executed " << s.executed << ", skipped "
              << s.skipped << ", failed " << s.failed << " -> " << s.outcomes_path.string()
              << "\n";
  }
  std::cout << "manifest: " << result.manifest_path.string() << "\n";
  if (result.partial) {
    std::cerr << "warning: some prompts failed; rerun to retry them\n";
    return 2;
  }
  return 0;
}

std::filesystem::path default_outcomes_path(const RunConfig& config, const char* verb) {
  if (config.strategy == "all") {
    throw ConfigError(std::string(verb) + " needs --outcomes when strategy is \"all\"");
  }
  return config.output_dir / ("outcomes_" + config.strategy + ".jsonl");
}

int cmd_evaluate(const ConfigCli& cli, std::string outcomes, std::string json_path,
                 std::string csv_path) {
  RunConfig config = cli.build();
  std::filesystem::path outcomes_path = outcomes.empty()
                                            ? default_outcomes_path(config, "evaluate")
                                            : std::filesystem::path(outcomes);
  EvalReport report = evaluate_outcomes_file(outcomes_path, config);

  std::filesystem::create_directories(config.output_dir);
  if (json_path.empty()) json_path = (config.output_dir / "report.json").string();
  if (csv_path.empty()) csv_path = (config.output_dir / "report.csv").string();
  std::ofstream json_out(json_path, std::ios::binary | std::ios::trunc);
  if (!json_out) throw ConfigError("cannot write " + json_path);
  json_out << report_to_json(report);
  std::ofstream csv_out(csv_path, std::ios::binary | std::ios::trunc);
  if (!csv_out) throw ConfigError("cannot write " + csv_path);
  csv_out << render_report_csv(report);

  std::cout << render_report_table({report});
  std::cout << "report: " << json_path << ", " << csv_path << "\n";
  return 0;
}

int cmd_stats(const ConfigCli& cli) {
  RunConfig config = cli.build();
  if (config.corpus_path.empty()) throw ConfigError("stats needs a corpus (--corpus or config)");
  CorpusStats stats = corpus_stats(ingest_corpus(config.corpus_path));
  std::cout << "records: " << stats.n_records << "\n"
            << "mean_tokens: " << stats.mean_tokens << "\n"
            << "std_tokens: " << stats.std_tokens << "\n"
            << "max_tokens: " << stats.max_tokens << "\n"
            << "p25_tokens: " << stats.p25 << "\n"
            << "p50_tokens: " << stats.p50 << "\n"
            << "p75_tokens: " << stats.p75 << "\n";
  return 0;
}

int cmd_audit(const ConfigCli& cli, std::string outcomes, const std::string& judgments,
              std::string out_path) {
  RunConfig config = cli.build();
  std::filesystem::path outcomes_path = outcomes.empty()
                                            ? default_outcomes_path(config, "audit")
                                            : std::filesystem::path(outcomes);
  std::vector<ParsedOutcome> parsed = load_outcomes_file(outcomes_path);

  // Judgments only make sense against OK Implicit RAG outcomes.
  std::set<std::pair<std::string, std::string>> auditable;
  for (const ParsedOutcome& outcome : parsed) {
    if (outcome.strategy != StrategyKind::kImplicitRagPq) {
      throw ConfigError("audit requires implicit_rag_pq outcomes, found " +
                        std::string(strategy_id(outcome.strategy)));
    }
    if (!outcome.ok()) continue;
    for (const auto& [qid, answer] : outcome.answers) auditable.insert({outcome.record_id, qid});
  }

  std::vector<AuditRow> rows = load_audit_rows(judgments);
  for (const AuditRow& row : rows) {
    if (!auditable.count({row.record_id, row.question_id})) {
      throw ConfigError("judgment references unknown record/question: " + row.record_id + "/" +
                        row.question_id);
    }
  }

  std::string csv = render_audit_csv(audit_summary(rows));
  std::filesystem::create_directories(config.output_dir);
  if (out_path.empty()) out_path = (config.output_dir / "audit_out.csv").string();
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + out_path);
  out << csv;
  std::cout << csv << "wrote " << out_path << "\n";
  return 0;
}

int cmd_fixture(std::uint64_t seed, std::size_t n, const std::string& out_dir,
                bool perfect_script) {
  FixtureCorpus fixture = generate_fixture_corpus(seed, n);
  std::filesystem::path dir = out_dir;
  std::filesystem::create_directories(dir);
  write_records_jsonl(dir / "records.jsonl", fixture.records);
  write_labels_jsonl(dir / "labels.jsonl", fixture.labels);
  std::cout << "wrote " << (dir / "records.jsonl").string() << " (" << fixture.records.size()
            << " records)\n"
            << "wrote " << (dir / "labels.jsonl").string() << " (" << fixture.labels.size()
            << " labels)\n";
  if (perfect_script) {
    std::ofstream out(dir / "mock_script.json", std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + (dir / "mock_script.json").string());
    out << mock_script_to_json(make_perfect_script(fixture.labels)) << "\n";
    std::cout << "wrote " << (dir / "mock_script.json").string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"guideline-based QA over patient records with prompting strategies"};
  app.require_subcommand(1);
  int rc = 0;

  ConfigCli render_cli;
  std::string render_record, render_strategy, render_question, render_out;
  CLI::App* render_cmd = app.add_subcommand("render", "print the prompt a run would send");
  render_cli.attach(render_cmd);
  render_cmd->add_option("strategy_id", render_strategy, "strategy id")->required();
  render_cmd->add_option("record_id", render_record, "record id")->required();
  render_cmd->add_option("--question", render_question, "question id (per-question strategies)");
  render_cmd->add_option("-o,--out", render_out, "write to file instead of stdout");
  render_cmd->callback([&] {
    rc = cmd_render(render_cli, render_record, render_strategy, render_question, render_out);
  });

  ConfigCli run_cli;
  CLI::App* run_cmd = app.add_subcommand("run", "execute strategies over the corpus");
  run_cli.attach(run_cmd);
  run_cmd->callback([&] { rc = cmd_run(run_cli); });

  ConfigCli eval_cli;
  std::string eval_outcomes, eval_json, eval_csv;
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "score outcomes against gold labels");
  eval_cli.attach(eval_cmd);
  eval_cmd->add_option("--outcomes", eval_outcomes, "outcomes.jsonl path");
  eval_cmd->add_option("--json", eval_json, "report.json path");
  eval_cmd->add_option("--csv", eval_csv, "report.csv path");
  eval_cmd->callback([&] { rc = cmd_evaluate(eval_cli, eval_outcomes, eval_json, eval_csv); });

  ConfigCli stats_cli;
  CLI::App* stats_cmd = app.add_subcommand("stats", "token statistics for a corpus");
  stats_cli.attach(stats_cmd);
  stats_cmd->callback([&] { rc = cmd_stats(stats_cli); });

  ConfigCli audit_cli;
  std::string audit_outcomes, audit_judgments, audit_out;
  CLI::App* audit_cmd =
      app.add_subcommand("audit", "summarize human section-relevance judgments");
  audit_cli.attach(audit_cmd);
  audit_cmd->add_option("--outcomes", audit_outcomes, "implicit RAG outcomes.jsonl path");
  audit_cmd->add_option("--judgments", audit_judgments, "audit_in.csv path")->required();
  audit_cmd->add_option("-o,--out", audit_out, "audit_out.csv path");
  audit_cmd->callback(
      [&] { rc = cmd_audit(audit_cli, audit_outcomes, audit_judgments, audit_out); });

  std::uint64_t fixture_seed = 42;
  std::size_t fixture_n = 20;
  std::string fixture_out = "fixture";
  bool fixture_perfect = false;
  CLI::App* fixture_cmd =
      app.add_subcommand("fixture", "generate a synthetic corpus with gold labels");
  fixture_cmd->add_option("--seed", fixture_seed, "rng seed");
  fixture_cmd->add_option("--records", fixture_n, "number of records");
  fixture_cmd->add_option("--out", fixture_out, "output directory");
  fixture_cmd->add_flag("--perfect-script", fixture_perfect,
                        "also write a mock script answering with the gold labels");
  fixture_cmd->callback(
      [&] { rc = cmd_fixture(fixture_seed, fixture_n, fixture_out, fixture_perfect); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const paqa::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}

#include "paqa/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "paqa/errors.hpp"

namespace paqa {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::size_t class_index(AnswerChoice choice) {
  switch (choice) {
    case AnswerChoice::kYes: return 0;
    case AnswerChoice::kNo: return 1;
    case AnswerChoice::kNotApplicable: return 2;
  }
  return 0;  // unreachable
}

}  // namespace

std::size_t ConfusionMatrix::total() const {
  std::size_t sum = 0;
  for (const auto& row : counts) {
    for (std::size_t c : row) sum += c;
  }
  return sum;
}

std::size_t& ConfusionMatrix::at(AnswerChoice gold, AnswerChoice pred) {
  return counts[class_index(gold)][class_index(pred)];
}

std::size_t ConfusionMatrix::at(AnswerChoice gold, AnswerChoice pred) const {
  return counts[class_index(gold)][class_index(pred)];
}

double weighted_f1(const std::vector<AnswerChoice>& gold, const std::vector<AnswerChoice>& pred) {
  if (gold.empty()) throw std::invalid_argument("weighted_f1: empty inputs");
  if (gold.size() != pred.size()) throw std::invalid_argument("weighted_f1: length mismatch");

  const double n = static_cast<double>(gold.size());
  double sum = 0.0;
  for (AnswerChoice c : ConfusionMatrix::kClasses) {
    std::size_t gold_c = 0, pred_c = 0, tp = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (gold[i] == c) ++gold_c;
      if (pred[i] == c) ++pred_c;
      if (gold[i] == c && pred[i] == c) ++tp;
    }
    if (gold_c == 0) continue;  // zero-weight class
    const double precision = pred_c == 0 ? 0.0 : static_cast<double>(tp) / pred_c;
    const double recall = static_cast<double>(tp) / gold_c;
    const double f1 =
        precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
    sum += (static_cast<double>(gold_c) / n) * f1;
  }
  return sum;
}

EvalReport evaluate(const std::vector<ParsedOutcome>& outcomes,
                    const std::vector<GoldLabel>& gold,
                    const std::vector<GuidelineQuestion>& questions,
                    std::size_t full_corpus_size) {
  if (outcomes.empty()) throw ConfigError("no outcomes");

  EvalReport report;
  report.strategy = outcomes.front().strategy;
  report.full_corpus_size = full_corpus_size;
  for (const ParsedOutcome& outcome : outcomes) {
    if (outcome.strategy != report.strategy) {
      throw ConfigError("outcomes mix strategies " +
                        std::string(strategy_id(report.strategy)) + " and " +
                        std::string(strategy_id(outcome.strategy)));
    }
  }

  std::map<std::pair<std::string, std::string>, AnswerChoice> gold_map;
  for (const GoldLabel& label : gold) {
    gold_map[{label.record_id, label.question_id}] = label.answer;
  }

  for (const GuidelineQuestion& q : questions) {
    QuestionEval qe;
    qe.question_id = q.question_id;
    std::vector<AnswerChoice> gold_v;
    std::vector<AnswerChoice> pred_v;
    for (const ParsedOutcome& outcome : outcomes) {
      const bool bound = std::find(outcome.question_ids.begin(), outcome.question_ids.end(),
                                   q.question_id) != outcome.question_ids.end();
      if (!outcome.ok()) {
        if (bound) ++qe.parse_failures;
        continue;
      }
      auto it = outcome.answers.find(q.question_id);
      if (it == outcome.answers.end()) continue;
      auto git = gold_map.find({outcome.record_id, q.question_id});
      if (git == gold_map.end()) {
        throw CorpusError("missing gold label for record \"" + outcome.record_id +
                          "\" question " + q.question_id);
      }
      gold_v.push_back(git->second);
      pred_v.push_back(it->second);
      ++qe.confusion.at(git->second, it->second);
    }
    qe.support = gold_v.size();
    qe.f1 = gold_v.empty() ? 0.0 : weighted_f1(gold_v, pred_v);
    report.questions.push_back(std::move(qe));
  }

  std::vector<const QuestionEval*> reduced;
  for (const QuestionEval& qe : report.questions) {
    if (qe.support != full_corpus_size) reduced.push_back(&qe);
  }
  if (reduced.empty() && !report.questions.empty()) {
    double sum = 0.0;
    for (const QuestionEval& qe : report.questions) sum += qe.f1;
    report.mean_f1 = sum / static_cast<double>(report.questions.size());
  } else {
    std::string reason = "mean omitted: reduced support (";
    for (std::size_t i = 0; i < reduced.size(); ++i) {
      if (i > 0) reason += ", ";
      reason += reduced[i]->question_id + " " + std::to_string(reduced[i]->support) + "/" +
                std::to_string(full_corpus_size);
    }
    reason += ")";
    report.mean_omitted_reason = std::move(reason);
  }
  return report;
}

// ---------------- Display rounding ----------------

double round_half_up_2dp(double x) { return std::floor(x * 100.0 + 0.5) / 100.0; }

std::string format_f1(double x) {
  auto cents = static_cast<long long>(std::floor(x * 100.0 + 0.5));
  std::string out = std::to_string(cents / 100) + ".";
  long long rem = cents % 100;
  if (rem < 10) out += "0";
  return out + std::to_string(rem);
}

int percent_half_up(std::size_t numerator, std::size_t denominator) {
  if (denominator == 0) throw std::invalid_argument("percent_half_up: zero denominator");
  return static_cast<int>((200 * numerator + denominator) / (2 * denominator));
}

// ---------------- Report output ----------------

namespace {

ordered_json confusion_to_json(const ConfusionMatrix& confusion) {
  ordered_json out;
  out["classes"] = {"Y", "N", "NA"};
  ordered_json rows = ordered_json::array();
  for (const auto& row : confusion.counts) {
    rows.push_back(std::vector<std::size_t>(row.begin(), row.end()));
  }
  out["counts"] = std::move(rows);
  return out;
}

// Shortest round-trip decimal form, so reports carry raw doubles without
// printf precision artifacts.
std::string double_repr(double x) { return json(x).dump(); }

}  // namespace

std::string report_to_json(const EvalReport& report) {
  ordered_json out;
  out["strategy"] = std::string(strategy_id(report.strategy));
  out["full_corpus_size"] = report.full_corpus_size;
  ordered_json questions = ordered_json::array();
  for (const QuestionEval& qe : report.questions) {
    ordered_json q;
    q["question_id"] = qe.question_id;
    q["weighted_f1"] = qe.f1;
    q["weighted_f1_display"] = format_f1(qe.f1);
    q["support"] = qe.support;
    q["parse_failures"] = qe.parse_failures;
    q["confusion"] = confusion_to_json(qe.confusion);
    questions.push_back(std::move(q));
  }
  out["questions"] = std::move(questions);
  if (report.mean_f1) {
    out["mean_weighted_f1"] = *report.mean_f1;
    out["mean_weighted_f1_display"] = format_f1(*report.mean_f1);
  }
  if (report.mean_omitted_reason) out["mean_omitted_reason"] = *report.mean_omitted_reason;
  return out.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw Error("report is not a JSON object");
  EvalReport report;
  try {
    auto strategy = strategy_from_id(doc.at("strategy").get<std::string>());
    if (!strategy) throw Error("unknown strategy in report");
    report.strategy = *strategy;
    report.full_corpus_size = doc.at("full_corpus_size").get<std::size_t>();
    for (const json& q : doc.at("questions")) {
      QuestionEval qe;
      qe.question_id = q.at("question_id").get<std::string>();
      qe.f1 = q.at("weighted_f1").get<double>();
      qe.support = q.at("support").get<std::size_t>();
      qe.parse_failures = q.at("parse_failures").get<std::size_t>();
      const json& counts = q.at("confusion").at("counts");
      for (std::size_t g = 0; g < 3; ++g) {
        for (std::size_t p = 0; p < 3; ++p) {
          qe.confusion.counts[g][p] = counts.at(g).at(p).get<std::size_t>();
        }
      }
      report.questions.push_back(std::move(qe));
    }
    if (doc.contains("mean_weighted_f1")) {
      report.mean_f1 = doc["mean_weighted_f1"].get<double>();
    }
    if (doc.contains("mean_omitted_reason")) {
      report.mean_omitted_reason = doc["mean_omitted_reason"].get<std::string>();
    }
  } catch (const json::exception& e) {
    throw Error(std::string("malformed report: ") + e.what());
  }
  return report;
}

std::string render_report_csv(const EvalReport& report) {
  std::string out = "strategy,question_id,weighted_f1,support\n";
  for (const QuestionEval& qe : report.questions) {
    out += std::string(strategy_id(report.strategy)) + "," + qe.question_id + "," +
           double_repr(qe.f1) + "," + std::to_string(qe.support) + "\n";
  }
  return out;
}

std::string render_report_table(const std::vector<EvalReport>& reports) {
  std::vector<std::string> headers = {"Prompting Technique"};
  if (!reports.empty()) {
    for (const QuestionEval& qe : reports.front().questions) headers.push_back(qe.question_id);
  }
  headers.push_back("Mean");

  std::size_t name_width = headers.front().size();
  for (const EvalReport& report : reports) {
    name_width = std::max(name_width, strategy_display_name(report.strategy).size());
  }

  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(name_width + 2)) << headers.front();
  for (std::size_t i = 1; i < headers.size(); ++i) {
    out << std::setw(6) << headers[i];
  }
  out << "\n";
  for (const EvalReport& report : reports) {
    out << std::setw(static_cast<int>(name_width + 2))
        << std::string(strategy_display_name(report.strategy));
    for (const QuestionEval& qe : report.questions) {
      out << std::setw(6) << format_f1(qe.f1);
    }
    if (report.mean_f1) {
      out << std::setw(6) << format_f1(*report.mean_f1);
    } else {
      out << std::setw(6) << "-";
      if (report.mean_omitted_reason) out << "(" << *report.mean_omitted_reason << ")";
    }
    out << "\n";
  }
  return out.str();
}

// ---------------- Qualitative audit ----------------

AuditSummary audit_summary(const std::vector<AuditRow>& rows) {
  AuditSummary summary;
  for (const AuditRow& row : rows) {
    auto& [correct, incorrect] = summary.buckets[row.question_id];
    AuditBucket& bucket = row.model_answer_correct ? correct : incorrect;
    ++bucket.size;
    if (row.any_section_relevant) ++bucket.relevant;
  }
  return summary;
}

namespace {

constexpr std::string_view kAuditHeader =
    "record_id,question_id,model_answer_correct,any_section_relevant";

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  fields.push_back(field);
  return fields;
}

bool parse_flag(const std::string& text, std::size_t line_no) {
  if (text == "1") return true;
  if (text == "0") return false;
  throw ConfigError("audit csv line " + std::to_string(line_no) + ": expected 0 or 1, got \"" +
                    text + "\"");
}

}  // namespace

std::vector<AuditRow> parse_audit_rows(const std::string& csv_text) {
  std::istringstream in(csv_text);
  std::string line;
  std::vector<AuditRow> rows;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!saw_header) {
      if (line != kAuditHeader) {
        throw ConfigError("audit csv: expected header \"" + std::string(kAuditHeader) + "\"");
      }
      saw_header = true;
      continue;
    }
    auto fields = split_csv_line(line);
    if (fields.size() != 4) {
      throw ConfigError("audit csv line " + std::to_string(line_no) + ": expected 4 fields, got " +
                        std::to_string(fields.size()));
    }
    AuditRow row;
    row.record_id = fields[0];
    row.question_id = fields[1];
    row.model_answer_correct = parse_flag(fields[2], line_no);
    row.any_section_relevant = parse_flag(fields[3], line_no);
    rows.push_back(std::move(row));
  }
  if (!saw_header) throw ConfigError("audit csv: empty file");
  return rows;
}

std::vector<AuditRow> load_audit_rows(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open audit csv: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_audit_rows(buf.str());
}

std::string render_audit_csv(const AuditSummary& summary) {
  std::string out = "question_id,bucket,n,right_section_pct,wrong_section_pct\n";
  auto emit = [&out](const std::string& qid, const char* name, const AuditBucket& bucket) {
    out += qid;
    out += ",";
    out += name;
    out += "," + std::to_string(bucket.size) + ",";
    if (bucket.size == 0) {
      out += "—,—";  // em dash marks an empty bucket
    } else {
      out += std::to_string(percent_half_up(bucket.relevant, bucket.size)) + "%," +
             std::to_string(percent_half_up(bucket.size - bucket.relevant, bucket.size)) + "%";
    }
    out += "\n";
  };
  for (const auto& [qid, buckets] : summary.buckets) {
    emit(qid, "correct", buckets.first);
    emit(qid, "incorrect", buckets.second);
  }
  return out;
}

}  // namespace paqa

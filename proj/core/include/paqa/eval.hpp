#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "paqa/corpus.hpp"
#include "paqa/parser.hpp"

namespace paqa {

// Gold × predicted counts over the fixed {Y, N, NA} class order.
struct ConfusionMatrix {
  static constexpr std::array<AnswerChoice, 3> kClasses = {
      AnswerChoice::kYes, AnswerChoice::kNo, AnswerChoice::kNotApplicable};

  std::array<std::array<std::size_t, 3>, 3> counts{};  // [gold][pred]

  std::size_t total() const;
  std::size_t& at(AnswerChoice gold, AnswerChoice pred);
  std::size_t at(AnswerChoice gold, AnswerChoice pred) const;
};

// Per-class precision/recall/F1 with the 0/0 -> 0 convention, weighted by
// gold class support. Throws std::invalid_argument on empty or mismatched
// inputs.
double weighted_f1(const std::vector<AnswerChoice>& gold, const std::vector<AnswerChoice>& pred);

struct QuestionEval {
  std::string question_id;
  double f1 = 0.0;
  std::size_t support = 0;         // OK outcomes answering this question
  std::size_t parse_failures = 0;  // failed outcomes that had bound this question
  ConfusionMatrix confusion;
};

struct EvalReport {
  StrategyKind strategy = StrategyKind::kBasicAq;
  std::size_t full_corpus_size = 0;
  std::vector<QuestionEval> questions;  // in bound-question order
  std::optional<double> mean_f1;        // present iff every support == full_corpus_size
  std::optional<std::string> mean_omitted_reason;
};

// Scores parsed outcomes against gold labels. PARSE_FAILURE outcomes reduce
// support instead of being scored; the mean is omitted (with a reason naming
// the reduced support) unless every question kept full support.
EvalReport evaluate(const std::vector<ParsedOutcome>& outcomes,
                    const std::vector<GoldLabel>& gold,
                    const std::vector<GuidelineQuestion>& questions,
                    std::size_t full_corpus_size);

// ---------------- Display rounding ----------------

// Half-up to 2 decimals: 0.125 -> 0.13, 0.572 -> 0.57.
double round_half_up_2dp(double x);
std::string format_f1(double x);  // "0.57", "1.00"

// Whole-percent half-up via integer arithmetic: (14, 15) -> 93.
int percent_half_up(std::size_t numerator, std::size_t denominator);

// ---------------- Report output ----------------

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);

// One row per question: strategy,question_id,weighted_f1,support.
std::string render_report_csv(const EvalReport& report);

// Text table shaped like the strategy × Q1..Q5 × mean results table; the
// mean column shows "-" plus the omission reason when support was reduced.
std::string render_report_table(const std::vector<EvalReport>& reports);

// ---------------- Qualitative audit ----------------

// One human judgment of an Implicit RAG outcome: was the model's answer
// correct, and was at least one extracted section relevant.
struct AuditRow {
  std::string record_id;
  std::string question_id;
  bool model_answer_correct = false;
  bool any_section_relevant = false;
};

struct AuditBucket {
  std::size_t size = 0;
  std::size_t relevant = 0;
};

struct AuditSummary {
  // question_id -> (correct-answer bucket, incorrect-answer bucket)
  std::map<std::string, std::pair<AuditBucket, AuditBucket>> buckets;
};

AuditSummary audit_summary(const std::vector<AuditRow>& rows);

// CSV with columns record_id,question_id,model_answer_correct,any_section_relevant
// and 0/1 values.
std::vector<AuditRow> load_audit_rows(const std::filesystem::path& path);
std::vector<AuditRow> parse_audit_rows(const std::string& csv_text);

// Per-question bucket percentages:
// question_id,bucket,n,right_section_pct,wrong_section_pct
// Empty buckets render both percentages as em dashes.
std::string render_audit_csv(const AuditSummary& summary);

}  // namespace paqa

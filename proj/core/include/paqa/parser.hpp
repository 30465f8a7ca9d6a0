#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "paqa/corpus.hpp"
#include "paqa/prompt.hpp"

namespace paqa {

enum class OutcomeStatus { kOk, kParseFailure };

std::string_view status_id(OutcomeStatus status);  // "OK" / "PARSE_FAILURE"
std::optional<OutcomeStatus> status_from_id(std::string_view id);

// One section extract from an Implicit RAG response.
struct ExtractedSection {
  std::string text;
  std::size_t word_count = 0;     // whitespace-token count
  bool within_length_spec = false;  // 50 <= word_count <= 200
};

struct GeneratedExample {
  std::string question;
  std::string answer;
};

// Compliance with the section-extraction instructions. Reported, never
// enforced: a non-compliant response can still carry valid answers.
struct SectionCompliance {
  bool count_is_three = false;
  bool has_duplicates = false;      // exact duplicates after whitespace normalization
  bool all_within_length = false;
};

struct SectionValidation {
  std::vector<ExtractedSection> sections;
  SectionCompliance compliance;
};

SectionValidation validate_sections(const std::vector<std::string>& sections);

// Substring check after whitespace normalization of both sides; the cheapest
// defensible "was this extract really in the record" signal.
bool section_appears_in(const std::string& section_text, const std::string& record_text);

// The typed result of parsing one completion. PARSE_FAILURE is data, not an
// error: failed outcomes flow into evaluation so reduced support is visible.
struct ParsedOutcome {
  std::string record_id;
  StrategyKind strategy = StrategyKind::kBasicAq;
  std::vector<std::string> question_ids;  // the questions this prompt bound, in order
  OutcomeStatus status = OutcomeStatus::kParseFailure;
  std::map<std::string, AnswerChoice> answers;     // populated iff OK
  std::vector<ExtractedSection> sections;          // Implicit RAG only
  std::vector<GeneratedExample> generated_examples;  // Answer Refinement only
  std::optional<std::string> reasoning;            // Chain of Thought only
  std::optional<std::string> failure_note;         // present iff PARSE_FAILURE

  bool ok() const { return status == OutcomeStatus::kOk; }
};

// Two-stage parse: first balanced JSON object carrying an "answers" object
// (strict), then a line-oriented scan for per-question answers (lenient).
// Never throws on malformed model text; throws std::logic_error only when
// the question list does not match the strategy arity.
ParsedOutcome parse_response(const std::string& record_id, const std::string& raw_text,
                             StrategyKind strategy,
                             const std::vector<GuidelineQuestion>& questions);

struct BatchParseResult {
  std::vector<ParsedOutcome> outcomes;  // same order as input
  std::size_t support_count = 0;        // number of OK outcomes
};

// results: (record_id, raw completion text) pairs.
BatchParseResult batch_parse(const std::vector<std::pair<std::string, std::string>>& results,
                             StrategyKind strategy,
                             const std::vector<GuidelineQuestion>& questions);

// JSONL round-trip for outcomes.jsonl. One compact JSON object per line:
// {record_id, strategy, question_ids, status, answers?, reasoning?,
//  generated_examples?, sections?, failure_note?}.
std::string outcome_to_json_line(const ParsedOutcome& outcome);
ParsedOutcome outcome_from_json_line(const std::string& line);

}  // namespace paqa

#include "paqa/parser.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "paqa/errors.hpp"

namespace paqa {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view status_id(OutcomeStatus status) {
  return status == OutcomeStatus::kOk ? "OK" : "PARSE_FAILURE";
}

std::optional<OutcomeStatus> status_from_id(std::string_view id) {
  if (id == "OK") return OutcomeStatus::kOk;
  if (id == "PARSE_FAILURE") return OutcomeStatus::kParseFailure;
  return std::nullopt;
}

// ---------------- Section validation ----------------

namespace {

bool is_ws(unsigned char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v'; }

std::string ws_normalize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (unsigned char c : text) {
    if (is_ws(c)) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(c));
    }
  }
  return out;
}

std::size_t whitespace_word_count(std::string_view text) {
  std::size_t count = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    if (is_ws(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++count;
    }
  }
  return count;
}

}  // namespace

SectionValidation validate_sections(const std::vector<std::string>& sections) {
  SectionValidation result;
  result.sections.reserve(sections.size());
  std::set<std::string> seen;
  bool duplicate = false;
  bool all_in_range = true;
  for (const std::string& text : sections) {
    ExtractedSection section;
    section.text = text;
    section.word_count = whitespace_word_count(text);
    section.within_length_spec = section.word_count >= 50 && section.word_count <= 200;
    all_in_range = all_in_range && section.within_length_spec;
    if (!seen.insert(ws_normalize(text)).second) duplicate = true;
    result.sections.push_back(std::move(section));
  }
  result.compliance.count_is_three = sections.size() == 3;
  result.compliance.has_duplicates = duplicate;
  result.compliance.all_within_length = !sections.empty() && all_in_range;
  return result;
}

bool section_appears_in(const std::string& section_text, const std::string& record_text) {
  std::string needle = ws_normalize(section_text);
  if (needle.empty()) return false;
  return ws_normalize(record_text).find(needle) != std::string::npos;
}

// ---------------- Strict stage ----------------

namespace {

// Finds, in order, balanced {...} spans (string- and escape-aware) and returns
// the first one that parses to a JSON object holding an "answers" object.
std::optional<json> extract_answers_object(const std::string& text) {
  const std::size_t n = text.size();
  std::size_t i = 0;
  while (i < n) {
    if (text[i] != '{') {
      ++i;
      continue;
    }
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    std::size_t j = i;
    std::size_t end = std::string::npos;
    for (; j < n; ++j) {
      char c = text[j];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}') {
        if (--depth == 0) {
          end = j;
          break;
        }
      }
    }
    if (end != std::string::npos) {
      json doc = json::parse(text.substr(i, end - i + 1), nullptr, false);
      if (doc.is_object() && doc.contains("answers") && doc["answers"].is_object()) {
        return doc;
      }
    }
    ++i;  // not a usable candidate; resume scanning just past this '{'
  }
  return std::nullopt;
}

ParsedOutcome fail(ParsedOutcome outcome, std::string note) {
  outcome.status = OutcomeStatus::kParseFailure;
  outcome.answers.clear();
  outcome.sections.clear();
  outcome.generated_examples.clear();
  outcome.reasoning.reset();
  outcome.failure_note = std::move(note);
  return outcome;
}

// Payload fields are best-effort: their absence or malformation never turns
// an OK outcome into a failure.
void attach_payloads(ParsedOutcome& outcome, const json& doc) {
  switch (outcome.strategy) {
    case StrategyKind::kCotPq:
      if (doc.contains("reasoning") && doc["reasoning"].is_string()) {
        outcome.reasoning = doc["reasoning"].get<std::string>();
      }
      break;
    case StrategyKind::kArPq:
      if (doc.contains("generated_examples") && doc["generated_examples"].is_array()) {
        for (const json& entry : doc["generated_examples"]) {
          if (entry.is_object() && entry.contains("question") && entry["question"].is_string() &&
              entry.contains("answer") && entry["answer"].is_string()) {
            outcome.generated_examples.push_back(
                {entry["question"].get<std::string>(), entry["answer"].get<std::string>()});
          }
        }
      }
      break;
    case StrategyKind::kImplicitRagPq:
      if (doc.contains("sections") && doc["sections"].is_array()) {
        std::vector<std::string> texts;
        for (const json& entry : doc["sections"]) {
          if (entry.is_string()) texts.push_back(entry.get<std::string>());
        }
        outcome.sections = validate_sections(texts).sections;
      }
      break;
    default: break;
  }
}

ParsedOutcome parse_strict(ParsedOutcome outcome, const json& doc,
                           const std::vector<GuidelineQuestion>& questions) {
  const json& answers = doc["answers"];
  for (const GuidelineQuestion& q : questions) {
    if (!answers.contains(q.question_id)) {
      return fail(std::move(outcome), "missing answer for " + q.question_id);
    }
    const json& value = answers[q.question_id];
    if (!value.is_string()) {
      return fail(std::move(outcome), "non-string answer for " + q.question_id);
    }
    auto choice = normalize_answer(value.get<std::string>());
    if (!choice) {
      return fail(std::move(outcome),
                  "unrecognized answer \"" + value.get<std::string>() + "\" for " + q.question_id);
    }
    if (!q.allows(*choice)) {
      return fail(std::move(outcome), "answer not in choices for " + q.question_id);
    }
    outcome.answers[q.question_id] = *choice;
  }
  outcome.status = OutcomeStatus::kOk;
  attach_payloads(outcome, doc);
  return outcome;
}

// ---------------- Lenient stage ----------------

bool is_word_char(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

char lower(unsigned char c) { return static_cast<char>(std::tolower(c)); }

bool ieq_at(const std::string& text, std::size_t pos, std::string_view form) {
  if (pos + form.size() > text.size()) return false;
  for (std::size_t k = 0; k < form.size(); ++k) {
    if (lower(static_cast<unsigned char>(text[pos + k])) != form[k]) return false;
  }
  return true;
}

struct SurfaceForm {
  std::string_view form;  // lowercase
  AnswerChoice choice;
};

// Longest first so "not applicable" beats "no" and "na", "yes" beats "y".
constexpr SurfaceForm kSurfaceForms[] = {
    {"not applicable", AnswerChoice::kNotApplicable},
    {"yes", AnswerChoice::kYes},
    {"na", AnswerChoice::kNotApplicable},
    {"no", AnswerChoice::kNo},
    {"y", AnswerChoice::kYes},
    {"n", AnswerChoice::kNo},
};

// Matches a surface form at pos with a non-word boundary after it.
std::optional<AnswerChoice> match_surface_form(const std::string& text, std::size_t pos) {
  for (const SurfaceForm& sf : kSurfaceForms) {
    if (!ieq_at(text, pos, sf.form)) continue;
    std::size_t end = pos + sf.form.size();
    if (end < text.size() && is_word_char(static_cast<unsigned char>(text[end]))) continue;
    return sf.choice;
  }
  return std::nullopt;
}

// Scans for `qid` (case-insensitive, word boundaries on both sides) followed
// by optional quoting/separator characters and a recognizable answer form.
// First recognizable form wins, matching spec'd "Qk: <choice>" lines while
// tolerating markdown bullets and JSON-ish fragments.
std::optional<AnswerChoice> lenient_find_answer(const std::string& text, const std::string& qid) {
  if (qid.empty()) return std::nullopt;
  std::string qid_lower;
  qid_lower.reserve(qid.size());
  for (unsigned char c : qid) qid_lower.push_back(lower(c));

  const std::size_t n = text.size();
  for (std::size_t i = 0; i + qid.size() <= n; ++i) {
    if (!ieq_at(text, i, qid_lower)) continue;
    if (i > 0 && is_word_char(static_cast<unsigned char>(text[i - 1]))) continue;
    std::size_t j = i + qid.size();
    if (j < n && is_word_char(static_cast<unsigned char>(text[j]))) continue;

    auto skip_soft = [&] {
      while (j < n) {
        char c = text[j];
        if (c == ' ' || c == '\t' || c == '"' || c == '\'' || c == '*') ++j;
        else break;
      }
    };
    skip_soft();
    if (j < n && (text[j] == ':' || text[j] == '=' || text[j] == '-' || text[j] == '.')) ++j;
    skip_soft();
    if (auto choice = match_surface_form(text, j)) return choice;
  }
  return std::nullopt;
}

ParsedOutcome parse_lenient(ParsedOutcome outcome, const std::string& raw_text,
                            const std::vector<GuidelineQuestion>& questions) {
  for (const GuidelineQuestion& q : questions) {
    auto choice = lenient_find_answer(raw_text, q.question_id);
    if (!choice) {
      return fail(std::move(outcome), "no recognizable answer for " + q.question_id);
    }
    if (!q.allows(*choice)) {
      return fail(std::move(outcome), "answer not in choices for " + q.question_id);
    }
    outcome.answers[q.question_id] = *choice;
  }
  outcome.status = OutcomeStatus::kOk;
  return outcome;
}

}  // namespace

// ---------------- Entry points ----------------

ParsedOutcome parse_response(const std::string& record_id, const std::string& raw_text,
                             StrategyKind strategy,
                             const std::vector<GuidelineQuestion>& questions) {
  const std::size_t expected = binds_all_questions(strategy) ? 5 : 1;
  if (questions.size() != expected) {
    throw std::logic_error("parse_response: " + std::string(strategy_id(strategy)) + " binds " +
                           std::to_string(expected) + " questions, got " +
                           std::to_string(questions.size()));
  }

  ParsedOutcome outcome;
  outcome.record_id = record_id;
  outcome.strategy = strategy;
  outcome.question_ids.reserve(questions.size());
  for (const GuidelineQuestion& q : questions) outcome.question_ids.push_back(q.question_id);

  if (raw_text.empty()) return fail(std::move(outcome), "empty response");

  if (auto doc = extract_answers_object(raw_text)) {
    // Strict route engaged: its verdict is final, no lenient fallback.
    return parse_strict(std::move(outcome), *doc, questions);
  }
  return parse_lenient(std::move(outcome), raw_text, questions);
}

BatchParseResult batch_parse(const std::vector<std::pair<std::string, std::string>>& results,
                             StrategyKind strategy,
                             const std::vector<GuidelineQuestion>& questions) {
  BatchParseResult batch;
  batch.outcomes.reserve(results.size());
  for (const auto& [record_id, raw_text] : results) {
    ParsedOutcome outcome = parse_response(record_id, raw_text, strategy, questions);
    if (outcome.ok()) ++batch.support_count;
    batch.outcomes.push_back(std::move(outcome));
  }
  return batch;
}

// ---------------- Serialization ----------------

std::string outcome_to_json_line(const ParsedOutcome& outcome) {
  ordered_json line;
  line["record_id"] = outcome.record_id;
  line["strategy"] = std::string(strategy_id(outcome.strategy));
  line["question_ids"] = outcome.question_ids;
  line["status"] = std::string(status_id(outcome.status));
  if (outcome.ok()) {
    ordered_json answers = ordered_json::object();
    for (const std::string& qid : outcome.question_ids) {
      answers[qid] = std::string(to_canonical(outcome.answers.at(qid)));
    }
    line["answers"] = std::move(answers);
  }
  if (outcome.reasoning) line["reasoning"] = *outcome.reasoning;
  if (!outcome.generated_examples.empty()) {
    ordered_json examples = ordered_json::array();
    for (const GeneratedExample& ex : outcome.generated_examples) {
      examples.push_back({{"question", ex.question}, {"answer", ex.answer}});
    }
    line["generated_examples"] = std::move(examples);
  }
  if (!outcome.sections.empty()) {
    ordered_json sections = ordered_json::array();
    for (const ExtractedSection& s : outcome.sections) {
      sections.push_back({{"text", s.text},
                          {"word_count", s.word_count},
                          {"within_length_spec", s.within_length_spec}});
    }
    line["sections"] = std::move(sections);
  }
  if (outcome.failure_note) line["failure_note"] = *outcome.failure_note;
  return line.dump();
}

ParsedOutcome outcome_from_json_line(const std::string& line) {
  json doc = json::parse(line, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw Error("outcome line is not a JSON object");
  ParsedOutcome outcome;
  try {
    outcome.record_id = doc.at("record_id").get<std::string>();
    auto strategy = strategy_from_id(doc.at("strategy").get<std::string>());
    if (!strategy) throw Error("unknown strategy in outcome line");
    outcome.strategy = *strategy;
    outcome.question_ids = doc.at("question_ids").get<std::vector<std::string>>();
    auto status = status_from_id(doc.at("status").get<std::string>());
    if (!status) throw Error("unknown status in outcome line");
    outcome.status = *status;
    if (outcome.ok()) {
      const json& answers = doc.at("answers");
      for (auto it = answers.begin(); it != answers.end(); ++it) {
        auto choice = answer_from_canonical(it.value().get<std::string>());
        if (!choice) throw Error("non-canonical answer in outcome line");
        outcome.answers[it.key()] = *choice;
      }
    }
    if (doc.contains("reasoning")) outcome.reasoning = doc["reasoning"].get<std::string>();
    if (doc.contains("generated_examples")) {
      for (const json& ex : doc["generated_examples"]) {
        outcome.generated_examples.push_back(
            {ex.at("question").get<std::string>(), ex.at("answer").get<std::string>()});
      }
    }
    if (doc.contains("sections")) {
      for (const json& s : doc["sections"]) {
        ExtractedSection section;
        section.text = s.at("text").get<std::string>();
        section.word_count = s.at("word_count").get<std::size_t>();
        section.within_length_spec = s.at("within_length_spec").get<bool>();
        outcome.sections.push_back(std::move(section));
      }
    }
    if (doc.contains("failure_note")) outcome.failure_note = doc["failure_note"].get<std::string>();
  } catch (const json::exception& e) {
    throw Error(std::string("malformed outcome line: ") + e.what());
  }
  return outcome;
}

}  // namespace paqa

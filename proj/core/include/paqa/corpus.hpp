#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace paqa {

// ---------------- Answer choices ----------------

enum class AnswerChoice { kYes, kNo, kNotApplicable };

// Canonical serialized forms: "Y", "N", "NA".
std::string_view to_canonical(AnswerChoice choice);

// Strict canonical parse ("Y"/"N"/"NA" only).
std::optional<AnswerChoice> answer_from_canonical(std::string_view text);

// Lenient surface-form normalization: trims, lowercases, collapses inner
// whitespace; accepts Y/Yes, N/No, NA/Not Applicable in any casing.
std::optional<AnswerChoice> normalize_answer(std::string_view text);

// ---------------- Domain types ----------------

struct PatientRecord {
  std::string record_id;
  std::string text;
  std::size_t token_count = 0;

  // Computes token_count so the invariant holds by construction.
  static PatientRecord make(std::string record_id, std::string text);
};

struct TermDefinition {
  std::string term;
  std::string definition;
};

struct GuidelineQuestion {
  std::string question_id;
  std::string text;
  std::vector<AnswerChoice> choices;
  std::vector<TermDefinition> term_definitions;

  bool allows(AnswerChoice choice) const;
};

struct GoldLabel {
  std::string record_id;
  std::string question_id;
  AnswerChoice answer;
};

struct CorpusStats {
  std::size_t n_records = 0;
  double mean_tokens = 0.0;
  double std_tokens = 0.0;  // population (divide by n)
  std::size_t max_tokens = 0;
  double p25 = 0.0;  // linear interpolation on the sorted counts
  double p50 = 0.0;
  double p75 = 0.0;
};

// ---------------- Operations ----------------

// Reads records.jsonl (one object per line, keys "record_id" and "text").
// Throws CorpusError on IO failure, malformed lines (with the line number),
// or duplicate record ids (naming the id).
std::vector<PatientRecord> ingest_corpus(const std::filesystem::path& path);

// Reads labels.jsonl ({record_id, question_id, answer}); validates that each
// answer is a member of the referenced question's choices.
std::vector<GoldLabel> load_gold_labels(const std::filesystem::path& path,
                                        const std::vector<GuidelineQuestion>& questions);

// Reads a questions file: JSON array of
// {question_id, text, choices, term_definitions}.
std::vector<GuidelineQuestion> load_questions(const std::filesystem::path& path);

// The bundled five-question spine-imaging set. Q1 offers Y/N; Q2-Q5 offer
// Y/N/NA. Ships placeholder term definitions for the keyword-heavy questions.
std::vector<GuidelineQuestion> default_question_set();

// Mean, population std, max, and linearly interpolated percentiles of the
// per-record token counts. Throws CorpusError on an empty corpus. Invariant
// under permutation of the input.
CorpusStats corpus_stats(const std::vector<PatientRecord>& records);

struct FixtureCorpus {
  std::vector<PatientRecord> records;
  std::vector<GoldLabel> labels;
};

// Deterministic synthetic corpus: n records with one planted sentence per
// question that makes the gold answer recoverable by keyword inspection,
// plus seed-driven filler. Labels cycle through each question's choices so
// every choice is covered once n >= 3. Identical (seed, n) pairs produce
// byte-identical output.
FixtureCorpus generate_fixture_corpus(std::uint64_t seed, std::size_t n);

void write_records_jsonl(const std::filesystem::path& path,
                         const std::vector<PatientRecord>& records);
void write_labels_jsonl(const std::filesystem::path& path, const std::vector<GoldLabel>& labels);

}  // namespace paqa

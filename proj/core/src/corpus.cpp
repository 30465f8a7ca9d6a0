#include "paqa/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "paqa/errors.hpp"
#include "paqa/tokenizer.hpp"

namespace paqa {

using nlohmann::json;

// ---------------- Answer choices ----------------

std::string_view to_canonical(AnswerChoice choice) {
  switch (choice) {
    case AnswerChoice::kYes: return "Y";
    case AnswerChoice::kNo: return "N";
    case AnswerChoice::kNotApplicable: return "NA";
  }
  return "?";
}

std::optional<AnswerChoice> answer_from_canonical(std::string_view text) {
  if (text == "Y") return AnswerChoice::kYes;
  if (text == "N") return AnswerChoice::kNo;
  if (text == "NA") return AnswerChoice::kNotApplicable;
  return std::nullopt;
}

std::optional<AnswerChoice> normalize_answer(std::string_view text) {
  std::string clean;
  clean.reserve(text.size());
  bool pending_space = false;
  for (char raw : text) {
    unsigned char c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      if (!clean.empty()) pending_space = true;
      continue;
    }
    if (pending_space) {
      clean.push_back(' ');
      pending_space = false;
    }
    clean.push_back(static_cast<char>(std::tolower(c)));
  }
  if (clean == "y" || clean == "yes") return AnswerChoice::kYes;
  if (clean == "n" || clean == "no") return AnswerChoice::kNo;
  if (clean == "na" || clean == "not applicable") return AnswerChoice::kNotApplicable;
  return std::nullopt;
}

// ---------------- Domain types ----------------

PatientRecord PatientRecord::make(std::string record_id, std::string text) {
  PatientRecord record;
  record.record_id = std::move(record_id);
  record.text = std::move(text);
  record.token_count = paqa::token_count(record.text);
  return record;
}

bool GuidelineQuestion::allows(AnswerChoice choice) const {
  return std::find(choices.begin(), choices.end(), choice) != choices.end();
}

// ---------------- Ingestion ----------------

namespace {

std::string read_file_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot open file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw CorpusError("read failure: " + path.string());
  return buf.str();
}

// Calls fn(line_number, line) for every non-empty line.
template <typename Fn>
void for_each_jsonl_line(const std::string& content, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    std::size_t eol = content.find('\n', pos);
    std::string_view line(content.data() + pos,
                          (eol == std::string::npos ? content.size() : eol) - pos);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) fn(line_no, line);
    if (eol == std::string::npos) break;
    pos = eol + 1;
  }
}

json parse_jsonl_object(const std::filesystem::path& path, std::size_t line_no,
                        std::string_view line) {
  json obj = json::parse(line, nullptr, false);
  if (obj.is_discarded() || !obj.is_object()) {
    throw CorpusError(path.string() + ":" + std::to_string(line_no) + ": malformed JSON line");
  }
  return obj;
}

std::string require_string_field(const json& obj, const char* key,
                                 const std::filesystem::path& path, std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw CorpusError(path.string() + ":" + std::to_string(line_no) +
                      ": missing or non-string field \"" + key + "\"");
  }
  return it->get<std::string>();
}

}  // namespace

std::vector<PatientRecord> ingest_corpus(const std::filesystem::path& path) {
  std::string content = read_file_or_throw(path);
  std::vector<PatientRecord> records;
  std::unordered_set<std::string> seen;
  for_each_jsonl_line(content, [&](std::size_t line_no, std::string_view line) {
    json obj = parse_jsonl_object(path, line_no, line);
    std::string id = require_string_field(obj, "record_id", path, line_no);
    std::string text = require_string_field(obj, "text", path, line_no);
    if (id.empty()) {
      throw CorpusError(path.string() + ":" + std::to_string(line_no) + ": empty record_id");
    }
    if (!seen.insert(id).second) {
      throw CorpusError(path.string() + ":" + std::to_string(line_no) +
                        ": duplicate record_id \"" + id + "\"");
    }
    records.push_back(PatientRecord::make(std::move(id), std::move(text)));
  });
  return records;
}

std::vector<GoldLabel> load_gold_labels(const std::filesystem::path& path,
                                        const std::vector<GuidelineQuestion>& questions) {
  std::string content = read_file_or_throw(path);
  std::vector<GoldLabel> labels;
  for_each_jsonl_line(content, [&](std::size_t line_no, std::string_view line) {
    json obj = parse_jsonl_object(path, line_no, line);
    GoldLabel label;
    label.record_id = require_string_field(obj, "record_id", path, line_no);
    label.question_id = require_string_field(obj, "question_id", path, line_no);
    std::string answer = require_string_field(obj, "answer", path, line_no);
    auto choice = answer_from_canonical(answer);
    if (!choice) {
      throw CorpusError(path.string() + ":" + std::to_string(line_no) + ": answer \"" + answer +
                        "\" is not one of Y, N, NA");
    }
    label.answer = *choice;
    auto q = std::find_if(questions.begin(), questions.end(), [&](const GuidelineQuestion& gq) {
      return gq.question_id == label.question_id;
    });
    if (q == questions.end()) {
      throw CorpusError(path.string() + ":" + std::to_string(line_no) + ": unknown question_id \"" +
                        label.question_id + "\"");
    }
    if (!q->allows(label.answer)) {
      throw CorpusError(path.string() + ":" + std::to_string(line_no) + ": answer \"" + answer +
                        "\" is not a choice of " + label.question_id);
    }
    labels.push_back(std::move(label));
  });
  return labels;
}

std::vector<GuidelineQuestion> load_questions(const std::filesystem::path& path) {
  std::string content = read_file_or_throw(path);
  json doc = json::parse(content, nullptr, false);
  if (doc.is_discarded() || !doc.is_array()) {
    throw CorpusError(path.string() + ": questions file must be a JSON array");
  }
  std::vector<GuidelineQuestion> questions;
  std::unordered_set<std::string> seen_ids;
  for (const json& entry : doc) {
    if (!entry.is_object()) throw CorpusError(path.string() + ": question entry must be an object");
    GuidelineQuestion q;
    q.question_id = entry.value("question_id", std::string());
    q.text = entry.value("text", std::string());
    if (q.question_id.empty() || q.text.empty()) {
      throw CorpusError(path.string() + ": question entry needs question_id and text");
    }
    if (!seen_ids.insert(q.question_id).second) {
      throw CorpusError(path.string() + ": duplicate question_id \"" + q.question_id + "\"");
    }
    if (!entry.contains("choices") || !entry["choices"].is_array() || entry["choices"].empty()) {
      throw CorpusError(path.string() + ": question " + q.question_id +
                        " needs a non-empty choices array");
    }
    for (const json& c : entry["choices"]) {
      auto choice = answer_from_canonical(c.is_string() ? c.get<std::string>() : std::string());
      if (!choice) {
        throw CorpusError(path.string() + ": question " + q.question_id +
                          " has a choice outside Y, N, NA");
      }
      if (q.allows(*choice)) {
        throw CorpusError(path.string() + ": question " + q.question_id + " has duplicate choices");
      }
      q.choices.push_back(*choice);
    }
    if (entry.contains("term_definitions")) {
      for (const json& td : entry["term_definitions"]) {
        if (!td.is_object() || !td.contains("term") || !td.contains("definition")) {
          throw CorpusError(path.string() + ": term_definitions entries need term and definition");
        }
        q.term_definitions.push_back({td["term"].get<std::string>(),
                                      td["definition"].get<std::string>()});
      }
    }
    questions.push_back(std::move(q));
  }
  return questions;
}

// ---------------- Default question set ----------------

std::vector<GuidelineQuestion> default_question_set() {
  const std::string conservative_def =
      "non-surgical care such as physical therapy, resting, using muscle relaxants, or "
      "anti-inflammatory medication.";
  std::vector<GuidelineQuestion> questions;
  questions.push_back(
      {"Q1",
       "Are any of the conditions including Motor Weakness, Severe Radicular Pain, Cancer, Cauda "
       "Equina or Fracture present which could potentially be life or limb threatening?",
       {AnswerChoice::kYes, AnswerChoice::kNo},
       {{"motor weakness",
         "objectively reduced muscle strength in one or more muscle groups, graded below 5/5 on "
         "manual testing."},
        {"severe radicular pain",
         "intense pain radiating along a nerve root distribution, typically into the leg below "
         "the knee."},
        {"cauda equina",
         "compression of the nerve roots below the end of the spinal cord, producing saddle "
         "anesthesia, urinary retention, or bowel dysfunction; a surgical emergency."}}});
  questions.push_back({"Q2",
                       "Is there a contraindication to MRI?",
                       {AnswerChoice::kYes, AnswerChoice::kNo, AnswerChoice::kNotApplicable},
                       {{"contraindication",
                         "a condition or factor, such as an implanted pacemaker or ferromagnetic "
                         "foreign body, that makes MRI inadvisable."}}});
  questions.push_back({"Q3",
                       "Has there been at least 6 weeks of provider-directed conservative "
                       "treatment?",
                       {AnswerChoice::kYes, AnswerChoice::kNo, AnswerChoice::kNotApplicable},
                       {{"conservative treatment", conservative_def}}});
  questions.push_back({"Q4",
                       "Was a clinical re-evaluation performed after a trial of conservative "
                       "treatment?",
                       {AnswerChoice::kYes, AnswerChoice::kNo, AnswerChoice::kNotApplicable},
                       {{"conservative treatment", conservative_def},
                        {"clinical re-evaluation",
                         "a follow-up clinical assessment of the patient performed after a course "
                         "of treatment to gauge response."}}});
  questions.push_back({"Q5",
                       "Did symptoms improve with conservative treatment?",
                       {AnswerChoice::kYes, AnswerChoice::kNo, AnswerChoice::kNotApplicable},
                       {{"conservative treatment", conservative_def}}});
  return questions;
}

// ---------------- Statistics ----------------

namespace {

// Linear interpolation between closest ranks, matching the common
// statistical convention for percentiles of a finite sample.
double percentile_sorted(const std::vector<std::size_t>& sorted, double p) {
  if (sorted.size() == 1) return static_cast<double>(sorted.front());
  double rank = (p / 100.0) * static_cast<double>(sorted.size() - 1);
  std::size_t lo = static_cast<std::size_t>(rank);
  double frac = rank - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return static_cast<double>(sorted.back());
  return static_cast<double>(sorted[lo]) +
         frac * (static_cast<double>(sorted[lo + 1]) - static_cast<double>(sorted[lo]));
}

}  // namespace

CorpusStats corpus_stats(const std::vector<PatientRecord>& records) {
  if (records.empty()) throw CorpusError("corpus_stats: empty corpus");
  std::vector<std::size_t> counts;
  counts.reserve(records.size());
  for (const auto& r : records) counts.push_back(r.token_count);
  std::sort(counts.begin(), counts.end());

  double sum = 0.0;
  for (std::size_t c : counts) sum += static_cast<double>(c);
  double mean = sum / static_cast<double>(counts.size());
  double sq = 0.0;
  for (std::size_t c : counts) {
    double d = static_cast<double>(c) - mean;
    sq += d * d;
  }

  CorpusStats stats;
  stats.n_records = counts.size();
  stats.mean_tokens = mean;
  stats.std_tokens = std::sqrt(sq / static_cast<double>(counts.size()));
  stats.max_tokens = counts.back();
  stats.p25 = percentile_sorted(counts, 25.0);
  stats.p50 = percentile_sorted(counts, 50.0);
  stats.p75 = percentile_sorted(counts, 75.0);
  return stats;
}

// ---------------- Synthetic fixtures ----------------

namespace {

// mt19937_64 has a standardized output sequence, so fixture bytes are stable
// across platforms. Bounded draws use plain modulo on purpose:
// std::uniform_int_distribution is implementation-defined.
class FixtureRng {
 public:
  explicit FixtureRng(std::uint64_t seed) : engine_(seed) {}
  std::size_t below(std::size_t bound) {
    return static_cast<std::size_t>(engine_() % static_cast<std::uint64_t>(bound));
  }

 private:
  std::mt19937_64 engine_;
};

struct PlantedSentences {
  const char* yes;
  const char* no;
  const char* not_applicable;  // unused for Q1

  const char* for_answer(AnswerChoice a) const {
    switch (a) {
      case AnswerChoice::kYes: return yes;
      case AnswerChoice::kNo: return no;
      case AnswerChoice::kNotApplicable: return not_applicable;
    }
    return "";
  }
};

constexpr PlantedSentences kPlanted[5] = {
    {"Red flag screening is positive: the note documents motor weakness and suspected cauda "
     "equina syndrome.",
     "Red flag screening is negative: no motor weakness, severe radicular pain, cancer, cauda "
     "equina or fracture is present.",
     nullptr},
    {"MRI is contraindicated because the patient has an implanted pacemaker.",
     "There is no contraindication to MRI.",
     "MRI was not considered for this request, so contraindication screening is not applicable."},
    {"The patient completed eight weeks of provider-directed conservative treatment including "
     "physical therapy.",
     "Provider-directed conservative treatment lasted only two weeks before this request.",
     "No conservative treatment has been provided, so treatment duration is not applicable."},
    {"A clinical re-evaluation was performed after the trial of conservative treatment.",
     "No clinical re-evaluation was performed after the conservative treatment trial.",
     "Re-evaluation is not applicable because conservative treatment was never initiated."},
    {"Symptoms improved with conservative treatment.",
     "Symptoms did not improve despite conservative treatment.",
     "Improvement with conservative treatment is not applicable because none was provided."}};

constexpr const char* kFiller[] = {
    "Vital signs are within normal limits.",
    "The patient reports intermittent pain radiating to the left leg.",
    "Past medical history is notable for seasonal allergies.",
    "Current medications include a daily multivitamin.",
    "The patient denies fever, chills, or unexplained weight loss.",
    "Gait is steady and unassisted.",
    "Deep tendon reflexes are symmetric bilaterally.",
    "The patient works a desk job and sits for long periods.",
    "Imaging of the lumbar spine is requested for further evaluation.",
    "Follow-up is scheduled with the ordering provider.",
};
constexpr std::size_t kFillerCount = sizeof(kFiller) / sizeof(kFiller[0]);

std::string fixture_record_id(std::size_t index) {
  std::string digits = std::to_string(index + 1);
  while (digits.size() < 4) digits.insert(digits.begin(), '0');
  return "synth-" + digits;
}

}  // namespace

FixtureCorpus generate_fixture_corpus(std::uint64_t seed, std::size_t n) {
  if (n == 0) throw CorpusError("generate_fixture_corpus: n must be >= 1");
  const std::vector<GuidelineQuestion> questions = default_question_set();
  FixtureRng rng(seed);

  // Per-question phase offsets; cycling (index + offset) % #choices keeps
  // every choice covered for n >= 3 while still varying with the seed.
  std::size_t offsets[5];
  for (std::size_t q = 0; q < 5; ++q) offsets[q] = rng.below(questions[q].choices.size());

  FixtureCorpus fixture;
  fixture.records.reserve(n);
  fixture.labels.reserve(n * 5);
  for (std::size_t i = 0; i < n; ++i) {
    std::string id = fixture_record_id(i);

    std::ostringstream text;
    std::size_t age = 25 + rng.below(55);
    std::size_t weeks = 2 + rng.below(20);
    text << "Patient is a " << age << " year old " << (rng.below(2) == 0 ? "female" : "male")
         << " presenting with lower back pain persisting for " << weeks << " weeks.";

    for (std::size_t q = 0; q < 5; ++q) {
      const auto& choices = questions[q].choices;
      AnswerChoice answer = choices[(i + offsets[q]) % choices.size()];
      fixture.labels.push_back({id, questions[q].question_id, answer});

      std::size_t fillers = rng.below(3);
      for (std::size_t f = 0; f < fillers; ++f) text << " " << kFiller[rng.below(kFillerCount)];
      text << " " << kPlanted[q].for_answer(answer);
    }
    std::size_t trailing = 1 + rng.below(3);
    for (std::size_t f = 0; f < trailing; ++f) text << " " << kFiller[rng.below(kFillerCount)];

    fixture.records.push_back(PatientRecord::make(std::move(id), text.str()));
  }
  return fixture;
}

// ---------------- Writers ----------------

namespace {

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CorpusError("cannot open file for writing: " + path.string());
  for (const auto& line : lines) out << line << '\n';
  if (!out) throw CorpusError("write failure: " + path.string());
}

}  // namespace

void write_records_jsonl(const std::filesystem::path& path,
                         const std::vector<PatientRecord>& records) {
  std::vector<std::string> lines;
  lines.reserve(records.size());
  for (const auto& r : records) {
    json obj = {{"record_id", r.record_id}, {"text", r.text}};
    lines.push_back(obj.dump());
  }
  write_lines(path, lines);
}

void write_labels_jsonl(const std::filesystem::path& path, const std::vector<GoldLabel>& labels) {
  std::vector<std::string> lines;
  lines.reserve(labels.size());
  for (const auto& l : labels) {
    json obj = {{"record_id", l.record_id},
                {"question_id", l.question_id},
                {"answer", std::string(to_canonical(l.answer))}};
    lines.push_back(obj.dump());
  }
  write_lines(path, lines);
}

}  // namespace paqa

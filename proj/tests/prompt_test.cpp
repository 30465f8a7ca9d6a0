#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <vector>

#include "paqa/corpus.hpp"
#include "paqa/errors.hpp"
#include "paqa/prompt.hpp"
#include "test_util.hpp"

using namespace paqa;
using paqa::testing::slurp;

namespace {

std::filesystem::path template_dir() { return PAQA_TEMPLATE_DIR; }

std::string template_file(StrategyKind strategy) {
  return slurp(template_dir() / (std::string(strategy_id(strategy)) + ".txt"));
}

PatientRecord sample_record() {
  return PatientRecord::make("r1", "Patient reports six weeks of physical therapy.");
}

std::vector<GuidelineQuestion> one(const std::string& qid) {
  for (const auto& q : default_question_set()) {
    if (q.question_id == qid) return {q};
  }
  throw std::runtime_error("no such question");
}

}  // namespace

TEST_CASE("embedded templates are byte-identical to the checked-in files") {
  for (StrategyKind strategy : kAllStrategies) {
    CAPTURE(strategy_id(strategy));
    CHECK(golden_template(strategy) == template_file(strategy));
  }
  CHECK(response_format_template() == slurp(template_dir() / "response_format.txt"));
}

TEST_CASE("per-question templates reuse the all-questions templates") {
  CHECK(golden_template(StrategyKind::kBasicPq) == golden_template(StrategyKind::kBasicAq));
  CHECK(golden_template(StrategyKind::kBasicTdPq) == golden_template(StrategyKind::kBasicTdAq));
}

TEST_CASE("render equals the substituted golden file plus the format block") {
  auto questions = default_question_set();
  PatientRecord record = sample_record();
  for (StrategyKind strategy : kAllStrategies) {
    CAPTURE(strategy_id(strategy));
    std::vector<GuidelineQuestion> bound =
        binds_all_questions(strategy) ? questions : one("Q3");
    RenderedPrompt prompt = render(strategy, bound, record);

    PromptBindings bindings = make_bindings(strategy, bound, record);
    std::string expected = apply_bindings(template_file(strategy), bindings);
    expected += '\n';
    std::string format = slurp(template_dir() / "response_format.txt");
    std::string schema = response_schema_example(strategy, prompt.question_ids);
    std::size_t hole = format.find("{response_schema}");
    REQUIRE(hole != std::string::npos);
    format.replace(hole, std::string("{response_schema}").size(), schema);
    expected += format;

    CHECK(prompt.text == expected);
  }
}

TEST_CASE("strategy anchors appear verbatim") {
  auto questions = default_question_set();
  PatientRecord record = sample_record();

  auto text = [&](StrategyKind s) {
    return render(s, binds_all_questions(s) ? questions : one("Q1"), record).text;
  };

  CHECK(text(StrategyKind::kCotPq).find("Think step by step.") != std::string::npos);
  CHECK(text(StrategyKind::kArPq)
            .find("Generate three examples of multi-choice question-answer pairs") !=
        std::string::npos);
  CHECK(text(StrategyKind::kArPq).find("Your examples should be distinct from each other") !=
        std::string::npos);
  CHECK(text(StrategyKind::kArPq).find("Afterward, proceed to solve the initial multi-choice "
                                       "question.") != std::string::npos);
  CHECK(text(StrategyKind::kImplicitRagPq)
            .find("Identify three most relevant sections or text extracts") != std::string::npos);
  CHECK(text(StrategyKind::kImplicitRagPq).find("must be between 50 to 200 words long") !=
        std::string::npos);
  CHECK(text(StrategyKind::kImplicitRagPq)
            .find("Now, choose the best answer for the given multi-choice question using the "
                  "identified sections or text extracts.") != std::string::npos);
  CHECK(text(StrategyKind::kBasicTdAq).find("Medical Term Definitions:") != std::string::npos);
  CHECK(text(StrategyKind::kBasicTdPq).find("Medical Term Definitions:") != std::string::npos);

  for (StrategyKind s : kAllStrategies) {
    CAPTURE(strategy_id(s));
    CHECK(text(s).find("Health Records:") != std::string::npos);
    CHECK(text(s).find("###") != std::string::npos);
  }
}

TEST_CASE("no placeholder survives rendering") {
  auto questions = default_question_set();
  PatientRecord record = sample_record();
  for (StrategyKind strategy : kAllStrategies) {
    CAPTURE(strategy_id(strategy));
    std::string text =
        render(strategy, binds_all_questions(strategy) ? questions : one("Q2"), record).text;
    for (const char* placeholder :
         {"{question_text_list}", "{choices_list}", "{question_text}", "{choices}",
          "{term_definitions}", "{clinical_text}", "{response_schema}"}) {
      CHECK(text.find(placeholder) == std::string::npos);
    }
  }
}

TEST_CASE("all-questions render lists every question with its id") {
  auto questions = default_question_set();
  std::string text = render(StrategyKind::kBasicAq, questions, sample_record()).text;
  for (const auto& q : questions) {
    CHECK(text.find(q.question_id + ": " + q.text) != std::string::npos);
  }
  CHECK(text.find("Y, N, NA") != std::string::npos);  // Q2-Q5 choice lists
  CHECK(text.find("Q1: Y, N") != std::string::npos);  // Q1 has no NA
}

TEST_CASE("per-question render does not leak other questions") {
  auto questions = default_question_set();
  std::string text = render(StrategyKind::kBasicPq, one("Q2"), sample_record()).text;
  CHECK(text.find(questions[1].text) != std::string::npos);
  for (const auto& q : questions) {
    if (q.question_id == "Q2") continue;
    CHECK(text.find(q.text) == std::string::npos);
  }
}

TEST_CASE("choices render as comma-separated canonical forms") {
  std::string q1 = render(StrategyKind::kBasicPq, one("Q1"), sample_record()).text;
  CHECK(q1.find("Answer Choices: Y, N\n") != std::string::npos);
  std::string q3 = render(StrategyKind::kBasicPq, one("Q3"), sample_record()).text;
  CHECK(q3.find("Answer Choices: Y, N, NA\n") != std::string::npos);
}

TEST_CASE("clinical text sits inside the fence block") {
  PatientRecord record = PatientRecord::make("r1", "FENCED BODY");
  std::string text = render(StrategyKind::kBasicPq, one("Q1"), record).text;
  CHECK(text.find("###\nFENCED BODY\n###") != std::string::npos);

  PatientRecord empty = PatientRecord::make("r2", "");
  std::string degenerate = render(StrategyKind::kBasicAq, default_question_set(), empty).text;
  CHECK(degenerate.find("###\n\n###") != std::string::npos);
}

TEST_CASE("term definitions are deduplicated by term") {
  auto questions = default_question_set();  // Q3/Q4/Q5 share "conservative treatment"
  std::string text = render(StrategyKind::kBasicTdAq, questions, sample_record()).text;
  const std::string needle = "conservative treatment:";
  std::size_t first = text.find(needle);
  REQUIRE(first != std::string::npos);
  CHECK(text.find(needle, first + 1) == std::string::npos);
}

TEST_CASE("arity and term-definition preconditions") {
  auto questions = default_question_set();
  PatientRecord record = sample_record();
  CHECK_THROWS_AS(render(StrategyKind::kBasicPq, {questions[0], questions[1]}, record), Error);
  CHECK_THROWS_AS(render(StrategyKind::kBasicAq, one("Q1"), record), Error);
  CHECK_THROWS_AS(render(StrategyKind::kCotPq, questions, record), Error);

  GuidelineQuestion bare{"QX", "Bare?", {AnswerChoice::kYes, AnswerChoice::kNo}, {}};
  CHECK_THROWS_AS(render(StrategyKind::kBasicTdPq, {bare}, record), Error);
  CHECK_NOTHROW(render(StrategyKind::kBasicPq, {bare}, record));
}

TEST_CASE("rendering is pure: repeated calls agree byte for byte") {
  auto questions = default_question_set();
  PatientRecord record = sample_record();
  for (StrategyKind strategy : kAllStrategies) {
    auto bound = binds_all_questions(strategy) ? questions : one("Q4");
    CHECK(render(strategy, bound, record).text == render(strategy, bound, record).text);
  }
}

TEST_CASE("output schema ids are strategy-specific") {
  CHECK(output_schema_id(StrategyKind::kBasicAq) == "answers/v1");
  CHECK(output_schema_id(StrategyKind::kBasicTdAq) == "answers/v1");
  CHECK(output_schema_id(StrategyKind::kBasicPq) == "answers/v1");
  CHECK(output_schema_id(StrategyKind::kBasicTdPq) == "answers/v1");
  CHECK(output_schema_id(StrategyKind::kCotPq) == "answers+reasoning/v1");
  CHECK(output_schema_id(StrategyKind::kArPq) == "answers+examples/v1");
  CHECK(output_schema_id(StrategyKind::kImplicitRagPq) == "answers+sections/v1");

  RenderedPrompt prompt = render(StrategyKind::kCotPq, one("Q1"), sample_record());
  CHECK(prompt.output_schema_id == "answers+reasoning/v1");
  CHECK(prompt.record_id == "r1");
  CHECK(prompt.question_ids == std::vector<std::string>{"Q1"});
}

TEST_CASE("schema examples put auxiliary payloads before answers") {
  std::string basic = response_schema_example(StrategyKind::kBasicPq, {"Q2"});
  CHECK(basic == "{\n  \"answers\": {\n    \"Q2\": \"<answer>\"\n  }\n}");

  std::string rag = response_schema_example(StrategyKind::kImplicitRagPq, {"Q2"});
  CHECK(rag.find("\"sections\"") < rag.find("\"answers\""));
  std::string cot = response_schema_example(StrategyKind::kCotPq, {"Q2"});
  CHECK(cot.find("\"reasoning\"") < cot.find("\"answers\""));
  std::string ar = response_schema_example(StrategyKind::kArPq, {"Q2"});
  CHECK(ar.find("\"generated_examples\"") < ar.find("\"answers\""));

  std::string aq = response_schema_example(StrategyKind::kBasicAq, {"Q1", "Q2", "Q3", "Q4", "Q5"});
  for (const char* qid : {"Q1", "Q2", "Q3", "Q4", "Q5"}) {
    CHECK(aq.find("\"" + std::string(qid) + "\": \"<answer>\"") != std::string::npos);
  }
}

TEST_CASE("strategy ids and display names round-trip") {
  for (StrategyKind strategy : kAllStrategies) {
    auto parsed = strategy_from_id(strategy_id(strategy));
    REQUIRE(parsed.has_value());
    CHECK(*parsed == strategy);
    CHECK(!strategy_display_name(strategy).empty());
  }
  CHECK(!strategy_from_id("nope"));
  CHECK(binds_all_questions(StrategyKind::kBasicAq));
  CHECK(binds_all_questions(StrategyKind::kBasicTdAq));
  CHECK(!binds_all_questions(StrategyKind::kImplicitRagPq));
  CHECK(uses_term_definitions(StrategyKind::kBasicTdAq));
  CHECK(uses_term_definitions(StrategyKind::kBasicTdPq));
  CHECK(!uses_term_definitions(StrategyKind::kCotPq));
}

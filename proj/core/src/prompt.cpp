#include "paqa/prompt.hpp"

#include <unordered_set>

#include <json.hpp>

#include "paqa/errors.hpp"

namespace paqa {

namespace {

// Templates are embedded verbatim; the files under core/templates/ are the
// same bytes, and a test keeps the two in sync. Wording quirks ("muti-choice",
// "needs to answered") are transcribed as-is.

constexpr std::string_view kBasicAqTemplate =
    R"(You are a physician to review health record notes of a medical procedure request, then to choose the best answer for five muti-choice questions related to this request.

The list of multi-choice questions that need to be answered paired with their answer choices is listed below.

Question: {question_text_list}
Answer Choices: {choices_list}

Here are some health records notes from a doctor ordering diagnostic imaging for a patient.

Health Records:
###
{clinical_text}
###
)";

constexpr std::string_view kBasicTdAqTemplate =
    R"(You are a physician to review health record notes of a medical procedure request, then to choose the best answer for five muti-choice questions related to this request with the help of some medical term definitions. The relevant medical terms paired with definition are listed below.

Medical Term Definitions:
###
{term_definitions}
###

The list of multi-choice questions that need to be answered paired with their answer choices is listed below.

Question: {question_text_list}
Answer Choices: {choices_list}

Here are some health records notes from a doctor ordering diagnostic imaging for a patient.

Health Records:
###
{clinical_text}
###
)";

constexpr std::string_view kCotPqTemplate =
    R"(You are a physician to review health record notes of a medical procedure request, then to choose the best answer for the given multi-choice question related to this request.

The multi-choice question that needs to be answered paired with answer choices is listed below.

Question: {question_text}
Answer Choices: {choices}

Think step by step.

Here are some health records notes from a doctor ordering diagnostic imaging for a patient.

Health Records:
###
{clinical_text}
###
)";

constexpr std::string_view kArPqTemplate =
    R"(You are a physician to review health record notes of a medical procedure request, then to choose the best answer for the given multi-choice question related to this request. When presented with the multi-choice question, generate similar question-answer pairs as examples from health records notes. Afterward, proceed to solve the initial multi-choice question.

The initial multi-choice question that needs to answered paired with answer choices is listed below.

Question: {question_text}
Answer Choices: {choices}

Generate three examples of multi-choice question-answer pairs from health records notes that are similar to the initial multi-choice question. Your examples should be distinct from each other and from the initial multi-choice question.

Now, choose the best answer for the initial multi-choice question.

Here are some health records notes from a doctor ordering diagnostic imaging for a patient.

Health Records:
###
{clinical_text}
###
)";

constexpr std::string_view kImplicitRagPqTemplate =
    R"(You are a physician to review health record notes of a medical procedure request, then to choose the best answer for the given multi-choice question related to this request. When presented with the multi-choice question, identify relevant sections or text extracts from health records notes which may help in answering the multi-choice question. Afterward, proceed to solve the given multi-choice question.

The multi-choice question that needs to be answered paired with answer choices is listed below.

Question: {question_text}
Answer Choices: {choices}

Identify three most relevant sections or text extracts from health records notes that may help in answering the multi-choice question. The identified sections or text extracts should be distinct from each other. The identified sections or text extracts must be between 50 to 200 words long.

Now, choose the best answer for the given multi-choice question using the identified sections or text extracts.

Here are some health records notes from a doctor ordering diagnostic imaging for a patient.

Health Records:
###
{clinical_text}
###
)";

constexpr std::string_view kResponseFormatTemplate =
    R"(Respond with a single JSON object and no other text. The object must have exactly this structure:

{response_schema}

Each answer value must be exactly one of the answer choices listed above.
)";

void replace_all(std::string& text, std::string_view needle, std::string_view value) {
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    text.replace(pos, needle.size(), value);
    pos += value.size();
  }
}

std::string join_choices(const std::vector<AnswerChoice>& choices) {
  std::string out;
  for (std::size_t i = 0; i < choices.size(); ++i) {
    if (i > 0) out += ", ";
    out += to_canonical(choices[i]);
  }
  return out;
}

}  // namespace

std::string_view strategy_id(StrategyKind strategy) {
  switch (strategy) {
    case StrategyKind::kBasicAq: return "basic_aq";
    case StrategyKind::kBasicTdAq: return "basic_td_aq";
    case StrategyKind::kBasicPq: return "basic_pq";
    case StrategyKind::kBasicTdPq: return "basic_td_pq";
    case StrategyKind::kCotPq: return "cot_pq";
    case StrategyKind::kArPq: return "ar_pq";
    case StrategyKind::kImplicitRagPq: return "implicit_rag_pq";
  }
  return "?";
}

std::string_view strategy_display_name(StrategyKind strategy) {
  switch (strategy) {
    case StrategyKind::kBasicAq: return "Basic All Questions";
    case StrategyKind::kBasicTdAq: return "Basic with Term Definitions All Questions";
    case StrategyKind::kBasicPq: return "Basic Per Question";
    case StrategyKind::kBasicTdPq: return "Basic with Term Definitions Per Question";
    case StrategyKind::kCotPq: return "Chain-of-Thought Per Question";
    case StrategyKind::kArPq: return "Analogical Reasoning Per Question";
    case StrategyKind::kImplicitRagPq: return "Implicit RAG Per Question";
  }
  return "?";
}

std::optional<StrategyKind> strategy_from_id(std::string_view id) {
  for (StrategyKind s : kAllStrategies) {
    if (strategy_id(s) == id) return s;
  }
  return std::nullopt;
}

bool binds_all_questions(StrategyKind strategy) {
  return strategy == StrategyKind::kBasicAq || strategy == StrategyKind::kBasicTdAq;
}

bool uses_term_definitions(StrategyKind strategy) {
  return strategy == StrategyKind::kBasicTdAq || strategy == StrategyKind::kBasicTdPq;
}

std::string_view output_schema_id(StrategyKind strategy) {
  switch (strategy) {
    case StrategyKind::kCotPq: return "answers+reasoning/v1";
    case StrategyKind::kArPq: return "answers+examples/v1";
    case StrategyKind::kImplicitRagPq: return "answers+sections/v1";
    default: return "answers/v1";
  }
}

std::string golden_template(StrategyKind strategy) {
  switch (strategy) {
    case StrategyKind::kBasicAq:
    case StrategyKind::kBasicPq: return std::string(kBasicAqTemplate);
    case StrategyKind::kBasicTdAq:
    case StrategyKind::kBasicTdPq: return std::string(kBasicTdAqTemplate);
    case StrategyKind::kCotPq: return std::string(kCotPqTemplate);
    case StrategyKind::kArPq: return std::string(kArPqTemplate);
    case StrategyKind::kImplicitRagPq: return std::string(kImplicitRagPqTemplate);
  }
  return {};
}

std::string response_format_template() { return std::string(kResponseFormatTemplate); }

PromptBindings make_bindings(StrategyKind strategy, const std::vector<GuidelineQuestion>& questions,
                             const PatientRecord& record) {
  const bool all_questions = binds_all_questions(strategy);
  if (all_questions && questions.size() != 5) {
    throw Error("strategy " + std::string(strategy_id(strategy)) + " binds exactly 5 questions, got " +
                std::to_string(questions.size()));
  }
  if (!all_questions && questions.size() != 1) {
    throw Error("strategy " + std::string(strategy_id(strategy)) + " binds exactly 1 question, got " +
                std::to_string(questions.size()));
  }

  PromptBindings b;
  b.clinical_text = record.text;
  if (all_questions) {
    for (std::size_t i = 0; i < questions.size(); ++i) {
      if (i > 0) {
        b.question_text_list += '\n';
        b.choices_list += '\n';
      }
      b.question_text_list += questions[i].question_id + ": " + questions[i].text;
      b.choices_list += questions[i].question_id + ": " + join_choices(questions[i].choices);
    }
  } else {
    b.question_text = questions.front().text;
    b.choices = join_choices(questions.front().choices);
    // The shared figure template for basic PQ still uses the *_list names.
    b.question_text_list = b.question_text;
    b.choices_list = b.choices;
  }

  if (uses_term_definitions(strategy)) {
    std::unordered_set<std::string> seen_terms;
    for (const auto& q : questions) {
      for (const auto& td : q.term_definitions) {
        if (!seen_terms.insert(td.term).second) continue;
        if (!b.term_definitions.empty()) b.term_definitions += '\n';
        b.term_definitions += td.term + ": " + td.definition;
      }
    }
    if (b.term_definitions.empty()) {
      throw Error("strategy " + std::string(strategy_id(strategy)) +
                  " requires at least one bound question with term definitions");
    }
  }
  return b;
}

std::string apply_bindings(std::string_view template_text, const PromptBindings& bindings) {
  std::string out(template_text);
  replace_all(out, "{question_text_list}", bindings.question_text_list);
  replace_all(out, "{choices_list}", bindings.choices_list);
  replace_all(out, "{question_text}", bindings.question_text);
  replace_all(out, "{choices}", bindings.choices);
  replace_all(out, "{term_definitions}", bindings.term_definitions);
  replace_all(out, "{clinical_text}", bindings.clinical_text);
  return out;
}

std::string response_schema_example(StrategyKind strategy,
                                    const std::vector<std::string>& question_ids) {
  using ordered_json = nlohmann::ordered_json;
  ordered_json schema = ordered_json::object();
  // Auxiliary payloads come first so the model produces them before the
  // final answer.
  switch (strategy) {
    case StrategyKind::kCotPq:
      schema["reasoning"] = "<your step-by-step reasoning>";
      break;
    case StrategyKind::kArPq:
      schema["generated_examples"] = ordered_json::array(
          {ordered_json{{"question", "<generated question>"}, {"answer", "<its answer>"}},
           ordered_json{{"question", "<generated question>"}, {"answer", "<its answer>"}},
           ordered_json{{"question", "<generated question>"}, {"answer", "<its answer>"}}});
      break;
    case StrategyKind::kImplicitRagPq:
      schema["sections"] = ordered_json::array(
          {"<relevant text extract>", "<relevant text extract>", "<relevant text extract>"});
      break;
    default:
      break;
  }
  ordered_json answers = ordered_json::object();
  for (const auto& qid : question_ids) answers[qid] = "<answer>";
  schema["answers"] = std::move(answers);
  return schema.dump(2);
}

RenderedPrompt render(StrategyKind strategy, const std::vector<GuidelineQuestion>& questions,
                      const PatientRecord& record) {
  PromptBindings bindings = make_bindings(strategy, questions, record);

  RenderedPrompt prompt;
  prompt.strategy = strategy;
  prompt.record_id = record.record_id;
  for (const auto& q : questions) prompt.question_ids.push_back(q.question_id);
  prompt.output_schema_id = std::string(output_schema_id(strategy));

  std::string format_block(kResponseFormatTemplate);
  replace_all(format_block, "{response_schema}",
              response_schema_example(strategy, prompt.question_ids));

  prompt.text = apply_bindings(golden_template(strategy), bindings);
  prompt.text += '\n';
  prompt.text += format_block;
  return prompt;
}

}  // namespace paqa

#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "paqa/corpus.hpp"

namespace paqa {

// The seven prompting strategies. AQ variants bind all five questions in a
// single prompt; PQ variants bind exactly one.
enum class StrategyKind {
  kBasicAq,
  kBasicTdAq,
  kBasicPq,
  kBasicTdPq,
  kCotPq,
  kArPq,
  kImplicitRagPq,
};

inline constexpr std::array<StrategyKind, 7> kAllStrategies = {
    StrategyKind::kBasicAq,  StrategyKind::kBasicTdAq, StrategyKind::kBasicPq,
    StrategyKind::kBasicTdPq, StrategyKind::kCotPq,    StrategyKind::kArPq,
    StrategyKind::kImplicitRagPq,
};

// Stable identifier used in file names, config values, and outcome lines.
std::string_view strategy_id(StrategyKind strategy);

// Human-readable name used in report tables.
std::string_view strategy_display_name(StrategyKind strategy);

std::optional<StrategyKind> strategy_from_id(std::string_view id);

bool binds_all_questions(StrategyKind strategy);  // AQ vs PQ
bool uses_term_definitions(StrategyKind strategy);

// Identifier of the response-format block appended to each prompt.
std::string_view output_schema_id(StrategyKind strategy);

struct RenderedPrompt {
  StrategyKind strategy = StrategyKind::kBasicAq;
  std::string record_id;
  std::vector<std::string> question_ids;
  std::string text;
  std::string output_schema_id;
};

// Unsubstituted strategy template; byte-identical to the checked-in file
// under core/templates/<strategy_id>.txt.
std::string golden_template(StrategyKind strategy);

// The response-format instruction block (core/templates/response_format.txt),
// with its {response_schema} placeholder unsubstituted.
std::string response_format_template();

// Placeholder values computed from the bound questions and record. Exposed so
// tests can substitute into the checked-in template files independently of
// render().
struct PromptBindings {
  std::string question_text_list;
  std::string choices_list;
  std::string question_text;
  std::string choices;
  std::string term_definitions;
  std::string clinical_text;
};

PromptBindings make_bindings(StrategyKind strategy, const std::vector<GuidelineQuestion>& questions,
                             const PatientRecord& record);

// Replaces every {placeholder} occurrence; leaves unknown text untouched.
std::string apply_bindings(std::string_view template_text, const PromptBindings& bindings);

// JSON skeleton the model is instructed to emit, e.g.
// {"sections": [...], "answers": {"Q2": "<answer>"}} for implicit RAG.
std::string response_schema_example(StrategyKind strategy,
                                    const std::vector<std::string>& question_ids);

// Substitutes the strategy template and appends the response-format block.
// Pure function of its inputs. Throws Error on wrong question arity or on a
// term-definition strategy with no definitions among the bound questions.
RenderedPrompt render(StrategyKind strategy, const std::vector<GuidelineQuestion>& questions,
                      const PatientRecord& record);

}  // namespace paqa

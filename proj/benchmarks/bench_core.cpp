#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "paqa/corpus.hpp"
#include "paqa/eval.hpp"
#include "paqa/gateway.hpp"
#include "paqa/parser.hpp"
#include "paqa/prompt.hpp"
#include "paqa/tokenizer.hpp"

namespace {

std::string synthetic_note(std::size_t words, std::uint32_t seed = 1) {
  static const char* kVocab[] = {"patient", "reports",  "lumbar",   "pain",     "therapy",
                                 "weeks",   "improved", "MRI",      "denied",   "physical",
                                 "exam,",   "notes:",   "followup", "ordered.", "stable"};
  std::mt19937 rng(seed);
  std::string text;
  for (std::size_t i = 0; i < words; ++i) {
    if (i > 0) text += ' ';
    text += kVocab[rng() % (sizeof(kVocab) / sizeof(kVocab[0]))];
  }
  return text;
}

void BM_TokenCount(benchmark::State& state) {
  std::string text = synthetic_note(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(paqa::token_count(text));
  }
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) *
                          static_cast<int64_t>(text.size()));
}
BENCHMARK(BM_TokenCount)->Arg(1000)->Arg(10000)->Arg(40000);

void BM_RenderPrompt(benchmark::State& state) {
  auto questions = paqa::default_question_set();
  std::vector<paqa::GuidelineQuestion> bound = {questions[0]};
  paqa::PatientRecord record =
      paqa::PatientRecord::make("bench", synthetic_note(static_cast<std::size_t>(state.range(0))));
  for (auto _ : state) {
    benchmark::DoNotOptimize(paqa::render(paqa::StrategyKind::kCotPq, bound, record));
  }
}
BENCHMARK(BM_RenderPrompt)->Arg(500)->Arg(5000);

void BM_ParseStrictJson(benchmark::State& state) {
  auto questions = paqa::default_question_set();
  std::string raw = "Here is the result you asked for:\n" + synthetic_note(80, 2) +
                    "\n{\"answers\":{\"Q1\":\"Y\",\"Q2\":\"N\",\"Q3\":\"NA\",\"Q4\":\"Y\","
                    "\"Q5\":\"N\"}}\n";
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        paqa::parse_response("bench", raw, paqa::StrategyKind::kBasicAq, questions));
  }
}
BENCHMARK(BM_ParseStrictJson);

void BM_ParseLenientScan(benchmark::State& state) {
  auto questions = paqa::default_question_set();
  std::vector<paqa::GuidelineQuestion> bound = {questions[1]};
  std::string raw = synthetic_note(200, 3) + "\nAfter reviewing the notes, Q2: Not Applicable\n";
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        paqa::parse_response("bench", raw, paqa::StrategyKind::kBasicPq, bound));
  }
}
BENCHMARK(BM_ParseLenientScan);

void BM_WeightedF1(benchmark::State& state) {
  std::mt19937 rng(4);
  const paqa::AnswerChoice palette[] = {paqa::AnswerChoice::kYes, paqa::AnswerChoice::kNo,
                                        paqa::AnswerChoice::kNotApplicable};
  std::vector<paqa::AnswerChoice> gold(static_cast<std::size_t>(state.range(0)));
  std::vector<paqa::AnswerChoice> pred(gold.size());
  for (std::size_t i = 0; i < gold.size(); ++i) {
    gold[i] = palette[rng() % 3];
    pred[i] = palette[rng() % 3];
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(paqa::weighted_f1(gold, pred));
  }
}
BENCHMARK(BM_WeightedF1)->Arg(500);

void BM_TruncateToBudget(benchmark::State& state) {
  paqa::PatientRecord record = paqa::PatientRecord::make("bench", synthetic_note(40000, 5));
  paqa::CompletionConfig config;  // 32k window, 1000 max_tokens
  for (auto _ : state) {
    benchmark::DoNotOptimize(paqa::truncate_to_budget(record, 500, config));
  }
}
BENCHMARK(BM_TruncateToBudget);

}  // namespace

BENCHMARK_MAIN();

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <string>

#include "paqa/tokenizer.hpp"

using namespace paqa;

TEST_CASE("empty and whitespace-only text has zero tokens") {
  CHECK(token_count("") == 0);
  CHECK(token_count("   \t\n\r  ") == 0);
  CHECK(tokenize_spans("").empty());
}

TEST_CASE("words split on whitespace") {
  CHECK(token_count("hello world") == 2);
  CHECK(token_count("one") == 1);
  CHECK(token_count("  leading and trailing  ") == 3);
  CHECK(token_count("line\nbreaks\tand tabs") == 4);
}

TEST_CASE("punctuation runs are single tokens") {
  CHECK(token_count("###") == 1);
  CHECK(token_count("### text ###") == 3);
  CHECK(token_count("a.b") == 3);     // a . b
  CHECK(token_count("...") == 1);
  CHECK(token_count("a,, b") == 3);   // a ,, b
  CHECK(token_count("don't") == 3);   // don ' t
  CHECK(token_count("x_1 y-2") == 4); // x_1 | y | - | 2
}

TEST_CASE("word and punctuation runs alternate without merging") {
  auto spans = tokenize_spans("ab!!cd");
  REQUIRE(spans.size() == 3);
  CHECK(spans[0].begin == 0);
  CHECK(spans[0].end == 2);
  CHECK(spans[1].begin == 2);
  CHECK(spans[1].end == 4);
  CHECK(spans[2].begin == 4);
  CHECK(spans[2].end == 6);
}

TEST_CASE("spans cover each token exactly and agree with token_count") {
  std::mt19937 rng(20240817);
  const std::string alphabet = "ab #.\t,xyz_09!\n";
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    const std::size_t len = rng() % 120;
    for (std::size_t i = 0; i < len; ++i) text.push_back(alphabet[rng() % alphabet.size()]);

    auto spans = tokenize_spans(text);
    CHECK(spans.size() == token_count(text));
    std::size_t prev_end = 0;
    for (const TokenSpan& span : spans) {
      CHECK(span.begin < span.end);
      CHECK(span.begin >= prev_end);
      CHECK(span.end <= text.size());
      // Gap between tokens is whitespace only.
      for (std::size_t i = prev_end; i < span.begin; ++i) {
        CHECK(std::string(" \t\n\r\f\v").find(text[i]) != std::string::npos);
      }
      prev_end = span.end;
    }
  }
}

TEST_CASE("tokenizer is total over arbitrary bytes") {
  std::mt19937 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    std::string text;
    const std::size_t len = rng() % 200;
    for (std::size_t i = 0; i < len; ++i) text.push_back(static_cast<char>(rng() % 256));
    auto spans = tokenize_spans(text);
    CHECK(spans.size() == token_count(text));
  }
}

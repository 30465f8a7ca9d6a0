#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace paqa {

// Byte range [begin, end) of one token within the source text.
struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Deterministic whitespace-plus-punctuation tokenizer used everywhere a token
// count is needed (corpus statistics, budget estimates, truncation).
//
// A token is either a maximal run of [A-Za-z0-9_] bytes or a maximal run of
// non-whitespace punctuation bytes. Keeping punctuation runs whole means
// markers like "###" are single tokens and a truncation cut can never land
// inside one. Total on every input; empty text has zero tokens.
std::size_t token_count(std::string_view text);

std::vector<TokenSpan> tokenize_spans(std::string_view text);

}  // namespace paqa

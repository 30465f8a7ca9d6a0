#include "paqa/tokenizer.hpp"

namespace paqa {

namespace {

enum class ByteClass { kSpace, kWord, kPunct };

ByteClass classify(unsigned char c) {
  if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') {
    return ByteClass::kSpace;
  }
  if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_') {
    return ByteClass::kWord;
  }
  return ByteClass::kPunct;
}

}  // namespace

std::size_t token_count(std::string_view text) {
  std::size_t count = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    ByteClass cls = classify(static_cast<unsigned char>(text[i]));
    if (cls == ByteClass::kSpace) {
      ++i;
      continue;
    }
    ++count;
    std::size_t j = i + 1;
    while (j < text.size() && classify(static_cast<unsigned char>(text[j])) == cls) ++j;
    i = j;
  }
  return count;
}

std::vector<TokenSpan> tokenize_spans(std::string_view text) {
  std::vector<TokenSpan> spans;
  std::size_t i = 0;
  while (i < text.size()) {
    ByteClass cls = classify(static_cast<unsigned char>(text[i]));
    if (cls == ByteClass::kSpace) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < text.size() && classify(static_cast<unsigned char>(text[j])) == cls) ++j;
    spans.push_back({i, j});
    i = j;
  }
  return spans;
}

}  // namespace paqa

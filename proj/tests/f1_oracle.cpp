#include "f1_oracle.hpp"

#include <set>
#include <stdexcept>

namespace paqa::testing {

double brute_force_f1_oracle(const std::vector<AnswerChoice>& gold,
                             const std::vector<AnswerChoice>& pred) {
  if (gold.empty()) throw std::invalid_argument("oracle: empty inputs");
  if (gold.size() != pred.size()) throw std::invalid_argument("oracle: length mismatch");

  std::set<AnswerChoice> classes(gold.begin(), gold.end());
  double total = 0.0;
  for (AnswerChoice c : classes) {
    long long tp = 0, fp = 0, fn = 0, support = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      const bool g = gold[i] == c;
      const bool p = pred[i] == c;
      if (g) ++support;
      if (g && p) ++tp;
      if (!g && p) ++fp;
      if (g && !p) ++fn;
    }
    const long long denom = 2 * tp + fp + fn;
    const double f1 = denom == 0 ? 0.0 : (2.0 * static_cast<double>(tp)) / static_cast<double>(denom);
    total += (static_cast<double>(support) / static_cast<double>(gold.size())) * f1;
  }
  return total;
}

}  // namespace paqa::testing

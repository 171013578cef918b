#pragma once

// Small helpers shared by the unit tests: a seeded generator for hand-rolled
// property checks and tolerance comparisons.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace test {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : eng_(seed) {}

  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng_); }
  std::uint64_t u64() { return eng_(); }
  bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(eng_); }

  template <typename T>
  T pick(std::initializer_list<T> values) {
    auto it = values.begin();
    std::advance(it, integer(0, static_cast<int>(values.size()) - 1));
    return *it;
  }

  // Positive weights normalized to one, optionally with exact zeros.
  std::vector<double> simplex(std::size_t n, double zero_prob = 0.0) {
    std::vector<double> w(n);
    double total = 0.0;
    for (auto& v : w) {
      v = coin(zero_prob) ? 0.0 : real(0.01, 1.0);
      total += v;
    }
    if (total == 0.0) {
      w[0] = 1.0;
      total = 1.0;
    }
    for (auto& v : w) v /= total;
    return w;
  }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

inline bool rel_close(double a, double b, double rel) {
  const double scale = std::max({1.0, std::abs(a), std::abs(b)});
  return std::abs(a - b) <= rel * scale;
}

}  // namespace test

#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <string_view>

namespace acipf {

// Deterministic random stream addressed by (seed, label, indices...).
//
// The generator is xoshiro256** seeded through splitmix64. A stream's key is
// fixed at construction, so derive() yields the same child no matter how many
// draws the parent has already produced. That is what makes per-particle
// substreams independent of thread scheduling.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t seed, std::string_view label = {},
                        std::initializer_list<std::uint64_t> indices = {});

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  // Standard normal draw.
  double normal();

  RandomStream derive(std::initializer_list<std::uint64_t> indices) const;
  RandomStream derive(std::string_view label,
                      std::initializer_list<std::uint64_t> indices = {}) const;

  std::uint64_t key() const { return key_; }

 private:
  struct FromKey {};
  RandomStream(FromKey, std::uint64_t key);
  void seed_state();

  std::uint64_t key_ = 0;
  std::uint64_t s_[4] = {};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t hash_label(std::string_view label);

}  // namespace acipf

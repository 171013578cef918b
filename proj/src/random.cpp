#include "acipf/random.hpp"

namespace acipf {

namespace {

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

std::uint64_t mix(std::uint64_t key, std::uint64_t value) {
  std::uint64_t state = key ^ (value + 0x9E3779B97F4A7C15ULL + (key << 6) + (key >> 2));
  return splitmix64(state);
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// FNV-1a
std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

RandomStream::RandomStream(std::uint64_t seed, std::string_view label,
                           std::initializer_list<std::uint64_t> indices) {
  key_ = mix(mix(0x5EEDULL, seed), hash_label(label));
  for (auto i : indices) key_ = mix(key_, i);
  seed_state();
}

RandomStream::RandomStream(FromKey, std::uint64_t key) : key_(key) { seed_state(); }

void RandomStream::seed_state() {
  std::uint64_t sm = key_;
  for (auto& word : s_) word = splitmix64(sm);
}

RandomStream::result_type RandomStream::operator()() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double RandomStream::uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

double RandomStream::normal() { return normal_(*this); }

RandomStream RandomStream::derive(std::initializer_list<std::uint64_t> indices) const {
  std::uint64_t k = key_;
  for (auto i : indices) k = mix(k, i);
  return RandomStream(FromKey{}, mix(k, 0xD1B54A32D192ED03ULL));
}

RandomStream RandomStream::derive(std::string_view label,
                                  std::initializer_list<std::uint64_t> indices) const {
  std::uint64_t k = mix(key_, hash_label(label));
  for (auto i : indices) k = mix(k, i);
  return RandomStream(FromKey{}, mix(k, 0xD1B54A32D192ED03ULL));
}

}  // namespace acipf

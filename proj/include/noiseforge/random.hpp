#pragma once

#include <cstdint>
#include <string_view>

namespace noiseforge {

/// SplitMix64 finalizer. Bijective avalanche mix of a 64-bit word.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// FNV-1a over the bytes of a string.
constexpr std::uint64_t hash_string(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Order-dependent combination of two words into a new key.
constexpr std::uint64_t combine_keys(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ (mix64(b) + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

/// Noise stage tags; each stage draws from its own stream family.
enum class StreamTag : std::uint64_t { quantum = 0x51, electronic = 0x45 };

/// Counter-based random stream. The n-th output is a pure function of
/// (key, n), so any pixel's stream can be materialized independently of
/// iteration order or worker count.
class CounterStream {
 public:
  explicit CounterStream(std::uint64_t key) : key_(key) {}

  /// Stream for one pixel of one stage of one image.
  static CounterStream for_pixel(std::uint64_t image_key, StreamTag tag, std::uint64_t pixel) {
    return CounterStream(combine_keys(combine_keys(image_key, static_cast<std::uint64_t>(tag)), pixel));
  }

  std::uint64_t next_u64() {
    ++counter_;
    return mix64(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in (0, 1].
  double uniform_positive() { return 1.0 - uniform(); }

  std::uint64_t draws() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Key identifying one image's noise under a global seed.
inline std::uint64_t image_stream_key(std::uint64_t seed, std::string_view image_id) {
  return combine_keys(seed, hash_string(image_id));
}

}  // namespace noiseforge

#pragma once

// Counter-based random streams.
//
// A stream is identified by (master_seed, path). Its key is a hash of the seed
// and every path element; draw i is a SplitMix64 finalisation of key + i*phi.
// Nothing depends on global state or on std:: distribution objects, so draws
// are bit-identical across platforms, compilers and thread schedules.

#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace spinbath {

// SplitMix64 output function (Steele, Lea & Flood).
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t golden_gamma = 0x9e3779b97f4a7c15ULL;

// Uniform double in [0, 1) from the top 53 bits.
constexpr double to_unit_double(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Stateless keyed hash: the i-th draw of the stream with the given key.
constexpr std::uint64_t keyed_draw(std::uint64_t key, std::uint64_t counter) {
  return mix64(key + (counter + 1) * golden_gamma);
}

class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::span<const std::uint64_t> path);
  RngStream(std::uint64_t master_seed, std::initializer_list<std::uint64_t> path)
      : RngStream(master_seed, std::span<const std::uint64_t>(path.begin(), path.size())) {}

  std::uint64_t master_seed() const { return master_seed_; }
  const std::vector<std::uint64_t>& path() const { return path_; }
  std::uint64_t key() const { return key_; }

  // Stream for path + {child}.
  RngStream child(std::uint64_t id) const;

  std::uint64_t next_u64() { return keyed_draw(key_, counter_++); }
  double uniform() { return to_unit_double(next_u64()); }
  // Uniform in the open interval (0, 1).
  double uniform_open();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller; the second variate is cached.
  double normal();

 private:
  std::uint64_t master_seed_;
  std::vector<std::uint64_t> path_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

// Throws InvalidArgument for an empty path.
RngStream derive_stream(std::uint64_t master_seed, std::span<const std::uint64_t> path);
RngStream derive_stream(std::uint64_t master_seed, std::initializer_list<std::uint64_t> path);

// Key of a stream without constructing it (used for per-site hashing).
std::uint64_t stream_key(std::uint64_t master_seed, std::span<const std::uint64_t> path);

// Fixed identifiers for the second path element of per-realization streams.
namespace stream_ids {
inline constexpr std::uint64_t crystal = 1;
inline constexpr std::uint64_t quadrupole = 2;
inline constexpr std::uint64_t measurement_noise = 3;
}  // namespace stream_ids

}  // namespace spinbath

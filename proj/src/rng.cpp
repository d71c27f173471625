#include "spinbath/rng.hpp"

#include <cmath>

#include "spinbath/core.hpp"

namespace spinbath {

std::uint64_t stream_key(std::uint64_t master_seed, std::span<const std::uint64_t> path) {
  std::uint64_t key = mix64(master_seed ^ 0x5851f42d4c957f2dULL);
  std::uint64_t depth = 0;
  for (std::uint64_t element : path) {
    ++depth;
    key = mix64(key + golden_gamma * depth) ^ mix64(element + 0x2545f4914f6cdd1dULL * depth);
    key = mix64(key);
  }
  return key;
}

RngStream::RngStream(std::uint64_t master_seed, std::span<const std::uint64_t> path)
    : master_seed_(master_seed),
      path_(path.begin(), path.end()),
      key_(stream_key(master_seed, path)) {}

RngStream RngStream::child(std::uint64_t id) const {
  std::vector<std::uint64_t> p = path_;
  p.push_back(id);
  return RngStream(master_seed_, p);
}

double RngStream::uniform_open() {
  double u = 0.0;
  do {
    u = uniform();
  } while (u == 0.0);
  return u;
}

double RngStream::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  const double u1 = uniform_open();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double phase = constants::two_pi * u2;
  cached_normal_ = r * std::sin(phase);
  has_cached_normal_ = true;
  return r * std::cos(phase);
}

RngStream derive_stream(std::uint64_t master_seed, std::span<const std::uint64_t> path) {
  if (path.empty()) throw InvalidArgument("derive_stream: path must be non-empty");
  return RngStream(master_seed, path);
}

RngStream derive_stream(std::uint64_t master_seed, std::initializer_list<std::uint64_t> path) {
  return derive_stream(master_seed, std::span<const std::uint64_t>(path.begin(), path.size()));
}

}  // namespace spinbath

#pragma once

// Decay normalisation, lobe-approximation spectral inversion and T2 extraction.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spinbath/filter_function.hpp"

namespace spinbath {

struct DecayCurve {
  SequenceKind kind = SequenceKind::CPn;
  int n = 10;
  double b_tesla = 0.0;
  std::vector<double> tau;        // s, strictly increasing
  std::vector<double> p_singlet;  // may be empty when chi is given
  std::vector<double> chi;        // +inf marks censored points
  double p0 = 1.0;
  double p_inf = 0.5;
  std::uint64_t seed = 0;
  std::string device_id;

  PulseSequence sequence() const;
  std::vector<double> total_times() const;
  void validate() const;
};

// chi = -ln[(P - P_inf) / (P0 - P_inf)]; P <= P_inf gives +inf.
std::vector<double> normalize_decay(const DecayCurve& curve);

struct NoiseSpectrum {
  std::vector<double> f;        // Hz, increasing
  std::vector<double> s_freq;   // summed over both dots, Hz
  std::vector<double> s_field;  // summed over both dots, T^2/Hz
  std::vector<bool> censored;
  std::vector<double> lobe_bandwidth;  // Hz
};

// Lobe integral of the CPn central filter in units of n tau.
inline constexpr double cpn_lobe_weight = 0.732;

// S(f) = 8 f chi(n / 2f) / (0.732 n) at f = 1/(4 tau). Field units multiply by
// (hbar / g mu_B)^2.
NoiseSpectrum invert_spectrum(std::span<const double> tau, std::span<const double> chi, int n);
NoiseSpectrum invert_spectrum(const DecayCurve& curve);

// First upward crossing of chi = 1, interpolating ln chi linearly in ln t.
double extract_t2(std::span<const double> t, std::span<const double> chi);
double extract_t2(const DecayCurve& curve);

// 73Ge Larmor frequency and its first harmonic, Hz.
std::pair<double, double> peak_locations(double b_tesla);

// Interior strict local maxima of finite, uncensored values (plateaus count
// once, at their first index).
std::vector<std::size_t> local_maxima(std::span<const double> values, const std::vector<bool>& censored = {});

}  // namespace spinbath

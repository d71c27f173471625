#include "spinbath/spectroscopy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace spinbath {

namespace {
constexpr double inf = std::numeric_limits<double>::infinity();
}

PulseSequence DecayCurve::sequence() const {
  switch (kind) {
    case SequenceKind::FID: return PulseSequence::fid();
    case SequenceKind::HE: return PulseSequence::hahn();
    case SequenceKind::CPn: return PulseSequence::cp(n);
  }
  return PulseSequence::fid();
}

std::vector<double> DecayCurve::total_times() const {
  const auto seq = sequence();
  std::vector<double> t;
  t.reserve(tau.size());
  for (double x : tau) t.push_back(seq.total_time(x));
  return t;
}

void DecayCurve::validate() const {
  sequence();
  if (tau.empty()) throw InvalidArgument("decay curve has no samples");
  for (std::size_t i = 0; i < tau.size(); ++i) {
    if (!(tau[i] > 0.0) || !std::isfinite(tau[i])) throw InvalidArgument("tau must be positive and finite");
    if (i > 0 && !(tau[i] > tau[i - 1])) throw InvalidArgument("tau grid must increase strictly");
  }
  if (!p_singlet.empty()) {
    if (p_singlet.size() != tau.size()) throw InvalidArgument("P_S and tau lengths differ");
    for (double p : p_singlet)
      if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("P_S outside [0, 1]");
  }
  if (!chi.empty() && chi.size() != tau.size()) throw InvalidArgument("chi and tau lengths differ");
}

std::vector<double> normalize_decay(const DecayCurve& curve) {
  if (!(curve.p0 > curve.p_inf)) throw InvalidArgument("inverted contrast: P0 must exceed P_inf");
  curve.validate();
  if (curve.p_singlet.empty()) throw InvalidArgument("decay curve has no P_S samples");
  std::vector<double> chi;
  chi.reserve(curve.p_singlet.size());
  const double contrast = curve.p0 - curve.p_inf;
  for (double p : curve.p_singlet) {
    const double x = p - curve.p_inf;
    if (x <= 0.0) {
      chi.push_back(inf);
      continue;
    }
    const double v = -std::log(x / contrast);
    chi.push_back(v == 0.0 ? 0.0 : v);
  }
  return chi;
}

NoiseSpectrum invert_spectrum(std::span<const double> tau, std::span<const double> chi, int n) {
  if (n < 2 || n % 2 != 0) throw InvalidArgument("inversion defined for CPn (even n >= 2)");
  if (tau.size() != chi.size()) throw InvalidArgument("tau and chi lengths differ");
  const double field = constants::hbar / (constants::g_electron * constants::mu_b);
  std::vector<std::size_t> order(tau.size());
  std::iota(order.begin(), order.end(), 0);
  // Largest tau first gives increasing f.
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return tau[a] > tau[b]; });
  NoiseSpectrum s;
  for (std::size_t i : order) {
    if (!(tau[i] > 0.0)) throw InvalidArgument("tau must be positive");
    const double f = 1.0 / (4.0 * tau[i]);
    const bool cens = !std::isfinite(chi[i]);
    if (!cens && chi[i] < 0.0) throw InvalidArgument("negative chi");
    const double sf = cens ? inf : 8.0 * f * chi[i] / (cpn_lobe_weight * n);
    s.f.push_back(f);
    s.s_freq.push_back(sf);
    s.s_field.push_back(cens ? inf : sf * field * field);
    s.censored.push_back(cens);
    s.lobe_bandwidth.push_back(4.0 * f / n);
  }
  return s;
}

NoiseSpectrum invert_spectrum(const DecayCurve& curve) {
  if (curve.kind != SequenceKind::CPn) throw InvalidArgument("inversion defined for CPn");
  curve.validate();
  const auto chi = curve.chi.empty() ? normalize_decay(curve) : curve.chi;
  return invert_spectrum(curve.tau, chi, curve.n);
}

double extract_t2(std::span<const double> t, std::span<const double> chi) {
  if (t.size() != chi.size() || t.empty()) throw InvalidArgument("extract_t2: t and chi lengths differ");
  for (std::size_t i = 0; i < t.size(); ++i)
    if (!(t[i] > 0.0) || (i > 0 && !(t[i] > t[i - 1]))) throw InvalidArgument("extract_t2: t must increase");
  if (chi[0] >= 1.0) throw NumericalError("T2 before sweep start: chi >= 1 at the first point");
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    if (!(chi[i] < 1.0 && chi[i + 1] >= 1.0)) continue;
    if (!std::isfinite(chi[i + 1])) return t[i + 1];
    const double l0 = std::log(t[i]), l1 = std::log(t[i + 1]);
    double w;
    if (chi[i] > 0.0)
      w = (0.0 - std::log(chi[i])) / (std::log(chi[i + 1]) - std::log(chi[i]));
    else
      w = (1.0 - chi[i]) / (chi[i + 1] - chi[i]);
    return std::exp(l0 + w * (l1 - l0));
  }
  throw NumericalError("T2 beyond sweep: chi never reaches 1");
}

double extract_t2(const DecayCurve& curve) {
  curve.validate();
  const auto chi = curve.chi.empty() ? normalize_decay(curve) : curve.chi;
  const auto t = curve.total_times();
  return extract_t2(t, chi);
}

std::pair<double, double> peak_locations(double b_tesla) {
  if (!(b_tesla >= 0.0)) throw InvalidArgument("peak_locations: field must be >= 0");
  const double f1 = constants::gamma_ge73 / constants::two_pi * b_tesla;
  return {f1, 2.0 * f1};
}

std::vector<std::size_t> local_maxima(std::span<const double> v, const std::vector<bool>& censored) {
  auto bad = [&](std::size_t i) { return !std::isfinite(v[i]) || (!censored.empty() && censored[i]); };
  std::vector<std::size_t> out;
  std::size_t i = 1;
  while (i + 1 < v.size()) {
    if (bad(i) || bad(i - 1)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < v.size() && !bad(j + 1) && v[j + 1] == v[i]) ++j;
    if (j + 1 < v.size() && !bad(j + 1) && v[i - 1] < v[i] && v[j + 1] < v[j]) out.push_back(i);
    i = j + 1;
  }
  return out;
}

}  // namespace spinbath

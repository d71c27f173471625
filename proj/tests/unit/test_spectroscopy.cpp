#include <cmath>
#include <limits>

#include "doctest.h"
#include "oracles/analytic.hpp"
#include "spinbath/quadrupole.hpp"
#include "spinbath/spectroscopy.hpp"
#include "support/gen.hpp"

using namespace spinbath;

namespace {
constexpr double inf = std::numeric_limits<double>::infinity();

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> v;
  for (int k = 0; k < n; ++k) v.push_back(lo * std::pow(hi / lo, k / (n - 1.0)));
  return v;
}
}  // namespace

TEST_CASE("decay normalisation") {
  DecayCurve c;
  c.tau = {1e-6, 2e-6, 3e-6, 4e-6};
  c.p0 = 0.9;
  c.p_inf = 0.55;
  c.p_singlet = {0.9, 0.55 + 0.35 / std::exp(1.0), 0.55, 0.3};
  const auto chi = normalize_decay(c);
  CHECK(chi[0] == 0.0);
  CHECK(chi[1] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::isinf(chi[2]));
  CHECK(std::isinf(chi[3]));
  c.p0 = 0.5;
  CHECK_THROWS_WITH_AS(normalize_decay(c), doctest::Contains("inverted contrast"), InvalidArgument);
  gen::for_all(100, 71, [](gen::Gen& g, int) {
    DecayCurve d;
    std::vector<double> chi0;
    for (int k = 0; k < 20; ++k) {
      d.tau.push_back(1e-6 * (k + 1));
      chi0.push_back(g.uniform(0.0, 20.0));
      d.p_singlet.push_back(0.5 * (1.0 + std::exp(-chi0.back())));
    }
    const auto chi = normalize_decay(d);
    for (int k = 0; k < 20; ++k) CHECK(chi[k] == doctest::Approx(chi0[k]).epsilon(1e-6));
  });
  DecayCurve bad;
  bad.tau = {2e-6, 1e-6};
  bad.p_singlet = {1.0, 0.9};
  CHECK_THROWS_AS(normalize_decay(bad), InvalidArgument);
}

TEST_CASE("spectral inversion examples") {
  const auto tau = log_grid(1e-7, 1e-4, 30);
  const std::vector<double> ones(tau.size(), 1.0);
  const auto s = invert_spectrum(tau, ones, 10);
  const double to_field = std::pow(oracle::hbar / (2.0 * oracle::mu_b), 2);
  for (std::size_t i = 0; i < s.f.size(); ++i) {
    CHECK(s.s_freq[i] == doctest::Approx(8.0 * s.f[i] / 7.32).epsilon(1e-14));
    CHECK(s.s_field[i] == doctest::Approx(s.s_freq[i] * to_field).epsilon(1e-14));
    CHECK(s.lobe_bandwidth[i] == doctest::Approx(4.0 * s.f[i] / 10).epsilon(1e-14));
    CHECK_FALSE(s.censored[i]);
    if (i > 0) CHECK(s.f[i] > s.f[i - 1]);
  }
  // Every f is the image of a tau.
  for (double t : tau) {
    bool found = false;
    for (double f : s.f) found = found || std::abs(f * 4 * t - 1.0) < 1e-14;
    CHECK(found);
  }
  // Gaussian decay gives a pure 1/f law.
  gen::for_all(20, 72, [&](gen::Gen& g, int) {
    const int n = 2 * g.integer(2, 10);
    const double t2 = g.log_uniform(1e-6, 1e-3);
    std::vector<double> chi;
    for (double x : tau) chi.push_back(std::pow(2 * n * x / t2, 2));
    const auto sp = invert_spectrum(tau, chi, n);
    for (std::size_t i = 0; i < sp.f.size(); ++i)
      CHECK(sp.s_freq[i] == doctest::Approx(2.0 * n / (0.732 * sp.f[i] * t2 * t2)).epsilon(1e-12));
    // Linear in chi.
    const double c = g.log_uniform(0.1, 10.0);
    std::vector<double> scaled;
    for (double x : chi) scaled.push_back(c * x);
    const auto ss = invert_spectrum(tau, scaled, n);
    for (std::size_t i = 0; i < sp.f.size(); ++i) CHECK(ss.s_freq[i] == doctest::Approx(c * sp.s_freq[i]).epsilon(1e-13));
  });
  // Doubling tau halves f.
  const std::vector<double> one{2e-6}, two{4e-6};
  const std::vector<double> unit{1.0};
  CHECK(invert_spectrum(two, unit, 4).f[0] * 2.0 == invert_spectrum(one, unit, 4).f[0]);
  // Censoring propagates.
  const auto cs = invert_spectrum(std::vector<double>{1e-6, 2e-6}, std::vector<double>{0.5, inf}, 4);
  CHECK(cs.censored[0]);
  CHECK_FALSE(cs.censored[1]);
  CHECK_THROWS_WITH_AS(invert_spectrum(tau, ones, 3), doctest::Contains("inversion defined for CPn"), InvalidArgument);
  DecayCurve he;
  he.kind = SequenceKind::HE;
  he.n = 1;
  he.tau = {1e-6};
  he.chi = {0.3};
  CHECK_THROWS_WITH_AS(invert_spectrum(he), doctest::Contains("inversion defined for CPn"), InvalidArgument);
}

TEST_CASE("forward model then inversion recovers a 1/f spectrum") {
  const double amp = 1e-15;
  const auto noise = NoiseModel::power_law(amp, 1.0, 1.0);
  const int n = 10;
  const auto tau = log_grid(1e-6, 1e-5, 8);
  std::vector<double> chi;
  for (double t : tau) chi.push_back(second_moment(noise, PulseSequence::cp(n), t, 0.01));
  const auto s = invert_spectrum(tau, chi, n);
  // Summed over both dots.
  for (std::size_t i = 0; i < s.f.size(); ++i) CHECK(s.s_field[i] == doctest::Approx(2.0 * noise(s.f[i])).epsilon(0.15));
}

TEST_CASE("T2 extraction") {
  gen::for_all(100, 73, [](gen::Gen& g, int) {
    const double t0 = g.log_uniform(1e-6, 1e-3);
    const auto t = log_grid(t0 / 50, t0 * 20, g.integer(5, 60));
    std::vector<double> gauss, expo;
    for (double x : t) gauss.push_back(std::pow(x / t0, 2)), expo.push_back(x / t0);
    CHECK(extract_t2(t, gauss) == doctest::Approx(t0).epsilon(1e-12));
    CHECK(extract_t2(t, expo) == doctest::Approx(t0).epsilon(1e-12));
  });
  // Non-monotone curve: first crossing wins.
  const std::vector<double> t{1, 2, 3, 4, 5}, bumpy{0.2, 1.5, 0.5, 2.0, 3.0};
  CHECK(extract_t2(t, bumpy) > 1.0);
  CHECK(extract_t2(t, bumpy) < 2.0);
  // Crossing into a censored point returns that point.
  CHECK(extract_t2(t, std::vector<double>{0.1, 0.5, inf, inf, inf}) == 3.0);
  // Zero chi before the crossing: linear in chi.
  CHECK(extract_t2(std::vector<double>{1.0, 4.0}, std::vector<double>{0.0, 2.0}) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK_THROWS_WITH_AS(extract_t2(t, std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5}), doctest::Contains("T2 beyond sweep"),
                       NumericalError);
  CHECK_THROWS_WITH_AS(extract_t2(t, std::vector<double>{1.1, 2, 3, 4, 5}), doctest::Contains("before sweep start"),
                       NumericalError);
  DecayCurve c;
  c.kind = SequenceKind::CPn;
  c.n = 4;
  c.tau = {1e-6, 2e-6, 4e-6};
  c.chi = {0.25, 1.0, 4.0};
  // t = 8 tau; chi = (t / 16 us)^2.
  CHECK(extract_t2(c) == doctest::Approx(16e-6).epsilon(1e-12));
}

TEST_CASE("peak locations") {
  auto [a, b] = peak_locations(0.04);
  CHECK(a == doctest::Approx(59.6e3).epsilon(1e-12));
  CHECK(b == doctest::Approx(119.2e3).epsilon(1e-12));
  std::tie(a, b) = peak_locations(1.0);
  CHECK(a == doctest::Approx(1.49e6).epsilon(1e-12));
  CHECK(b == doctest::Approx(2.98e6).epsilon(1e-12));
  std::tie(a, b) = peak_locations(0.0);
  CHECK(a == 0.0);
  CHECK(b == 0.0);
  CHECK_THROWS_AS(peak_locations(-1e-3), InvalidArgument);
}

TEST_CASE("local maxima") {
  const std::vector<double> v{0, 1, 0, 2, 2, 1, 3, inf, 1, 5, 1};
  CHECK(local_maxima(v) == std::vector<std::size_t>{1, 3, 9});
  std::vector<bool> cens(v.size(), false);
  cens[2] = true;
  // A maximum needs uncensored neighbours on both sides.
  CHECK(local_maxima(v, cens) == std::vector<std::size_t>{9});
  CHECK(local_maxima(std::vector<double>{1, 2, 3}).empty());
}

TEST_CASE("Hahn-echo T2 is flat at low field and then diverges") {
  const auto dev = build_device(DeviceConfig{}, 42, 0);
  const auto taus = log_grid(1e-7, 1e-3, 50);
  std::vector<double> t;
  for (double x : taus) t.push_back(2 * x);
  auto t2_at = [&](double b) {
    std::vector<double> chi;
    for (const auto& r : chi_curve(dev, taus, 1, b)) chi.push_back(r.chi);
    try {
      return extract_t2(t, chi);
    } catch (const NumericalError&) {
      return inf;
    }
  };
  const double base = t2_at(0.0);
  REQUIRE(std::isfinite(base));
  for (double b : {0.25e-3, 0.5e-3, 1e-3}) CHECK(t2_at(b) == doctest::Approx(base).epsilon(0.05));
  CHECK(t2_at(0.02) > 10.0 * base);
}

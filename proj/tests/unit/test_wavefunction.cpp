#include <cmath>
#include <sstream>

#include "doctest.h"
#include "oracles/analytic.hpp"
#include "spinbath/wavefunction.hpp"
#include "support/gen.hpp"

using namespace spinbath;

namespace {

EnvelopeWavefunction default_well(double width = 5.0, double spacing = 0.02) {
  HeterostructureProfile p;
  p.well_width = width;
  return solve_vertical(p, PotentialModel{}, -width / 2 - 15.0, width / 2 + 15.0, spacing);
}

double trapz_psi2(const EnvelopeWavefunction& wf, double lo, double hi) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < wf.size(); ++i) {
    const double z0 = wf.z_at(i), z1 = wf.z_at(i + 1);
    if (z0 < lo || z1 > hi) continue;
    s += 0.5 * wf.spacing() * (wf.psi()[i] * wf.psi()[i] + wf.psi()[i + 1] * wf.psi()[i + 1]);
  }
  return s;
}

}  // namespace

TEST_CASE("infinite-square-well limit") {
  for (double l : {3.0, 5.0, 10.0}) {
    HeterostructureProfile p;
    p.well_width = l;
    p.interface_sigma = 0.0;
    p.barrier_ge_fraction = 1.0;
    PotentialModel pot;
    pot.band_offset_slope_ev = 1e3;
    const auto wf = solve_vertical(p, pot, -l / 2 - 2.0, l / 2 + 2.0, 0.002);
    CHECK(wf.ground_energy_ev() == doctest::Approx(oracle::box_ground_energy_ev(l, 0.916)).epsilon(0.005));
  }
}

TEST_CASE("default 5 nm well") {
  const auto wf = default_well();
  CHECK(wf.norm() == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(trapz_psi2(wf, -2.5, 2.5) > 0.9);
  // Ground state: no node, one sign.
  const double s = wf.psi()[wf.size() / 2] > 0 ? 1.0 : -1.0;
  for (double v : wf.psi()) CHECK(s * v >= 0.0);
  // Parity about the well centre (grid is symmetric).
  const std::size_t n = wf.size();
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(std::abs(wf.psi()[i]) - std::abs(wf.psi()[n - 1 - i])));
  CHECK(worst < 1e-6);
  CHECK(wf.ground_energy_ev() > 0.0);
  CHECK(wf.ground_energy_ev() < 0.72 * 0.30);
}

TEST_CASE("grid refinement changes the ground energy by < 0.1%") {
  for (double w : {3.0, 5.0, 10.0}) {
    const double e1 = default_well(w, 0.02).ground_energy_ev(), e2 = default_well(w, 0.01).ground_energy_ev();
    CHECK(gen::rel_err(e1, e2) < 1e-3);
  }
}

TEST_CASE("unbound state is reported") {
  HeterostructureProfile p;
  p.well_width = 5.0;
  p.barrier_ge_fraction = 0.0;
  CHECK_THROWS_WITH_AS(solve_vertical(p, PotentialModel{}, -4.0, 4.0), "well too shallow or box too small",
                       NumericalError);
  PotentialModel bad;
  bad.effective_mass = 0.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = {};
  bad.band_offset_slope_ev = -1.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("a vertical field pushes the electron down the potential slope") {
  HeterostructureProfile p;
  PotentialModel pot;
  pot.electric_field = 5e6;
  const auto wf = solve_vertical(p, pot, -17.5, 17.5);
  double zbar = 0.0;
  for (std::size_t i = 0; i < wf.size(); ++i) zbar += wf.z_at(i) * wf.psi()[i] * wf.psi()[i] * wf.spacing();
  CHECK(zbar < -0.05);
}

TEST_CASE("density examples") {
  const auto wf = default_well().with_dot({10.0, -20.0}, 30.0);
  // 1/e radius of |psi|^2 is d/2.
  gen::for_all(50, 21, [&](gen::Gen& g, int) {
    const double z = g.uniform(-2.0, 2.0), ang = g.uniform(0.0, 2 * std::numbers::pi);
    const double c = density_at({10.0, -20.0, z}, wf);
    const double r = density_at({10.0 + 15.0 * std::cos(ang), -20.0 + 15.0 * std::sin(ang), z}, wf);
    CHECK(r / c == doctest::Approx(std::exp(-1.0)).epsilon(1e-9));
  });
  // Peak of the envelope with the valley factor at +1 is the global maximum.
  std::size_t imax = 0;
  for (std::size_t i = 0; i < wf.size(); ++i)
    if (std::abs(wf.psi()[i]) > std::abs(wf.psi()[imax])) imax = i;
  const double zmax = wf.z_at(imax);
  const auto wfp = wf.with_valley_phase(std::fmod(-2.0 * valley_k0 * zmax + 8 * std::numbers::pi, 2 * std::numbers::pi));
  const double peak = density_at({10.0, -20.0, zmax}, wfp);
  gen::for_all(500, 22, [&](gen::Gen& g, int) {
    CHECK(density_at({g.uniform(-40, 60), g.uniform(-70, 30), g.uniform(-10, 10)}, wfp) <= peak * (1 + 1e-12));
  });
  CHECK(density_at({10.0, -20.0, 40.0}, wf) == 0.0);
}

TEST_CASE("full 3D density integrates to one") {
  gen::for_all(4, 23, [](gen::Gen& g, int) {
    const double phi = g.uniform(0.0, 2 * std::numbers::pi);
    const auto wf = default_well(g.pick(std::vector<double>{3.0, 5.0, 8.0})).with_dot({0.0, 0.0}, 30.0).with_valley_phase(phi);
    // Separable: integrate the lateral plane at z0 and the vertical line at the centre.
    const double z0 = 0.1;
    const double lateral = oracle::simpson(
        [&](double x) {
          return oracle::simpson([&](double y) { return density_at({x, y, z0}, wf); }, -90.0, 90.0, 1e-14);
        },
        -90.0, 90.0, 1e-13);
    const double vertical = oracle::simpson([&](double z) { return density_at({0.0, 0.0, z}, wf); }, wf.z0(),
                                            wf.z_max(), 1e-12, 60);
    const double total = lateral * vertical / density_at({0.0, 0.0, z0}, wf);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
  });
}

TEST_CASE("two dots do not overlap") {
  const auto base = default_well();
  const auto d1 = base.with_dot({-50.0, 0.0}), d2 = base.with_dot({50.0, 0.0});
  CHECK(d2.transverse_density(-50.0, 0.0) / d2.transverse_density(50.0, 0.0) < 1e-6);
  CHECK(d1.transverse_density(50.0, 0.0) / d1.transverse_density(-50.0, 0.0) < 1e-6);
}

TEST_CASE("valley phase selection") {
  const auto flat = EnvelopeWavefunction::from_samples(-10.0, 0.02, std::vector<double>(1001, 1.0));
  CHECK(choose_valley_phase(flat, {}) == 0.0);
  gen::for_all(40, 31, [&](gen::Gen& g, int) {
    NuclearSite s;
    s.species = Species::Ge73;
    s.position = {0.0, 0.0, g.uniform(-5.0, 5.0)};
    const std::vector<NuclearSite> sites{s};
    const double phi = choose_valley_phase(flat, sites);
    // A density node at the site, up to the grid resolution.
    CHECK(std::cos(2.0 * valley_k0 * s.position[2] + phi) <= -std::cos(std::numbers::pi / 64) + 1e-12);
  });
  const auto wf = default_well();
  gen::for_all(10, 32, [&](gen::Gen& g, int) {
    std::vector<NuclearSite> sites(g.integer(1, 30));
    for (auto& s : sites) {
      s.species = Species::Ge73;
      s.position = {g.uniform(-20, 20), g.uniform(-20, 20), g.uniform(-3, 3)};
    }
    const double best = choose_valley_phase(wf, sites);
    const double obj = valley_phase_objective(wf, sites, best);
    for (int k = 0; k < 64; ++k) CHECK(obj <= valley_phase_objective(wf, sites, 2 * std::numbers::pi * k / 64));
  });
}

TEST_CASE("wavefunction CSV has one row per grid point") {
  const auto wf = default_well();
  std::stringstream ss;
  write_wavefunction_csv(ss, wf);
  std::string line;
  std::getline(ss, line);
  CHECK(line == "z_nm,psi_env,potential_ev");
  std::size_t rows = 0;
  while (std::getline(ss, line)) ++rows;
  CHECK(rows == wf.size());
}

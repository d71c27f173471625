#include "spinbath/wavefunction.hpp"

#include <lapacke.h>

#include <algorithm>
#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <cmath>
#include <ostream>
#include <string>

namespace spinbath {

using Spline = boost::math::interpolators::cardinal_cubic_b_spline<double>;

void PotentialModel::validate() const {
  if (!(band_offset_slope_ev > 0.0)) throw InvalidArgument("band offset slope must be positive");
  if (!(effective_mass > 0.0)) throw InvalidArgument("effective mass must be positive");
  if (!std::isfinite(electric_field)) throw InvalidArgument("electric field must be finite");
}

double PotentialModel::potential_ev(double z_nm, const HeterostructureProfile& profile) const {
  // e F z in eV is F (V/m) times z (m).
  return band_offset_slope_ev * ge_fraction(z_nm, profile) + electric_field * z_nm * 1e-9;
}

EnvelopeWavefunction EnvelopeWavefunction::from_samples(double z0, double spacing, std::vector<double> psi,
                                                        std::vector<double> potential_ev,
                                                        double ground_energy_ev) {
  if (psi.size() < 4) throw InvalidArgument("envelope needs at least 4 grid points");
  if (!(spacing > 0.0)) throw InvalidArgument("grid spacing must be positive");
  EnvelopeWavefunction wf;
  wf.z0_ = z0;
  wf.spacing_ = spacing;
  wf.psi_ = std::move(psi);
  wf.potential_ = std::move(potential_ev);
  wf.ground_energy_ = ground_energy_ev;
  const double n = wf.norm();
  if (!(n > 0.0)) throw InvalidArgument("envelope has zero norm");
  const double scale = 1.0 / std::sqrt(n);
  for (double& v : wf.psi_) v *= scale;
  wf.rebuild_spline();
  wf.update_valley_norm();
  return wf;
}

double EnvelopeWavefunction::norm() const {
  double s = 0.0;
  for (std::size_t i = 0; i < psi_.size(); ++i) {
    const double w = (i == 0 || i + 1 == psi_.size()) ? 0.5 : 1.0;
    s += w * psi_[i] * psi_[i];
  }
  return s * spacing_;
}

void EnvelopeWavefunction::rebuild_spline() {
  spline_ = std::make_shared<const Spline>(psi_.data(), psi_.size(), z0_, spacing_, 0.0, 0.0);
}

void EnvelopeWavefunction::update_valley_norm() {
  double c = 0.0;
  for (std::size_t i = 0; i < psi_.size(); ++i) {
    const double w = (i == 0 || i + 1 == psi_.size()) ? 0.5 : 1.0;
    c += w * psi_[i] * psi_[i] * std::cos(2.0 * valley_k0 * z_at(i) + phi_);
  }
  valley_norm_ = 1.0 + c * spacing_;
}

EnvelopeWavefunction EnvelopeWavefunction::with_dot(std::array<double, 2> center, double d_xy) const {
  if (!(d_xy > 0.0)) throw InvalidArgument("transverse diameter must be positive");
  EnvelopeWavefunction wf = *this;
  wf.center_ = center;
  wf.d_xy_ = d_xy;
  return wf;
}

EnvelopeWavefunction EnvelopeWavefunction::with_valley_phase(double phi) const {
  EnvelopeWavefunction wf = *this;
  wf.phi_ = phi;
  wf.update_valley_norm();
  return wf;
}

double EnvelopeWavefunction::envelope(double z) const {
  if (z < z0_ || z > z_max()) return 0.0;
  return (*spline_)(z);
}

double EnvelopeWavefunction::transverse_density(double x, double y) const {
  const double r0 = 0.5 * d_xy_;
  const double dx = x - center_[0], dy = y - center_[1];
  return std::exp(-(dx * dx + dy * dy) / (r0 * r0)) / (constants::pi * r0 * r0);
}

EnvelopeWavefunction solve_vertical(const HeterostructureProfile& profile, const PotentialModel& pot,
                                    double z_min, double z_max, double spacing) {
  profile.validate();
  pot.validate();
  if (!(z_max > z_min) || !(spacing > 0.0)) throw InvalidArgument("invalid vertical grid");
  const auto n = static_cast<lapack_int>(std::llround((z_max - z_min) / spacing)) + 1;
  if (n < 16) throw InvalidArgument("vertical grid too coarse");

  // hbar^2 / (2 m) in eV nm^2.
  const double kinetic = constants::hbar * constants::hbar /
                         (2.0 * pot.effective_mass * constants::electron_mass) / constants::elementary_charge * 1e18;
  const double hop = kinetic / (spacing * spacing);

  std::vector<double> potential(static_cast<std::size_t>(n));
  std::vector<double> diag(static_cast<std::size_t>(n));
  std::vector<double> off(static_cast<std::size_t>(n), -hop);
  for (lapack_int i = 0; i < n; ++i) {
    const double z = z_min + spacing * i;
    potential[i] = pot.potential_ev(z, profile);
    diag[i] = 2.0 * hop + potential[i];
  }

  std::vector<double> eigval(static_cast<std::size_t>(n));
  std::vector<double> eigvec(static_cast<std::size_t>(n));
  std::vector<lapack_int> support(2);
  lapack_int found = 0;
  const lapack_int info = LAPACKE_dstevr(LAPACK_COL_MAJOR, 'V', 'I', n, diag.data(), off.data(), 0.0, 0.0, 1, 1,
                                         0.0, &found, eigval.data(), eigvec.data(), n, support.data());
  if (info != 0 || found != 1)
    throw NumericalError("vertical eigensolver failed (dstevr info " + std::to_string(info) + ")");

  // Ground state is nodeless; fix the overall sign.
  double sum = 0.0;
  for (double v : eigvec) sum += v;
  if (sum < 0.0)
    for (double& v : eigvec) v = -v;

  auto wf = EnvelopeWavefunction::from_samples(z_min, spacing, std::move(eigvec), std::move(potential), eigval[0]);

  const auto edge = static_cast<std::size_t>(std::ceil(1.0 / spacing));
  double edge_mass = 0.0;
  const auto psi = wf.psi();
  for (std::size_t i = 0; i < std::min(edge, psi.size()); ++i) {
    edge_mass += psi[i] * psi[i] + psi[psi.size() - 1 - i] * psi[psi.size() - 1 - i];
  }
  if (edge_mass * spacing > 0.01) throw NumericalError("well too shallow or box too small");
  return wf;
}

double density_at(const std::array<double, 3>& r, const EnvelopeWavefunction& wf) {
  const double env = wf.envelope(r[2]);
  if (env == 0.0) return 0.0;
  const double valley = 1.0 + std::cos(2.0 * valley_k0 * r[2] + wf.valley_phase());
  return wf.transverse_density(r[0], r[1]) * env * env * valley / wf.valley_norm();
}

double valley_phase_objective(const EnvelopeWavefunction& wf, std::span<const NuclearSite> ge_sites, double phi) {
  const auto shifted = wf.with_valley_phase(phi);
  double total = 0.0;
  for (const auto& s : ge_sites) total += density_at(s.position, shifted);
  return total;
}

double choose_valley_phase(const EnvelopeWavefunction& wf, std::span<const NuclearSite> ge_sites, int grid_points) {
  if (ge_sites.empty()) return 0.0;
  if (grid_points < 1) throw InvalidArgument("valley phase grid must have at least one point");
  // The objective is (S0 + Sc cos phi - Ss sin phi) / (1 + Cc cos phi - Cs sin phi),
  // so a single pass over the sites suffices for every grid phase.
  double s0 = 0.0, sc = 0.0, ss = 0.0;
  for (const auto& site : ge_sites) {
    const double env = wf.envelope(site.position[2]);
    const double base = wf.transverse_density(site.position[0], site.position[1]) * env * env;
    const double arg = 2.0 * valley_k0 * site.position[2];
    s0 += base;
    sc += base * std::cos(arg);
    ss += base * std::sin(arg);
  }
  double cc = 0.0, cs = 0.0;
  const auto psi = wf.psi();
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const double w = (i == 0 || i + 1 == psi.size()) ? 0.5 : 1.0;
    const double arg = 2.0 * valley_k0 * wf.z_at(i);
    cc += w * psi[i] * psi[i] * std::cos(arg);
    cs += w * psi[i] * psi[i] * std::sin(arg);
  }
  cc *= wf.spacing();
  cs *= wf.spacing();

  double best_phi = 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (int m = 0; m < grid_points; ++m) {
    const double phi = constants::two_pi * m / grid_points;
    const double value = (s0 + sc * std::cos(phi) - ss * std::sin(phi)) / (1.0 + cc * std::cos(phi) - cs * std::sin(phi));
    if (value < best) {
      best = value;
      best_phi = phi;
    }
  }
  return best_phi;
}

void write_wavefunction_csv(std::ostream& out, const EnvelopeWavefunction& wf) {
  out << "z_nm,psi_env,potential_ev\n";
  const auto psi = wf.psi();
  const auto pot = wf.potential_ev();
  char buf[128];
  for (std::size_t i = 0; i < psi.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.10g,%.17g,%.17g\n", wf.z_at(i), psi[i], i < pot.size() ? pot[i] : 0.0);
    out << buf;
  }
}

}  // namespace spinbath

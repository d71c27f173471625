#pragma once

// Vertical envelope solver and the 3D single-dot charge density.

#include <array>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "spinbath/crystal.hpp"

namespace boost::math::interpolators {
template <class Real>
class cardinal_cubic_b_spline;
}

namespace spinbath {

struct PotentialModel {
  double band_offset_slope_ev = 0.72;  // eV per unit Ge fraction (180 meV at 25%)
  double electric_field = 0.0;         // V/m; potential energy e F z
  double effective_mass = 0.916;       // in units of the free electron mass

  void validate() const;
  // V(z) in eV.
  double potential_ev(double z_nm, const HeterostructureProfile& profile) const;
};

// Valley wavevector k0 = 0.82 (2 pi / a_Si), nm^-1.
inline constexpr double valley_k0 = 0.82 * constants::two_pi / constants::a_si;

class EnvelopeWavefunction {
 public:
  // Builds a wavefunction from samples on a uniform grid. The samples are
  // normalised with the trapezoidal rule.
  static EnvelopeWavefunction from_samples(double z0, double spacing, std::vector<double> psi,
                                           std::vector<double> potential_ev = {}, double ground_energy_ev = 0.0);

  double z0() const { return z0_; }
  double spacing() const { return spacing_; }
  std::size_t size() const { return psi_.size(); }
  double z_at(std::size_t i) const { return z0_ + spacing_ * static_cast<double>(i); }
  double z_max() const { return z_at(psi_.size() - 1); }
  std::span<const double> psi() const { return psi_; }
  std::span<const double> potential_ev() const { return potential_; }
  double ground_energy_ev() const { return ground_energy_; }

  double transverse_diameter() const { return d_xy_; }
  double valley_phase() const { return phi_; }
  std::array<double, 2> dot_center() const { return center_; }

  // Copies with a different dot placement / lateral size / valley phase.
  EnvelopeWavefunction with_dot(std::array<double, 2> center, double d_xy = 30.0) const;
  EnvelopeWavefunction with_valley_phase(double phi) const;

  // Cubic-spline interpolated envelope, zero outside the grid (nm^-1/2).
  double envelope(double z_nm) const;
  // Normalised 2D Gaussian G(x - x0, y - y0) whose 1/e diameter is d_xy (nm^-2).
  double transverse_density(double x_nm, double y_nm) const;
  // 1 + integral |psi_env|^2 cos(2 k0 z + phi) dz; divides the valley-modulated density.
  double valley_norm() const { return valley_norm_; }
  // Trapezoidal integral of |psi_env|^2 over the grid.
  double norm() const;

 private:
  EnvelopeWavefunction() = default;
  void rebuild_spline();
  void update_valley_norm();

  double z0_ = 0.0;
  double spacing_ = 0.02;
  std::vector<double> psi_;
  std::vector<double> potential_;
  double ground_energy_ = 0.0;
  double d_xy_ = 30.0;
  double phi_ = 0.0;
  std::array<double, 2> center_{0.0, 0.0};
  double valley_norm_ = 1.0;
  std::shared_ptr<const boost::math::interpolators::cardinal_cubic_b_spline<double>> spline_;
};

// Ground state of -(hbar^2/2m) d^2/dz^2 + slope x(z) + e F z on a uniform
// grid over [z_min, z_max] with Dirichlet ends. Throws NumericalError when more
// than 1% of the probability lies within 1 nm of either end.
EnvelopeWavefunction solve_vertical(const HeterostructureProfile& profile, const PotentialModel& pot,
                                    double z_min, double z_max, double spacing = 0.02);

// |psi(r)|^2 = G(x,y) |psi_env(z)|^2 [1 + cos(2 k0 z + phi)] / valley_norm, nm^-3.
double density_at(const std::array<double, 3>& r_nm, const EnvelopeWavefunction& wf);

// Valley phase on a uniform grid of `grid_points` values in [0, 2 pi) that
// minimises the summed density over the given 73Ge sites; ties go to the
// smaller phase. Returns 0 when there are no sites.
double choose_valley_phase(const EnvelopeWavefunction& wf, std::span<const NuclearSite> ge_sites,
                           int grid_points = 64);

// Objective used by choose_valley_phase, evaluated directly.
double valley_phase_objective(const EnvelopeWavefunction& wf, std::span<const NuclearSite> ge_sites, double phi);

// CSV with columns z_nm, psi_env, potential_ev.
void write_wavefunction_csv(std::ostream& out, const EnvelopeWavefunction& wf);

}  // namespace spinbath

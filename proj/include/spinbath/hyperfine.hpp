#pragma once

// Fermi-contact couplings, dominant-nucleus selection and ergodic T2*.

#include <cstddef>
#include <span>
#include <vector>

#include "spinbath/crystal.hpp"
#include "spinbath/wavefunction.hpp"

namespace spinbath {

// (2 mu0 / 3) g0 mu_B |gamma| eta, converted so that multiplying by a density
// in nm^-3 gives A in rad/s.
double hyperfine_prefactor(const IsotopeSpec& iso);

// A_k for one site and one dot's wavefunction (rad/s, >= 0).
double coupling(const NuclearSite& site, const EnvelopeWavefunction& wf, const IsotopeSpec& iso);

// The n sites of the requested species with the largest A for this
// wavefunction, sorted by decreasing A (ties by lattice key), with
// `coupling` filled in. Returns all such sites, with a warning on stderr,
// when fewer than n exist.
std::vector<NuclearSite> select_top(std::span<const NuclearSite> sites, const EnvelopeWavefunction& wf,
                                    const IsotopeSpec& iso, std::size_t n);

// Species-resolved sums of I(I+1)/3 * A_jk^2 over both dots.
struct CouplingSums {
  double ge73 = 0.0;
  double si29 = 0.0;

  void add(const IsotopeSpec& iso, double a) {
    (iso.species == Species::Ge73 ? ge73 : si29) += iso.spin_weight() * a * a;
  }
};

struct T2StarResult {
  double t2star = 0.0;    // seconds
  double ge73_rate2 = 0.0;  // contribution to (1/T2*)^2, s^-2
  double si29_rate2 = 0.0;
};

// (1/T2*)^2 = 1/2 sum_j sum_k I_k(I_k+1)/3 A_jk^2. Throws NumericalError when the
// sum is zero.
T2StarResult t2_star(const CouplingSums& sums, bool include_si = true);

}  // namespace spinbath

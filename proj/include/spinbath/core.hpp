#pragma once

// Physical constants, isotope table and error types shared by every module.
//
// Unit convention: every Hamiltonian is an angular frequency (rad/s), so a
// propagator over time tau (seconds) is exp(-i H tau). Lengths inside the
// lattice/wavefunction code are nanometres; densities are nm^-3.

#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

namespace spinbath {

// Precondition or configuration failures. The CLI maps these to exit code 2.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Numerical failures (unbound states, non-convergent fits, violated
// invariants). The CLI maps these to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace constants {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

inline constexpr double mu0 = 1.25663706212e-6;        // T m / A
inline constexpr double mu_b = 9.2740100783e-24;       // J / T
inline constexpr double hbar = 1.054571817e-34;        // J s
inline constexpr double g0 = 2.00231930436;            // vacuum electron g-factor
inline constexpr double electron_mass = 9.1093837015e-31;  // kg
inline constexpr double elementary_charge = 1.602176634e-19;  // C

// Electron g-factor used by the filter-function formalism (g ~ 2).
inline constexpr double g_electron = 2.0;

// 73Ge: 1.49 MHz/T.
inline constexpr double gamma_ge73 = two_pi * 1.49e6;  // rad / s / T
// 29Si: 8.458 MHz/T magnitude (standard tabulated value; the sign of gamma is
// irrelevant here since only |gamma| enters through A_k).
inline constexpr double gamma_si29 = two_pi * 8.458e6;  // rad / s / T

inline constexpr double a_si = 0.543;  // nm, cubic lattice constant

// Isotopic abundances (fraction of the chemical element).
inline constexpr double si29_enriched = 800e-6;
inline constexpr double si29_natural = 0.047;
inline constexpr double ge73_natural = 0.0776;

// Bloch-function bunching factors.
inline constexpr double eta_si29 = 178.0;
inline constexpr double eta_ge73 = 570.0;

}  // namespace constants

enum class Species { Si29, Ge73 };

std::string_view to_string(Species s);
Species species_from_string(std::string_view name);

struct IsotopeSpec {
  Species species = Species::Si29;
  double spin = 0.5;       // I, half-integer
  double abundance = 0.0;  // fraction of the element
  double eta = 1.0;        // bunching factor
  double gamma = 0.0;      // |gyromagnetic ratio|, rad/s/T

  int dimension() const { return static_cast<int>(2.0 * spin + 0.5) + 1; }
  // I(I+1)/3, the weight of A^2 in the ergodic T2* sum.
  double spin_weight() const { return spin * (spin + 1.0) / 3.0; }
  void validate() const;
};

IsotopeSpec default_si29(double abundance = constants::si29_enriched);
IsotopeSpec default_ge73(double abundance = constants::ge73_natural);

// Isotope parameters for one device. Silicon abundance is given separately for
// the well and the barrier.
struct IsotopeTable {
  IsotopeSpec si29 = default_si29();
  IsotopeSpec ge73 = default_ge73();
  double si29_abundance_barrier = constants::si29_natural;

  const IsotopeSpec& get(Species s) const { return s == Species::Ge73 ? ge73 : si29; }
  void validate() const;
};

// Zeeman coefficient of Iz for a nucleus in field B (tesla), rad/s.
inline double nuclear_zeeman(const IsotopeSpec& iso, double b_tesla) { return iso.gamma * b_tesla; }

// Electron Larmor angular frequency g mu_B B / hbar.
inline double electron_larmor_omega(double b_tesla) {
  return constants::g_electron * constants::mu_b * b_tesla / constants::hbar;
}

}  // namespace spinbath

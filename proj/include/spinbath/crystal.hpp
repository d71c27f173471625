#pragma once

// Alloy profile and random diamond-lattice crystals.

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <utility>
#include <vector>

#include "spinbath/core.hpp"
#include "spinbath/rng.hpp"

namespace spinbath {

// Square Si well in Si(1-x)Ge(x) barriers, both interfaces smeared by a
// Gaussian of width interface_sigma. Lengths in nm.
struct HeterostructureProfile {
  double well_width = 5.0;
  double barrier_ge_fraction = 0.30;
  double interface_sigma = 0.136;
  double well_center_z = 0.0;

  double well_bottom() const { return well_center_z - 0.5 * well_width; }
  double well_top() const { return well_center_z + 0.5 * well_width; }
  void validate() const;
};

// Ge fraction x(z): the square-well profile convolved with the smearing
// Gaussian, x_b * [1 - (erf((z-z1)/(s*sqrt2)) - erf((z-z2)/(s*sqrt2)))/2].
double ge_fraction(double z_nm, const HeterostructureProfile& profile);

// 29Si abundance at depth z, blending well and barrier values with the local
// alloy content.
double si29_abundance_at(double z_nm, const HeterostructureProfile& profile,
                         const IsotopeTable& isotopes);

struct SimulationBox {
  double x_min = -45.0, x_max = 45.0;
  double y_min = -45.0, y_max = 45.0;
  double z_min = -17.5, z_max = 17.5;

  double volume() const { return (x_max - x_min) * (y_max - y_min) * (z_max - z_min); }
  bool contains(const std::array<double, 3>& r) const;
  // Throws "degenerate simulation box" for non-positive extents.
  void validate() const;
  // Additionally requires >= 10 nm of barrier on each side of the well.
  void validate_for(const HeterostructureProfile& profile) const;
};

struct NuclearSite {
  std::array<double, 3> position{};  // nm
  Species species = Species::Si29;
  std::uint64_t lattice_key = 0;     // packed quarter-cell coordinates
  double coupling = 0.0;             // A, rad/s (filled by hyperfine)
  double xi = 0.0;                   // quadrupole splitting, rad/s (73Ge only)
  double theta = 0.0;                // field-gradient angle, rad (73Ge only)
  int dot_sign = 0;                  // +1 dot 1, -1 dot 2, 0 unassigned
};

// Diamond-lattice coordinates in units of a/4.
struct LatticeIndex {
  std::int64_t i = 0, j = 0, k = 0;
};

bool is_diamond_site(const LatticeIndex& idx);
std::uint64_t pack_lattice_key(const LatticeIndex& idx);
LatticeIndex unpack_lattice_key(std::uint64_t key);
std::array<double, 3> lattice_position(const LatticeIndex& idx);

// Calls visit(index) for every diamond-lattice site inside the box, ordered by
// (k, j, i). Sites on the lower faces are included, upper faces excluded.
void for_each_lattice_site(const SimulationBox& box, const std::function<void(const LatticeIndex&)>& visit);
std::uint64_t count_lattice_sites(const SimulationBox& box);

// Streams the spinful sites of a random crystal. Each lattice site draws one
// uniform u from a keyed hash of (rng key, lattice key): the site is 73Ge when
// u < 0.0776 x(z), else 29Si when u < 0.0776 x(z) + a_Si(z) (1 - x(z)), else
// spinless. The result is independent of enumeration order.
void for_each_spinful_site(const HeterostructureProfile& profile, const SimulationBox& box,
                           const IsotopeTable& isotopes, const RngStream& rng,
                           const std::function<void(const NuclearSite&)>& visit);

std::vector<NuclearSite> generate_crystal(const HeterostructureProfile& profile, const SimulationBox& box,
                                          const IsotopeTable& isotopes, const RngStream& rng);

// xi from a zero-centred Lorentzian of scale xi_scale truncated at
// +-truncation*xi_scale; theta = atan(x/y) with x, y standard normal, mapped
// onto (-pi/2, pi/2].
std::pair<double, double> draw_quadrupole_params(const NuclearSite& site, double xi_scale, RngStream& rng,
                                                 double truncation = 100.0);

// One JSON object per line: position, species, xi, theta.
void write_crystal_jsonl(std::ostream& out, const std::vector<NuclearSite>& sites);
std::vector<NuclearSite> read_crystal_jsonl(std::istream& in);

}  // namespace spinbath

#include "spinbath/core.hpp"

#include <cmath>
#include <string>

namespace spinbath {

std::string_view to_string(Species s) {
  switch (s) {
    case Species::Si29:
      return "Si29";
    case Species::Ge73:
      return "Ge73";
  }
  return "?";
}

Species species_from_string(std::string_view name) {
  if (name == "Si29") return Species::Si29;
  if (name == "Ge73") return Species::Ge73;
  throw InvalidArgument("unknown species '" + std::string(name) + "'");
}

void IsotopeSpec::validate() const {
  const double two_i = 2.0 * spin;
  if (!(spin >= 0.5) || std::abs(two_i - std::round(two_i)) > 1e-12)
    throw InvalidArgument("isotope spin must be a positive half-integer");
  if (spin != (species == Species::Ge73 ? 4.5 : 0.5))
    throw InvalidArgument(std::string(to_string(species)) + " has the wrong nuclear spin");
  if (!(abundance >= 0.0 && abundance <= 1.0))
    throw InvalidArgument("isotope abundance must lie in [0, 1]");
  if (!(eta > 0.0)) throw InvalidArgument("bunching factor eta must be positive");
  if (!(gamma > 0.0)) throw InvalidArgument("gyromagnetic ratio magnitude must be positive");
}

IsotopeSpec default_si29(double abundance) {
  return {Species::Si29, 0.5, abundance, constants::eta_si29, constants::gamma_si29};
}

IsotopeSpec default_ge73(double abundance) {
  return {Species::Ge73, 4.5, abundance, constants::eta_ge73, constants::gamma_ge73};
}

void IsotopeTable::validate() const {
  si29.validate();
  ge73.validate();
  if (si29.species != Species::Si29 || ge73.species != Species::Ge73)
    throw InvalidArgument("isotope table species mismatch");
  if (!(si29_abundance_barrier >= 0.0 && si29_abundance_barrier <= 1.0))
    throw InvalidArgument("barrier 29Si abundance must lie in [0, 1]");
}

}  // namespace spinbath

#pragma once

// One random double-dot realization: crystal, wavefunctions, selected 73Ge
// nuclei with quadrupole parameters, and T2* coupling sums.

#include <array>
#include <cstdint>
#include <vector>

#include "json.hpp"
#include "spinbath/hyperfine.hpp"

namespace spinbath {

struct DeviceConfig {
  HeterostructureProfile profile;
  IsotopeTable isotopes;
  PotentialModel potential;
  double grid_spacing = 0.02;      // nm
  double dot_diameter = 30.0;      // nm, 1/e diameter of |psi|^2
  double dot_separation = 100.0;   // nm
  double lateral_window = 90.0;    // nm per dot
  double vertical_margin = 15.0;   // nm of barrier on each side of the well
  std::size_t top_n = 400;
  double xi_scale = 1e4;           // rad/s
  double xi_truncation = 100.0;    // in units of xi_scale
  int valley_phase_grid = 64;

  void validate() const;
  SimulationBox box() const;
  std::array<std::array<double, 2>, 2> dot_centers() const;
};

struct DotRealization {
  std::array<double, 2> center{};
  double valley_phase = 0.0;
  std::vector<NuclearSite> nuclei;  // selected 73Ge, decreasing A
};

struct DeviceRealization {
  std::uint64_t master_seed = 0;
  std::uint64_t realization = 0;
  DeviceConfig config;
  double ground_energy_ev = 0.0;
  std::array<DotRealization, 2> dots;
  CouplingSums sums;
  std::uint64_t ge73_count = 0;
  std::uint64_t si29_count = 0;

  // Both dots' selected nuclei, dot 1 first.
  std::vector<NuclearSite> all_nuclei() const;
};

T2StarResult t2_star(const DeviceRealization& device, bool include_si = true);

// Builds realization `realization` of the ensemble seeded by master_seed.
// Streams: crystal {realization, 1}; per-site quadrupole {realization, 2, key}.
DeviceRealization build_device(const DeviceConfig& config, std::uint64_t master_seed, std::uint64_t realization);

// Same, reusing an already solved envelope for config.profile.
DeviceRealization build_device(const DeviceConfig& config, std::uint64_t master_seed, std::uint64_t realization,
                               const EnvelopeWavefunction& envelope);

EnvelopeWavefunction solve_envelope(const DeviceConfig& config);

nlohmann::json to_json(const DeviceConfig& config);
DeviceConfig device_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const DeviceRealization& device);
DeviceRealization device_from_json(const nlohmann::json& j);

}  // namespace spinbath

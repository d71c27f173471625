#include "spinbath/device.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spinbath/json_util.hpp"

namespace spinbath {

void DeviceConfig::validate() const {
  profile.validate();
  isotopes.validate();
  potential.validate();
  if (!(grid_spacing > 0.0 && grid_spacing < 1.0)) throw InvalidArgument("grid_spacing must lie in (0, 1) nm");
  if (!(dot_diameter > 0.0)) throw InvalidArgument("dot diameter must be positive");
  if (!(dot_separation >= 0.0)) throw InvalidArgument("dot separation must be non-negative");
  if (!(lateral_window > 0.0)) throw InvalidArgument("lateral window must be positive");
  if (!(vertical_margin >= 10.0)) throw InvalidArgument("vertical margin must be at least 10 nm");
  if (top_n < 1) throw InvalidArgument("top_n must be at least 1");
  if (!(xi_scale >= 0.0)) throw InvalidArgument("xi_scale must be non-negative");
  if (!(xi_truncation > 0.0)) throw InvalidArgument("xi_truncation must be positive");
  if (valley_phase_grid < 1) throw InvalidArgument("valley phase grid must be positive");
  box().validate_for(profile);
}

SimulationBox DeviceConfig::box() const {
  SimulationBox b;
  const double half_span = 0.5 * dot_separation + 0.5 * lateral_window;
  b.x_min = -half_span;
  b.x_max = half_span;
  b.y_min = -0.5 * lateral_window;
  b.y_max = 0.5 * lateral_window;
  b.z_min = profile.well_bottom() - vertical_margin;
  b.z_max = profile.well_top() + vertical_margin;
  return b;
}

std::array<std::array<double, 2>, 2> DeviceConfig::dot_centers() const {
  return {{{-0.5 * dot_separation, 0.0}, {0.5 * dot_separation, 0.0}}};
}

std::vector<NuclearSite> DeviceRealization::all_nuclei() const {
  std::vector<NuclearSite> out = dots[0].nuclei;
  out.insert(out.end(), dots[1].nuclei.begin(), dots[1].nuclei.end());
  return out;
}

T2StarResult t2_star(const DeviceRealization& device, bool include_si) { return t2_star(device.sums, include_si); }

EnvelopeWavefunction solve_envelope(const DeviceConfig& config) {
  const auto b = config.box();
  return solve_vertical(config.profile, config.potential, b.z_min, b.z_max, config.grid_spacing);
}

DeviceRealization build_device(const DeviceConfig& config, std::uint64_t master_seed, std::uint64_t realization) {
  config.validate();
  return build_device(config, master_seed, realization, solve_envelope(config));
}

DeviceRealization build_device(const DeviceConfig& config, std::uint64_t master_seed, std::uint64_t realization,
                               const EnvelopeWavefunction& envelope) {
  config.validate();
  const SimulationBox box = config.box();
  const RngStream crystal_rng = derive_stream(master_seed, {realization, stream_ids::crystal});
  const auto centers = config.dot_centers();
  const IsotopeSpec& ge = config.isotopes.ge73;
  const IsotopeSpec& si = config.isotopes.si29;

  DeviceRealization dev;
  dev.master_seed = master_seed;
  dev.realization = realization;
  dev.config = config;
  dev.ground_energy_ev = envelope.ground_energy_ev();

  IsotopeTable ge_only = config.isotopes;
  ge_only.si29.abundance = 0.0;
  ge_only.si29_abundance_barrier = 0.0;
  std::vector<NuclearSite> ge_sites =
      generate_crystal(config.profile, box, ge_only, crystal_rng);

  std::array<EnvelopeWavefunction, 2> wfs = {envelope.with_dot(centers[0], config.dot_diameter),
                                             envelope.with_dot(centers[1], config.dot_diameter)};
  for (int j = 0; j < 2; ++j) {
    const double phi = choose_valley_phase(wfs[j], ge_sites, config.valley_phase_grid);
    wfs[j] = wfs[j].with_valley_phase(phi);
    dev.dots[j].center = centers[j];
    dev.dots[j].valley_phase = phi;
  }

  for (const auto& s : ge_sites) {
    for (const auto& wf : wfs) dev.sums.add(ge, coupling(s, wf, ge));
  }
  dev.ge73_count = ge_sites.size();

  // 29Si: streamed, only the coupling sums are kept. The Ge placement is
  // unchanged because every site draws the same uniform in both passes.
  for_each_spinful_site(config.profile, box, config.isotopes, crystal_rng, [&](const NuclearSite& s) {
    if (s.species != Species::Si29) return;
    ++dev.si29_count;
    for (const auto& wf : wfs) dev.sums.add(si, coupling(s, wf, si));
  });

  for (int j = 0; j < 2; ++j) {
    auto selected = select_top(ge_sites, wfs[j], ge, config.top_n);
    for (auto& s : selected) {
      RngStream rng = derive_stream(master_seed, {realization, stream_ids::quadrupole, s.lattice_key});
      const auto [xi, theta] = draw_quadrupole_params(s, config.xi_scale, rng, config.xi_truncation);
      s.xi = xi;
      s.theta = theta;
      s.dot_sign = j == 0 ? +1 : -1;
    }
    dev.dots[j].nuclei = std::move(selected);
  }
  return dev;
}

namespace {

nlohmann::json isotope_json(const IsotopeSpec& iso) {
  return {{"species", std::string(to_string(iso.species))},
          {"spin", iso.spin},
          {"abundance", iso.abundance},
          {"eta", iso.eta},
          {"gamma", iso.gamma}};
}

IsotopeSpec isotope_from_json(const nlohmann::json& j, IsotopeSpec base) {
  json_util::check_keys(j, {"species", "spin", "abundance", "eta", "gamma"}, "isotope");
  if (j.contains("species") && species_from_string(j.at("species").get<std::string>()) != base.species)
    throw InvalidArgument("isotope species mismatch");
  json_util::read(j, "spin", base.spin);
  json_util::read(j, "abundance", base.abundance);
  json_util::read(j, "eta", base.eta);
  json_util::read(j, "gamma", base.gamma);
  return base;
}

nlohmann::json site_json(const NuclearSite& s) {
  return {{"position_nm", s.position}, {"lattice_key", s.lattice_key}, {"A", s.coupling},
          {"xi", s.xi},                {"theta", s.theta},              {"dot_sign", s.dot_sign}};
}

NuclearSite site_from_json(const nlohmann::json& j) {
  NuclearSite s;
  s.species = Species::Ge73;
  s.position = j.at("position_nm").get<std::array<double, 3>>();
  s.lattice_key = j.at("lattice_key").get<std::uint64_t>();
  s.coupling = j.at("A").get<double>();
  s.xi = j.at("xi").get<double>();
  s.theta = j.at("theta").get<double>();
  s.dot_sign = j.at("dot_sign").get<int>();
  return s;
}

}  // namespace

nlohmann::json to_json(const DeviceConfig& c) {
  nlohmann::json j;
  j["profile"] = {{"well_width_nm", c.profile.well_width},
                  {"barrier_ge_fraction", c.profile.barrier_ge_fraction},
                  {"interface_sigma_nm", c.profile.interface_sigma},
                  {"well_center_z_nm", c.profile.well_center_z}};
  j["isotopes"] = {{"si29", isotope_json(c.isotopes.si29)},
                   {"ge73", isotope_json(c.isotopes.ge73)},
                   {"si29_abundance_barrier", c.isotopes.si29_abundance_barrier}};
  j["potential"] = {{"band_offset_slope_ev", c.potential.band_offset_slope_ev},
                    {"electric_field_v_per_m", c.potential.electric_field},
                    {"effective_mass_me", c.potential.effective_mass}};
  j["grid_spacing_nm"] = c.grid_spacing;
  j["dot_diameter_nm"] = c.dot_diameter;
  j["dot_separation_nm"] = c.dot_separation;
  j["lateral_window_nm"] = c.lateral_window;
  j["vertical_margin_nm"] = c.vertical_margin;
  j["top_n"] = c.top_n;
  j["xi_scale_rad_s"] = c.xi_scale;
  j["xi_truncation"] = c.xi_truncation;
  j["valley_phase_grid"] = c.valley_phase_grid;
  return j;
}

DeviceConfig device_config_from_json(const nlohmann::json& j) {
  using json_util::read;
  DeviceConfig c;
  json_util::check_keys(j,
                        {"profile", "isotopes", "potential", "grid_spacing_nm", "dot_diameter_nm",
                         "dot_separation_nm", "lateral_window_nm", "vertical_margin_nm", "top_n",
                         "xi_scale_rad_s", "xi_truncation", "valley_phase_grid"},
                        "device");
  if (j.contains("profile")) {
    const auto& p = j.at("profile");
    json_util::check_keys(p, {"well_width_nm", "barrier_ge_fraction", "interface_sigma_nm", "well_center_z_nm"},
                          "device.profile");
    read(p, "well_width_nm", c.profile.well_width);
    read(p, "barrier_ge_fraction", c.profile.barrier_ge_fraction);
    read(p, "interface_sigma_nm", c.profile.interface_sigma);
    read(p, "well_center_z_nm", c.profile.well_center_z);
  }
  if (j.contains("isotopes")) {
    const auto& iso = j.at("isotopes");
    json_util::check_keys(iso, {"si29", "ge73", "si29_abundance_barrier"}, "device.isotopes");
    if (iso.contains("si29")) c.isotopes.si29 = isotope_from_json(iso.at("si29"), c.isotopes.si29);
    if (iso.contains("ge73")) c.isotopes.ge73 = isotope_from_json(iso.at("ge73"), c.isotopes.ge73);
    read(iso, "si29_abundance_barrier", c.isotopes.si29_abundance_barrier);
  }
  if (j.contains("potential")) {
    const auto& p = j.at("potential");
    json_util::check_keys(p, {"band_offset_slope_ev", "electric_field_v_per_m", "effective_mass_me"},
                          "device.potential");
    read(p, "band_offset_slope_ev", c.potential.band_offset_slope_ev);
    read(p, "electric_field_v_per_m", c.potential.electric_field);
    read(p, "effective_mass_me", c.potential.effective_mass);
  }
  read(j, "grid_spacing_nm", c.grid_spacing);
  read(j, "dot_diameter_nm", c.dot_diameter);
  read(j, "dot_separation_nm", c.dot_separation);
  read(j, "lateral_window_nm", c.lateral_window);
  read(j, "vertical_margin_nm", c.vertical_margin);
  read(j, "top_n", c.top_n);
  read(j, "xi_scale_rad_s", c.xi_scale);
  read(j, "xi_truncation", c.xi_truncation);
  read(j, "valley_phase_grid", c.valley_phase_grid);
  return c;
}

nlohmann::json to_json(const DeviceRealization& d) {
  nlohmann::json j;
  j["format"] = "spinbath-device-1";
  j["master_seed"] = d.master_seed;
  j["realization"] = d.realization;
  j["config"] = to_json(d.config);
  j["ground_energy_ev"] = d.ground_energy_ev;
  j["ge73_count"] = d.ge73_count;
  j["si29_count"] = d.si29_count;
  j["coupling_sums"] = {{"ge73", d.sums.ge73}, {"si29", d.sums.si29}};
  const auto t2 = t2_star(d, true);
  j["t2star_s"] = t2.t2star;
  j["t2star_rate2_ge73"] = t2.ge73_rate2;
  j["t2star_rate2_si29"] = t2.si29_rate2;
  j["dots"] = nlohmann::json::array();
  for (const auto& dot : d.dots) {
    nlohmann::json dj;
    dj["center_nm"] = dot.center;
    dj["valley_phase"] = dot.valley_phase;
    dj["nuclei"] = nlohmann::json::array();
    for (const auto& s : dot.nuclei) dj["nuclei"].push_back(site_json(s));
    j["dots"].push_back(dj);
  }
  return j;
}

DeviceRealization device_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != "spinbath-device-1") throw InvalidArgument("unrecognised device file format");
  DeviceRealization d;
  d.master_seed = j.at("master_seed").get<std::uint64_t>();
  d.realization = j.at("realization").get<std::uint64_t>();
  d.config = device_config_from_json(j.at("config"));
  d.ground_energy_ev = j.at("ground_energy_ev").get<double>();
  d.ge73_count = j.at("ge73_count").get<std::uint64_t>();
  d.si29_count = j.at("si29_count").get<std::uint64_t>();
  d.sums.ge73 = j.at("coupling_sums").at("ge73").get<double>();
  d.sums.si29 = j.at("coupling_sums").at("si29").get<double>();
  const auto& dots = j.at("dots");
  if (dots.size() != 2) throw InvalidArgument("device file must describe exactly two dots");
  for (std::size_t k = 0; k < 2; ++k) {
    d.dots[k].center = dots[k].at("center_nm").get<std::array<double, 2>>();
    d.dots[k].valley_phase = dots[k].at("valley_phase").get<double>();
    for (const auto& s : dots[k].at("nuclei")) d.dots[k].nuclei.push_back(site_from_json(s));
  }
  return d;
}

}  // namespace spinbath

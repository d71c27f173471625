#include "spinbath/crystal.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include "json.hpp"
#include <ostream>
#include <string>

namespace spinbath {

namespace {

constexpr double quarter = constants::a_si / 4.0;
constexpr std::int64_t key_offset = std::int64_t{1} << 20;
constexpr std::uint64_t key_mask = (std::uint64_t{1} << 21) - 1;

std::int64_t mod4(std::int64_t v) { return ((v % 4) + 4) % 4; }

std::int64_t first_index(double lo) { return static_cast<std::int64_t>(std::ceil(lo / quarter - 1e-9)); }

}  // namespace

void HeterostructureProfile::validate() const {
  if (!(well_width > 0.0)) throw InvalidArgument("well_width must be positive");
  if (!(barrier_ge_fraction >= 0.0 && barrier_ge_fraction <= 1.0))
    throw InvalidArgument("barrier_ge_fraction must lie in [0, 1]");
  if (!(interface_sigma >= 0.0)) throw InvalidArgument("interface_sigma must be non-negative");
  if (!std::isfinite(well_center_z)) throw InvalidArgument("well_center_z must be finite");
}

double ge_fraction(double z, const HeterostructureProfile& p) {
  const double z1 = p.well_bottom();
  const double z2 = p.well_top();
  double inside = 0.0;
  if (p.interface_sigma > 0.0) {
    const double s = p.interface_sigma * std::numbers::sqrt2;
    inside = 0.5 * (std::erf((z - z1) / s) - std::erf((z - z2) / s));
  } else {
    auto step = [](double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); };
    inside = 0.5 * (step(z - z1) - step(z - z2));
  }
  return p.barrier_ge_fraction * (1.0 - inside);
}

double si29_abundance_at(double z, const HeterostructureProfile& p, const IsotopeTable& iso) {
  if (p.barrier_ge_fraction <= 0.0) return iso.si29.abundance;
  const double w = ge_fraction(z, p) / p.barrier_ge_fraction;
  return iso.si29.abundance + (iso.si29_abundance_barrier - iso.si29.abundance) * w;
}

bool SimulationBox::contains(const std::array<double, 3>& r) const {
  return r[0] >= x_min && r[0] < x_max && r[1] >= y_min && r[1] < y_max && r[2] >= z_min && r[2] < z_max;
}

void SimulationBox::validate() const {
  if (!(x_max > x_min && y_max > y_min && z_max > z_min)) throw InvalidArgument("degenerate simulation box");
}

void SimulationBox::validate_for(const HeterostructureProfile& profile) const {
  validate();
  if (z_min > profile.well_bottom() - 10.0 || z_max < profile.well_top() + 10.0)
    throw InvalidArgument("simulation box must include at least 10 nm of barrier on each side of the well");
}

bool is_diamond_site(const LatticeIndex& idx) {
  const std::int64_t pi = mod4(idx.i) & 1, pj = mod4(idx.j) & 1, pk = mod4(idx.k) & 1;
  if (pi != pj || pj != pk) return false;
  return mod4(idx.i + idx.j + idx.k) == (pi ? 3 : 0);
}

std::uint64_t pack_lattice_key(const LatticeIndex& idx) {
  auto part = [](std::int64_t v) {
    const std::int64_t shifted = v + key_offset;
    if (shifted < 0 || shifted > static_cast<std::int64_t>(key_mask))
      throw InvalidArgument("lattice index out of packable range");
    return static_cast<std::uint64_t>(shifted);
  };
  return part(idx.i) | (part(idx.j) << 21) | (part(idx.k) << 42);
}

LatticeIndex unpack_lattice_key(std::uint64_t key) {
  auto part = [](std::uint64_t v) { return static_cast<std::int64_t>(v & key_mask) - key_offset; };
  return {part(key), part(key >> 21), part(key >> 42)};
}

std::array<double, 3> lattice_position(const LatticeIndex& idx) {
  return {idx.i * quarter, idx.j * quarter, idx.k * quarter};
}

namespace {

// Shared enumeration kernel; visit(i, j, k) for every site, ordered (k, j, i).
template <typename Visit>
void enumerate_sites(const SimulationBox& box, Visit&& visit) {
  box.validate();
  const std::int64_t i0 = first_index(box.x_min), j0 = first_index(box.y_min), k0 = first_index(box.z_min);
  for (std::int64_t k = k0; k * quarter < box.z_max; ++k) {
    const std::int64_t parity = mod4(k) & 1;
    const std::int64_t target = parity ? 3 : 0;
    std::int64_t j = j0;
    if ((mod4(j) & 1) != parity) ++j;
    for (; j * quarter < box.y_max; j += 2) {
      std::int64_t i = i0 + mod4(target - j - k - i0);
      for (; i * quarter < box.x_max; i += 4) visit(i, j, k);
    }
  }
}

}  // namespace

void for_each_lattice_site(const SimulationBox& box, const std::function<void(const LatticeIndex&)>& visit) {
  enumerate_sites(box, [&](std::int64_t i, std::int64_t j, std::int64_t k) { visit(LatticeIndex{i, j, k}); });
}

std::uint64_t count_lattice_sites(const SimulationBox& box) {
  std::uint64_t n = 0;
  enumerate_sites(box, [&](std::int64_t, std::int64_t, std::int64_t) { ++n; });
  return n;
}

void for_each_spinful_site(const HeterostructureProfile& profile, const SimulationBox& box,
                           const IsotopeTable& isotopes, const RngStream& rng,
                           const std::function<void(const NuclearSite&)>& visit) {
  profile.validate();
  isotopes.validate();
  box.validate();
  const std::uint64_t key = rng.key();
  std::int64_t current_k = std::numeric_limits<std::int64_t>::min();
  double p_ge = 0.0, p_spinful = 0.0;
  enumerate_sites(box, [&](std::int64_t i, std::int64_t j, std::int64_t k) {
    if (k != current_k) {
      current_k = k;
      const double z = k * quarter;
      const double x = ge_fraction(z, profile);
      p_ge = isotopes.ge73.abundance * x;
      p_spinful = p_ge + si29_abundance_at(z, profile, isotopes) * (1.0 - x);
    }
    if (p_spinful <= 0.0) return;
    const LatticeIndex idx{i, j, k};
    const std::uint64_t site_key = pack_lattice_key(idx);
    const double u = to_unit_double(keyed_draw(key, site_key));
    if (u >= p_spinful) return;
    NuclearSite site;
    site.position = lattice_position(idx);
    site.lattice_key = site_key;
    site.species = u < p_ge ? Species::Ge73 : Species::Si29;
    visit(site);
  });
}

std::vector<NuclearSite> generate_crystal(const HeterostructureProfile& profile, const SimulationBox& box,
                                          const IsotopeTable& isotopes, const RngStream& rng) {
  std::vector<NuclearSite> sites;
  for_each_spinful_site(profile, box, isotopes, rng, [&](const NuclearSite& s) { sites.push_back(s); });
  return sites;
}

std::pair<double, double> draw_quadrupole_params(const NuclearSite& site, double xi_scale, RngStream& rng,
                                                 double truncation) {
  if (site.species != Species::Ge73) throw InvalidArgument("quadrupole params undefined for spin-1/2");
  if (!(xi_scale >= 0.0)) throw InvalidArgument("xi_scale must be non-negative");
  // Inverse CDF of the Lorentzian restricted to [-T, T] (in units of the scale).
  const double u = 2.0 * rng.uniform_open() - 1.0;
  const double xi = xi_scale * std::tan(u * std::atan(truncation));
  const double gx = rng.normal();
  const double gy = rng.normal();
  double theta = std::atan2(gx, gy);
  // atan(x/y) folds the full circle onto (-pi/2, pi/2].
  if (theta > constants::pi / 2) theta -= constants::pi;
  if (theta <= -constants::pi / 2) theta += constants::pi;
  return {xi_scale == 0.0 ? 0.0 : xi, theta};
}

void write_crystal_jsonl(std::ostream& out, const std::vector<NuclearSite>& sites) {
  for (const auto& s : sites) {
    nlohmann::json j;
    j["position_nm"] = s.position;
    j["species"] = std::string(to_string(s.species));
    j["xi"] = s.xi;
    j["theta"] = s.theta;
    j["lattice_key"] = s.lattice_key;
    out << j.dump() << '\n';
  }
}

std::vector<NuclearSite> read_crystal_jsonl(std::istream& in) {
  std::vector<NuclearSite> sites;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    NuclearSite s;
    s.position = j.at("position_nm").get<std::array<double, 3>>();
    s.species = species_from_string(j.at("species").get<std::string>());
    s.xi = j.at("xi").get<double>();
    s.theta = j.at("theta").get<double>();
    s.lattice_key = j.value("lattice_key", std::uint64_t{0});
    sites.push_back(s);
  }
  return sites;
}

}  // namespace spinbath

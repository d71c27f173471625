#include "spinbath/hyperfine.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

namespace spinbath {

double hyperfine_prefactor(const IsotopeSpec& iso) {
  using namespace constants;
  constexpr double per_nm3 = 1e27;
  return 2.0 * mu0 / 3.0 * g0 * mu_b * iso.gamma * iso.eta * per_nm3;
}

double coupling(const NuclearSite& site, const EnvelopeWavefunction& wf, const IsotopeSpec& iso) {
  return hyperfine_prefactor(iso) * density_at(site.position, wf);
}

std::vector<NuclearSite> select_top(std::span<const NuclearSite> sites, const EnvelopeWavefunction& wf,
                                    const IsotopeSpec& iso, std::size_t n) {
  if (n < 1) throw InvalidArgument("select_top: N must be at least 1");
  std::vector<NuclearSite> pool;
  for (const auto& s : sites) {
    if (s.species != iso.species) continue;
    NuclearSite c = s;
    c.coupling = coupling(s, wf, iso);
    pool.push_back(c);
  }
  auto by_strength = [](const NuclearSite& a, const NuclearSite& b) {
    if (a.coupling != b.coupling) return a.coupling > b.coupling;
    return a.lattice_key < b.lattice_key;
  };
  if (pool.size() < n) {
    std::clog << "warning: only " << pool.size() << " " << to_string(iso.species)
              << " sites available, fewer than the requested " << n << "\n";
    std::sort(pool.begin(), pool.end(), by_strength);
    return pool;
  }
  std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n), pool.end(), by_strength);
  pool.resize(n);
  return pool;
}

T2StarResult t2_star(const CouplingSums& sums, bool include_si) {
  T2StarResult r;
  r.ge73_rate2 = 0.5 * sums.ge73;
  r.si29_rate2 = 0.5 * sums.si29;
  const double total = r.ge73_rate2 + (include_si ? r.si29_rate2 : 0.0);
  if (!(total > 0.0)) throw NumericalError("no spinful nuclei: T2* undefined (infinite)");
  r.t2star = 1.0 / std::sqrt(total);
  return r;
}

}  // namespace spinbath

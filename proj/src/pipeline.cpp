#include "spinbath/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "spinbath/json_util.hpp"
#include "spinbath/parallel.hpp"
#include "spinbath/quadrupole.hpp"
#include "spinbath/spectroscopy.hpp"

namespace fs = std::filesystem;

namespace spinbath {

const char* const code_version = "spinbath 0.3.0";

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

// Prefixes InvalidArgument messages with the config path being validated.
template <typename Fn>
void with_context(const std::string& where, Fn&& fn) {
  try {
    fn();
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(where + ": " + e.what());
  }
}

nlohmann::json grid_json(const GridSpec& g, const char* unit) {
  return {{"spacing", g.log_spacing ? "log" : "linear"},
          {std::string("min_") + unit, g.min},
          {std::string("max_") + unit, g.max},
          {"count", g.count}};
}

GridSpec grid_from_json(const nlohmann::json& j, GridSpec g, const char* unit, const std::string& where) {
  const std::string lo = std::string("min_") + unit, hi = std::string("max_") + unit;
  json_util::check_keys(j, {"spacing", lo, hi, "count"}, where);
  if (j.contains("spacing")) {
    const auto s = j.at("spacing").get<std::string>();
    if (s != "log" && s != "linear") throw InvalidArgument(where + ".spacing must be 'log' or 'linear'");
    g.log_spacing = s == "log";
  }
  json_util::read(j, lo.c_str(), g.min);
  json_util::read(j, hi.c_str(), g.max);
  json_util::read(j, "count", g.count);
  return g;
}

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name, const std::string& file) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw InvalidArgument(file + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
  std::vector<double> numbers(const std::string& name, const std::string& file) const {
    const std::size_t c = column(name, file);
    std::vector<double> v;
    for (const auto& r : rows) {
      if (c >= r.size()) throw InvalidArgument(file + ": short row");
      char* end = nullptr;
      const double x = std::strtod(r[c].c_str(), &end);
      if (end == r[c].c_str() || *end != '\0') throw InvalidArgument(file + ": bad number '" + r[c] + "'");
      v.push_back(x);
    }
    return v;
  }
};

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  return out;
}

Csv read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  Csv csv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (csv.header.empty())
      csv.header = split_row(line);
    else
      csv.rows.push_back(split_row(line));
  }
  if (csv.header.empty()) throw InvalidArgument(path.string() + ": empty file");
  return csv;
}

std::string label(double width_nm, double b_tesla) { return "w" + fmt(width_nm) + "nm_B" + fmt(b_tesla * 1e3) + "mT"; }

int resolve_pulses_for_echo(int n) {
  if (n == 1 || (n >= 2 && n % 2 == 0)) return n;
  throw InvalidArgument("pulses: unsupported sequence (need 1 for Hahn echo or even n for CPn)");
}

struct MeanStd {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double std = std::numeric_limits<double>::quiet_NaN();
  std::size_t count = 0;
};

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd r;
  double s = 0.0;
  for (double x : v)
    if (std::isfinite(x)) {
      s += x;
      ++r.count;
    }
  if (r.count == 0) return r;
  r.mean = s / r.count;
  double ss = 0.0;
  for (double x : v)
    if (std::isfinite(x)) ss += (x - r.mean) * (x - r.mean);
  r.std = r.count > 1 ? std::sqrt(ss / (r.count - 1)) : 0.0;
  return r;
}

}  // namespace

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void GridSpec::validate(const char* what) const {
  const std::string w(what);
  if (count < 1) throw InvalidArgument(w + ".count must be >= 1");
  if (!std::isfinite(min) || !std::isfinite(max)) throw InvalidArgument(w + " bounds must be finite");
  if (!(min > 0.0)) throw InvalidArgument(w + " lower bound must be positive");
  if (!(max >= min)) throw InvalidArgument(w + " upper bound below lower bound");
  if (count > 1 && !(max > min)) throw InvalidArgument(w + " needs max > min for count > 1");
}

std::vector<double> GridSpec::values() const {
  std::vector<double> v;
  v.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double u = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    v.push_back(log_spacing ? min * std::pow(max / min, u) : min + (max - min) * u);
  }
  return v;
}

void RunConfig::validate() const {
  with_context("device", [&] { device.validate(); });
  for (double w : widths())
    with_context("widths_nm", [&] {
      DeviceConfig d = device;
      d.profile.well_width = w;
      d.validate();
    });
  if (pulses < 0) throw InvalidArgument("pulses must be >= 0");
  with_context("tau_grid", [&] { tau_grid.validate("tau_grid"); });
  with_context("filter", [&] { f_grid.validate("f_grid"); });
  if (!(filter_tau > 0.0)) throw InvalidArgument("filter.tau_s must be positive");
  if (fields_tesla.empty()) throw InvalidArgument("fields_tesla must not be empty");
  for (double b : fields_tesla)
    if (!(b >= 0.0) || !std::isfinite(b)) throw InvalidArgument("fields_tesla entries must be finite and >= 0");
  if (ensemble_size < 1) throw InvalidArgument("ensemble_size must be >= 1");
  if (workers && *workers < 1) throw InvalidArgument("workers must be >= 1");
  if (output_dir.empty()) throw InvalidArgument("output_dir must not be empty");
  if (!(p0 > p_inf)) throw InvalidArgument("measurement: inverted contrast (p0 must exceed p_inf)");
}

std::vector<double> RunConfig::widths() const {
  return widths_nm.empty() ? std::vector<double>{device.profile.well_width} : widths_nm;
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["device"] = to_json(c.device);
  j["pulses"] = c.pulses;
  j["tau_grid"] = grid_json(c.tau_grid, "s");
  j["fields_tesla"] = c.fields_tesla;
  j["widths_nm"] = c.widths_nm;
  j["ensemble_size"] = c.ensemble_size;
  j["seed"] = c.seed;
  j["workers"] = c.workers ? nlohmann::json(*c.workers) : nlohmann::json(nullptr);
  j["output_dir"] = c.output_dir;
  j["filter"] = {{"tau_s", c.filter_tau}, {"f_grid", grid_json(c.f_grid, "hz")}};
  j["measurement"] = {{"p0", c.p0}, {"p_inf", c.p_inf}};
  return j;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  json_util::check_keys(j,
                        {"device", "pulses", "tau_grid", "fields_tesla", "widths_nm", "ensemble_size", "seed",
                         "workers", "output_dir", "filter", "measurement"},
                        "config");
  with_context("device", [&] {
    if (j.contains("device")) c.device = device_config_from_json(j.at("device"));
  });
  json_util::read(j, "pulses", c.pulses);
  if (j.contains("tau_grid")) c.tau_grid = grid_from_json(j.at("tau_grid"), c.tau_grid, "s", "tau_grid");
  json_util::read(j, "fields_tesla", c.fields_tesla);
  json_util::read(j, "widths_nm", c.widths_nm);
  json_util::read(j, "ensemble_size", c.ensemble_size);
  json_util::read(j, "seed", c.seed);
  if (j.contains("workers") && !j.at("workers").is_null()) {
    int w = 0;
    json_util::read(j, "workers", w);
    c.workers = w;
  }
  json_util::read(j, "output_dir", c.output_dir);
  if (j.contains("filter")) {
    const auto& f = j.at("filter");
    json_util::check_keys(f, {"tau_s", "f_grid"}, "filter");
    json_util::read(f, "tau_s", c.filter_tau);
    if (f.contains("f_grid")) c.f_grid = grid_from_json(f.at("f_grid"), c.f_grid, "hz", "filter.f_grid");
  }
  if (j.contains("measurement")) {
    const auto& m = j.at("measurement");
    json_util::check_keys(m, {"p0", "p_inf"}, "measurement");
    json_util::read(m, "p0", c.p0);
    json_util::read(m, "p_inf", c.p_inf);
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("config " + path + ": " + e.what());
  }
  return run_config_from_json(j);
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw NumericalError("sha256 failed");
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return out.str();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

RunManifest::RunManifest(std::string command, const RunConfig& config, int workers)
    : command_(std::move(command)), config_(to_json(config)), workers_(workers) {}

void RunManifest::add_seed(std::uint64_t realization, std::uint64_t crystal_key) {
  seeds_.push_back({{"realization", realization}, {"crystal_stream_key", crystal_key}});
}

void RunManifest::write_file(const fs::path& dir, const std::string& relative, const std::string& content) {
  const fs::path p = dir / relative;
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + p.string());
  out << content;
  out.close();
  if (!out) throw InvalidArgument("write failed: " + p.string());
  outputs_.push_back({relative, sha256_hex(content), content.size()});
}

void RunManifest::write(const fs::path& dir, double wall_seconds) {
  nlohmann::json j;
  j["command"] = command_;
  j["code_version"] = code_version;
  j["config"] = config_;
  j["config_sha256"] = sha256_hex(config_.dump());
  j["seeds"] = seeds_;
  j["workers"] = workers_;
  j["wall_clock_s"] = wall_seconds;
  j["outputs"] = nlohmann::json::array();
  for (const auto& o : outputs_) j["outputs"].push_back({{"path", o.path}, {"sha256", o.sha256}, {"bytes", o.bytes}});
  fs::create_directories(dir);
  std::ofstream out(dir / "manifest.json");
  out << j.dump(2) << "\n";
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void record_seeds(RunManifest& m, const RunConfig& c) {
  for (int r = 0; r < c.ensemble_size; ++r) {
    const std::uint64_t path[2] = {static_cast<std::uint64_t>(r), stream_ids::crystal};
    m.add_seed(static_cast<std::uint64_t>(r), stream_key(c.seed, path));
  }
}

std::string wavefunction_csv(const EnvelopeWavefunction& wf) {
  std::ostringstream out;
  write_wavefunction_csv(out, wf);
  return out.str();
}

}  // namespace

RunManifest cmd_build_device(const RunConfig& config, int workers) {
  const auto t0 = Clock::now();
  config.validate();
  RunManifest manifest("build-device", config, workers);
  record_seeds(manifest, config);
  const fs::path dir = config.output_dir;
  const auto env = solve_envelope(config.device);
  std::vector<std::string> docs(config.ensemble_size);
  parallel_for(docs.size(), workers, [&](std::size_t r) {
    docs[r] = to_json(build_device(config.device, config.seed, r, env)).dump(1) + "\n";
  });
  manifest.write_file(dir, "wavefunction.csv", wavefunction_csv(env));
  for (std::size_t r = 0; r < docs.size(); ++r)
    manifest.write_file(dir, "devices/device_r" + std::to_string(r) + ".json", docs[r]);
  manifest.write(dir, seconds_since(t0));
  return manifest;
}

RunManifest cmd_echo_sweep(const RunConfig& config, int workers) {
  const auto t0 = Clock::now();
  config.validate();
  const int n = resolve_pulses_for_echo(config.pulses);
  RunManifest manifest("echo-sweep", config, workers);
  record_seeds(manifest, config);
  const fs::path dir = config.output_dir;
  const auto widths = config.widths();
  const auto taus = config.tau_grid.values();
  const auto seq = PulseSequence::from_pulse_count(n);
  const std::size_t nr = config.ensemble_size, nb = config.fields_tesla.size();

  std::vector<DeviceConfig> dcfg(widths.size(), config.device);
  std::vector<std::optional<EnvelopeWavefunction>> envs(widths.size());
  parallel_for(widths.size(), workers, [&](std::size_t w) {
    dcfg[w].profile.well_width = widths[w];
    envs[w] = solve_envelope(dcfg[w]);
  });

  // results[(w * nr + r) * nb + b][tau]
  std::vector<std::vector<ChiResult>> results(widths.size() * nr * nb);
  std::vector<double> t2star(widths.size() * nr);
  parallel_for(widths.size() * nr, workers, [&](std::size_t task) {
    const std::size_t w = task / nr, r = task % nr;
    const auto dev = build_device(dcfg[w], config.seed, r, *envs[w]);
    t2star[task] = t2_star(dev, true).t2star;
    const auto nuclei = dev.all_nuclei();
    for (std::size_t b = 0; b < nb; ++b)
      results[task * nb + b] = chi_curve(std::span<const NuclearSite>(nuclei), taus, n, config.fields_tesla[b], 1);
  });

  std::ostringstream index;
  index << "width_nm,b_tesla,realization,n,file\n";
  std::ostringstream t2s;
  t2s << "width_nm,realization,t2star_s\n";
  for (std::size_t w = 0; w < widths.size(); ++w) {
    for (std::size_t r = 0; r < nr; ++r) t2s << fmt(widths[w]) << "," << r << "," << fmt(t2star[w * nr + r]) << "\n";
    for (std::size_t b = 0; b < nb; ++b) {
      const double bt = config.fields_tesla[b];
      std::vector<std::vector<double>> chi_by_tau(taus.size()), p_by_tau(taus.size());
      for (std::size_t r = 0; r < nr; ++r) {
        const auto& res = results[(w * nr + r) * nb + b];
        std::ostringstream csv;
        csv << "tau_s,t_s,chi,p_singlet\n";
        for (std::size_t i = 0; i < taus.size(); ++i) {
          const double chi = res[i].chi;
          const double p = 0.5 + 0.5 * std::max(res[i].product.real(), 0.0);
          csv << fmt(taus[i]) << "," << fmt(seq.total_time(taus[i])) << "," << fmt(chi) << "," << fmt(p) << "\n";
          chi_by_tau[i].push_back(chi);
          p_by_tau[i].push_back(p);
        }
        const std::string name = "decays/decay_" + label(widths[w], bt) + "_r" + std::to_string(r) + ".csv";
        manifest.write_file(dir, name, csv.str());
        index << fmt(widths[w]) << "," << fmt(bt) << "," << r << "," << n << "," << name << "\n";
      }
      std::ostringstream agg;
      agg << "tau_s,t_s,chi_mean,chi_std,p_mean,p_std,censored\n";
      for (std::size_t i = 0; i < taus.size(); ++i) {
        const auto c = mean_std(chi_by_tau[i]);
        const auto p = mean_std(p_by_tau[i]);
        agg << fmt(taus[i]) << "," << fmt(seq.total_time(taus[i])) << "," << fmt(c.mean) << "," << fmt(c.std) << ","
            << fmt(p.mean) << "," << fmt(p.std) << "," << (chi_by_tau[i].size() - c.count) << "\n";
      }
      manifest.write_file(dir, "decay_mean_" + label(widths[w], bt) + ".csv", agg.str());
    }
  }
  manifest.write_file(dir, "t2star.csv", t2s.str());
  manifest.write_file(dir, "sweep_index.csv", index.str());
  manifest.write(dir, seconds_since(t0));
  return manifest;
}

namespace {

struct IndexRow {
  double width = 0.0, b = 0.0;
  std::uint64_t realization = 0;
  int n = 0;
  std::string file;
};

std::vector<IndexRow> read_index(const fs::path& sweep_dir) {
  const fs::path p = sweep_dir / "sweep_index.csv";
  if (!fs::exists(p)) throw InvalidArgument("no sweep_index.csv in " + sweep_dir.string() + " (empty sweep directory?)");
  const Csv csv = read_csv(p);
  const auto w = csv.numbers("width_nm", p.string()), b = csv.numbers("b_tesla", p.string());
  const auto r = csv.numbers("realization", p.string()), n = csv.numbers("n", p.string());
  const std::size_t fc = csv.column("file", p.string());
  std::vector<IndexRow> rows;
  for (std::size_t i = 0; i < csv.rows.size(); ++i)
    rows.push_back({w[i], b[i], static_cast<std::uint64_t>(r[i]), static_cast<int>(n[i]), csv.rows[i].at(fc)});
  if (rows.empty()) throw InvalidArgument("sweep index in " + sweep_dir.string() + " lists no curves");
  return rows;
}

}  // namespace

RunManifest cmd_t2_report(const RunConfig& config, const fs::path& sweep_dir, int workers) {
  const auto t0 = Clock::now();
  config.validate();
  RunManifest manifest("t2-report", config, workers);
  const auto rows = read_index(sweep_dir);
  std::vector<double> t2(rows.size());
  std::vector<std::string> status(rows.size());
  parallel_for(rows.size(), workers, [&](std::size_t i) {
    const fs::path f = sweep_dir / rows[i].file;
    const Csv csv = read_csv(f);
    const auto t = csv.numbers("t_s", f.string());
    const auto chi = csv.numbers("chi", f.string());
    try {
      t2[i] = extract_t2(t, chi);
      status[i] = "ok";
    } catch (const NumericalError& e) {
      t2[i] = std::numeric_limits<double>::quiet_NaN();
      status[i] = chi.empty() || chi.front() < 1.0 ? "beyond_sweep" : "below_sweep";
    }
  });
  std::ostringstream samples;
  samples << "width_nm,b_tesla,realization,t2_s,status\n";
  std::map<std::pair<double, double>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    samples << fmt(rows[i].width) << "," << fmt(rows[i].b) << "," << rows[i].realization << "," << fmt(t2[i]) << ","
            << status[i] << "\n";
    groups[{rows[i].width, rows[i].b}].push_back(i);
  }
  std::ostringstream report;
  report << "width_nm,b_tesla,count,censored,t2_mean_s,t2_std_s\n";
  for (const auto& [key, idx] : groups) {
    std::vector<double> v;
    for (auto i : idx) v.push_back(t2[i]);
    const auto ms = mean_std(v);
    report << fmt(key.first) << "," << fmt(key.second) << "," << idx.size() << "," << (idx.size() - ms.count) << ","
           << fmt(ms.mean) << "," << fmt(ms.std) << "\n";
  }
  const fs::path dir = config.output_dir;
  manifest.write_file(dir, "t2_samples.csv", samples.str());
  manifest.write_file(dir, "t2_vs_width_vs_B.csv", report.str());
  manifest.write(dir, seconds_since(t0));
  return manifest;
}

namespace {

std::string spectrum_csv(const NoiseSpectrum& s) {
  std::ostringstream out;
  out << "f_hz,s_field,s_freq,censored,lobe_bw_hz\n";
  for (std::size_t i = 0; i < s.f.size(); ++i)
    out << fmt(s.f[i]) << "," << fmt(s.s_field[i]) << "," << fmt(s.s_freq[i]) << "," << (s.censored[i] ? 1 : 0) << ","
        << fmt(s.lobe_bandwidth[i]) << "\n";
  return out.str();
}

// Local maximum of `values` closest to `target` within the lobe bandwidth there.
std::optional<double> matched_peak(const std::vector<double>& f, const std::vector<double>& values,
                                   const std::vector<bool>& censored, double target, int n) {
  std::optional<double> best;
  for (std::size_t i : local_maxima(values, censored)) {
    const double bw = 4.0 * f[i] / n;
    if (std::abs(f[i] - target) <= bw && (!best || std::abs(f[i] - target) < std::abs(*best - target))) best = f[i];
  }
  return best;
}

}  // namespace

RunManifest cmd_invert(const RunConfig& config, const fs::path& input, const std::string& meta_path, int workers) {
  const auto t0 = Clock::now();
  config.validate();
  RunManifest manifest("invert", config, workers);
  const fs::path dir = config.output_dir;

  if (!fs::is_directory(input)) {
    // Measured curve: tau_s, p_singlet plus sidecar metadata.
    const fs::path meta = meta_path.empty() ? fs::path(input).replace_extension(".json") : fs::path(meta_path);
    std::ifstream min(meta);
    if (!min) throw InvalidArgument("missing metadata sidecar " + meta.string() + " (needs n and b_tesla)");
    nlohmann::json mj;
    try {
      mj = nlohmann::json::parse(min);
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument(meta.string() + ": " + e.what());
    }
    json_util::check_keys(mj, {"n", "b_tesla", "p0", "p_inf"}, meta.string());
    if (!mj.contains("n")) throw InvalidArgument(meta.string() + ": missing n (pulse count)");
    if (!mj.contains("b_tesla")) throw InvalidArgument(meta.string() + ": missing b_tesla");
    DecayCurve curve;
    json_util::read(mj, "n", curve.n);
    json_util::read(mj, "b_tesla", curve.b_tesla);
    curve.p0 = config.p0;
    curve.p_inf = config.p_inf;
    json_util::read(mj, "p0", curve.p0);
    json_util::read(mj, "p_inf", curve.p_inf);
    curve.kind = curve.n == 1 ? SequenceKind::HE : SequenceKind::CPn;
    if (curve.n < 2 || curve.n % 2) throw InvalidArgument("inversion defined for CPn (even n >= 2)");
    const Csv csv = read_csv(input);
    curve.tau = csv.numbers("tau_s", input.string());
    if (std::find(csv.header.begin(), csv.header.end(), "chi") != csv.header.end())
      curve.chi = csv.numbers("chi", input.string());
    else
      curve.p_singlet = csv.numbers("p_singlet", input.string());
    const auto spec = invert_spectrum(curve);
    manifest.write_file(dir, "spectrum.csv", spectrum_csv(spec));
    const auto [f1, f2] = peak_locations(curve.b_tesla);
    std::ostringstream peaks;
    peaks << "b_tesla,f_larmor_hz,f_harmonic_hz,matched_larmor_hz,matched_harmonic_hz\n";
    const auto m1 = matched_peak(spec.f, spec.s_freq, spec.censored, f1, curve.n);
    const auto m2 = matched_peak(spec.f, spec.s_freq, spec.censored, f2, curve.n);
    peaks << fmt(curve.b_tesla) << "," << fmt(f1) << "," << fmt(f2) << "," << (m1 ? fmt(*m1) : "") << ","
          << (m2 ? fmt(*m2) : "") << "\n";
    manifest.write_file(dir, "peaks.csv", peaks.str());
    manifest.write(dir, seconds_since(t0));
    return manifest;
  }

  const auto rows = read_index(input);
  std::vector<NoiseSpectrum> spectra(rows.size());
  parallel_for(rows.size(), workers, [&](std::size_t i) {
    if (rows[i].n < 2 || rows[i].n % 2) throw InvalidArgument("inversion defined for CPn (even n >= 2)");
    const fs::path f = input / rows[i].file;
    const Csv csv = read_csv(f);
    spectra[i] = invert_spectrum(csv.numbers("tau_s", f.string()), csv.numbers("chi", f.string()), rows[i].n);
  });
  std::map<std::pair<double, double>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    manifest.write_file(dir, "spectra/" + fs::path(rows[i].file).stem().string() + "_spectrum.csv",
                        spectrum_csv(spectra[i]));
    groups[{rows[i].width, rows[i].b}].push_back(i);
  }
  std::ostringstream peaks;
  peaks << "width_nm,b_tesla,f_larmor_hz,f_harmonic_hz,matched_larmor_hz,matched_harmonic_hz\n";
  for (const auto& [key, idx] : groups) {
    const auto& ref = spectra[idx.front()];
    const int n = rows[idx.front()].n;
    std::vector<double> mean_freq(ref.f.size()), mean_field(ref.f.size());
    std::vector<bool> cens(ref.f.size());
    std::ostringstream agg;
    agg << "f_hz,s_freq_mean,s_freq_std,s_field_mean,s_field_std,uncensored,lobe_bw_hz\n";
    for (std::size_t k = 0; k < ref.f.size(); ++k) {
      std::vector<double> a, b;
      for (auto i : idx) {
        if (spectra[i].f.size() != ref.f.size() || spectra[i].f[k] != ref.f[k])
          throw InvalidArgument("ensemble curves use different tau grids");
        a.push_back(spectra[i].s_freq[k]);
        b.push_back(spectra[i].s_field[k]);
      }
      const auto ma = mean_std(a), mb = mean_std(b);
      mean_freq[k] = ma.mean;
      mean_field[k] = mb.mean;
      cens[k] = ma.count == 0;
      agg << fmt(ref.f[k]) << "," << fmt(ma.mean) << "," << fmt(ma.std) << "," << fmt(mb.mean) << "," << fmt(mb.std)
          << "," << ma.count << "," << fmt(ref.lobe_bandwidth[k]) << "\n";
    }
    manifest.write_file(dir, "spectrum_mean_" + label(key.first, key.second) + ".csv", agg.str());
    const auto [f1, f2] = peak_locations(key.second);
    const auto m1 = matched_peak(ref.f, mean_freq, cens, f1, n);
    const auto m2 = matched_peak(ref.f, mean_freq, cens, f2, n);
    peaks << fmt(key.first) << "," << fmt(key.second) << "," << fmt(f1) << "," << fmt(f2) << ","
          << (m1 ? fmt(*m1) : "") << "," << (m2 ? fmt(*m2) : "") << "\n";
  }
  manifest.write_file(dir, "peaks.csv", peaks.str());
  manifest.write(dir, seconds_since(t0));
  return manifest;
}

RunManifest cmd_filter_eval(const RunConfig& config, int workers) {
  const auto t0 = Clock::now();
  config.validate();
  RunManifest manifest("filter-eval", config, workers);
  const auto seq = PulseSequence::from_pulse_count(config.pulses);
  const auto fs_ = config.f_grid.values();
  const double b = config.fields_tesla.front();
  std::vector<std::array<double, 3>> vals(fs_.size());
  parallel_for(fs_.size(), workers, [&](std::size_t i) {
    vals[i] = {f0(seq, fs_[i], config.filter_tau), f0_closed_form(seq, fs_[i], config.filter_tau),
               full_filter(seq, fs_[i], config.filter_tau, b)};
  });
  std::ostringstream out;
  out << "f_hz,f0_s2,f0_closed_s2,full_s2\n";
  for (std::size_t i = 0; i < fs_.size(); ++i)
    out << fmt(fs_[i]) << "," << fmt(vals[i][0]) << "," << fmt(vals[i][1]) << "," << fmt(vals[i][2]) << "\n";
  manifest.write_file(config.output_dir, "filter.csv", out.str());
  manifest.write(config.output_dir, seconds_since(t0));
  return manifest;
}

RunManifest cmd_fid_fit(const RunConfig& config, const fs::path& input, int workers) {
  const auto t0 = Clock::now();
  config.validate();
  RunManifest manifest("fid-fit", config, workers);
  if (input.empty()) throw InvalidArgument("fid-fit needs --input with columns t_s,p_singlet");
  const Csv csv = read_csv(input);
  const auto t = csv.numbers("t_s", input.string());
  const auto p = csv.numbers("p_singlet", input.string());
  const auto r = fid_fit(t, p);
  nlohmann::json j{{"t2star_s", r.t2star},       {"omega0_rad_s", r.omega0}, {"b0_tesla", r.b0_tesla},
                   {"amplitude", r.amplitude},    {"offset", r.offset},       {"rss", r.rss},
                   {"rss_gaussian", r.rss_gaussian}, {"b0_identifiable", r.b0_identifiable}};
  manifest.write_file(config.output_dir, "fid_fit.json", j.dump(2) + "\n");
  manifest.write(config.output_dir, seconds_since(t0));
  return manifest;
}

}  // namespace spinbath

#include <cmath>
#include <map>
#include <sstream>

#include "doctest.h"
#include "spinbath/pipeline.hpp"
#include "spinbath/quadrupole.hpp"
#include "support/tmpdir.hpp"

using namespace spinbath;
namespace fs = std::filesystem;
using testutil::slurp;
using testutil::spit;
using testutil::TempDir;

namespace {

// Small, fast sweep configuration.
RunConfig small_config(const fs::path& out) {
  RunConfig c;
  c.device.lateral_window = 40.0;
  c.device.top_n = 60;
  c.tau_grid = {true, 1e-6, 2e-4, 8};
  c.fields_tesla = {0.0, 0.01};
  c.ensemble_size = 3;
  c.seed = 5;
  c.output_dir = out.string();
  return c;
}

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != "manifest.json")
      out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return out;
}

std::vector<std::vector<std::string>> rows(const std::string& csv) {
  std::vector<std::vector<std::string>> r;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    r.push_back(cells);
  }
  return r;
}

void check_manifest(const fs::path& dir, const RunManifest& m) {
  const auto j = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(j.at("config_sha256") == sha256_hex(j.at("config").dump()));
  CHECK(j.at("code_version") == code_version);
  CHECK(j.contains("wall_clock_s"));
  CHECK(j.contains("workers"));
  CHECK(j.contains("seeds"));
  std::map<std::string, std::string> listed;
  for (const auto& o : j.at("outputs")) listed[o.at("path")] = o.at("sha256");
  CHECK(listed.size() == m.outputs().size());
  // Every file on disk is listed with its hash.
  for (const auto& [rel, content] : tree(dir)) {
    REQUIRE(listed.count(rel) == 1);
    CHECK(listed[rel] == sha256_hex(content));
    CHECK(sha256_file(dir / rel) == listed[rel]);
  }
  CHECK(listed.size() == tree(dir).size());
}

}  // namespace

TEST_CASE("sha256 known answers") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("number formatting round-trips") {
  for (double v : {0.0, 1.0, -2.5, 1e-300, 6.02214076e23, 0.1, 1.0 / 3.0}) CHECK(std::stod(fmt(v)) == v);
  CHECK(fmt(INFINITY) == "inf");
  CHECK(fmt(NAN) == "nan");
}

TEST_CASE("grids") {
  const GridSpec lg{true, 1e-7, 1e-4, 4};
  const auto v = lg.values();
  REQUIRE(v.size() == 4);
  CHECK(v[0] == 1e-7);
  CHECK(v[1] == doctest::Approx(1e-6).epsilon(1e-12));
  CHECK(v[3] == doctest::Approx(1e-4).epsilon(1e-12));
  const GridSpec lin{false, 1.0, 2.0, 3};
  CHECK(lin.values() == std::vector<double>{1.0, 1.5, 2.0});
  CHECK_THROWS_AS((GridSpec{true, 0.0, 1.0, 3}.validate("g")), InvalidArgument);
  CHECK_THROWS_AS((GridSpec{false, 2.0, 1.0, 3}.validate("g")), InvalidArgument);
  CHECK_THROWS_AS((GridSpec{false, 1.0, 2.0, 0}.validate("g")), InvalidArgument);
}

TEST_CASE("run config round trip and validation") {
  RunConfig c;
  c.pulses = 4;
  c.fields_tesla = {0.03, 0.04};
  c.widths_nm = {3.0, 5.0};
  c.workers = 3;
  c.device.isotopes.si29.abundance = 0.047;
  c.device.xi_scale = 2e4;
  c.tau_grid = {false, 1e-6, 1e-5, 7};
  const auto j = to_json(c);
  const auto back = run_config_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(to_json(run_config_from_json(nlohmann::json::parse(j.dump()))).dump() == j.dump());
  // Defaults reproduce the 5 nm enriched device.
  const auto d = run_config_from_json(nlohmann::json::object());
  CHECK(d.device.profile.well_width == 5.0);
  CHECK(d.device.isotopes.si29.abundance == 800e-6);
  CHECK(d.device.top_n == 400);
  CHECK(d.pulses == 10);

  nlohmann::json bad = j;
  bad["device"]["profile"]["well_width_nm"] = -1.0;
  CHECK_THROWS_WITH_AS(run_config_from_json(bad).validate(), doctest::Contains("device"), InvalidArgument);
  bad = j;
  bad["bogus"] = 1;
  CHECK_THROWS_AS(run_config_from_json(bad), InvalidArgument);
  bad = j;
  bad["pulses"] = "ten";
  CHECK_THROWS_AS(run_config_from_json(bad), InvalidArgument);
  bad = j;
  bad["device"]["isotopes"]["ge73"]["spin"] = 0.5;
  CHECK_THROWS_AS(run_config_from_json(bad).validate(), InvalidArgument);
  RunConfig e;
  e.fields_tesla.clear();
  CHECK_THROWS_AS(e.validate(), InvalidArgument);
  e = {};
  e.ensemble_size = 0;
  CHECK_THROWS_AS(e.validate(), InvalidArgument);
  CHECK_THROWS_AS(load_run_config("no/such/config.json"), InvalidArgument);
}

TEST_CASE("build-device output") {
  TempDir tmp("build");
  RunConfig c;
  c.output_dir = tmp.path().string();
  c.seed = 42;
  const auto m = cmd_build_device(c, 1);
  const auto dev = nlohmann::json::parse(slurp(tmp / "devices/device_r0.json"));
  CHECK(dev.at("dots").size() == 2);
  for (const auto& dot : dev.at("dots")) CHECK(dot.at("nuclei").size() == 400);
  CHECK(fs::exists(tmp / "wavefunction.csv"));
  check_manifest(tmp.path(), m);
  // Same seed: byte-identical.
  TempDir again("build2");
  c.output_dir = again.path().string();
  cmd_build_device(c, 1);
  CHECK(slurp(again / "devices/device_r0.json") == slurp(tmp / "devices/device_r0.json"));
  // Validation happens before any file is written.
  TempDir none("build3");
  c.output_dir = (none / "out").string();
  c.device.profile.well_width = -1.0;
  CHECK_THROWS_AS(cmd_build_device(c, 1), InvalidArgument);
  CHECK_FALSE(fs::exists(none / "out"));
}

TEST_CASE("echo sweep, T2 report and inversion") {
  TempDir a("sweep_a"), b("sweep_b");
  RunConfig c = small_config(a.path());
  const auto m = cmd_echo_sweep(c, 1);
  check_manifest(a.path(), m);
  c.output_dir = b.path().string();
  cmd_echo_sweep(c, 4);
  CHECK(tree(a.path()) == tree(b.path()));

  const auto index = rows(slurp(a / "sweep_index.csv"));
  CHECK(index.size() == 1 + 3 * 2);
  CHECK(fs::exists(a / "decay_mean_w5nm_B0mT.csv"));
  CHECK(fs::exists(a / "decay_mean_w5nm_B10mT.csv"));
  const auto mean_rows = rows(slurp(a / "decay_mean_w5nm_B10mT.csv"));
  CHECK(mean_rows[0] == std::vector<std::string>{"tau_s", "t_s", "chi_mean", "chi_std", "p_mean", "p_std", "censored"});
  CHECK(mean_rows.size() == 9);

  // Decay file equals a direct evaluation.
  const auto dev = build_device(c.device, c.seed, 1);
  const auto decay = rows(slurp(a / "decays/decay_w5nm_B10mT_r1.csv"));
  CHECK(decay[0] == std::vector<std::string>{"tau_s", "t_s", "chi", "p_singlet"});
  const auto taus = c.tau_grid.values();
  for (std::size_t i = 0; i < taus.size(); ++i) {
    const auto r = chi_total(dev, taus[i], 10, 0.01);
    CHECK(decay[i + 1][2] == fmt(r.chi));
    CHECK(std::stod(decay[i + 1][1]) == doctest::Approx(20 * taus[i]));
  }

  TempDir rep("report");
  c.output_dir = rep.path().string();
  const auto mr = cmd_t2_report(c, a.path(), 1);
  check_manifest(rep.path(), mr);
  const auto report = rows(slurp(rep / "t2_vs_width_vs_B.csv"));
  CHECK(report[0] == std::vector<std::string>{"width_nm", "b_tesla", "count", "censored", "t2_mean_s", "t2_std_s"});
  CHECK(report.size() == 3);
  CHECK(rows(slurp(rep / "t2_samples.csv")).size() == 7);

  TempDir inv("invert");
  c.output_dir = inv.path().string();
  const auto mi = cmd_invert(c, a.path(), "", 1);
  check_manifest(inv.path(), mi);
  CHECK(fs::exists(inv / "spectrum_mean_w5nm_B10mT.csv"));
  CHECK(fs::exists(inv / "spectra/decay_w5nm_B10mT_r2_spectrum.csv"));
  const auto peaks = rows(slurp(inv / "peaks.csv"));
  CHECK(peaks.size() == 3);
  CHECK(std::stod(peaks[2][2]) == doctest::Approx(14.9e3));
}

TEST_CASE("Hahn-echo sweep equals direct evaluation") {
  TempDir a("he");
  RunConfig c = small_config(a.path());
  c.pulses = 1;
  c.ensemble_size = 1;
  c.fields_tesla = {0.002};
  cmd_echo_sweep(c, 1);
  const auto dev = build_device(c.device, c.seed, 0);
  const auto decay = rows(slurp(a / "decays/decay_w5nm_B2mT_r0.csv"));
  const auto taus = c.tau_grid.values();
  for (std::size_t i = 0; i < taus.size(); ++i) {
    double prod = 1.0;
    for (const auto& n : dev.all_nuclei()) prod *= echo_decay_factor(n, taus[i], 1, 0.002);
    const double chi = prod > 0 ? -std::log(prod) : INFINITY;
    CHECK(std::stod(decay[i + 1][2]) == doctest::Approx(chi).epsilon(1e-10));
  }
}

TEST_CASE("ensemble of 20 writes 20 curves plus the aggregate") {
  TempDir a("ens");
  RunConfig c = small_config(a.path());
  c.ensemble_size = 20;
  c.fields_tesla = {0.04};
  c.tau_grid.count = 3;
  const auto m = cmd_echo_sweep(c, 2);
  int decays = 0;
  for (const auto& e : fs::directory_iterator(a / "decays")) decays += e.path().extension() == ".csv";
  CHECK(decays == 20);
  CHECK(fs::exists(a / "decay_mean_w5nm_B40mT.csv"));
  const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
  CHECK(manifest.at("seeds").size() == 20);
  (void)m;
}

TEST_CASE("t2-report needs a sweep") {
  TempDir empty("empty"), out("out");
  RunConfig c;
  c.output_dir = out.path().string();
  CHECK_THROWS_AS(cmd_t2_report(c, empty.path(), 1), InvalidArgument);
  spit(empty / "sweep_index.csv", "width_nm,b_tesla,realization,n,file\n");
  CHECK_THROWS_AS(cmd_t2_report(c, empty.path(), 1), InvalidArgument);
}

TEST_CASE("measured-curve inversion") {
  TempDir tmp("measured");
  RunConfig c;
  c.output_dir = (tmp / "out").string();
  // chi = 1 everywhere, written as P_S.
  std::ostringstream csv;
  csv << "tau_s,p_singlet\n";
  for (int k = 0; k < 10; ++k) csv << fmt(1e-6 * (k + 1)) << "," << fmt(0.5 + 0.5 / std::exp(1.0)) << "\n";
  spit(tmp / "curve.csv", csv.str());
  spit(tmp / "curve.json", R"({"n": 10, "b_tesla": 0.04})");
  cmd_invert(c, tmp / "curve.csv", "", 1);
  const auto spec = rows(slurp(tmp / "out/spectrum.csv"));
  CHECK(spec[0] == std::vector<std::string>{"f_hz", "s_field", "s_freq", "censored", "lobe_bw_hz"});
  REQUIRE(spec.size() == 11);
  for (std::size_t i = 1; i < spec.size(); ++i)
    CHECK(std::stod(spec[i][2]) == doctest::Approx(8.0 * std::stod(spec[i][0]) / 7.32).epsilon(1e-12));
  spit(tmp / "bad.json", R"({"b_tesla": 0.04})");
  CHECK_THROWS_WITH_AS(cmd_invert(c, tmp / "curve.csv", (tmp / "bad.json").string(), 1), doctest::Contains("missing n"),
                       InvalidArgument);
  CHECK_THROWS_AS(cmd_invert(c, tmp / "nothere.csv", "", 1), InvalidArgument);
}

TEST_CASE("filter-eval and fid-fit") {
  TempDir tmp("filter");
  RunConfig c;
  c.output_dir = tmp.path().string();
  cmd_filter_eval(c, 1);
  const auto f = rows(slurp(tmp / "filter.csv"));
  CHECK(f.size() == 401);
  CHECK(f[0] == std::vector<std::string>{"f_hz", "f0_s2", "f0_closed_s2", "full_s2"});
  std::ostringstream csv;
  csv << "t_s,p_singlet\n";
  const double w0 = omega0_from_field(29.8e-6);
  for (int k = 0; k < 150; ++k) {
    const double t = 6e-6 * k / 149;
    csv << fmt(t) << "," << fmt(fid_lowfield(t, 1.98e-6, w0)) << "\n";
  }
  spit(tmp / "fid.csv", csv.str());
  cmd_fid_fit(c, tmp / "fid.csv", 1);
  const auto j = nlohmann::json::parse(slurp(tmp / "fid_fit.json"));
  CHECK(j.at("t2star_s").get<double>() == doctest::Approx(1.98e-6).epsilon(1e-3));
  CHECK(j.at("b0_tesla").get<double>() == doctest::Approx(29.8e-6).epsilon(1e-3));
}

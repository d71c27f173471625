// spinbath: build devices, run echo sweeps, report T2, invert spectra,
// dump filter functions and fit low-field FIDs.
//
// Exit codes: 0 ok, 2 configuration error, 3 numerical failure.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "spinbath/parallel.hpp"
#include "spinbath/pipeline.hpp"

using namespace spinbath;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out;
  std::string input;
  std::string meta;
};

void add_common(CLI::App* sub, Common& c, bool with_input) {
  sub->add_option("--config", c.config_path, "JSON run config (defaults apply to missing keys)");
  sub->add_option("--seed", c.seed, "master seed");
  sub->add_option("--workers", c.workers, "worker threads (default: SPINBATH_WORKERS or config)")
      ->check(CLI::PositiveNumber);
  sub->add_option("--out", c.out, "output directory");
  if (with_input) sub->add_option("--input", c.input, "input file or sweep directory");
}

RunConfig resolve(const Common& c, int& workers) {
  RunConfig cfg = c.config_path.empty() ? RunConfig{} : load_run_config(c.config_path);
  if (c.seed) cfg.seed = *c.seed;
  if (c.out) cfg.output_dir = *c.out;
  if (c.workers)
    workers = *c.workers;
  else if (cfg.workers)
    workers = *cfg.workers;
  else
    workers = default_workers();
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quadrupolar spin-bath decoherence simulator and noise-spectroscopy toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(code_version));

  Common c;
  auto* build = app.add_subcommand("build-device", "build seeded device realizations");
  add_common(build, c, false);
  auto* sweep = app.add_subcommand("echo-sweep", "echo decay curves over (width, B, realization)");
  add_common(sweep, c, false);
  auto* t2 = app.add_subcommand("t2-report", "T2 statistics from an echo-sweep directory");
  add_common(t2, c, true);
  auto* inv = app.add_subcommand("invert", "noise spectra from CPn decay curves");
  add_common(inv, c, true);
  inv->add_option("--meta", c.meta, "sidecar JSON for a measured curve (n, b_tesla, p0, p_inf)");
  auto* filt = app.add_subcommand("filter-eval", "tabulate central and full filter functions");
  add_common(filt, c, false);
  auto* fid = app.add_subcommand("fid-fit", "fit the low-field FID lineshape");
  add_common(fid, c, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    int workers = 1;
    const RunConfig cfg = resolve(c, workers);
    RunManifest m = [&] {
      if (*build) return cmd_build_device(cfg, workers);
      if (*sweep) return cmd_echo_sweep(cfg, workers);
      if (*t2) return cmd_t2_report(cfg, c.input.empty() ? cfg.output_dir : c.input, workers);
      if (*inv) {
        if (c.input.empty()) throw InvalidArgument("invert needs --input (decay CSV or sweep directory)");
        return cmd_invert(cfg, c.input, c.meta, workers);
      }
      if (*filt) return cmd_filter_eval(cfg, workers);
      return cmd_fid_fit(cfg, c.input, workers);
    }();
    std::cout << "wrote " << m.outputs().size() << " files + manifest.json to " << cfg.output_dir << "\n";
    return 0;
  } catch (const InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

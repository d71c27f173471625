#include <cstdlib>
#include <string>
#include <sys/wait.h>

#include "doctest.h"
#include "json.hpp"
#include "support/tmpdir.hpp"

using testutil::slurp;
using testutil::spit;
using testutil::TempDir;

namespace {

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + SPINBATH_CLI + std::string(" ") + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("cli exit codes") {
  TempDir tmp("cli");
  const std::string out = " --out " + (tmp / "out").string();
  CHECK(run("--help") == 0);
  CHECK(run("--version") == 0);
  CHECK(run("") == 2);
  CHECK(run("no-such-command") == 2);
  CHECK(run("filter-eval --workers 0" + out) == 2);
  CHECK(run("filter-eval" + out) == 0);
  CHECK(std::filesystem::exists(tmp / "out/filter.csv"));
  CHECK(std::filesystem::exists(tmp / "out/manifest.json"));

  spit(tmp / "bad.json", R"({"device": {"profile": {"well_width_nm": -1}}})");
  CHECK(run("build-device --config " + (tmp / "bad.json").string() + out) == 2);
  spit(tmp / "typo.json", R"({"pulsess": 10})");
  CHECK(run("filter-eval --config " + (tmp / "typo.json").string() + out) == 2);
  spit(tmp / "broken.json", "{");
  CHECK(run("filter-eval --config " + (tmp / "broken.json").string() + out) == 2);
  CHECK(run("filter-eval" + out, "SPINBATH_WORKERS=zero") == 2);
  CHECK(run("filter-eval" + out, "SPINBATH_WORKERS=2") == 0);
  CHECK(run("t2-report --input " + (tmp / "nothing").string() + out) == 2);

  // Field pins the electron to the box edge: numerical failure.
  spit(tmp / "shallow.json", R"({"device": {"profile": {"barrier_ge_fraction": 0.0}, "potential": {"electric_field_v_per_m": 1e7}}})");
  CHECK(run("build-device --config " + (tmp / "shallow.json").string() + out) == 3);
  // Flat data cannot be fitted.
  std::string flat = "t_s,p_singlet\n";
  for (int k = 0; k < 20; ++k) flat += std::to_string(1e-7 * (k + 1)) + ",0.75\n";
  spit(tmp / "flat.csv", flat);
  CHECK(run("fid-fit --input " + (tmp / "flat.csv").string() + out) == 2);
}

TEST_CASE("cli seed and worker flags") {
  TempDir tmp("cli_seed");
  spit(tmp / "cfg.json",
       R"({"device": {"lateral_window_nm": 40, "top_n": 30}, "tau_grid": {"spacing": "log", "min_s": 1e-6, "max_s": 1e-4, "count": 4}, "ensemble_size": 2})");
  const std::string cfg = " --config " + (tmp / "cfg.json").string();
  REQUIRE(run("echo-sweep" + cfg + " --seed 9 --workers 1 --out " + (tmp / "a").string()) == 0);
  REQUIRE(run("echo-sweep" + cfg + " --seed 9 --out " + (tmp / "b").string(), "SPINBATH_WORKERS=3") == 0);
  REQUIRE(run("echo-sweep" + cfg + " --seed 10 --workers 2 --out " + (tmp / "c").string()) == 0);
  const auto f = "decays/decay_w5nm_B10mT_r1.csv";
  CHECK(slurp(tmp / "a" / f) == slurp(tmp / "b" / f));
  CHECK(slurp(tmp / "a" / f) != slurp(tmp / "c" / f));
  const auto ma = nlohmann::json::parse(slurp(tmp / "a/manifest.json"));
  const auto mb = nlohmann::json::parse(slurp(tmp / "b/manifest.json"));
  CHECK(ma.at("workers") == 1);
  CHECK(mb.at("workers") == 3);
  CHECK(ma.at("config").at("seed") == 9);
  CHECK(ma.at("outputs") == mb.at("outputs"));
}

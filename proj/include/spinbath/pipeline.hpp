#pragma once

// Config-driven runs behind the command-line tool. Every run writes plain CSV
// files plus manifest.json into the output directory.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "spinbath/device.hpp"
#include "spinbath/filter_function.hpp"

namespace spinbath {

struct GridSpec {
  bool log_spacing = true;
  double min = 1e-7;
  double max = 1e-4;
  int count = 40;

  void validate(const char* what) const;
  std::vector<double> values() const;
};

struct RunConfig {
  DeviceConfig device;
  int pulses = 10;                       // 1: Hahn echo, even: CPn
  GridSpec tau_grid;                     // seconds
  std::vector<double> fields_tesla{0.01};
  std::vector<double> widths_nm;         // empty: device well width only
  int ensemble_size = 1;
  std::uint64_t seed = 1;
  std::optional<int> workers;
  std::string output_dir = "out";
  // filter-eval
  GridSpec f_grid{true, 1e3, 1e8, 400};
  double filter_tau = 3e-6;
  // invert: decay normalisation for measured curves
  double p0 = 1.0;
  double p_inf = 0.5;

  void validate() const;
  std::vector<double> widths() const;
};

nlohmann::json to_json(const RunConfig& c);
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

struct OutputFile {
  std::string path;  // relative to the output directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

std::string sha256_hex(const std::string& data);
std::string sha256_file(const std::filesystem::path& path);

// Collects written files and finally emits manifest.json.
class RunManifest {
 public:
  RunManifest(std::string command, const RunConfig& config, int workers);
  void add_seed(std::uint64_t realization, std::uint64_t crystal_key);
  // Writes `content` to dir/relative and records its hash.
  void write_file(const std::filesystem::path& dir, const std::string& relative, const std::string& content);
  void write(const std::filesystem::path& dir, double wall_seconds);
  const std::vector<OutputFile>& outputs() const { return outputs_; }

 private:
  std::string command_;
  nlohmann::json config_;
  int workers_;
  nlohmann::json seeds_ = nlohmann::json::array();
  std::vector<OutputFile> outputs_;
};

extern const char* const code_version;

// Command implementations. Each returns the manifest it wrote.
RunManifest cmd_build_device(const RunConfig& config, int workers);
RunManifest cmd_echo_sweep(const RunConfig& config, int workers);
RunManifest cmd_t2_report(const RunConfig& config, const std::filesystem::path& sweep_dir, int workers);
RunManifest cmd_invert(const RunConfig& config, const std::filesystem::path& input, const std::string& meta_path,
                       int workers);
RunManifest cmd_filter_eval(const RunConfig& config, int workers);
RunManifest cmd_fid_fit(const RunConfig& config, const std::filesystem::path& input, int workers);

// Formatting helper shared by CSV writers: shortest round-trip representation.
std::string fmt(double v);

}  // namespace spinbath

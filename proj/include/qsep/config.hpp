#pragma once

// Experiment configuration files and run manifests.
//
// Config files are INI-like: "[section]" headers, "key = value" lines and
// '#' or ';' comments. Keys match the SimConfig field names:
//
//   [system]      n_r, order, bits
//   [channel]     kind (identity | exponential | explicit), alpha, phi,
//                 covariance_file (explicit only, relative to the config)
//   [simulation]  rho_grid_db, seed, max_trials, target_errors, chunk_size,
//                 detectors, quantizer_fault_shift
//   [asymptote]   k
//   [validate]    see ValidateSettings
//
// rho_grid_db takes a comma list ("0, 5, 10") or a range "start:step:stop"
// (stop included). Angles accept plain numbers or multiples of pi such as
// "pi/4", "-3pi/8" or "0.5*pi".

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qsep/analytic.hpp"
#include "qsep/montecarlo.hpp"

namespace qsep {

struct ValidateSettings {
  double equivalence_rho_db = 10.0;
  std::uint64_t equivalence_trials = 1'000'000;
  double z_threshold = 4.0;
  double identity_rho_db = 10.0;
  std::uint64_t identity_trials = 1'000'000;
  unsigned residual_draws = 8;
  double residual_slope_tolerance = 0.1;
  unsigned eta_realizations = 8;
  std::uint64_t eta_noise_trials = 10'000;
  double eta_rho_db = 20.0;
  /// Sandwich window; when absent the lowest decade of simulated SEP (among
  /// points that reached target_errors) is used.
  std::optional<Interval> sandwich_window_db;

  friend bool operator==(const ValidateSettings &a, const ValidateSettings &b) {
    auto same_window = [](const std::optional<Interval> &x, const std::optional<Interval> &y) {
      if (x.has_value() != y.has_value())
        return false;
      return !x || (x->low == y->low && x->high == y->high);
    };
    return a.equivalence_rho_db == b.equivalence_rho_db &&
           a.equivalence_trials == b.equivalence_trials && a.z_threshold == b.z_threshold &&
           a.identity_rho_db == b.identity_rho_db && a.identity_trials == b.identity_trials &&
           a.residual_draws == b.residual_draws &&
           a.residual_slope_tolerance == b.residual_slope_tolerance &&
           a.eta_realizations == b.eta_realizations &&
           a.eta_noise_trials == b.eta_noise_trials && a.eta_rho_db == b.eta_rho_db &&
           same_window(a.sandwich_window_db, b.sandwich_window_db);
  }
};

struct ExperimentConfig {
  SimConfig sim;
  double k = 2.0;
  ValidateSettings validate;
  std::string covariance_file; // as written in the file; empty if none

  friend bool operator==(const ExperimentConfig &, const ExperimentConfig &) = default;
};

/// Parses config text. `origin` names the source in diagnostics and
/// `base_dir` resolves a relative covariance_file. Throws ConfigError
/// ("origin:line: field: problem") on any syntax or validation failure.
ExperimentConfig parse_config(std::string_view text, const std::string &origin = "<config>",
                              const std::filesystem::path &base_dir = {});

/// Throws IoError when the file cannot be read.
ExperimentConfig load_config(const std::filesystem::path &path);

/// Range "a:step:b" or comma list. Throws ConfigError.
std::vector<double> parse_grid(std::string_view text);

/// Number or multiple of pi. Throws ConfigError.
double parse_angle(std::string_view text);

struct RunManifest {
  std::string command;
  std::string tool_version;
  std::string started_at; // UTC, ISO 8601
  ExperimentConfig config;
  unsigned workers = 1;
  std::vector<GainResult> analytic;
  std::vector<std::string> outputs;

  friend bool operator==(const RunManifest &, const RunManifest &) = default;
};

std::string manifest_to_json(const RunManifest &m);
/// Throws ConfigError on a malformed manifest.
RunManifest manifest_from_json(std::string_view text);

std::string current_utc_timestamp();

inline constexpr const char *kToolVersion = "0.3.0";

} // namespace qsep

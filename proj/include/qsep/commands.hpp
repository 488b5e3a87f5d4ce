#pragma once

// The simulate / asymptote / validate subcommands. Each returns a process
// exit status and writes its outputs plus a manifest into out_dir.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qsep/config.hpp"
#include "qsep/montecarlo.hpp"

namespace qsep {

struct CommandOptions {
  std::filesystem::path config_path;
  std::filesystem::path out_dir = ".";
  unsigned workers = 1;
  std::optional<double> k;
  std::optional<std::uint64_t> seed;
};

inline constexpr const char *kPointsHeader =
    "rho_db,detector,errors,trials,sep,ci_low,ci_high,mean_qbound";
inline constexpr const char *kAsymptoteHeader = "rho_db,sep_asymptote,regime,k,G_d,G_c";

/// "%.17g" with the C locale's '.' separator.
std::string format_double(double v);

std::string points_csv(std::span<const SimPoint> points);

/// Throws ConfigError for k outside [1, 2].
std::string asymptote_csv(const SimConfig &config, double k);

/// Gains for the configuration (regime picked from M and n).
GainResult config_gains(const SimConfig &config, double k);

struct CheckMetric {
  std::string key;
  double value;
};

struct CheckResult {
  std::string name;
  double statistic = 0.0;
  std::string threshold;
  bool passed = false;
  std::string note;
  std::vector<CheckMetric> metrics;
};

struct ValidationReport {
  std::vector<CheckResult> checks;
  bool passed() const;
};

/// The statistical battery behind `validate`. Progress goes to log.
ValidationReport run_validation(const ExperimentConfig &config, const RunOptions &opts,
                                std::ostream &log);

std::string report_to_json(const ValidationReport &report);

int cmd_simulate(const CommandOptions &opts, std::ostream &log);
int cmd_asymptote(const CommandOptions &opts, std::ostream &log);
int cmd_validate(const CommandOptions &opts, std::ostream &log);

} // namespace qsep

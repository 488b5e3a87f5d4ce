#pragma once

// Reproducible Monte Carlo SEP estimation.
//
// Work is split into chunks of chunk_size trials. Chunk c of grid point i
// draws from streams derived from (seed, family, i, c), so a point's result
// is a pure function of the configuration: the coordinator merges chunk
// counters in chunk order and stops at the first prefix that meets the
// error target, whatever order workers finished in.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qsep/channel.hpp"
#include "qsep/constellation.hpp"
#include "qsep/linalg.hpp"

namespace qsep {

enum class Detector { mrc, amrc, mirror };

std::string to_string(Detector d);
Detector detector_from_string(const std::string &s);

struct SimConfig {
  unsigned n_r = 4;
  unsigned order = 8; // M
  unsigned bits = 4;  // n
  std::vector<double> rho_grid_db;
  CorrelationSpec correlation;
  std::uint64_t seed = 1;
  std::uint64_t max_trials = 100'000'000;
  std::uint64_t target_errors = 200;
  std::uint64_t chunk_size = 10'000;
  std::vector<Detector> detectors{Detector::mrc, Detector::amrc};
  /// Rotates every per-antenna quantizer decision by this many bins. Zero in
  /// normal use; non-zero values inject a receiver fault so that the
  /// validation battery can be shown to reject it.
  int quantizer_fault_shift = 0;

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;
  bool enabled(Detector d) const;

  friend bool operator==(const SimConfig &, const SimConfig &) = default;
};

struct DetectorStats {
  Detector detector;
  std::uint64_t errors = 0;
  std::uint64_t trials = 0;
  double sep = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct SimPoint {
  double rho_db = 0.0;
  std::uint64_t trials = 0;
  std::vector<DetectorStats> detectors; // in config order
  double mean_q_of_sqrt_rho_u = 0.0;    // Monte Carlo average of Q(sqrt(rho U))
  bool target_reached = false;

  const DetectorStats &at(Detector d) const;
};

struct RunOptions {
  unsigned workers = 1;
};

struct Interval {
  double low;
  double high;
};

/// 95% Wilson score interval for errors / trials.
Interval wilson_interval(std::uint64_t errors, std::uint64_t trials, double z = 1.959963984540054);

/// rho_db must be one of the grid values (InvalidParameter otherwise).
SimPoint run_point(const SimConfig &config, double rho_db, const RunOptions &opts = {});
SimPoint run_point_at(const SimConfig &config, std::size_t rho_index,
                      const RunOptions &opts = {});
std::vector<SimPoint> run_sweep(const SimConfig &config, const RunOptions &opts = {});

struct SlopeEstimate {
  double slope = 0.0; // d log10(sep) / d log10(rho)
  double intercept = 0.0;
  Interval rho_window_db{0.0, 0.0};
  std::size_t points_used = 0;

  double diversity() const { return -slope; }
};

/// Least-squares fit of log10(sep) against log10(rho) over the points inside
/// window_db having at least min_errors errors. Throws InsufficientData when
/// fewer than three points qualify.
SlopeEstimate estimate_slope(std::span<const SimPoint> points, Detector detector,
                             Interval window_db, std::uint64_t min_errors = 50);

/// SNR span of the lowest decade of simulated SEP: among points where the
/// detector logged at least min_errors errors, those whose SEP is within a
/// factor of ten of the smallest such SEP. Empty when no point qualifies.
std::optional<Interval> top_sep_decade(std::span<const SimPoint> points, Detector detector,
                                       std::uint64_t min_errors);

/// Slope fit on raw (rho_linear, sep) pairs.
SlopeEstimate fit_loglog(std::span<const double> x, std::span<const double> y);

/// Replacement for the mirror decision, used to demonstrate test power.
using MirrorDecisionFn = std::function<unsigned(std::span<const cplx> g, cplx s,
                                                std::span<const cplx> y)>;

struct EquivalenceResult {
  double z = 0.0;
  std::uint64_t trials = 0; // per side
  std::uint64_t errors_amrc = 0;
  std::uint64_t errors_mirror = 0;
};

/// Two-proportion z-test between AMRC and mirror SEPs from independent
/// trial sets at one SNR. Throws InsufficientData for fewer than 1e5 trials
/// or when neither side produced an error.
EquivalenceResult equivalence_test(const SimConfig &config, double rho_db,
                                   std::uint64_t trials, const RunOptions &opts = {},
                                   MirrorDecisionFn mirror_override = {});

double two_proportion_z(std::uint64_t e1, std::uint64_t n1, std::uint64_t e2,
                        std::uint64_t n2);

/// Trials (out of `trials`, rounded up to whole chunks) on which the MRC and
/// AMRC decisions differ. Zero for K = I.
std::uint64_t detector_mismatches(const SimConfig &config, double rho_db,
                                  std::uint64_t trials, const RunOptions &opts = {});

/// Log-log fit of amrc_expansion_residual over `points` log-spaced SNRs.
SlopeEstimate expansion_residual_slope(std::span<const cplx> h, const HermitianEigen &k_eig,
                                       double rho_low, double rho_high,
                                       std::size_t points = 9);

struct SandwichEntry {
  double rho_db;
  double sep;
  double ci_low;
  double ci_high;
  double mean_qbound;
  double k_ratio; // sep / mean_qbound
  bool in_band;   // [ci_low, ci_high] meets [mean_qbound, 2 mean_qbound]
};

struct SandwichReport {
  std::vector<SandwichEntry> entries;
  bool passed = true;
};

/// Checks E[Q(sqrt(rho U))] <= SEP_AMRC <= 2 E[Q(sqrt(rho U))] with CI slack
/// for every point inside the window; points outside are not assessed.
SandwichReport sandwich_check(std::span<const SimPoint> points, Interval window_db,
                              Detector detector = Detector::amrc);

struct ConditionalEstimate {
  std::uint64_t errors = 0;
  std::uint64_t trials = 0;
  double sep = 0.0;
  Interval ci{0.0, 0.0};
};

/// SEP for a fixed channel realization and transmitted index, re-drawing
/// only the noise.
ConditionalEstimate conditional_sep(std::span<const cplx> h, const ComplexMatrix &w,
                                    unsigned s_index, double rho,
                                    const PhaseQuantizer &qm, const PhaseQuantizer &qn,
                                    Detector detector, std::uint64_t trials,
                                    RngStream &rng);

/// Draws of T = sum_i Z_i under h ~ CN(0, K).
std::vector<double> sample_t(const ChannelModel &model, unsigned order,
                             const PhaseQuantizer &qn, std::uint64_t draws,
                             RngStream &rng);

/// Log-log slope of the empirical CDF over its lowest decade: the window is
/// [x0, 10 x0] with x0 the min_count-th smallest sample.
double tail_cdf_slope(std::vector<double> samples, std::size_t min_count = 30);

double db_to_linear(double db);

} // namespace qsep

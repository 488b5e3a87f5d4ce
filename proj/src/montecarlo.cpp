#include "qsep/montecarlo.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <thread>

#include "qsep/analytic.hpp"
#include "qsep/errors.hpp"
#include "qsep/receiver.hpp"

namespace qsep {

namespace {

constexpr double kPi = std::numbers::pi;

// Stream families keep unrelated experiments on disjoint streams.
constexpr std::uint64_t kFamilySweep = 0x5eed0001;
constexpr std::uint64_t kFamilyEquivLhs = 0x5eed0002;
constexpr std::uint64_t kFamilyEquivRhs = 0x5eed0003;
constexpr std::uint64_t kFamilyMismatch = 0x5eed0004;

enum StreamTag : std::uint64_t { kSymbolStream = 0, kChannelStream = 1, kNoiseStream = 2 };

constexpr std::size_t kDetectorCount = 3;

std::size_t slot(Detector d) { return static_cast<std::size_t>(d); }

struct ChunkResult {
  std::array<std::uint64_t, kDetectorCount> errors{};
  std::uint64_t trials = 0;
  std::uint64_t mismatches = 0; // trials where mrc and amrc decided differently
  double q_sum = 0.0;

  void merge(const ChunkResult &o) {
    for (std::size_t i = 0; i < kDetectorCount; ++i)
      errors[i] += o.errors[i];
    trials += o.trials;
    mismatches += o.mismatches;
    q_sum += o.q_sum;
  }
};

struct Kernel {
  const SimConfig &cfg;
  ChannelModel model;
  ComplexMatrix w;
  PhaseQuantizer qn;       // receive quantizer (possibly fault-injected)
  PhaseQuantizer qn_clean; // for the bound statistic
  PhaseQuantizer qm;
  double rho;
  double sqrt_rho;
  double q_scale; // sqrt(2 rho / N_r)
  double pi_over_m;
  std::array<bool, kDetectorCount> enabled{};
  std::uint64_t family;
  MirrorDecisionFn mirror_override;

  Kernel(const SimConfig &c, double rho_linear, std::uint64_t fam)
      : cfg(c), model(build_covariance(c.correlation, c.n_r)),
        w(amrc_weight_matrix(model.eig(), rho_linear)),
        qn(c.bits, c.quantizer_fault_shift), qn_clean(c.bits), qm(log2_exact(c.order)),
        rho(rho_linear), sqrt_rho(std::sqrt(rho_linear)),
        q_scale(std::sqrt(2.0 * rho_linear / c.n_r)), pi_over_m(kPi / c.order),
        family(fam) {
    for (auto d : c.detectors)
      enabled[slot(d)] = true;
  }

  ChunkResult run(std::size_t rho_index, std::uint64_t chunk) const {
    const std::uint64_t base = hash_combine(hash_combine(family, rho_index), chunk);
    RngStream sym_rng(cfg.seed, hash_combine(base, kSymbolStream));
    RngStream ch_rng(cfg.seed, hash_combine(base, kChannelStream));
    RngStream noise_rng(cfg.seed, hash_combine(base, kNoiseStream));

    const std::size_t n = cfg.n_r;
    ComplexVector h(n), noise(n), y(n), r(n), g(n);
    const auto &psk = qm.codebook();
    const bool need_g = enabled[slot(Detector::amrc)] || enabled[slot(Detector::mirror)];

    ChunkResult out;
    for (std::uint64_t t = 0; t < cfg.chunk_size; ++t) {
      const unsigned s_index = sym_rng.index(cfg.order);
      const cplx s = psk.point(s_index);
      sample_channel(model, ch_rng, h);
      sample_noise(noise_rng, noise);
      received_signal_into(h, s, noise, sqrt_rho, qn, y, r);
      if (need_g)
        multiply_into(w, h, g);

      unsigned d_mrc = s_index, d_amrc = s_index;
      if (enabled[slot(Detector::mrc)]) {
        d_mrc = qm.index(inner(h, r));
        out.errors[slot(Detector::mrc)] += d_mrc != s_index;
      }
      if (enabled[slot(Detector::amrc)]) {
        d_amrc = qm.index(inner(g, r));
        out.errors[slot(Detector::amrc)] += d_amrc != s_index;
      }
      out.mismatches += d_mrc != d_amrc;
      if (enabled[slot(Detector::mirror)]) {
        const unsigned d =
            mirror_override ? mirror_override(g, s, y) : mirror_decision(g, s, y, qm, qn);
        if (d != s_index)
          ++out.errors[slot(Detector::mirror)];
      }
      out.q_sum += qfunc(q_scale * bound_t(h, pi_over_m, qn_clean));
    }
    out.trials = cfg.chunk_size;
    return out;
  }
};

struct DriveResult {
  ChunkResult total;
  bool stopped_early = false;
};

// Runs chunks 0, 1, ... until done(prefix) holds for the merged prefix or
// max_chunks is reached. The answer depends only on the chunk contents, not
// on how chunks were scheduled across workers.
template <class Done>
DriveResult drive(const Kernel &kernel, std::size_t rho_index, std::uint64_t max_chunks,
                  unsigned workers, Done done) {
  DriveResult res;
  if (max_chunks == 0)
    return res;

  if (workers <= 1) {
    for (std::uint64_t c = 0; c < max_chunks; ++c) {
      res.total.merge(kernel.run(rho_index, c));
      if (done(res.total)) {
        res.stopped_early = true;
        break;
      }
    }
    return res;
  }

  std::mutex mu;
  std::map<std::uint64_t, ChunkResult> pending;
  std::uint64_t merged = 0;
  std::atomic<std::uint64_t> next{0};
  std::atomic<bool> stop{false};

  auto worker = [&] {
    for (;;) {
      if (stop.load(std::memory_order_relaxed))
        return;
      const std::uint64_t c = next.fetch_add(1);
      if (c >= max_chunks)
        return;
      ChunkResult r = kernel.run(rho_index, c);
      std::lock_guard lock(mu);
      if (stop.load(std::memory_order_relaxed))
        return;
      pending.emplace(c, r);
      for (auto it = pending.find(merged); it != pending.end(); it = pending.find(merged)) {
        res.total.merge(it->second);
        pending.erase(it);
        ++merged;
        if (done(res.total)) {
          res.stopped_early = true;
          stop.store(true);
          return;
        }
      }
    }
  };

  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned i = 0; i < workers; ++i)
    pool.emplace_back(worker);
  pool.clear();
  return res;
}

std::size_t grid_index(const SimConfig &config, double rho_db) {
  for (std::size_t i = 0; i < config.rho_grid_db.size(); ++i)
    if (config.rho_grid_db[i] == rho_db)
      return i;
  throw InvalidParameter("rho_db " + std::to_string(rho_db) + " is not on the grid");
}

} // namespace

std::string to_string(Detector d) {
  switch (d) {
  case Detector::mrc:
    return "mrc";
  case Detector::amrc:
    return "amrc";
  case Detector::mirror:
    return "mirror";
  }
  return "unknown";
}

Detector detector_from_string(const std::string &s) {
  if (s == "mrc")
    return Detector::mrc;
  if (s == "amrc")
    return Detector::amrc;
  if (s == "mirror")
    return Detector::mirror;
  throw InvalidParameter("unknown detector '" + s + "' (expected mrc, amrc or mirror)");
}

void SimConfig::validate() const {
  if (n_r < 1)
    throw ConfigError("N_r must be >= 1");
  if (order < 2 || !is_power_of_two(order))
    throw ConfigError("M must be a power of two");
  if (bits < 1 || bits > 24)
    throw ConfigError("n must be in 1..24");
  if (static_cast<unsigned long long>(order) > (1ULL << bits))
    throw ConfigError("M must not exceed 2^n");
  if (rho_grid_db.empty())
    throw ConfigError("rho_grid_db must contain at least one SNR value");
  for (double r : rho_grid_db)
    if (!std::isfinite(r))
      throw ConfigError("rho_grid_db values must be finite");
  if (chunk_size < 1)
    throw ConfigError("chunk_size must be >= 1");
  if (max_trials < chunk_size)
    throw ConfigError("max_trials must be >= chunk_size");
  if (target_errors < 1)
    throw ConfigError("target_errors must be >= 1");
  if (detectors.empty())
    throw ConfigError("detectors must name at least one of mrc, amrc, mirror");
  for (std::size_t i = 0; i < detectors.size(); ++i)
    for (std::size_t j = i + 1; j < detectors.size(); ++j)
      if (detectors[i] == detectors[j])
        throw ConfigError("detectors lists '" + to_string(detectors[i]) + "' twice");
  if (correlation.kind == CorrelationKind::exponential &&
      !(correlation.alpha >= 0.0 && correlation.alpha < 1.0))
    throw ConfigError("alpha must lie in [0, 1)");
  if (correlation.kind == CorrelationKind::explicit_matrix &&
      correlation.matrix.rows() != n_r)
    throw ConfigError("explicit covariance dimension does not match N_r");
}

bool SimConfig::enabled(Detector d) const {
  return std::find(detectors.begin(), detectors.end(), d) != detectors.end();
}

const DetectorStats &SimPoint::at(Detector d) const {
  for (const auto &s : detectors)
    if (s.detector == d)
      return s;
  throw InvalidParameter("detector " + to_string(d) + " was not simulated");
}

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

Interval wilson_interval(std::uint64_t errors, std::uint64_t trials, double z) {
  if (trials == 0)
    return {0.0, 1.0};
  if (errors > trials)
    throw InvalidParameter("wilson_interval: errors exceed trials");
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(errors) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  return {std::clamp(std::min(centre - half, p), 0.0, 1.0),
          std::clamp(std::max(centre + half, p), 0.0, 1.0)};
}

SimPoint run_point_at(const SimConfig &config, std::size_t rho_index,
                      const RunOptions &opts) {
  config.validate();
  if (rho_index >= config.rho_grid_db.size())
    throw InvalidParameter("rho index out of range");
  const double rho_db = config.rho_grid_db[rho_index];
  const Kernel kernel(config, db_to_linear(rho_db), kFamilySweep);

  auto done = [&](const ChunkResult &acc) {
    for (auto d : config.detectors)
      if (acc.errors[slot(d)] < config.target_errors)
        return false;
    return true;
  };
  const DriveResult res = drive(kernel, rho_index, config.max_trials / config.chunk_size,
                                opts.workers, done);

  SimPoint p;
  p.rho_db = rho_db;
  p.trials = res.total.trials;
  p.target_reached = res.stopped_early;
  p.mean_q_of_sqrt_rho_u =
      p.trials ? res.total.q_sum / static_cast<double>(p.trials) : 0.0;
  for (auto d : config.detectors) {
    DetectorStats s{d};
    s.errors = res.total.errors[slot(d)];
    s.trials = p.trials;
    s.sep = p.trials ? static_cast<double>(s.errors) / static_cast<double>(p.trials) : 0.0;
    const Interval ci = wilson_interval(s.errors, s.trials);
    s.ci_low = ci.low;
    s.ci_high = ci.high;
    p.detectors.push_back(s);
  }
  return p;
}

SimPoint run_point(const SimConfig &config, double rho_db, const RunOptions &opts) {
  return run_point_at(config, grid_index(config, rho_db), opts);
}

std::vector<SimPoint> run_sweep(const SimConfig &config, const RunOptions &opts) {
  config.validate();
  std::vector<SimPoint> out;
  out.reserve(config.rho_grid_db.size());
  for (std::size_t i = 0; i < config.rho_grid_db.size(); ++i)
    out.push_back(run_point_at(config, i, opts));
  return out;
}

SlopeEstimate fit_loglog(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw DimensionMismatch("fit_loglog: x and y lengths differ");
  if (x.size() < 3)
    throw InsufficientData("slope fit needs at least three points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0))
      throw InsufficientData("slope fit needs positive values");
    sx += std::log10(x[i]);
    sy += std::log10(y[i]);
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log10(x[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log10(y[i]) - my);
  }
  if (sxx == 0.0)
    throw InsufficientData("slope fit needs distinct abscissae");
  SlopeEstimate e;
  e.slope = sxy / sxx;
  e.intercept = my - e.slope * mx;
  e.points_used = x.size();
  return e;
}

std::optional<Interval> top_sep_decade(std::span<const SimPoint> points, Detector detector,
                                       std::uint64_t min_errors) {
  double floor_sep = 0.0;
  for (const auto &p : points) {
    const auto &s = p.at(detector);
    if (s.errors >= min_errors && s.errors > 0 && (floor_sep == 0.0 || s.sep < floor_sep))
      floor_sep = s.sep;
  }
  if (floor_sep == 0.0)
    return std::nullopt;
  std::optional<Interval> w;
  for (const auto &p : points) {
    const auto &s = p.at(detector);
    if (s.errors < min_errors || s.sep > 10.0 * floor_sep)
      continue;
    if (!w)
      w = Interval{p.rho_db, p.rho_db};
    w->low = std::min(w->low, p.rho_db);
    w->high = std::max(w->high, p.rho_db);
  }
  return w;
}

SlopeEstimate estimate_slope(std::span<const SimPoint> points, Detector detector,
                             Interval window_db, std::uint64_t min_errors) {
  std::vector<double> x, y;
  for (const auto &p : points) {
    if (p.rho_db < window_db.low || p.rho_db > window_db.high)
      continue;
    const auto &s = p.at(detector);
    if (s.errors < min_errors)
      continue;
    x.push_back(db_to_linear(p.rho_db));
    y.push_back(s.sep);
  }
  if (x.size() < 3)
    throw InsufficientData("estimate_slope: " + std::to_string(x.size()) +
                           " qualifying points in window, need 3");
  SlopeEstimate e = fit_loglog(x, y);
  e.rho_window_db = window_db;
  return e;
}

double two_proportion_z(std::uint64_t e1, std::uint64_t n1, std::uint64_t e2,
                        std::uint64_t n2) {
  const double p1 = static_cast<double>(e1) / static_cast<double>(n1);
  const double p2 = static_cast<double>(e2) / static_cast<double>(n2);
  const double pooled = static_cast<double>(e1 + e2) / static_cast<double>(n1 + n2);
  const double var = pooled * (1.0 - pooled) *
                     (1.0 / static_cast<double>(n1) + 1.0 / static_cast<double>(n2));
  if (!(var > 0.0))
    throw InsufficientData("two-proportion test: pooled proportion is 0 or 1");
  return (p1 - p2) / std::sqrt(var);
}

EquivalenceResult equivalence_test(const SimConfig &config, double rho_db,
                                   std::uint64_t trials, const RunOptions &opts,
                                   MirrorDecisionFn mirror_override) {
  if (trials < 100'000)
    throw InsufficientData("equivalence_test needs at least 1e5 trials per side");
  SimConfig base = config;
  if (base.max_trials < base.chunk_size)
    base.max_trials = base.chunk_size;
  base.validate();
  const double rho = db_to_linear(rho_db);
  const std::uint64_t chunks = (trials + base.chunk_size - 1) / base.chunk_size;
  const std::size_t tag = std::bit_cast<std::uint64_t>(rho_db);

  SimConfig lhs_cfg = base;
  lhs_cfg.detectors = {Detector::amrc};
  const Kernel lhs(lhs_cfg, rho, kFamilyEquivLhs);
  const auto never = [](const ChunkResult &) { return false; };
  const DriveResult l = drive(lhs, tag, chunks, opts.workers, never);

  SimConfig rhs_cfg = base;
  rhs_cfg.detectors = {Detector::mirror};
  Kernel rhs(rhs_cfg, rho, kFamilyEquivRhs);
  rhs.mirror_override = std::move(mirror_override);
  const DriveResult r = drive(rhs, tag, chunks, opts.workers, never);

  EquivalenceResult out;
  out.trials = l.total.trials;
  out.errors_amrc = l.total.errors[slot(Detector::amrc)];
  out.errors_mirror = r.total.errors[slot(Detector::mirror)];
  out.z = two_proportion_z(out.errors_amrc, out.trials, out.errors_mirror, r.total.trials);
  return out;
}

std::uint64_t detector_mismatches(const SimConfig &config, double rho_db,
                                  std::uint64_t trials, const RunOptions &opts) {
  SimConfig cfg = config;
  cfg.detectors = {Detector::mrc, Detector::amrc};
  if (cfg.max_trials < cfg.chunk_size)
    cfg.max_trials = cfg.chunk_size;
  cfg.validate();
  const Kernel kernel(cfg, db_to_linear(rho_db), kFamilyMismatch);
  const std::uint64_t chunks = (trials + cfg.chunk_size - 1) / cfg.chunk_size;
  const auto never = [](const ChunkResult &) { return false; };
  return drive(kernel, std::bit_cast<std::uint64_t>(rho_db), chunks, opts.workers, never)
      .total.mismatches;
}

SlopeEstimate expansion_residual_slope(std::span<const cplx> h, const HermitianEigen &k_eig,
                                       double rho_low, double rho_high,
                                       std::size_t points) {
  if (points < 3 || !(rho_low > 0.0) || !(rho_high > rho_low))
    throw InvalidParameter("expansion_residual_slope: need >= 3 points on a positive range");
  std::vector<double> x, y;
  const double step = std::log10(rho_high / rho_low) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) {
    const double rho = rho_low * std::pow(10.0, step * static_cast<double>(i));
    x.push_back(rho);
    y.push_back(amrc_expansion_residual(h, k_eig, rho));
  }
  SlopeEstimate e = fit_loglog(x, y);
  e.rho_window_db = {10.0 * std::log10(rho_low), 10.0 * std::log10(rho_high)};
  return e;
}

SandwichReport sandwich_check(std::span<const SimPoint> points, Interval window_db,
                              Detector detector) {
  SandwichReport rep;
  for (const auto &p : points) {
    if (p.rho_db < window_db.low || p.rho_db > window_db.high)
      continue;
    const auto &s = p.at(detector);
    SandwichEntry e{p.rho_db, s.sep, s.ci_low, s.ci_high, p.mean_q_of_sqrt_rho_u, 0.0, false};
    e.k_ratio = e.mean_qbound > 0.0 ? s.sep / e.mean_qbound : 0.0;
    e.in_band = s.ci_high >= e.mean_qbound && s.ci_low <= 2.0 * e.mean_qbound;
    rep.passed = rep.passed && e.in_band;
    rep.entries.push_back(e);
  }
  return rep;
}

ConditionalEstimate conditional_sep(std::span<const cplx> h, const ComplexMatrix &w,
                                    unsigned s_index, double rho,
                                    const PhaseQuantizer &qm, const PhaseQuantizer &qn,
                                    Detector detector, std::uint64_t trials,
                                    RngStream &rng) {
  const std::size_t n = h.size();
  if (w.cols() != n)
    throw DimensionMismatch("conditional_sep: weight matrix does not match h");
  ComplexVector noise(n), y(n), r(n), g(n);
  multiply_into(w, h, g);
  const cplx s = qm.codebook().point(s_index);
  const double sqrt_rho = std::sqrt(rho);

  ConditionalEstimate est;
  for (std::uint64_t t = 0; t < trials; ++t) {
    sample_noise(rng, noise);
    received_signal_into(h, s, noise, sqrt_rho, qn, y, r);
    unsigned d = 0;
    switch (detector) {
    case Detector::mrc:
      d = qm.index(inner(h, r));
      break;
    case Detector::amrc:
      d = qm.index(inner(g, r));
      break;
    case Detector::mirror:
      d = mirror_decision(g, s, y, qm, qn);
      break;
    }
    if (d != s_index)
      ++est.errors;
  }
  est.trials = trials;
  est.sep = trials ? static_cast<double>(est.errors) / static_cast<double>(trials) : 0.0;
  est.ci = wilson_interval(est.errors, trials);
  return est;
}

std::vector<double> sample_t(const ChannelModel &model, unsigned order,
                             const PhaseQuantizer &qn, std::uint64_t draws,
                             RngStream &rng) {
  if (order > (1u << qn.bits()))
    throw InvalidParameter("sample_t: M must not exceed 2^n");
  ComplexVector h(model.antennas());
  std::vector<double> out;
  out.reserve(draws);
  const double pi_over_m = kPi / order;
  for (std::uint64_t i = 0; i < draws; ++i) {
    sample_channel(model, rng, h);
    out.push_back(bound_t(h, pi_over_m, qn));
  }
  return out;
}

double tail_cdf_slope(std::vector<double> samples, std::size_t min_count) {
  if (samples.size() < 10 * min_count || min_count < 2)
    throw InsufficientData("tail_cdf_slope: not enough samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  const double x0 = samples[min_count - 1];
  if (!(x0 > 0.0))
    throw InsufficientData("tail_cdf_slope: lowest samples are zero");
  std::vector<double> xs, fs;
  constexpr int kSteps = 11;
  for (int i = 0; i < kSteps; ++i) {
    const double x = x0 * std::pow(10.0, static_cast<double>(i) / (kSteps - 1));
    const auto count = std::upper_bound(samples.begin(), samples.end(), x) - samples.begin();
    xs.push_back(x);
    fs.push_back(static_cast<double>(count) / n);
  }
  return fit_loglog(xs, fs).slope;
}

} // namespace qsep

#include "qsep/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include <json.hpp>

#include "qsep/analytic.hpp"
#include "qsep/errors.hpp"
#include "qsep/receiver.hpp"

namespace qsep {

namespace {

using nlohmann::json;

constexpr std::uint64_t kValidateFamily = 0x7a11da7e;

void write_file(const std::filesystem::path &path, const std::string &content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw IoError("cannot open " + path.string() + " for writing");
  out << content;
  out.flush();
  if (!out)
    throw IoError("error writing " + path.string());
}

void prepare_out_dir(const std::filesystem::path &dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw IoError("cannot create output directory " + dir.string());
}

ExperimentConfig load_with_overrides(const CommandOptions &opts) {
  ExperimentConfig cfg = load_config(opts.config_path);
  if (opts.seed)
    cfg.sim.seed = *opts.seed;
  if (opts.k) {
    if (!(*opts.k >= 1.0 && *opts.k <= 2.0))
      throw ConfigError("--k must lie in [1, 2]");
    cfg.k = *opts.k;
  }
  return cfg;
}

RunManifest make_manifest(const std::string &command, const ExperimentConfig &cfg,
                          unsigned workers) {
  RunManifest m;
  m.command = command;
  m.tool_version = kToolVersion;
  m.started_at = current_utc_timestamp();
  m.config = cfg;
  m.workers = workers;
  m.analytic.push_back(config_gains(cfg.sim, cfg.k));
  return m;
}

CheckResult check_equivalence(const ExperimentConfig &cfg, const RunOptions &opts) {
  const auto &v = cfg.validate;
  const EquivalenceResult eq =
      equivalence_test(cfg.sim, v.equivalence_rho_db, v.equivalence_trials, opts);
  CheckResult c;
  c.name = "equivalence";
  c.statistic = std::abs(eq.z);
  c.threshold = "|z| < " + format_double(v.z_threshold);
  c.passed = c.statistic < v.z_threshold;
  c.note = "two-proportion z-test, AMRC vs mirror detector, independent trial sets";
  c.metrics = {{"rho_db", v.equivalence_rho_db},
               {"z", eq.z},
               {"trials_per_side", static_cast<double>(eq.trials)},
               {"errors_amrc", static_cast<double>(eq.errors_amrc)},
               {"errors_mirror", static_cast<double>(eq.errors_mirror)}};
  return c;
}

CheckResult check_identity(const ExperimentConfig &cfg, const RunOptions &opts) {
  SimConfig iid = cfg.sim;
  iid.correlation = CorrelationSpec::identity();
  const auto &v = cfg.validate;
  const std::uint64_t mism = detector_mismatches(iid, v.identity_rho_db, v.identity_trials, opts);
  CheckResult c;
  c.name = "identity_decisions";
  c.statistic = static_cast<double>(mism);
  c.threshold = "mismatches == 0";
  c.passed = mism == 0;
  c.note = "per-trial MRC/AMRC decision equality with K = I";
  c.metrics = {{"rho_db", v.identity_rho_db},
               {"trials", static_cast<double>(v.identity_trials)}};
  return c;
}

CheckResult check_residual(const ExperimentConfig &cfg) {
  const auto &v = cfg.validate;
  RngStream rng(cfg.sim.seed, hash_combine(kValidateFamily, 1));
  CheckResult c;
  c.name = "expansion_residual_slope";
  c.threshold = "|slope + 2| <= " + format_double(v.residual_slope_tolerance);
  c.note = "log-log slope of the AMRC expansion residual over rho in [1e2, 1e6]";
  double worst = 0.0;
  for (unsigned i = 0; i < v.residual_draws; ++i) {
    const ComplexMatrix k = random_covariance(cfg.sim.n_r, rng);
    const ChannelModel model = build_covariance(CorrelationSpec::from_matrix(k), cfg.sim.n_r);
    const ComplexVector h = sample_channel(model, rng);
    const double slope = expansion_residual_slope(h, model.eig(), 1e2, 1e6).slope;
    worst = std::max(worst, std::abs(slope + 2.0));
    c.metrics.push_back({"slope[" + std::to_string(i) + "]", slope});
  }
  c.statistic = worst;
  c.passed = v.residual_draws > 0 && worst <= v.residual_slope_tolerance;
  return c;
}

CheckResult check_sandwich(const ExperimentConfig &cfg, const RunOptions &opts,
                           std::ostream &log) {
  SimConfig sim = cfg.sim;
  if (!sim.enabled(Detector::amrc))
    sim.detectors.push_back(Detector::amrc);
  std::vector<SimPoint> points;
  for (std::size_t i = 0; i < sim.rho_grid_db.size(); ++i) {
    points.push_back(run_point_at(sim, i, opts));
    log << "  sandwich sweep: " << format_double(points.back().rho_db) << " dB, "
        << points.back().trials << " trials\n";
  }
  CheckResult c;
  c.name = "sandwich";
  c.threshold = "[ci_low, ci_high] meets [E[Q(sqrt(rho U))], 2 E[Q(sqrt(rho U))]]";
  const auto window = cfg.validate.sandwich_window_db
                          ? cfg.validate.sandwich_window_db
                          : top_sep_decade(points, Detector::amrc, sim.target_errors);
  if (!window) {
    c.note = "no grid point reached target_errors; nothing to assess";
    c.passed = false;
    return c;
  }
  const SandwichReport rep = sandwich_check(points, *window, Detector::amrc);
  c.passed = rep.passed && !rep.entries.empty();
  c.note = "window " + format_double(window->low) + ".." + format_double(window->high) +
           " dB; statistic is the largest k-ratio sep / E[Q(sqrt(rho U))]";
  for (const auto &e : rep.entries) {
    c.statistic = std::max(c.statistic, e.k_ratio);
    const std::string at = "@" + format_double(e.rho_db);
    c.metrics.push_back({"k_ratio" + at, e.k_ratio});
    c.metrics.push_back({"in_band" + at, e.in_band ? 1.0 : 0.0});
  }
  return c;
}

CheckResult check_eta(const ExperimentConfig &cfg) {
  const auto &v = cfg.validate;
  const SimConfig &sim = cfg.sim;
  const ChannelModel model = build_covariance(sim.correlation, sim.n_r);
  const double rho = db_to_linear(v.eta_rho_db);
  const ComplexMatrix w = amrc_weight_matrix(model.eig(), rho);
  const PhaseQuantizer qm(log2_exact(sim.order));
  const PhaseQuantizer qn(sim.bits, sim.quantizer_fault_shift);
  const PhaseQuantizer qn_clean(sim.bits);
  RngStream h_rng(sim.seed, hash_combine(kValidateFamily, 2));

  CheckResult c;
  c.name = "eta_bound";
  c.threshold = "[ci_low, ci_high] meets [Q(x), 2 Q(x)], x = sqrt(2 rho / N_r) eta sin(pi/M)";
  c.note = "mirror detector, s index 0, noise re-drawn per fixed channel";
  c.passed = v.eta_realizations > 0;
  unsigned held = 0;
  for (unsigned i = 0; i < v.eta_realizations; ++i) {
    const ComplexVector h = sample_channel(model, h_rng);
    const ComplexVector g = w * h;
    const double bound = eta_bound(eta_statistic(h, g, sim.order, qn_clean), rho, sim.n_r,
                                   sim.order);
    RngStream noise_rng(sim.seed, hash_combine(hash_combine(kValidateFamily, 3), i));
    const ConditionalEstimate est = conditional_sep(h, w, 0, rho, qm, qn, Detector::mirror,
                                                    v.eta_noise_trials, noise_rng);
    const bool ok = est.ci.high >= bound && est.ci.low <= 2.0 * bound;
    held += ok;
    c.passed = c.passed && ok;
    const std::string at = "[" + std::to_string(i) + "]";
    c.metrics.push_back({"sep" + at, est.sep});
    c.metrics.push_back({"bound" + at, bound});
  }
  c.statistic = held;
  return c;
}

} // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string points_csv(std::span<const SimPoint> points) {
  std::string out = kPointsHeader;
  out += '\n';
  for (const auto &p : points)
    for (const auto &d : p.detectors) {
      out += format_double(p.rho_db) + ',' + to_string(d.detector) + ',' +
             std::to_string(d.errors) + ',' + std::to_string(d.trials) + ',' +
             format_double(d.sep) + ',' + format_double(d.ci_low) + ',' +
             format_double(d.ci_high) + ',' + format_double(p.mean_q_of_sqrt_rho_u) + '\n';
    }
  return out;
}

GainResult config_gains(const SimConfig &config, double k) {
  const ChannelModel model = build_covariance(config.correlation, config.n_r);
  return gains(config.order, config.bits, config.n_r, model.det(), k);
}

std::string asymptote_csv(const SimConfig &config, double k) {
  if (!(k >= 1.0 && k <= 2.0))
    throw ConfigError("k must lie in [1, 2]");
  config.validate();
  const GainResult g = config_gains(config, k);
  std::vector<double> rho;
  for (double db : config.rho_grid_db)
    rho.push_back(db_to_linear(db));
  const AsymptoteCurve curve = asymptote_curve(g, rho);

  std::string out = kAsymptoteHeader;
  out += '\n';
  for (std::size_t i = 0; i < curve.samples.size(); ++i) {
    const auto &s = curve.samples[i];
    std::string regime = to_string(g.regime);
    if (s.clamped)
      regime += "+clamped";
    out += format_double(config.rho_grid_db[i]) + ',' + format_double(s.reported()) + ',' +
           regime + ',' + format_double(k) + ',' + format_double(g.diversity) + ',' +
           format_double(g.coding) + '\n';
  }
  return out;
}

bool ValidationReport::passed() const {
  return !checks.empty() &&
         std::all_of(checks.begin(), checks.end(), [](const auto &c) { return c.passed; });
}

ValidationReport run_validation(const ExperimentConfig &config, const RunOptions &opts,
                                std::ostream &log) {
  ValidationReport rep;
  auto record = [&](CheckResult c) {
    log << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << format_double(c.statistic)
        << " (" << c.threshold << ")\n";
    rep.checks.push_back(std::move(c));
  };
  log << "validate: equivalence\n";
  record(check_equivalence(config, opts));
  log << "validate: identity decisions\n";
  record(check_identity(config, opts));
  log << "validate: expansion residual\n";
  record(check_residual(config));
  log << "validate: eta bound\n";
  record(check_eta(config));
  log << "validate: sandwich\n";
  record(check_sandwich(config, opts, log));
  return rep;
}

std::string report_to_json(const ValidationReport &report) {
  json checks = json::array();
  for (const auto &c : report.checks) {
    json metrics = json::object();
    for (const auto &m : c.metrics)
      metrics[m.key] = m.value;
    checks.push_back({{"name", c.name},
                      {"statistic", c.statistic},
                      {"threshold", c.threshold},
                      {"passed", c.passed},
                      {"note", c.note},
                      {"metrics", metrics}});
  }
  const json j{{"passed", report.passed()}, {"checks", checks}};
  return j.dump(2) + "\n";
}

int cmd_simulate(const CommandOptions &opts, std::ostream &log) {
  const ExperimentConfig cfg = load_with_overrides(opts);
  prepare_out_dir(opts.out_dir);
  RunManifest manifest = make_manifest("simulate", cfg, opts.workers);

  std::vector<SimPoint> points;
  const RunOptions run{opts.workers};
  for (std::size_t i = 0; i < cfg.sim.rho_grid_db.size(); ++i) {
    points.push_back(run_point_at(cfg.sim, i, run));
    const SimPoint &p = points.back();
    log << "rho " << format_double(p.rho_db) << " dB: " << p.trials << " trials";
    for (const auto &d : p.detectors)
      log << ", " << to_string(d.detector) << " " << d.errors;
    log << (p.target_reached ? "" : " (max_trials reached)") << '\n';
  }

  const auto csv = opts.out_dir / "points.csv";
  write_file(csv, points_csv(points));
  manifest.outputs = {"points.csv"};
  write_file(opts.out_dir / "manifest.json", manifest_to_json(manifest));
  log << "wrote " << csv.string() << '\n';
  return 0;
}

int cmd_asymptote(const CommandOptions &opts, std::ostream &log) {
  const ExperimentConfig cfg = load_with_overrides(opts);
  prepare_out_dir(opts.out_dir);
  RunManifest manifest = make_manifest("asymptote", cfg, opts.workers);
  const auto csv = opts.out_dir / "asymptote.csv";
  write_file(csv, asymptote_csv(cfg.sim, cfg.k));
  manifest.outputs = {"asymptote.csv"};
  write_file(opts.out_dir / "asymptote.manifest.json", manifest_to_json(manifest));
  log << "wrote " << csv.string() << '\n';
  return 0;
}

int cmd_validate(const CommandOptions &opts, std::ostream &log) {
  const ExperimentConfig cfg = load_with_overrides(opts);
  prepare_out_dir(opts.out_dir);
  RunManifest manifest = make_manifest("validate", cfg, opts.workers);
  const ValidationReport rep = run_validation(cfg, RunOptions{opts.workers}, log);
  const auto path = opts.out_dir / "validation.json";
  write_file(path, report_to_json(rep));
  manifest.outputs = {"validation.json"};
  write_file(opts.out_dir / "validation.manifest.json", manifest_to_json(manifest));
  log << (rep.passed() ? "all checks passed" : "validation FAILED") << "; wrote "
      << path.string() << '\n';
  return rep.passed() ? 0 : 1;
}

} // namespace qsep

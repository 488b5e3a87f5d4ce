#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "qsep/analytic.hpp"
#include "qsep/channel.hpp"
#include "qsep/errors.hpp"
#include "qsep/montecarlo.hpp"

using namespace qsep;

namespace {

constexpr double kPi = std::numbers::pi;

SimConfig small_config() {
  SimConfig c;
  c.n_r = 4;
  c.order = 8;
  c.bits = 4;
  c.correlation = CorrelationSpec::exponential(0.7, kPi / 4);
  c.rho_grid_db = {0.0, 4.0, 8.0};
  c.seed = 77;
  c.max_trials = 200'000;
  c.target_errors = 300;
  c.chunk_size = 5'000;
  c.detectors = {Detector::mrc, Detector::amrc, Detector::mirror};
  return c;
}

SimPoint synthetic_point(double rho_db, double sep, std::uint64_t trials, double meanq) {
  SimPoint p;
  p.rho_db = rho_db;
  p.trials = trials;
  DetectorStats s;
  s.detector = Detector::amrc;
  s.trials = trials;
  s.errors = static_cast<std::uint64_t>(std::llround(sep * trials));
  s.sep = static_cast<double>(s.errors) / trials;
  const Interval ci = wilson_interval(s.errors, trials);
  s.ci_low = ci.low;
  s.ci_high = ci.high;
  p.detectors.push_back(s);
  p.mean_q_of_sqrt_rho_u = meanq;
  return p;
}

} // namespace

TEST_SUITE("montecarlo") {

TEST_CASE("Wilson interval basics") {
  const Interval z = wilson_interval(0, 100);
  CHECK(z.low == 0.0);
  CHECK(z.high > 0.0);
  CHECK(z.high < 0.05);
  const Interval all = wilson_interval(100, 100);
  CHECK(all.high == doctest::Approx(1.0));
  const Interval mid = wilson_interval(50, 100);
  CHECK(mid.low == doctest::Approx(0.40383).epsilon(1e-4));
  CHECK(mid.high == doctest::Approx(0.59617).epsilon(1e-4));
  CHECK(wilson_interval(0, 0).low == 0.0);
  CHECK(wilson_interval(0, 0).high == 1.0);
  CHECK_THROWS_AS(wilson_interval(6, 5), InvalidParameter);
}

TEST_CASE("Wilson interval coverage") {
  std::mt19937_64 gen(2024);
  for (double p : {0.01, 0.2}) {
    std::binomial_distribution<std::uint64_t> bin(2000, p);
    int covered = 0;
    for (int rep = 0; rep < 1000; ++rep) {
      const Interval ci = wilson_interval(bin(gen), 2000);
      covered += (ci.low <= p && p <= ci.high);
    }
    CHECK(covered >= 930);
  }
}

TEST_CASE("results do not depend on the worker count") {
  const SimConfig c = small_config();
  const auto one = run_sweep(c, {1});
  for (unsigned w : {4u, 16u}) {
    const auto many = run_sweep(c, {w});
    REQUIRE(many.size() == one.size());
    for (std::size_t i = 0; i < one.size(); ++i) {
      CHECK(many[i].trials == one[i].trials);
      CHECK(many[i].mean_q_of_sqrt_rho_u == one[i].mean_q_of_sqrt_rho_u);
      for (std::size_t d = 0; d < one[i].detectors.size(); ++d) {
        CHECK(many[i].detectors[d].errors == one[i].detectors[d].errors);
        CHECK(many[i].detectors[d].sep == one[i].detectors[d].sep);
      }
    }
  }
}

TEST_CASE("a point equals its slot in the sweep") {
  const SimConfig c = small_config();
  const auto sweep = run_sweep(c);
  const SimPoint p = run_point(c, 4.0);
  CHECK(p.trials == sweep[1].trials);
  CHECK(p.at(Detector::amrc).errors == sweep[1].at(Detector::amrc).errors);
  CHECK_THROWS_AS(run_point(c, 5.0), InvalidParameter);
}

TEST_CASE("error accounting") {
  const SimConfig c = small_config();
  for (const SimPoint &p : run_sweep(c)) {
    CHECK(p.trials <= c.max_trials);
    CHECK((p.trials % c.chunk_size == 0 || p.trials == c.max_trials));
    for (const auto &s : p.detectors) {
      CHECK(s.trials == p.trials);
      CHECK(s.errors <= s.trials);
      CHECK(s.sep == static_cast<double>(s.errors) / s.trials);
      CHECK(s.ci_low <= s.sep);
      CHECK(s.sep <= s.ci_high);
    }
    if (p.target_reached)
      for (const auto &s : p.detectors)
        CHECK(s.errors >= c.target_errors);
    CHECK(p.mean_q_of_sqrt_rho_u > 0.0);
    CHECK(p.mean_q_of_sqrt_rho_u <= 0.5);
  }
}

TEST_CASE("SEP falls with SNR and AMRC stays within its sandwich at moderate SNR") {
  const auto pts = run_sweep(small_config());
  for (std::size_t i = 1; i < pts.size(); ++i)
    CHECK(pts[i].at(Detector::amrc).sep < pts[i - 1].at(Detector::amrc).sep);
  const auto rep = sandwich_check(pts, {4.0, 8.0});
  CHECK(rep.entries.size() == 2);
  CHECK(rep.passed);
}

TEST_CASE("simulated bound term agrees with importance sampling") {
  SimConfig c = small_config();
  c.rho_grid_db = {12.0};
  c.max_trials = 400'000;
  c.target_errors = 100'000'000;
  const SimPoint p = run_point(c, 12.0);
  const double rho = db_to_linear(12.0);
  const ComplexMatrix k = exponential_correlation(4, 0.7, kPi / 4);
  const auto est = oracle::scaled_mean_q(k, 8, 4, rho, 400'000, 9);
  const double ref = est.mean / std::pow(rho, 4.0);
  CHECK(std::abs(p.mean_q_of_sqrt_rho_u / ref - 1.0) < 0.05);
}

TEST_CASE("negligible SNR gives (M-1)/M for every detector") {
  SimConfig c = small_config();
  c.rho_grid_db = {-40.0};
  c.max_trials = 100'000;
  c.target_errors = 10'000'000;
  const SimPoint p = run_point(c, -40.0);
  for (const auto &s : p.detectors)
    CHECK(std::abs(s.sep - 0.875) < 0.01);
}

TEST_CASE("slope fit recovers exact power laws") {
  std::vector<SimPoint> pts;
  for (double db = 10.0; db <= 30.0; db += 2.0) {
    const double rho = db_to_linear(db);
    const double sep = 1e3 * std::pow(rho, -3.0);
    SimPoint p = synthetic_point(db, 0.0, 1, 0.0);
    p.detectors[0].sep = sep;
    p.detectors[0].errors = 1000;
    pts.push_back(p);
  }
  const auto est = estimate_slope(pts, Detector::amrc, {10.0, 30.0});
  CHECK(est.slope == doctest::Approx(-3.0).epsilon(1e-10));
  CHECK(est.diversity() == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(est.points_used == 11);

  const auto win = estimate_slope(pts, Detector::amrc, {20.0, 26.0});
  CHECK(win.points_used == 4);

  const std::vector<double> x{1.0, 10.0, 100.0}, y{2.0, 0.02, 0.0002};
  CHECK(fit_loglog(x, y).slope == doctest::Approx(-2.0).epsilon(1e-12));

  pts[3].detectors[0].errors = 10;
  CHECK(estimate_slope(pts, Detector::amrc, {10.0, 30.0}).points_used == 10);
  CHECK_THROWS_AS(estimate_slope(pts, Detector::amrc, {10.0, 12.0}), InsufficientData);
  CHECK_THROWS_AS(estimate_slope(pts, Detector::mrc, {10.0, 30.0}), InvalidParameter);
}

TEST_CASE("top SEP decade") {
  std::vector<SimPoint> pts;
  const double seps[] = {1e-1, 2e-2, 4e-3, 9e-4, 3e-4};
  for (int i = 0; i < 5; ++i)
    pts.push_back(synthetic_point(2.0 * i, seps[i], 10'000'000, seps[i] / 2));
  const auto w = top_sep_decade(pts, Detector::amrc, 200);
  REQUIRE(w.has_value());
  CHECK(w->low == 6.0);
  CHECK(w->high == 8.0);

  pts.back().detectors[0].errors = 10; // too few to count
  const auto w2 = top_sep_decade(pts, Detector::amrc, 200);
  REQUIRE(w2.has_value());
  CHECK(w2->low == 4.0);
  CHECK(w2->high == 6.0);
  CHECK_FALSE(top_sep_decade(pts, Detector::amrc, 1'000'000'000).has_value());
}

TEST_CASE("sandwich check flags points outside the band") {
  std::vector<SimPoint> pts;
  pts.push_back(synthetic_point(0.0, 1.5e-2, 1'000'000, 1e-2));
  pts.push_back(synthetic_point(2.0, 3e-2, 1'000'000, 1e-2));   // above 2x
  pts.push_back(synthetic_point(4.0, 0.5e-2, 1'000'000, 1e-2)); // below 1x
  pts.push_back(synthetic_point(6.0, 1.0e-2, 1'000'000, 1e-2)); // on the edge
  const auto rep = sandwich_check(pts, {0.0, 6.0});
  REQUIRE(rep.entries.size() == 4);
  CHECK(rep.entries[0].in_band);
  CHECK_FALSE(rep.entries[1].in_band);
  CHECK_FALSE(rep.entries[2].in_band);
  CHECK(rep.entries[3].in_band);
  CHECK(rep.entries[0].k_ratio == doctest::Approx(1.5));
  CHECK_FALSE(rep.passed);
  CHECK(sandwich_check(pts, {0.0, 0.0}).passed);
}

TEST_CASE("two-proportion z statistic") {
  CHECK(two_proportion_z(100, 10000, 100, 10000) == 0.0);
  const double z = two_proportion_z(120, 10000, 100, 10000);
  CHECK(z == doctest::Approx(1.35588).epsilon(1e-5));
  CHECK(two_proportion_z(100, 10000, 120, 10000) == doctest::Approx(-z));
}

TEST_CASE("AMRC and mirror detectors agree in distribution") {
  SimConfig c = small_config();
  c.n_r = 1;
  c.correlation = CorrelationSpec::identity();
  c.rho_grid_db = {6.0};
  const auto r = equivalence_test(c, 6.0, 200'000);
  CHECK(r.trials >= 200'000);
  CHECK(std::abs(r.z) < 4.0);

  SimConfig c4 = small_config();
  c4.rho_grid_db = {10.0};
  CHECK(std::abs(equivalence_test(c4, 10.0, 200'000).z) < 4.0);
  CHECK_THROWS_AS(equivalence_test(c4, 10.0, 50'000), InsufficientData);
}

TEST_CASE("equivalence test rejects a mirror detector without the conjugate") {
  SimConfig c = small_config();
  c.rho_grid_db = {10.0};
  const PhaseQuantizer qn(c.bits), qm(3);
  MirrorDecisionFn broken = [&](std::span<const cplx> g, cplx s, std::span<const cplx> y) {
    cplx acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
      acc += qn.point(g[i] * s) * y[i];
    return qm.index(s * acc);
  };
  const auto r = equivalence_test(c, 10.0, 200'000, {}, broken);
  CHECK(std::abs(r.z) > 10.0);
}

TEST_CASE("detector mismatches") {
  SimConfig c = small_config();
  c.correlation = CorrelationSpec::identity();
  c.rho_grid_db = {10.0};
  CHECK(detector_mismatches(c, 10.0, 100'000) == 0);
  SimConfig corr = small_config();
  corr.correlation = CorrelationSpec::exponential(0.9, kPi / 4);
  corr.rho_grid_db = {0.0};
  CHECK(detector_mismatches(corr, 0.0, 100'000) > 0);
}

TEST_CASE("small-value behaviour of T") {
  RngStream rng(12, 12);
  SUBCASE("M < 2^n: CDF slope near 2 N_r") {
    for (unsigned n_r : {1u, 2u}) {
      const ChannelModel m = build_covariance(CorrelationSpec::exponential(0.5, 0.3), n_r);
      const auto t = sample_t(m, 4, PhaseQuantizer(3), 400'000, rng);
      CHECK(std::abs(tail_cdf_slope(t) - 2.0 * n_r) <= 1.0);
    }
  }
  SUBCASE("M = 2^n: CDF slope near N_r") {
    for (unsigned n_r : {1u, 2u, 3u}) {
      const ChannelModel m = build_covariance(CorrelationSpec::exponential(0.5, 0.3), n_r);
      const auto t = sample_t(m, 8, PhaseQuantizer(3), 400'000, rng);
      CHECK(std::abs(tail_cdf_slope(t) - n_r) <= 0.7);
    }
  }
}

TEST_CASE("configuration validation") {
  SimConfig c = small_config();
  CHECK_NOTHROW(c.validate());
  SimConfig bad = c;
  bad.order = 6;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.order = 32; // M > 2^n
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.rho_grid_db.clear();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.detectors.clear();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.chunk_size = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK(detector_from_string("amrc") == Detector::amrc);
  CHECK(to_string(Detector::mirror) == "mirror");
  CHECK_THROWS_AS(detector_from_string("zf"), InvalidParameter);
}

} // TEST_SUITE

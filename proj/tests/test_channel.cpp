#include <doctest.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>

#include "qsep/channel.hpp"
#include "qsep/errors.hpp"

using namespace qsep;

namespace {

constexpr double kPi = std::numbers::pi;

std::filesystem::path write_temp(const std::string &name, const std::string &text) {
  const auto dir = std::filesystem::temp_directory_path() / "qsep_channel_tests";
  std::filesystem::create_directories(dir);
  const auto p = dir / name;
  std::ofstream(p) << text;
  return p;
}

} // namespace

TEST_SUITE("channel") {

TEST_CASE("exponential covariance entries") {
  const ChannelModel m = build_covariance(CorrelationSpec::exponential(0.7, kPi / 4), 2);
  const auto &k = m.covariance();
  CHECK(std::abs(k(0, 1) - std::polar(0.7, -kPi / 4)) < 1e-15);
  CHECK(std::abs(k(1, 0) - std::polar(0.7, kPi / 4)) < 1e-15);
  CHECK(k(0, 0) == cplx(1.0));
  CHECK(k(1, 1) == cplx(1.0));
}

TEST_CASE("identity and alpha = 0 give exactly I") {
  const ChannelModel id = build_covariance(CorrelationSpec::identity(), 4);
  CHECK(id.covariance() == ComplexMatrix::identity(4));
  CHECK(id.det() == 1.0);
  const ChannelModel zero = build_covariance(CorrelationSpec::exponential(0.0, 1.0), 4);
  CHECK(zero.covariance() == ComplexMatrix::identity(4));
}

TEST_CASE("model caches are consistent") {
  const ChannelModel m = build_covariance(CorrelationSpec::exponential(0.9, kPi / 4), 4);
  CHECK(m.det() == doctest::Approx(0.006859).epsilon(1e-12));
  double prod = 1.0;
  for (double l : m.eig().eigenvalues)
    prod *= l;
  CHECK(std::abs(prod - m.det()) <= 1e-9 * m.det());
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(m.covariance()(i, i) == cplx(1.0));
}

TEST_CASE("invalid correlation settings") {
  CHECK_THROWS_AS(build_covariance(CorrelationSpec::exponential(1.0, 0.0), 2), InvalidParameter);
  CHECK_THROWS_AS(build_covariance(CorrelationSpec::exponential(-0.1, 0.0), 2),
                  InvalidParameter);
  CHECK_THROWS_AS(build_covariance(CorrelationSpec::identity(), 0), InvalidParameter);
  ComplexMatrix singular(2, 2);
  singular(0, 0) = singular(0, 1) = singular(1, 0) = singular(1, 1) = 1.0;
  CHECK_THROWS_AS(build_covariance(CorrelationSpec::from_matrix(singular), 2),
                  NotPositiveDefinite);
  ComplexMatrix skew = ComplexMatrix::identity(2);
  skew(0, 1) = 0.5;
  CHECK_THROWS_AS(build_covariance(CorrelationSpec::from_matrix(skew), 2), NotHermitian);
  CHECK_THROWS_AS(build_covariance(CorrelationSpec::from_matrix(ComplexMatrix::identity(3)), 2),
                  DimensionMismatch);
}

TEST_CASE("channel sampling moments") {
  constexpr int kDraws = 1'000'000;
  SUBCASE("identity") {
    const ChannelModel m = build_covariance(CorrelationSpec::identity(), 2);
    RngStream rng(1, 2);
    ComplexVector h(2);
    double p0 = 0.0, p1 = 0.0;
    for (int i = 0; i < kDraws; ++i) {
      sample_channel(m, rng, h);
      p0 += std::norm(h[0]);
      p1 += std::norm(h[1]);
    }
    CHECK(std::abs(p0 / kDraws - 1.0) < 0.005);
    CHECK(std::abs(p1 / kDraws - 1.0) < 0.005);
  }
  SUBCASE("exponential") {
    const ChannelModel m = build_covariance(CorrelationSpec::exponential(0.7, kPi / 4), 2);
    RngStream rng(1, 3);
    ComplexVector h(2);
    cplx c01 = 0.0;
    for (int i = 0; i < kDraws; ++i) {
      sample_channel(m, rng, h);
      c01 += h[0] * std::conj(h[1]);
    }
    c01 /= kDraws;
    const cplx expected = m.covariance()(0, 1);
    CHECK(std::abs(c01 - expected) < 0.02 * std::abs(expected));
    CHECK(std::abs(expected - std::polar(0.7, -kPi / 4)) < 1e-15);
  }
}

TEST_CASE("sample covariance within three standard errors") {
  constexpr int kDraws = 1'000'000;
  const ChannelModel m = build_covariance(CorrelationSpec::exponential(0.6, 1.1), 3);
  RngStream rng(8, 8);
  ComplexVector h(3);
  std::array<cplx, 9> acc{};
  for (int d = 0; d < kDraws; ++d) {
    sample_channel(m, rng, h);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        acc[i * 3 + j] += h[i] * std::conj(h[j]);
  }
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const cplx est = acc[i * 3 + j] / static_cast<double>(kDraws);
      const cplx k = m.covariance()(i, j);
      // For circular Gaussians Var(h_i conj(h_j)) = K_ii K_jj, split over
      // real and imaginary parts.
      const double se = std::sqrt(1.0 / kDraws);
      CHECK(std::abs(est.real() - k.real()) <= 3 * se);
      if (i != j)
        CHECK(std::abs(est.imag() - k.imag()) <= 3 * se);
    }
}

TEST_CASE("noise moments") {
  constexpr int kDraws = 1'000'000;
  RngStream rng(4, 4);
  double var = 0.0, cross = 0.0;
  cplx pseudo = 0.0;
  for (int i = 0; i < kDraws; ++i) {
    const cplx n = sample_noise(1, rng)[0];
    var += std::norm(n);
    pseudo += n * n;
    cross += n.real() * n.imag();
  }
  CHECK(std::abs(var / kDraws - 1.0) < 0.005);
  CHECK(std::abs(pseudo / static_cast<double>(kDraws)) < 0.005);
  // corr(Re, Im) with each part of variance 1/2
  CHECK(std::abs(cross / kDraws / 0.5) < 0.005);
}

TEST_CASE("symbol sampling") {
  constexpr int kDraws = 1'000'000;
  RngStream rng(5, 5);
  std::array<int, 4> counts{};
  for (int i = 0; i < kDraws; ++i)
    ++counts[sample_symbol(4, rng)];
  for (int c : counts)
    CHECK(std::abs(c / static_cast<double>(kDraws) - 0.25) < 0.002);
  RngStream r2(5, 6);
  for (int i = 0; i < 1000; ++i)
    CHECK(sample_symbol(2, r2) < 2);
  CHECK_THROWS_AS(sample_symbol(3, r2), InvalidParameter);
}

TEST_CASE("streams replay and are independent of each other's consumption") {
  const ChannelModel m = build_covariance(CorrelationSpec::exponential(0.5, 0.3), 4);
  RngStream a(42, 7), b(42, 7);
  for (int i = 0; i < 100; ++i) {
    const ComplexVector ha = sample_channel(m, a);
    const ComplexVector hb = sample_channel(m, b);
    REQUIRE(ha == hb);
  }
  CHECK(a.counter() == b.counter());

  // Interleaving draws from another stream leaves this one unchanged.
  RngStream h1(42, 1), h2(42, 1), other(42, 2);
  for (int i = 0; i < 50; ++i) {
    (void)sample_noise(3, other);
    REQUIRE(sample_channel(m, h1) == sample_channel(m, h2));
    (void)sample_symbol(8, other);
  }

  RngStream c(42, 8), d(42, 7);
  CHECK(sample_channel(m, c) != sample_channel(m, d));
}

TEST_CASE("covariance file loader") {
  SUBCASE("valid file") {
    const auto p = write_temp("ok.txt", "# 2x2 example\n2\n0 0 1 0\n0 1 0.5 -0.5\n"
                                        "1 0 0.5 0.5\n1 1 1 0\n");
    const ComplexMatrix k = load_covariance_file(p);
    CHECK(k.rows() == 2);
    CHECK(k(0, 1) == cplx(0.5, -0.5));
    CHECK(k(1, 0) == cplx(0.5, 0.5));
  }
  SUBCASE("non-Hermitian") {
    const auto p = write_temp("skew.txt", "2\n0 0 1 0\n0 1 0.5 0\n1 0 0.4 0\n1 1 1 0\n");
    CHECK_THROWS_AS(load_covariance_file(p), ConfigError);
  }
  SUBCASE("missing entry") {
    const auto p = write_temp("short.txt", "2\n0 0 1 0\n0 1 0 0\n1 1 1 0\n");
    CHECK_THROWS_AS(load_covariance_file(p), ConfigError);
  }
  SUBCASE("duplicate entry") {
    const auto p =
        write_temp("dup.txt", "2\n0 0 1 0\n0 0 1 0\n0 1 0 0\n1 0 0 0\n1 1 1 0\n");
    CHECK_THROWS_AS(load_covariance_file(p), ConfigError);
  }
  SUBCASE("index out of range") {
    const auto p = write_temp("range.txt", "1\n1 0 1 0\n");
    CHECK_THROWS_AS(load_covariance_file(p), ConfigError);
  }
  SUBCASE("unreadable") {
    CHECK_THROWS_AS(load_covariance_file("/nonexistent/qsep/K.txt"), IoError);
  }
}

TEST_CASE("random covariance draws are Hermitian PD with unit mean diagonal") {
  RngStream rng(3, 3);
  for (std::size_t n = 1; n <= 6; ++n) {
    const ComplexMatrix k = random_covariance(n, rng);
    CHECK(is_hermitian(k));
    CHECK_NOTHROW(cholesky(k));
    double tr = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      tr += k(i, i).real();
    CHECK(tr == doctest::Approx(static_cast<double>(n)));
  }
}

} // TEST_SUITE

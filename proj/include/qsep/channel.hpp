#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>

#include <boost/random/normal_distribution.hpp>

#include "qsep/linalg.hpp"

namespace qsep {

enum class CorrelationKind { identity, exponential, explicit_matrix };

std::string to_string(CorrelationKind kind);
CorrelationKind correlation_kind_from_string(const std::string &s);

struct CorrelationSpec {
  CorrelationKind kind = CorrelationKind::identity;
  double alpha = 0.0; // exponential only, 0 <= alpha < 1
  double phi = 0.0;   // exponential only, radians
  ComplexMatrix matrix; // explicit only

  static CorrelationSpec identity() { return {}; }
  static CorrelationSpec exponential(double alpha, double phi) {
    return {CorrelationKind::exponential, alpha, phi, {}};
  }
  static CorrelationSpec from_matrix(ComplexMatrix k) {
    return {CorrelationKind::explicit_matrix, 0.0, 0.0, std::move(k)};
  }

  friend bool operator==(const CorrelationSpec &, const CorrelationSpec &) = default;
};

/// K_ij = |alpha|^{|i-j|} e^{j phi (i-j)}.
ComplexMatrix exponential_correlation(std::size_t n_r, double alpha, double phi);

/// Receive covariance with its factorizations. Immutable once built, so it
/// can be shared read-only across worker threads.
class ChannelModel {
public:
  std::size_t antennas() const { return k_.rows(); }
  const ComplexMatrix &covariance() const { return k_; }
  const CholeskyFactor &chol() const { return chol_; }
  const HermitianEigen &eig() const { return eig_; }
  double det() const { return det_; }

  friend ChannelModel build_covariance(const CorrelationSpec &spec,
                                       std::size_t n_r);

private:
  ComplexMatrix k_;
  CholeskyFactor chol_;
  HermitianEigen eig_;
  double det_ = 1.0;
};

/// Throws InvalidParameter for alpha outside [0, 1) or n_r = 0, and
/// NotHermitian / NotPositiveDefinite for a bad explicit matrix.
ChannelModel build_covariance(const CorrelationSpec &spec, std::size_t n_r);

/// Reads "N_r" followed by N_r^2 lines "i j re im" (0-based indices).
/// Throws IoError when unreadable and ConfigError on malformed or
/// non-Hermitian content.
ComplexMatrix load_covariance_file(const std::filesystem::path &path);

/// 64-bit finalizer (splitmix64); used to derive independent stream ids.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b);

/// A replayable random stream identified by (seed, stream_id). Two streams
/// with distinct ids are statistically independent.
class RngStream {
public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  /// Number of variates drawn so far.
  std::uint64_t counter() const { return counter_; }

  double uniform();
  /// Normal(0, variance 1).
  double normal();
  /// CN(0, 1): real and imaginary parts each Normal(0, 1/2).
  cplx complex_normal();
  /// Uniform integer in [0, n).
  unsigned index(unsigned n);

private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t counter_ = 0;
  std::mt19937_64 engine_;
  boost::random::normal_distribution<double> normal_; // ziggurat
  std::uniform_real_distribution<double> uniform_;
};

/// h = L w with w ~ CN(0, I); writes into out (size N_r).
void sample_channel(const ChannelModel &model, RngStream &rng,
                    std::span<cplx> out);
ComplexVector sample_channel(const ChannelModel &model, RngStream &rng);

void sample_noise(RngStream &rng, std::span<cplx> out);
ComplexVector sample_noise(std::size_t n_r, RngStream &rng);

/// Random Hermitian PD matrix with unit mean diagonal: A A^H / n + I / 4,
/// rescaled, with A having CN(0, 1) entries. Used for randomized checks.
ComplexMatrix random_covariance(std::size_t n_r, RngStream &rng);

/// Uniform index in 0..M-1; M must be a power of two >= 2.
unsigned sample_symbol(unsigned order, RngStream &rng);

} // namespace qsep

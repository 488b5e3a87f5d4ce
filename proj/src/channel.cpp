#include "qsep/channel.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "qsep/constellation.hpp"
#include "qsep/errors.hpp"

namespace qsep {

std::string to_string(CorrelationKind kind) {
  switch (kind) {
  case CorrelationKind::identity:
    return "identity";
  case CorrelationKind::exponential:
    return "exponential";
  case CorrelationKind::explicit_matrix:
    return "explicit";
  }
  return "unknown";
}

CorrelationKind correlation_kind_from_string(const std::string &s) {
  if (s == "identity")
    return CorrelationKind::identity;
  if (s == "exponential")
    return CorrelationKind::exponential;
  if (s == "explicit")
    return CorrelationKind::explicit_matrix;
  throw InvalidParameter("unknown correlation kind '" + s +
                         "' (expected identity, exponential or explicit)");
}

ComplexMatrix exponential_correlation(std::size_t n_r, double alpha, double phi) {
  ComplexMatrix k(n_r, n_r);
  const double a = std::abs(alpha);
  for (std::size_t i = 0; i < n_r; ++i)
    for (std::size_t j = 0; j < n_r; ++j) {
      const long d = static_cast<long>(i) - static_cast<long>(j);
      k(i, j) = std::polar(std::pow(a, std::abs(d)), phi * static_cast<double>(d));
    }
  return k;
}

ChannelModel build_covariance(const CorrelationSpec &spec, std::size_t n_r) {
  if (n_r == 0)
    throw InvalidParameter("build_covariance: N_r must be >= 1");

  ChannelModel m;
  switch (spec.kind) {
  case CorrelationKind::identity:
    m.k_ = ComplexMatrix::identity(n_r);
    break;
  case CorrelationKind::exponential:
    if (!(spec.alpha >= 0.0 && spec.alpha < 1.0))
      throw InvalidParameter("exponential correlation: alpha must lie in [0, 1)");
    if (!std::isfinite(spec.phi))
      throw InvalidParameter("exponential correlation: phi must be finite");
    m.k_ = exponential_correlation(n_r, spec.alpha, spec.phi);
    break;
  case CorrelationKind::explicit_matrix:
    if (spec.matrix.rows() != n_r || spec.matrix.cols() != n_r)
      throw DimensionMismatch("explicit covariance is " +
                              std::to_string(spec.matrix.rows()) + "x" +
                              std::to_string(spec.matrix.cols()) +
                              ", expected N_r = " + std::to_string(n_r));
    m.k_ = spec.matrix;
    break;
  }

  m.chol_ = cholesky(m.k_);
  m.eig_ = eig_hermitian(m.k_);
  m.det_ = 1.0;
  for (std::size_t i = 0; i < n_r; ++i) {
    const double d = m.chol_.lower(i, i).real();
    m.det_ *= d * d;
  }
  return m;
}

ComplexMatrix load_covariance_file(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open covariance file " + path.string());

  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      const auto first = line.find_first_not_of(" \t\r");
      if (first != std::string::npos && line[first] != '#')
        return true;
    }
    return false;
  };
  auto fail = [&](const std::string &msg) {
    throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + msg);
  };

  if (!next_line())
    fail("missing N_r header");
  std::size_t n = 0;
  {
    std::istringstream ss(line);
    long long v = 0;
    if (!(ss >> v) || v < 1)
      fail("N_r must be a positive integer");
    n = static_cast<std::size_t>(v);
  }

  ComplexMatrix k(n, n);
  std::vector<bool> seen(n * n, false);
  for (std::size_t e = 0; e < n * n; ++e) {
    if (!next_line())
      fail("expected " + std::to_string(n * n) + " entries, got " +
           std::to_string(e));
    std::istringstream ss(line);
    long long i = -1, j = -1;
    double re = 0.0, im = 0.0;
    if (!(ss >> i >> j >> re >> im))
      fail("expected 'i j re im'");
    if (i < 0 || j < 0 || static_cast<std::size_t>(i) >= n ||
        static_cast<std::size_t>(j) >= n)
      fail("index out of range");
    const std::size_t idx = static_cast<std::size_t>(i) * n + static_cast<std::size_t>(j);
    if (seen[idx])
      fail("duplicate entry");
    seen[idx] = true;
    k(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = {re, im};
  }
  if (!is_hermitian(k))
    throw ConfigError(path.string() + ": covariance matrix is not Hermitian");
  return k;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  return mix64(mix64(a) ^ (b + 0x632be59bd9b4e019ULL + (a << 6) + (a >> 2)));
}

namespace {
std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id),
                    static_cast<std::uint32_t>(stream_id >> 32)};
  return std::mt19937_64(seq);
}
} // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), engine_(make_engine(seed, stream_id)) {}

double RngStream::uniform() {
  ++counter_;
  return uniform_(engine_);
}

double RngStream::normal() {
  ++counter_;
  return normal_(engine_);
}

cplx RngStream::complex_normal() {
  constexpr double s = 0.70710678118654752440;
  const double re = normal();
  const double im = normal();
  return {s * re, s * im};
}

unsigned RngStream::index(unsigned n) {
  ++counter_;
  if (is_power_of_two(n))
    return n == 1 ? 0u
                  : static_cast<unsigned>(engine_() >> (64 - std::countr_zero(n)));
  return std::uniform_int_distribution<unsigned>(0, n - 1)(engine_);
}

void sample_channel(const ChannelModel &model, RngStream &rng, std::span<cplx> out) {
  const auto &l = model.chol().lower;
  const std::size_t n = model.antennas();
  if (out.size() != n)
    throw DimensionMismatch("sample_channel: output length differs from N_r");
  // w is generated in order and consumed by the lower-triangular product in
  // place, back to front so that w_j is still intact when row i >= j reads it.
  for (std::size_t i = 0; i < n; ++i)
    out[i] = rng.complex_normal();
  for (std::size_t i = n; i-- > 0;) {
    cplx acc = 0.0;
    for (std::size_t j = 0; j <= i; ++j)
      acc += l(i, j) * out[j];
    out[i] = acc;
  }
}

ComplexVector sample_channel(const ChannelModel &model, RngStream &rng) {
  ComplexVector h(model.antennas());
  sample_channel(model, rng, h);
  return h;
}

void sample_noise(RngStream &rng, std::span<cplx> out) {
  for (auto &z : out)
    z = rng.complex_normal();
}

ComplexVector sample_noise(std::size_t n_r, RngStream &rng) {
  if (n_r == 0)
    throw InvalidParameter("sample_noise: N_r must be >= 1");
  ComplexVector n(n_r);
  sample_noise(rng, n);
  return n;
}

unsigned sample_symbol(unsigned order, RngStream &rng) {
  if (order < 2 || !is_power_of_two(order))
    throw InvalidParameter("sample_symbol: M must be a power of two >= 2");
  return rng.index(order);
}

ComplexMatrix random_covariance(std::size_t n_r, RngStream &rng) {
  if (n_r < 1)
    throw InvalidParameter("random_covariance: n_r must be >= 1");
  ComplexMatrix a(n_r, n_r);
  for (std::size_t i = 0; i < n_r; ++i)
    for (std::size_t j = 0; j < n_r; ++j)
      a(i, j) = rng.complex_normal();
  ComplexMatrix k = (1.0 / static_cast<double>(n_r)) * (a * a.adjoint()) +
                    0.25 * ComplexMatrix::identity(n_r);
  double trace = 0.0;
  for (std::size_t i = 0; i < n_r; ++i)
    trace += k(i, i).real();
  k = (static_cast<double>(n_r) / trace) * k;
  // Exact Hermitian symmetry; the product above can differ in the last bit.
  for (std::size_t i = 0; i < n_r; ++i) {
    k(i, i) = k(i, i).real();
    for (std::size_t j = i + 1; j < n_r; ++j)
      k(j, i) = std::conj(k(i, j));
  }
  return k;
}

} // namespace qsep

#include "qsep/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "qsep/errors.hpp"

namespace qsep {

namespace {

constexpr int kJacobiSweeps = 30;
constexpr double kJacobiTol = 1e-13;
constexpr double kHermitianTol = 1e-12;

void require_square(const ComplexMatrix &a, const char *what) {
  if (!a.square())
    throw DimensionMismatch(std::string(what) + ": matrix is " +
                            std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()));
  if (a.rows() == 0)
    throw InvalidParameter(std::string(what) + ": empty matrix");
}

void require_hermitian(const ComplexMatrix &a, const char *what) {
  require_square(a, what);
  if (!is_hermitian(a))
    throw NotHermitian(std::string(what) + ": input is not Hermitian");
}

double off_diagonal_norm(const ComplexMatrix &a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j)
        s += std::norm(a(i, j));
  return std::sqrt(s);
}

} // namespace

ComplexMatrix::ComplexMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols) {}

ComplexMatrix ComplexMatrix::identity(std::size_t n) {
  ComplexMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    m(i, i) = 1.0;
  return m;
}

ComplexMatrix ComplexMatrix::diagonal(std::span<const double> d) {
  ComplexMatrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i)
    m(i, i) = d[i];
  return m;
}

ComplexMatrix ComplexMatrix::adjoint() const {
  ComplexMatrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j)
      t(j, i) = std::conj((*this)(i, j));
  return t;
}

double ComplexMatrix::frobenius_norm() const {
  double s = 0.0;
  for (const auto &z : data_)
    s += std::norm(z);
  return std::sqrt(s);
}

double ComplexMatrix::max_abs() const {
  double m = 0.0;
  for (const auto &z : data_)
    m = std::max(m, std::abs(z));
  return m;
}

ComplexMatrix operator*(const ComplexMatrix &a, const ComplexMatrix &b) {
  if (a.cols() != b.rows())
    throw DimensionMismatch("matrix product: inner dimensions differ");
  ComplexMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const cplx aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j)
        c(i, j) += aik * b(k, j);
    }
  return c;
}

ComplexMatrix operator+(const ComplexMatrix &a, const ComplexMatrix &b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionMismatch("matrix sum: shapes differ");
  ComplexMatrix c(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      c(i, j) = a(i, j) + b(i, j);
  return c;
}

ComplexMatrix operator-(const ComplexMatrix &a, const ComplexMatrix &b) {
  return a + (-1.0) * b;
}

ComplexMatrix operator*(double s, const ComplexMatrix &a) {
  ComplexMatrix c(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      c(i, j) = s * a(i, j);
  return c;
}

ComplexVector operator*(const ComplexMatrix &a, std::span<const cplx> x) {
  ComplexVector y(a.rows());
  multiply_into(a, x, y);
  return y;
}

void multiply_into(const ComplexMatrix &a, std::span<const cplx> x,
                   std::span<cplx> y) {
  if (a.cols() != x.size() || a.rows() != y.size())
    throw DimensionMismatch("matrix-vector product: shapes differ");
  for (std::size_t i = 0; i < a.rows(); ++i) {
    cplx acc = 0.0;
    const auto r = a.row(i);
    for (std::size_t j = 0; j < r.size(); ++j)
      acc += r[j] * x[j];
    y[i] = acc;
  }
}

double norm2(std::span<const cplx> x) {
  double s = 0.0;
  for (const auto &z : x)
    s += std::norm(z);
  return std::sqrt(s);
}

double relative_error(const ComplexMatrix &a, const ComplexMatrix &b) {
  const double denom = std::max(b.frobenius_norm(), 1e-300);
  return (a - b).frobenius_norm() / denom;
}

bool is_hermitian(const ComplexMatrix &a) {
  if (!a.square())
    return false;
  const double tol = kHermitianTol * a.max_abs();
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i; j < a.cols(); ++j)
      if (!(std::abs(a(i, j) - std::conj(a(j, i))) <= tol)) // NaN fails too
        return false;
  return true;
}

ComplexMatrix HermitianEigen::reconstruct(std::span<const double> d) const {
  const auto &v = eigenvectors;
  const std::size_t n = v.rows();
  ComplexMatrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      cplx acc = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        acc += v(i, k) * d[k] * std::conj(v(j, k));
      out(i, j) = acc;
    }
  return out;
}

HermitianEigen eig_hermitian(const ComplexMatrix &input) {
  require_hermitian(input, "eig_hermitian");
  const std::size_t n = input.rows();

  ComplexMatrix a = input;
  ComplexMatrix v = ComplexMatrix::identity(n);
  for (std::size_t i = 0; i < n; ++i)
    a(i, i) = a(i, i).real();

  const double scale = a.frobenius_norm();
  bool converged = false;
  for (int sweep = 0; sweep <= kJacobiSweeps; ++sweep) {
    if (off_diagonal_norm(a) <= kJacobiTol * scale) {
      converged = true;
      break;
    }
    if (sweep == kJacobiSweeps)
      break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const cplx apq = a(p, q);
        const double mag = std::abs(apq);
        if (mag == 0.0)
          continue;
        const cplx phase = std::conj(apq / mag);
        const double app = a(p, p).real();
        const double aqq = a(q, q).real();
        const double tau = (aqq - app) / (2.0 * mag);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;

        // G = diag(1, phase) * [[c, s], [-s, c]] restricted to (p, q).
        const cplx gpp = c, gpq = s;
        const cplx gqp = -s * phase, gqq = c * phase;

        for (std::size_t k = 0; k < n; ++k) {
          const cplx akp = a(k, p), akq = a(k, q);
          a(k, p) = akp * gpp + akq * gqp;
          a(k, q) = akp * gpq + akq * gqq;
          const cplx vkp = v(k, p), vkq = v(k, q);
          v(k, p) = vkp * gpp + vkq * gqp;
          v(k, q) = vkp * gpq + vkq * gqq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const cplx apk = a(p, k), aqk = a(q, k);
          a(p, k) = std::conj(gpp) * apk + std::conj(gqp) * aqk;
          a(q, k) = std::conj(gpq) * apk + std::conj(gqq) * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        a(p, p) = a(p, p).real();
        a(q, q) = a(q, q).real();
      }
    }
  }
  if (!converged)
    throw NoConvergence("eig_hermitian: Jacobi sweep budget exhausted");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return a(i, i).real() < a(j, j).real();
  });

  HermitianEigen out;
  out.eigenvalues.resize(n);
  out.eigenvectors = ComplexMatrix(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    out.eigenvalues[c] = a(order[c], order[c]).real();
    for (std::size_t r = 0; r < n; ++r)
      out.eigenvectors(r, c) = v(r, order[c]);
  }
  return out;
}

CholeskyFactor cholesky(const ComplexMatrix &a) {
  require_hermitian(a, "cholesky");
  const std::size_t n = a.rows();
  ComplexMatrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j).real();
    for (std::size_t k = 0; k < j; ++k)
      d -= std::norm(l(j, k));
    if (!(d > 0.0))
      throw NotPositiveDefinite("cholesky: non-positive pivot at row " +
                                std::to_string(j));
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      cplx acc = a(i, j);
      for (std::size_t k = 0; k < j; ++k)
        acc -= l(i, k) * std::conj(l(j, k));
      l(i, j) = acc / ljj;
    }
  }
  return {std::move(l)};
}

double det_hermitian_pd(const ComplexMatrix &a) {
  const auto f = cholesky(a);
  double det = 1.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double d = f.lower(i, i).real();
    det *= d * d;
  }
  return det;
}

ComplexMatrix sqrt_hermitian_pd(const ComplexMatrix &a) {
  cholesky(a);
  return eig_hermitian(a).apply([](double x) { return std::sqrt(x); });
}

ComplexMatrix inv_sqrt_hermitian_pd(const ComplexMatrix &a) {
  cholesky(a);
  return eig_hermitian(a).apply([](double x) { return 1.0 / std::sqrt(x); });
}

ComplexMatrix amrc_weight_matrix(const HermitianEigen &k_eig, double rho) {
  if (!(rho > 0.0) || !std::isfinite(rho))
    throw InvalidParameter("amrc_weight_matrix: rho must be positive");
  for (double lambda : k_eig.eigenvalues)
    if (!(lambda > 0.0))
      throw NotPositiveDefinite("amrc_weight_matrix: covariance has a "
                                "non-positive eigenvalue");
  return k_eig.apply(
      [rho](double lambda) { return std::sqrt(rho * lambda + 1.0) / std::sqrt(lambda); });
}

ComplexMatrix amrc_weight_matrix(const ComplexMatrix &k, double rho) {
  cholesky(k);
  return amrc_weight_matrix(eig_hermitian(k), rho);
}

} // namespace qsep

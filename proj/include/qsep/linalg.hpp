#pragma once

// Small dense complex linear algebra for Hermitian positive-definite
// matrices. Sizes of interest are the receive antenna counts (1..64), so
// everything here favours accuracy and simplicity over speed.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace qsep {

using cplx = std::complex<double>;
using ComplexVector = std::vector<cplx>;

/// Dense row-major complex matrix.
class ComplexMatrix {
public:
  ComplexMatrix() = default;
  ComplexMatrix(std::size_t rows, std::size_t cols);

  static ComplexMatrix identity(std::size_t n);
  static ComplexMatrix diagonal(std::span<const double> d);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }

  cplx &operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const cplx &operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  std::span<const cplx> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<const cplx> data() const { return data_; }

  ComplexMatrix adjoint() const;
  double frobenius_norm() const;
  double max_abs() const;

  friend bool operator==(const ComplexMatrix &, const ComplexMatrix &) = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<cplx> data_;
};

ComplexMatrix operator*(const ComplexMatrix &a, const ComplexMatrix &b);
ComplexMatrix operator+(const ComplexMatrix &a, const ComplexMatrix &b);
ComplexMatrix operator-(const ComplexMatrix &a, const ComplexMatrix &b);
ComplexMatrix operator*(double s, const ComplexMatrix &a);
ComplexVector operator*(const ComplexMatrix &a, std::span<const cplx> x);

/// y = A x into a caller-owned buffer (no allocation; hot-loop use).
void multiply_into(const ComplexMatrix &a, std::span<const cplx> x,
                   std::span<cplx> y);

double norm2(std::span<const cplx> x);

/// Relative Frobenius distance ||a - b|| / max(||b||, tiny).
double relative_error(const ComplexMatrix &a, const ComplexMatrix &b);

/// |A_ij - conj(A_ji)| <= 1e-12 * max|A| for all i, j.
bool is_hermitian(const ComplexMatrix &a);

struct HermitianEigen {
  std::vector<double> eigenvalues; // ascending
  ComplexMatrix eigenvectors;      // unitary, columns pair with eigenvalues

  /// V f(diag(lambda)) V^H for an elementwise scalar function.
  template <class F> ComplexMatrix apply(F &&f) const {
    std::vector<double> d(eigenvalues.size());
    for (std::size_t i = 0; i < d.size(); ++i)
      d[i] = f(eigenvalues[i]);
    return reconstruct(d);
  }

  ComplexMatrix reconstruct(std::span<const double> d) const;
};

struct CholeskyFactor {
  ComplexMatrix lower; // L with L L^H = A, real positive diagonal
};

/// Cyclic Jacobi eigendecomposition. Throws NotHermitian or NoConvergence
/// (sweep budget 30, stop once off(A) < 1e-13 ||A||_F).
HermitianEigen eig_hermitian(const ComplexMatrix &a);

/// Throws NotPositiveDefinite on a non-positive pivot.
CholeskyFactor cholesky(const ComplexMatrix &a);

/// Product of the squared Cholesky diagonal.
double det_hermitian_pd(const ComplexMatrix &a);

/// Principal square root of a Hermitian PD matrix.
ComplexMatrix sqrt_hermitian_pd(const ComplexMatrix &a);

/// Principal inverse square root of a Hermitian PD matrix.
ComplexMatrix inv_sqrt_hermitian_pd(const ComplexMatrix &a);

/// W = C^{1/2} K^{-1/2} with C = rho K + I. K and C share an eigenbasis, so
/// W = V diag(sqrt(rho lambda_i + 1) / sqrt(lambda_i)) V^H from a single
/// decomposition.
ComplexMatrix amrc_weight_matrix(const ComplexMatrix &k, double rho);
ComplexMatrix amrc_weight_matrix(const HermitianEigen &k_eig, double rho);

} // namespace qsep

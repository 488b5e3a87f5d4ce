#pragma once

// Test-only reference implementations, deliberately written differently from
// the library code they check.

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "qsep/channel.hpp"
#include "qsep/linalg.hpp"

namespace oracle {

using cplx = std::complex<double>;

// Explicit argmin over all 2^bits codebook points; ties to the smaller index.
inline unsigned nearest_point(cplx x, unsigned bits) {
  const unsigned m = 1u << bits;
  unsigned best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (unsigned i = 0; i < m; ++i) {
    const double a = std::numbers::pi / 4 + 2 * std::numbers::pi * i / m;
    const double d = std::abs(x - cplx(std::cos(a), std::sin(a)));
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

// Gaussian tail by adaptive quadrature of the density.
inline double q_by_quadrature(double x) {
  auto phi = [](double t) { return std::exp(-t * t / 2) / std::sqrt(2 * std::numbers::pi); };
  if (x >= 0) {
    boost::math::quadrature::exp_sinh<double> integrator;
    return integrator.integrate([&](double t) { return phi(x + t); }, 0.0,
                                std::numeric_limits<double>::infinity());
  }
  return 1.0 - q_by_quadrature(-x);
}

// Integral of cosec^2(pi/M - theta) over theta in [-pi/2^n, pi/2^n].
inline double cosec2_integral(unsigned order, unsigned bits) {
  const double a = std::numbers::pi / order;
  const double d = std::numbers::pi / std::pow(2.0, bits);
  auto f = [&](double t) {
    const double s = std::sin(a - t);
    return 1.0 / (s * s);
  };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -d, d, 15, 1e-13);
}

// a^{2N} E[f(T(a h))] for h ~ CN(0, K) by importance sampling.
//
// With x = a h the target is the integral over C^N of
//   f(T(x)) pi^{-N} det(K)^{-1} exp(-x^H K^{-1} x / a^2) dx.
// Each x_i is drawn with radius Gamma(2, 1/c) and a uniform angle, i.e.
// density b^2 exp(-b|x_i|) / (2 pi) with b = rate * c. With
// c = sin(pi/M - pi/2^n) we have T(x) >= c sum|x_i|, so rate = 1 keeps the
// weights bounded for f decaying like exp(-T); a Gaussian f allows any rate
// and a larger one concentrates draws where f is not negligible. Plain
// sampling of h cannot reach the a^{-2N} tail.
struct MgfEstimate {
  double mean;
  double std_error;
};

template <class F>
MgfEstimate scaled_expectation(const qsep::ComplexMatrix &k, unsigned order, unsigned bits,
                               double a, F f, std::uint64_t draws, std::uint64_t seed,
                               double rate = 1.0) {
  const std::size_t n = k.rows();
  const double pi = std::numbers::pi;
  const double c = std::sin(pi / order - pi / std::pow(2.0, bits));
  const double half_bin = pi / std::pow(2.0, bits);
  const qsep::HermitianEigen eig = qsep::eig_hermitian(k);
  const qsep::ComplexMatrix k_inv = eig.apply([](double l) { return 1.0 / l; });
  double det = 1.0;
  for (double l : eig.eigenvalues)
    det *= l;

  std::mt19937_64 gen(seed);
  const double b = rate * c;
  std::gamma_distribution<double> radius(2.0, 1.0 / b);
  std::uniform_real_distribution<double> angle(-pi, pi);
  std::vector<cplx> x(n);
  double sum = 0.0, sum_sq = 0.0;
  const double log_norm = -static_cast<double>(n) * std::log(pi) - std::log(det);
  for (std::uint64_t d = 0; d < draws; ++d) {
    double log_q = 0.0, t = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = radius(gen);
      const double phase = angle(gen);
      x[i] = std::polar(r, phase);
      log_q += 2 * std::log(b) - b * r - std::log(2 * pi);
      // theta~ = arg(Q(conj x) x): offset of arg(x) from its nearest bin
      // centre in the conjugated codebook, folded into [-half_bin, half_bin).
      const double centre = -pi / 4;
      double off = std::remainder(phase - centre, 2 * half_bin);
      if (off >= half_bin)
        off -= 2 * half_bin;
      const double z = r * std::sin(pi / order - off);
      t += z > 0 ? z : 0.0;
    }
    double quad = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        quad += (std::conj(x[i]) * k_inv(i, j) * x[j]).real();
    const double ft = f(t);
    const double w = ft > 0 ? std::exp(std::log(ft) + log_norm - quad / (a * a) - log_q) : 0.0;
    sum += w;
    sum_sq += w * w;
  }
  const double mean = sum / static_cast<double>(draws);
  const double var = sum_sq / static_cast<double>(draws) - mean * mean;
  return {mean, std::sqrt(std::max(var, 0.0) / static_cast<double>(draws))};
}

// s^{2N} E[exp(-s T)].
inline MgfEstimate scaled_mgf(const qsep::ComplexMatrix &k, unsigned order, unsigned bits,
                              double s, std::uint64_t draws, std::uint64_t seed) {
  return scaled_expectation(
      k, order, bits, s, [](double t) { return std::exp(-t); }, draws, seed);
}

// rho^N E[Q(sqrt(rho U))] with U = (2/N) T^2.
inline MgfEstimate scaled_mean_q(const qsep::ComplexMatrix &k, unsigned order, unsigned bits,
                                 double rho, std::uint64_t draws, std::uint64_t seed) {
  const double g = std::sqrt(2.0 / static_cast<double>(k.rows()));
  return scaled_expectation(
      k, order, bits, std::sqrt(rho),
      [g](double t) { return 0.5 * std::erfc(g * t / std::numbers::sqrt2); }, draws, seed,
      3.0);
}

} // namespace oracle

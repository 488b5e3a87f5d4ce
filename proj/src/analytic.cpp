#include "qsep/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "qsep/constellation.hpp"
#include "qsep/errors.hpp"

namespace qsep {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kLnPi = 1.1447298858494001741;
constexpr double kLn2 = std::numbers::ln2;

void check_k(double k) {
  if (!(k >= 1.0 && k <= 2.0))
    throw InvalidParameter("scaling factor k must lie in [1, 2]");
}

void check_det(double det_k) {
  if (!(det_k > 0.0) || !std::isfinite(det_k))
    throw InvalidParameter("det(K) must be a positive finite number");
}

void check_order(unsigned order) {
  if (order < 2 || !is_power_of_two(order))
    throw InvalidParameter("M must be a power of two >= 2");
}

void check_strict(unsigned order, unsigned bits, unsigned n_r) {
  check_order(order);
  if (n_r < 1)
    throw InvalidParameter("N_r must be >= 1");
  if (bits < 1 || bits > 30)
    throw InvalidParameter("n must be in 1..30");
  if (static_cast<unsigned long long>(order) >= (1ULL << bits))
    throw InvalidParameter("the strict coding gain requires M < 2^n");
}

// ln Gamma(twice_z / 2), exact product form.
double log_gamma_half_integer(int twice_z) {
  if (twice_z < 1)
    throw InvalidParameter("gamma_half_integer: argument must be positive");
  double acc = 0.0;
  if (twice_z % 2 == 0) {
    for (int i = 2; i < twice_z / 2; ++i)
      acc += std::log(static_cast<double>(i));
    return acc;
  }
  acc = 0.5 * kLnPi;
  for (int i = 1; i <= twice_z / 2; ++i)
    acc += std::log(i - 0.5);
  return acc;
}

double log_factorial(unsigned n) { return log_gamma_half_integer(2 * static_cast<int>(n) + 2); }

} // namespace

double qfunc(double x) { return 0.5 * std::erfc(x * std::numbers::sqrt2 / 2.0); }

double gamma_half_integer(int twice_z) {
  if (twice_z < 1)
    throw InvalidParameter("gamma_half_integer: argument must be positive");
  double acc = 1.0;
  if (twice_z % 2 == 0) {
    for (int i = 2; i < twice_z / 2; ++i)
      acc *= i;
    return acc;
  }
  acc = std::sqrt(kPi);
  for (int i = 1; i <= twice_z / 2; ++i)
    acc *= (i - 0.5);
  return acc;
}

std::string to_string(GainRegime r) {
  return r == GainRegime::strict_m_lt_2n ? "strict_M_lt_2n" : "heuristic_M_eq_2n";
}

GainRegime gain_regime_from_string(const std::string &s) {
  if (s == "strict_M_lt_2n")
    return GainRegime::strict_m_lt_2n;
  if (s == "heuristic_M_eq_2n")
    return GainRegime::heuristic_m_eq_2n;
  throw InvalidParameter("unknown gain regime '" + s + "'");
}

double diversity_gain(unsigned order, unsigned bits, unsigned n_r) {
  check_order(order);
  if (bits < 1 || bits > 30)
    throw InvalidParameter("n must be in 1..30");
  const unsigned long long levels = 1ULL << bits;
  if (order > levels)
    throw InvalidParameter("diversity gain is only characterized for M <= 2^n");
  return order < levels ? static_cast<double>(n_r) : 0.5 * n_r;
}

double cot_difference(unsigned order, unsigned bits) {
  const double a = kPi / order;
  const double d = kPi / static_cast<double>(1ULL << bits);
  return 1.0 / std::tan(a - d) - 1.0 / std::tan(a + d);
}

double coding_gain_strict(unsigned order, unsigned bits, unsigned n_r, double det_k,
                          double k) {
  check_strict(order, bits, n_r);
  check_det(det_k);
  check_k(k);
  const double n = n_r;
  const double log_inner = (bits * n - 1.0) * kLn2 + std::log(k) + n * std::log(n) -
                           (n + 0.5) * kLnPi - log_factorial(2 * n_r) -
                           std::log(det_k) + n * std::log(cot_difference(order, bits)) +
                           log_gamma_half_integer(2 * static_cast<int>(n_r) + 1);
  return std::exp(-log_inner / n);
}

double coding_gain_heuristic(unsigned order, unsigned n_r, double det_k, double k) {
  check_order(order);
  if (n_r < 1)
    throw InvalidParameter("N_r must be >= 1");
  check_det(det_k);
  check_k(k);
  const double n = n_r;
  const double log_inner = std::log(k) + 0.5 * n * std::log(n) - log_factorial(n_r) -
                           0.5 * std::log(det_k) - (n + 1.0) * kLn2 -
                           0.5 * (n + 1.0) * kLnPi + n * std::log(static_cast<double>(order)) +
                           log_gamma_half_integer(static_cast<int>(n_r) + 1);
  return std::exp(-2.0 / n * log_inner);
}

double mgf_coefficient_b(unsigned order, unsigned bits, unsigned n_r, double det_k) {
  check_strict(order, bits, n_r);
  check_det(det_k);
  const double n = n_r;
  return std::exp(bits * n * kLn2 - n * kLnPi - std::log(det_k) +
                  n * std::log(cot_difference(order, bits)));
}

GainResult gains(unsigned order, unsigned bits, unsigned n_r, double det_k, double k) {
  GainResult g;
  g.diversity = diversity_gain(order, bits, n_r);
  g.k_used = k;
  if (static_cast<unsigned long long>(order) < (1ULL << bits)) {
    g.regime = GainRegime::strict_m_lt_2n;
    g.coding = coding_gain_strict(order, bits, n_r, det_k, k);
  } else {
    g.regime = GainRegime::heuristic_m_eq_2n;
    g.coding = coding_gain_heuristic(order, n_r, det_k, k);
  }
  return g;
}

AsymptoteCurve asymptote_curve(const GainResult &gain, std::span<const double> rho) {
  AsymptoteCurve c{gain, {}};
  c.samples.reserve(rho.size());
  for (double r : rho) {
    if (!(r > 0.0))
      throw InvalidParameter("asymptote_curve: rho must be positive");
    const double sep = std::pow(gain.coding * r, -gain.diversity);
    c.samples.push_back({r, sep, sep > 1.0});
  }
  return c;
}

} // namespace qsep

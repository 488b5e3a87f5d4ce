#pragma once

// High-SNR closed forms for the phase-quantized SIMO SEP.
//
// The asymptote is SEP ~ (G_c rho)^{-G_d}. For M < 2^n both gains are exact
// up to the factor k in [1, 2]; for M = 2^n only G_d is exact and the coding
// gain is a heuristic estimate.

#include <span>
#include <string>
#include <vector>

namespace qsep {

/// Gaussian tail probability. Absolute error <= 1e-12 on |x| <= 8 and
/// relative error <= 1e-8 wherever the result is a normal double
/// (x up to about 37.5; beyond that the value underflows).
double qfunc(double x);

/// Gamma(twice_z / 2) by exact products; twice_z >= 1.
double gamma_half_integer(int twice_z);

enum class GainRegime { strict_m_lt_2n, heuristic_m_eq_2n };

std::string to_string(GainRegime r);
GainRegime gain_regime_from_string(const std::string &s);

struct GainResult {
  double diversity = 0.0;
  double coding = 0.0;
  double k_used = 2.0;
  GainRegime regime = GainRegime::strict_m_lt_2n;

  friend bool operator==(const GainResult &, const GainResult &) = default;
};

struct AsymptotePoint {
  double rho;   // linear SNR
  double sep;   // (G_c rho)^{-G_d}
  bool clamped; // sep > 1: outside the asymptotic regime

  /// Value used for reporting, clamped to 1.
  double reported() const { return clamped ? 1.0 : sep; }
};

struct AsymptoteCurve {
  GainResult gain;
  std::vector<AsymptotePoint> samples;
};

/// N_r for M < 2^n, N_r / 2 for M = 2^n; InvalidParameter for M > 2^n.
double diversity_gain(unsigned order, unsigned bits, unsigned n_r);

/// cot(pi/M - pi/2^n) - cot(pi/M + pi/2^n).
double cot_difference(unsigned order, unsigned bits);

/// Exact coding gain for M < 2^n.
double coding_gain_strict(unsigned order, unsigned bits, unsigned n_r,
                          double det_k, double k);

/// Heuristic coding gain intended for M = 2^n.
double coding_gain_heuristic(unsigned order, unsigned n_r, double det_k, double k);

/// Leading coefficient b of E[exp(-sT)] = b s^{-2 N_r} + o(s^{-2 N_r}).
double mgf_coefficient_b(unsigned order, unsigned bits, unsigned n_r, double det_k);

/// Picks the regime from (M, n) and evaluates both gains.
GainResult gains(unsigned order, unsigned bits, unsigned n_r, double det_k, double k);

AsymptoteCurve asymptote_curve(const GainResult &gain, std::span<const double> rho);

} // namespace qsep

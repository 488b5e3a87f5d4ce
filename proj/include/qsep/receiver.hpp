#pragma once

// Detection chain for the phase-quantized SIMO link:
//
//   y = sqrt(rho) h s + n,   r = Q_n(y)
//   MRC:    s_hat = Q_m(h^H r)
//   AMRC:   s_hat = Q_m(g^H r),  g = C^{1/2} K^{-1/2} h,  C = rho K + I
//   mirror: s_hat = Q_m(s Q_n(g s)^T conj(y))   (needs the true s)
//
// plus the per-realization bound statistics used by the high-SNR analysis.

#include <span>
#include <vector>

#include "qsep/constellation.hpp"
#include "qsep/linalg.hpp"

namespace qsep {

struct TrialDraw {
  unsigned s_index = 0;
  ComplexVector h;
  ComplexVector noise;
  ComplexVector y; // before quantization
  ComplexVector r; // after quantization, entries in S_{2^n}
};

struct DetectionResult {
  unsigned decision_index;
  bool correct;
};

struct BoundStatistics {
  std::vector<double> thetas; // quantization angles
  std::vector<double> z;      // |h_i| sin(pi/M - theta_i)
  double t = 0.0;             // sum of z
  double u = 0.0;             // (2 / N_r) t^2
};

struct ReceivedSignal {
  ComplexVector y;
  ComplexVector r;
};

/// Throws DimensionMismatch when h and noise lengths differ and
/// InvalidParameter for rho <= 0.
ReceivedSignal received_signal(std::span<const cplx> h, cplx s,
                               std::span<const cplx> noise, double rho,
                               const PhaseQuantizer &qn);
void received_signal_into(std::span<const cplx> h, cplx s,
                          std::span<const cplx> noise, double sqrt_rho,
                          const PhaseQuantizer &qn, std::span<cplx> y,
                          std::span<cplx> r);

/// Builds a complete trial from its parts.
TrialDraw make_trial(unsigned s_index, const PskConstellation &psk,
                     ComplexVector h, ComplexVector noise, double rho,
                     const PhaseQuantizer &qn);

/// sum_i conj(a_i) b_i
cplx inner(std::span<const cplx> a, std::span<const cplx> b);

/// qm is the M-PSK decision device Q_m (m = log2 M).
DetectionResult mrc_detect(std::span<const cplx> h, std::span<const cplx> r,
                           const PhaseQuantizer &qm, unsigned s_index);

/// w must be amrc_weight_matrix(K, rho) for the K and rho of the trial.
DetectionResult amrc_detect(std::span<const cplx> h, std::span<const cplx> r,
                            const ComplexMatrix &w, const PhaseQuantizer &qm,
                            unsigned s_index);

/// Statistically equivalent reformulation of AMRC; only meaningful for
/// validation since it uses the transmitted symbol.
DetectionResult mirror_detect(const TrialDraw &trial, const ComplexMatrix &w,
                              const PhaseQuantizer &qm, const PhaseQuantizer &qn);

/// Lower-level form used by simulation loops. g is W h.
unsigned mirror_decision(std::span<const cplx> g, cplx s, std::span<const cplx> y,
                         const PhaseQuantizer &qm, const PhaseQuantizer &qn);

/// Requires M <= 2^n (both powers of two) and every |h_i| > 0; throws
/// InvalidParameter / ZeroInput. When reference is given, the quantization
/// angle of antenna i is taken as arg(Q_n(conj(reference_i)) h_i).
BoundStatistics bound_statistics(std::span<const cplx> h, unsigned order,
                                 const PhaseQuantizer &qn,
                                 std::span<const cplx> reference = {});
BoundStatistics bound_statistics(std::span<const cplx> h, unsigned order,
                                 unsigned bits);

/// T = sum_i |h_i| sin(pi/M - theta_i) without the bookkeeping; hot-loop form.
double bound_t(std::span<const cplx> h, double pi_over_m, const PhaseQuantizer &qn);

/// eta = Re(ht) - |Im(ht)| cot(pi/M), ht = sum_i e^{-j pi/4} Q_n(c_i e^{j pi/4})
/// conj(h_i), where c is the vector fed to the per-antenna quantizer (g for
/// the exact mirror statistic, h for its high-SNR limit).
double eta_statistic(std::span<const cplx> h, std::span<const cplx> c,
                     unsigned order, const PhaseQuantizer &qn);

/// Q(sqrt(2 rho / N_r) eta sin(pi/M)).
double eta_bound(double eta, double rho, std::size_t n_r, unsigned order);

/// || g / sqrt(rho) - h - K^{-1} h / (2 rho) ||_2.
double amrc_expansion_residual(std::span<const cplx> h, const ComplexMatrix &k,
                               double rho);
double amrc_expansion_residual(std::span<const cplx> h, const HermitianEigen &k_eig,
                               double rho);

} // namespace qsep

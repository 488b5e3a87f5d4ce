#include "qsep/receiver.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "qsep/analytic.hpp"
#include "qsep/errors.hpp"

namespace qsep {

namespace {

constexpr double kPi = std::numbers::pi;

void require_same_length(std::size_t a, std::size_t b, const char *what) {
  if (a != b)
    throw DimensionMismatch(std::string(what) + ": vector lengths differ (" +
                            std::to_string(a) + " vs " + std::to_string(b) + ")");
}

void require_regime(unsigned order, const PhaseQuantizer &qn) {
  if (order < 2 || !is_power_of_two(order))
    throw InvalidParameter("M must be a power of two >= 2");
  if (order > (1u << qn.bits()))
    throw InvalidParameter("bound statistics need M <= 2^n");
}

} // namespace

void received_signal_into(std::span<const cplx> h, cplx s,
                          std::span<const cplx> noise, double sqrt_rho,
                          const PhaseQuantizer &qn, std::span<cplx> y,
                          std::span<cplx> r) {
  const cplx a = sqrt_rho * s;
  for (std::size_t i = 0; i < h.size(); ++i) {
    y[i] = a * h[i] + noise[i];
    r[i] = qn.point(y[i]);
  }
}

ReceivedSignal received_signal(std::span<const cplx> h, cplx s,
                               std::span<const cplx> noise, double rho,
                               const PhaseQuantizer &qn) {
  require_same_length(h.size(), noise.size(), "received_signal");
  if (!(rho > 0.0))
    throw InvalidParameter("received_signal: rho must be positive");
  ReceivedSignal out{ComplexVector(h.size()), ComplexVector(h.size())};
  received_signal_into(h, s, noise, std::sqrt(rho), qn, out.y, out.r);
  return out;
}

TrialDraw make_trial(unsigned s_index, const PskConstellation &psk,
                     ComplexVector h, ComplexVector noise, double rho,
                     const PhaseQuantizer &qn) {
  auto rx = received_signal(h, psk.point(s_index), noise, rho, qn);
  return {s_index, std::move(h), std::move(noise), std::move(rx.y), std::move(rx.r)};
}

cplx inner(std::span<const cplx> a, std::span<const cplx> b) {
  cplx acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    acc += std::conj(a[i]) * b[i];
  return acc;
}

DetectionResult mrc_detect(std::span<const cplx> h, std::span<const cplx> r,
                           const PhaseQuantizer &qm, unsigned s_index) {
  require_same_length(h.size(), r.size(), "mrc_detect");
  const unsigned d = qm.index(inner(h, r));
  return {d, d == s_index};
}

DetectionResult amrc_detect(std::span<const cplx> h, std::span<const cplx> r,
                            const ComplexMatrix &w, const PhaseQuantizer &qm,
                            unsigned s_index) {
  require_same_length(h.size(), r.size(), "amrc_detect");
  require_same_length(w.cols(), h.size(), "amrc_detect");
  const ComplexVector g = w * h;
  const unsigned d = qm.index(inner(g, r));
  return {d, d == s_index};
}

unsigned mirror_decision(std::span<const cplx> g, cplx s, std::span<const cplx> y,
                         const PhaseQuantizer &qm, const PhaseQuantizer &qn) {
  cplx acc = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    acc += qn.point(g[i] * s) * std::conj(y[i]);
  return qm.index(s * acc);
}

DetectionResult mirror_detect(const TrialDraw &trial, const ComplexMatrix &w,
                              const PhaseQuantizer &qm, const PhaseQuantizer &qn) {
  require_same_length(trial.h.size(), trial.y.size(), "mirror_detect");
  require_same_length(w.cols(), trial.h.size(), "mirror_detect");
  const ComplexVector g = w * trial.h;
  const cplx s = qm.codebook().point(trial.s_index);
  const unsigned d = mirror_decision(g, s, trial.y, qm, qn);
  return {d, d == trial.s_index};
}

BoundStatistics bound_statistics(std::span<const cplx> h, unsigned order,
                                 const PhaseQuantizer &qn,
                                 std::span<const cplx> reference) {
  require_regime(order, qn);
  if (!reference.empty())
    require_same_length(h.size(), reference.size(), "bound_statistics");
  if (h.empty())
    throw InvalidParameter("bound_statistics: empty channel");

  const double sin_m = std::sin(kPi / order);
  const double cos_m = std::cos(kPi / order);
  BoundStatistics st;
  st.thetas.reserve(h.size());
  st.z.reserve(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (h[i] == cplx(0.0, 0.0))
      throw ZeroInput("bound_statistics: zero channel coefficient");
    const cplx ref = reference.empty() ? h[i] : reference[i];
    if (ref == cplx(0.0, 0.0))
      throw ZeroInput("bound_statistics: zero reference coefficient");
    const cplx rotated = qn.point(std::conj(ref)) * h[i];
    // |h| sin(pi/M - theta) with theta = arg(rotated) and |rotated| = |h|.
    const double z = std::max(0.0, sin_m * rotated.real() - cos_m * rotated.imag());
    st.thetas.push_back(std::arg(rotated));
    st.z.push_back(z);
    st.t += z;
  }
  st.u = 2.0 / static_cast<double>(h.size()) * st.t * st.t;
  return st;
}

BoundStatistics bound_statistics(std::span<const cplx> h, unsigned order,
                                 unsigned bits) {
  return bound_statistics(h, order, PhaseQuantizer(bits));
}

double bound_t(std::span<const cplx> h, double pi_over_m, const PhaseQuantizer &qn) {
  const double sin_m = std::sin(pi_over_m);
  const double cos_m = std::cos(pi_over_m);
  double t = 0.0;
  for (const auto &hi : h) {
    const cplx rotated = qn.point(std::conj(hi)) * hi;
    t += std::max(0.0, sin_m * rotated.real() - cos_m * rotated.imag());
  }
  return t;
}

double eta_statistic(std::span<const cplx> h, std::span<const cplx> c,
                     unsigned order, const PhaseQuantizer &qn) {
  require_same_length(h.size(), c.size(), "eta_statistic");
  const cplx rot = std::polar(1.0, kPi / 4.0);
  cplx ht = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i)
    ht += std::conj(rot) * qn.point(c[i] * rot) * std::conj(h[i]);
  return ht.real() - std::abs(ht.imag()) / std::tan(kPi / order);
}

double eta_bound(double eta, double rho, std::size_t n_r, unsigned order) {
  return qfunc(std::sqrt(2.0 * rho / static_cast<double>(n_r)) * eta *
               std::sin(kPi / order));
}

double amrc_expansion_residual(std::span<const cplx> h, const HermitianEigen &k_eig,
                               double rho) {
  require_same_length(k_eig.eigenvectors.rows(), h.size(), "amrc_expansion_residual");
  const ComplexMatrix w = amrc_weight_matrix(k_eig, rho);
  const ComplexMatrix k_inv = k_eig.apply([](double l) { return 1.0 / l; });
  const ComplexVector g = w * h;
  const ComplexVector kih = k_inv * h;
  const double inv_sqrt_rho = 1.0 / std::sqrt(rho);
  const double half_inv_rho = 0.5 / rho;
  double s = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i)
    s += std::norm(g[i] * inv_sqrt_rho - h[i] - half_inv_rho * kih[i]);
  return std::sqrt(s);
}

double amrc_expansion_residual(std::span<const cplx> h, const ComplexMatrix &k,
                               double rho) {
  cholesky(k);
  return amrc_expansion_residual(h, eig_hermitian(k), rho);
}

} // namespace qsep

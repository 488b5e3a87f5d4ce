#include "qsep/constellation.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <string>

#include "qsep/errors.hpp"

namespace qsep {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr unsigned kMaxBits = 24;

unsigned checked_order(unsigned bits) {
  if (bits < 1 || bits > kMaxBits)
    throw InvalidParameter("quantizer bits must be in 1.." +
                           std::to_string(kMaxBits) + ", got " +
                           std::to_string(bits));
  return 1u << bits;
}
} // namespace

bool is_power_of_two(std::uint64_t v) { return std::has_single_bit(v); }

unsigned log2_exact(std::uint64_t v) {
  if (!is_power_of_two(v))
    throw InvalidParameter(std::to_string(v) + " is not a power of two");
  return static_cast<unsigned>(std::countr_zero(v));
}

PskConstellation::PskConstellation(unsigned order) : order_(order) {
  if (order < 2 || !is_power_of_two(order))
    throw InvalidParameter("PSK order must be a power of two >= 2, got " +
                           std::to_string(order));
  points_.reserve(order);
  for (unsigned i = 0; i < order; ++i)
    points_.push_back(std::polar(1.0, angle(i)));
}

double PskConstellation::angle(unsigned i) const {
  return kPi / 4.0 + 2.0 * kPi * static_cast<double>(i) / order_;
}

PhaseQuantizer::PhaseQuantizer(unsigned bits, int bin_shift)
    : bits_(bits), size_(checked_order(bits)), shift_(0), bin_width_(0.0),
      codebook_(size_) {
  bin_width_ = 2.0 * kPi / size_;
  const long long m = static_cast<long long>(size_);
  shift_ = static_cast<unsigned>(((bin_shift % m) + m) % m);
}

unsigned PhaseQuantizer::index(cplx x) const {
  if (x.real() == 0.0 && x.imag() == 0.0)
    return shift_;
  // Position relative to point 0 in units of bins; the nearest point is the
  // nearest integer, with exact half-way values resolved downward.
  const double v = (std::arg(x) - kPi / 4.0) / bin_width_;
  const double lower = std::floor(v);
  const double frac = v - lower;
  long long k = static_cast<long long>(lower) + (frac > 0.5 ? 1 : 0);
  const long long m = static_cast<long long>(size_);
  long long idx = ((k % m) + m) % m;
  if (frac == 0.5) {
    // Tie between idx and idx + 1 (mod m): the smaller index wins, which
    // only differs from idx at the wrap-around edge.
    const long long other = (idx + 1) % m;
    idx = std::min(idx, other);
  }
  return static_cast<unsigned>((idx + shift_) % m);
}

QuantizerOutput PhaseQuantizer::operator()(cplx x) const {
  const unsigned i = index(x);
  return {i, codebook_.point(i)};
}

void PhaseQuantizer::apply(std::span<const cplx> in, std::span<cplx> out) const {
  if (in.size() != out.size())
    throw DimensionMismatch("quantize: output length differs from input");
  for (std::size_t i = 0; i < in.size(); ++i)
    out[i] = point(in[i]);
}

QuantizerOutput quantize(cplx x, unsigned bits) { return PhaseQuantizer(bits)(x); }

std::vector<QuantizerOutput> quantize_vector(std::span<const cplx> y,
                                             unsigned bits) {
  const PhaseQuantizer q(bits);
  std::vector<QuantizerOutput> out;
  out.reserve(y.size());
  for (const auto &x : y)
    out.push_back(q(x));
  return out;
}

double quantization_angle(cplx h, const PhaseQuantizer &q) {
  if (h == cplx(0.0, 0.0))
    throw ZeroInput("quantization_angle: h = 0 has no argument");
  return std::arg(q.point(std::conj(h)) * h);
}

double quantization_angle(cplx h, unsigned bits) {
  return quantization_angle(h, PhaseQuantizer(bits));
}

} // namespace qsep

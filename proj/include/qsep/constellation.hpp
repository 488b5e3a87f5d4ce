#pragma once

// M-PSK point sets and the memoryless n-bit phase quantizer.
//
// Points are e^{j(pi/4 + 2 pi i / M)}. The quantizer maps any complex value to
// the nearest point of the 2^n-PSK codebook, which is the point whose angular
// bin (width 2 pi / 2^n, centred on the point) contains arg(x). Inputs lying
// exactly on a bin edge, and x = 0, go to the smallest candidate index.

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

namespace qsep {

using cplx = std::complex<double>;

bool is_power_of_two(std::uint64_t v);

/// log2 of a power of two; throws InvalidParameter otherwise.
unsigned log2_exact(std::uint64_t v);

class PskConstellation {
public:
  /// order must be a power of two >= 2.
  explicit PskConstellation(unsigned order);

  unsigned order() const { return order_; }
  const cplx &point(unsigned i) const { return points_[i]; }
  std::span<const cplx> points() const { return points_; }

  /// Angle of point i: pi/4 + 2 pi i / M (not reduced).
  double angle(unsigned i) const;

private:
  unsigned order_;
  std::vector<cplx> points_;
};

struct QuantizerOutput {
  unsigned index;
  cplx point;
};

/// Q_n with a precomputed 2^n-point table; cheap to copy by reference in
/// simulation loops.
class PhaseQuantizer {
public:
  /// bits >= 1. bin_shift rotates every decision by that many bins and
  /// exists only to inject faults when exercising the validation battery.
  explicit PhaseQuantizer(unsigned bits, int bin_shift = 0);

  unsigned bits() const { return bits_; }
  const PskConstellation &codebook() const { return codebook_; }

  unsigned index(cplx x) const;
  QuantizerOutput operator()(cplx x) const;
  cplx point(cplx x) const { return codebook_.point(index(x)); }

  /// Element-wise quantization into a caller-owned buffer.
  void apply(std::span<const cplx> in, std::span<cplx> out) const;

private:
  unsigned bits_;
  unsigned size_;
  unsigned shift_;
  double bin_width_;
  PskConstellation codebook_;
};

QuantizerOutput quantize(cplx x, unsigned bits);
std::vector<QuantizerOutput> quantize_vector(std::span<const cplx> y,
                                             unsigned bits);

/// arg(Q_n(conj(h)) h), which lies in (-pi/2^n, pi/2^n] away from bin edges
/// (at an exact edge the tie rule may return -pi/2^n). Throws ZeroInput for
/// h = 0.
double quantization_angle(cplx h, unsigned bits);
double quantization_angle(cplx h, const PhaseQuantizer &q);

} // namespace qsep

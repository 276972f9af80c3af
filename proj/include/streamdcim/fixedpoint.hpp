#pragma once

#include <cstdint>
#include <vector>

#include "streamdcim/errors.hpp"

namespace streamdcim::fx {

enum class Precision : uint8_t { Int8, Int16 };

inline int bit_width(Precision p) { return p == Precision::Int8 ? 8 : 16; }
inline int64_t min_code(Precision p) { return p == Precision::Int8 ? -128 : -32768; }
inline int64_t max_code(Precision p) { return p == Precision::Int8 ? 127 : 32767; }
const char* precision_name(Precision p);
Precision precision_from_name(const std::string& s);

// Quantized integer matrix, row-major. Element codes always fit the signed
// range of `precision`; `frac_bits` records the fixed-point scaling of the
// codes (value = code * 2^-frac_bits). Raw weights/activations use 0.
struct FixedMatrix {
  int rows = 0;
  int cols = 0;
  Precision precision = Precision::Int16;
  int frac_bits = 0;
  std::vector<int32_t> data;  // rows * cols

  FixedMatrix() = default;
  FixedMatrix(int r, int c, Precision p, int fb = 0)
      : rows(r), cols(c), precision(p), frac_bits(fb), data(static_cast<size_t>(r) * c, 0) {
    if (r < 0 || c < 0) throw ShapeError("negative matrix dimension");
  }

  int32_t at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
  int32_t& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  int64_t element_count() const { return static_cast<int64_t>(rows) * cols; }
  int64_t bits() const { return element_count() * bit_width(precision); }
  bool same_shape(const FixedMatrix& o) const { return rows == o.rows && cols == o.cols; }

  // True when every code fits the precision range and data length matches.
  bool valid() const;
};

// Softmax output: INT16 codes in Q1.14 (frac_bits = 14), rows sum to ~1.0.
using ProbMatrix = FixedMatrix;
inline constexpr int kProbFracBits = 14;
inline constexpr int32_t kProbOne = 1 << kProbFracBits;

// Exact column-mean score: numerator/denominator over integer codes, no
// intermediate rounding. Compare via cross-multiplication.
struct Rational {
  int64_t num = 0;
  int64_t den = 1;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};
inline bool rat_less(const Rational& a, const Rational& b) {
  return static_cast<__int128>(a.num) * b.den < static_cast<__int128>(b.num) * a.den;
}
inline bool rat_equal(const Rational& a, const Rational& b) {
  return static_cast<__int128>(a.num) * b.den == static_cast<__int128>(b.num) * a.den;
}

// Requantization policy for matmul: arithmetic right shift with
// round-half-away-from-zero, then saturate to `out_precision`.
struct MatmulPolicy {
  Precision out_precision = Precision::Int16;
  int frac_shift = 0;
  int out_frac_bits = 0;
};

int32_t requantize(int64_t acc, int frac_shift, Precision out_precision);

// Exact integer product with 64-bit accumulation (>= 48-bit requirement),
// requantized per policy. Parallelized over output rows; bit-identical to the
// serial reference for all inputs.
FixedMatrix matmul(const FixedMatrix& a, const FixedMatrix& b, const MatmulPolicy& policy = {});

FixedMatrix transpose(const FixedMatrix& a);

// Canonical softmax: per row, double-precision exp normalization of
// (scale * value - row max), quantized to Q1.14. Every execution mode routes
// softmax through this one procedure so outputs are bit-identical.
ProbMatrix softmax_rows(const FixedMatrix& a, double scale);

// Per-column mean of the probability codes, exact rational.
std::vector<Rational> column_mean(const ProbMatrix& p);

// Row sums of |dequantized row - 1.0| bound used by the ProbMatrix invariant.
bool prob_rows_normalized(const ProbMatrix& p);

namespace ref {

// Serial schoolbook product with 128-bit accumulation. Kept as the
// independent oracle for the parallel kernel and for functional
// verification of simulated dataflows.
FixedMatrix matmul(const FixedMatrix& a, const FixedMatrix& b, const MatmulPolicy& policy = {});

}  // namespace ref

}  // namespace streamdcim::fx

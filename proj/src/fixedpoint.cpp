#include "streamdcim/fixedpoint.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace streamdcim::fx {

const char* precision_name(Precision p) { return p == Precision::Int8 ? "int8" : "int16"; }

Precision precision_from_name(const std::string& s) {
  if (s == "int8") return Precision::Int8;
  if (s == "int16") return Precision::Int16;
  throw ConfigError("unknown precision '" + s + "'");
}

bool FixedMatrix::valid() const {
  if (data.size() != static_cast<size_t>(rows) * cols) return false;
  const int64_t lo = min_code(precision), hi = max_code(precision);
  for (int32_t v : data)
    if (v < lo || v > hi) return false;
  return true;
}

int32_t requantize(int64_t acc, int frac_shift, Precision out_precision) {
  int64_t v = acc;
  if (frac_shift > 0) {
    const int64_t bias = int64_t{1} << (frac_shift - 1);
    // round half away from zero, then arithmetic shift
    v = v >= 0 ? (v + bias) >> frac_shift : -((-v + bias) >> frac_shift);
  }
  return static_cast<int32_t>(std::clamp(v, min_code(out_precision), max_code(out_precision)));
}

static void check_matmul_shapes(const FixedMatrix& a, const FixedMatrix& b) {
  if (a.cols != b.rows)
    throw ShapeError("matmul inner dims " + std::to_string(a.cols) + " vs " +
                     std::to_string(b.rows));
}

FixedMatrix matmul(const FixedMatrix& a, const FixedMatrix& b, const MatmulPolicy& policy) {
  check_matmul_shapes(a, b);
  FixedMatrix out(a.rows, b.cols, policy.out_precision, policy.out_frac_bits);
  const int n = a.rows, k = a.cols, m = b.cols;
#pragma omp parallel for schedule(static) if (static_cast<int64_t>(n) * k * m > 1 << 16)
  for (int i = 0; i < n; ++i) {
    const int32_t* arow = a.data.data() + static_cast<size_t>(i) * k;
    int32_t* orow = out.data.data() + static_cast<size_t>(i) * m;
    for (int j = 0; j < m; ++j) {
      int64_t acc = 0;
      for (int p = 0; p < k; ++p)
        acc += static_cast<int64_t>(arow[p]) * b.data[static_cast<size_t>(p) * m + j];
      orow[j] = requantize(acc, policy.frac_shift, policy.out_precision);
    }
  }
  return out;
}

FixedMatrix transpose(const FixedMatrix& a) {
  FixedMatrix out(a.cols, a.rows, a.precision, a.frac_bits);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

ProbMatrix softmax_rows(const FixedMatrix& a, double scale) {
  if (a.rows == 0 || a.cols == 0) throw ShapeError("softmax on empty matrix");
  ProbMatrix p(a.rows, a.cols, Precision::Int16, kProbFracBits);
  const double in_scale = scale * std::ldexp(1.0, -a.frac_bits);
#pragma omp parallel for schedule(static) if (a.rows * a.cols > 1 << 14)
  for (int i = 0; i < a.rows; ++i) {
    double mx = -1e300;
    for (int j = 0; j < a.cols; ++j) mx = std::max(mx, in_scale * a.at(i, j));
    double sum = 0.0;
    std::vector<double> e(a.cols);
    for (int j = 0; j < a.cols; ++j) {
      e[j] = std::exp(in_scale * a.at(i, j) - mx);
      sum += e[j];
    }
    for (int j = 0; j < a.cols; ++j) {
      const double q = e[j] / sum * kProbOne;
      // round half away from zero, saturate to INT16
      int64_t code = static_cast<int64_t>(q >= 0 ? std::floor(q + 0.5) : std::ceil(q - 0.5));
      p.at(i, j) = static_cast<int32_t>(std::clamp<int64_t>(code, 0, max_code(Precision::Int16)));
    }
  }
  return p;
}

std::vector<Rational> column_mean(const ProbMatrix& p) {
  if (p.rows == 0 || p.cols == 0) throw ShapeError("column_mean on empty matrix");
  std::vector<Rational> scores(p.cols);
  for (int j = 0; j < p.cols; ++j) scores[j] = {0, p.rows};
  for (int i = 0; i < p.rows; ++i)
    for (int j = 0; j < p.cols; ++j) scores[j].num += p.at(i, j);
  return scores;
}

bool prob_rows_normalized(const ProbMatrix& p) {
  const double tol = p.cols * std::ldexp(1.0, -kProbFracBits);
  for (int i = 0; i < p.rows; ++i) {
    int64_t sum = 0;
    for (int j = 0; j < p.cols; ++j) {
      if (p.at(i, j) < 0) return false;
      sum += p.at(i, j);
    }
    if (std::abs(sum * std::ldexp(1.0, -kProbFracBits) - 1.0) > tol) return false;
  }
  return true;
}

namespace ref {

FixedMatrix matmul(const FixedMatrix& a, const FixedMatrix& b, const MatmulPolicy& policy) {
  check_matmul_shapes(a, b);
  FixedMatrix out(a.rows, b.cols, policy.out_precision, policy.out_frac_bits);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < b.cols; ++j) {
      __int128 acc = 0;
      for (int p = 0; p < a.cols; ++p)
        acc += static_cast<__int128>(a.at(i, p)) * b.at(p, j);
      out.at(i, j) = requantize(static_cast<int64_t>(acc), policy.frac_shift, policy.out_precision);
    }
  return out;
}

}  // namespace ref

}  // namespace streamdcim::fx

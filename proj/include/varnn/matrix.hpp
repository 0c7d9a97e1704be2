#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace varnn {

using Vector = std::vector<double>;

struct shape_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double* row_ptr(std::size_t r) { return data_.data() + r * cols_; }
  const double* row_ptr(std::size_t r) const { return data_.data() + r * cols_; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline void check_len(const Vector& a, const Vector& b, const char* op) {
  if (a.size() != b.size())
    throw shape_error(std::string(op) + ": length mismatch " + std::to_string(a.size()) +
                      " vs " + std::to_string(b.size()));
}

/// w * x, optionally plus bias.
inline Vector affine(const Matrix& w, const Vector& x) {
  if (w.cols() != x.size())
    throw shape_error("affine: matrix " + shape_str(w) + " incompatible with vector " +
                      std::to_string(x.size()));
  Vector out(w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double* wr = w.row_ptr(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < w.cols(); ++c) acc += wr[c] * x[c];
    out[r] = acc;
  }
  return out;
}

inline Vector affine(const Matrix& w, const Vector& x, const Vector& b) {
  if (b.size() != w.rows())
    throw shape_error("affine: bias length " + std::to_string(b.size()) +
                      " does not match matrix " + shape_str(w));
  Vector out = affine(w, x);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

/// w^T * y. Used by reverse-mode sweeps.
inline Vector matvec_transposed(const Matrix& w, const Vector& y) {
  if (w.rows() != y.size())
    throw shape_error("matvec_transposed: matrix " + shape_str(w) +
                      " incompatible with vector " + std::to_string(y.size()));
  Vector out(w.cols(), 0.0);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double* wr = w.row_ptr(r);
    const double yr = y[r];
    for (std::size_t c = 0; c < w.cols(); ++c) out[c] += wr[c] * yr;
  }
  return out;
}

/// acc += y * x^T  (y spans rows, x spans columns).
inline void add_outer(Matrix& acc, const Vector& y, const Vector& x) {
  if (acc.rows() != y.size() || acc.cols() != x.size())
    throw shape_error("add_outer: accumulator " + shape_str(acc) + " vs outer " +
                      std::to_string(y.size()) + "x" + std::to_string(x.size()));
  for (std::size_t r = 0; r < acc.rows(); ++r) {
    double* ar = acc.row_ptr(r);
    const double yr = y[r];
    for (std::size_t c = 0; c < acc.cols(); ++c) ar[c] += yr * x[c];
  }
}

inline Vector sigm(const Vector& a) {
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-a[i]));
  return out;
}

inline Vector vtanh(const Vector& a) {
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::tanh(a[i]);
  return out;
}

inline Vector hadamard(const Vector& a, const Vector& b) {
  check_len(a, b, "hadamard");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

inline Vector add(const Vector& a, const Vector& b) {
  check_len(a, b, "add");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

/// 1 - a, elementwise.
inline Vector one_minus(const Vector& a) {
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = 1.0 - a[i];
  return out;
}

inline void add_into(Vector& acc, const Vector& a) {
  check_len(acc, a, "add_into");
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += a[i];
}

struct SoftmaxXent {
  double loss = 0.0;
  Vector probs;
};

/// Stabilized softmax with negative log-likelihood of the target class.
inline SoftmaxXent softmax_xent(const Vector& logits, std::size_t target) {
  if (target >= logits.size())
    throw std::out_of_range("softmax_xent: target " + std::to_string(target) +
                            " out of range for " + std::to_string(logits.size()) + " logits");
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  SoftmaxXent r;
  r.probs.resize(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    r.probs[i] = std::exp(logits[i] - mx);
    sum += r.probs[i];
  }
  for (double& p : r.probs) p /= sum;
  // -log softmax(target), computed from the stabilized log-sum for accuracy
  r.loss = std::log(sum) - (logits[target] - mx);
  return r;
}

inline double sum_sq(const Vector& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

inline double sum_sq(const Matrix& m) { return sum_sq(m.data()); }

inline bool all_finite(const Vector& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline bool all_finite(const Matrix& m) { return all_finite(m.data()); }

}  // namespace varnn

#pragma once

#include <cassert>
#include <cmath>
#include <span>
#include <vector>

namespace rl {

// Dense row-major matrix of doubles. Small and value-semantic; everything in
// this project is desk-scale, so clarity beats cleverness.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

  static Mat zeros(int r, int c) { return Mat(r, c); }

  double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

  std::span<double> row(int i) { return {a.data() + static_cast<size_t>(i) * cols, static_cast<size_t>(cols)}; }
  std::span<const double> row(int i) const {
    return {a.data() + static_cast<size_t>(i) * cols, static_cast<size_t>(cols)};
  }

  size_t size() const { return a.size(); }

  Mat& operator+=(const Mat& o) {
    assert(rows == o.rows && cols == o.cols);
    for (size_t i = 0; i < a.size(); ++i) a[i] += o.a[i];
    return *this;
  }
  Mat& operator*=(double s) {
    for (auto& v : a) v *= s;
    return *this;
  }
};

// C = A * B
inline Mat matmul(const Mat& A, const Mat& B) {
  assert(A.cols == B.rows);
  Mat C(A.rows, B.cols);
  for (int i = 0; i < A.rows; ++i) {
    const double* arow = A.a.data() + static_cast<size_t>(i) * A.cols;
    double* crow = C.a.data() + static_cast<size_t>(i) * C.cols;
    for (int k = 0; k < A.cols; ++k) {
      double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = B.a.data() + static_cast<size_t>(k) * B.cols;
      for (int j = 0; j < B.cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return C;
}

// C = A^T * B
inline Mat matmul_tn(const Mat& A, const Mat& B) {
  assert(A.rows == B.rows);
  Mat C(A.cols, B.cols);
  for (int k = 0; k < A.rows; ++k) {
    const double* arow = A.a.data() + static_cast<size_t>(k) * A.cols;
    const double* brow = B.a.data() + static_cast<size_t>(k) * B.cols;
    for (int i = 0; i < A.cols; ++i) {
      double aki = arow[i];
      if (aki == 0.0) continue;
      double* crow = C.a.data() + static_cast<size_t>(i) * C.cols;
      for (int j = 0; j < B.cols; ++j) crow[j] += aki * brow[j];
    }
  }
  return C;
}

// C = A * B^T
inline Mat matmul_nt(const Mat& A, const Mat& B) {
  assert(A.cols == B.cols);
  Mat C(A.rows, B.rows);
  for (int i = 0; i < A.rows; ++i) {
    const double* arow = A.a.data() + static_cast<size_t>(i) * A.cols;
    for (int j = 0; j < B.rows; ++j) {
      const double* brow = B.a.data() + static_cast<size_t>(j) * B.cols;
      double s = 0.0;
      for (int k = 0; k < A.cols; ++k) s += arow[k] * brow[k];
      C(i, j) = s;
    }
  }
  return C;
}

inline void add_row_broadcast(Mat& m, std::span<const double> bias) {
  assert(static_cast<int>(bias.size()) == m.cols);
  for (int i = 0; i < m.rows; ++i) {
    double* r = m.a.data() + static_cast<size_t>(i) * m.cols;
    for (int j = 0; j < m.cols; ++j) r[j] += bias[j];
  }
}

inline std::vector<double> col_sums(const Mat& m) {
  std::vector<double> s(m.cols, 0.0);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) s[j] += m(i, j);
  return s;
}

// In-place softmax over a contiguous slice of length n starting at p.
inline void softmax_span(double* p, int n) {
  double mx = p[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, p[i]);
  double z = 0.0;
  for (int i = 0; i < n; ++i) {
    p[i] = std::exp(p[i] - mx);
    z += p[i];
  }
  for (int i = 0; i < n; ++i) p[i] /= z;
}

inline void softmax_rows_inplace(Mat& m) {
  for (int i = 0; i < m.rows; ++i) softmax_span(m.a.data() + static_cast<size_t>(i) * m.cols, m.cols);
}

inline double dot(std::span<const double> x, std::span<const double> y) {
  assert(x.size() == y.size());
  double s = 0.0;
  for (size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

}  // namespace rl

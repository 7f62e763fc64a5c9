#include "avfusion/core_math.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "avfusion/errors.hpp"

namespace avf {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("matrix " + std::to_string(rows_) + "x" + std::to_string(cols_) +
                     " given " + std::to_string(data_.size()) + " elements");
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(const std::vector<Vector>& rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols()) throw ShapeError("ragged rows");
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

Vector l2_normalize(std::span<const double> v) {
  const double n = l2_norm(v);
  if (v.empty() || n == 0.0) throw DegenerateInputError("l2_normalize: zero vector");
  Vector out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("cosine_similarity: dimension mismatch");
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (a.empty() || na == 0.0 || nb == 0.0) {
    throw DegenerateInputError("cosine_similarity: zero vector");
  }
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

// 2*atan2(|u - v|, |u + v|) on the unit vectors; acos loses ~1e-8 rad near 0 and 180.
double angle_deg(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("angle_deg: dimension mismatch");
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (a.empty() || na == 0.0 || nb == 0.0) throw DegenerateInputError("angle_deg: zero vector");
  double diff = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double u = a[i] / na, v = b[i] / nb;
    diff += (u - v) * (u - v);
    sum += (u + v) * (u + v);
  }
  return 2.0 * std::atan2(std::sqrt(diff), std::sqrt(sum)) * 180.0 / std::numbers::pi;
}

Vector centroid(const std::vector<Vector>& vs) {
  if (vs.empty()) throw DegenerateInputError("centroid: empty list");
  Vector c(vs.front().size(), 0.0);
  for (const auto& v : vs) {
    if (v.size() != c.size()) throw ShapeError("centroid: dimension mismatch");
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += v[i];
  }
  for (double& x : c) x /= static_cast<double>(vs.size());
  return c;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

bool is_zero(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

}  // namespace avf

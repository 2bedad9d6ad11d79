#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace recourse {

// Dense row-major matrix of doubles. Plain data holder used for datasets and
// as the storage behind autodiff values.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> values)
      : rows(r), cols(c), data(std::move(values)) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }

  bool operator==(const Matrix&) const = default;
};

// Rows of `m` selected by `index`, in the given order.
inline Matrix gather_rows(const Matrix& m, std::span<const std::size_t> index) {
  Matrix out(index.size(), m.cols);
  for (std::size_t i = 0; i < index.size(); ++i) {
    auto src = m.row(index[i]);
    auto dst = out.row(i);
    for (std::size_t c = 0; c < m.cols; ++c) dst[c] = src[c];
  }
  return out;
}

// Vertical concatenation; column counts must agree (empty matrices are skipped).
inline Matrix vstack(std::span<const Matrix> parts) {
  std::size_t cols = 0;
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.rows == 0) continue;
    cols = p.cols;
    rows += p.rows;
  }
  Matrix out(rows, cols);
  std::size_t at = 0;
  for (const auto& p : parts) {
    for (double v : p.data) out.data[at++] = v;
  }
  return out;
}

}  // namespace recourse

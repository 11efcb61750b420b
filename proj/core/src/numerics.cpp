// SPDX-License-Identifier: Apache-2.0

#include "eqnet/numerics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "eqnet/errors.hpp"

namespace eqnet::numerics {

ComplexMatrix::ComplexMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols) {}

ComplexMatrix::ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
  if (data_.size() != rows * cols) {
    throw std::invalid_argument("ComplexMatrix: entry count does not match dimensions");
  }
}

ComplexMatrix::ComplexMatrix(std::initializer_list<std::initializer_list<cplx>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& row : rows) {
    if (row.size() != cols_) throw std::invalid_argument("ComplexMatrix: ragged initializer");
    data_.insert(data_.end(), row.begin(), row.end());
  }
}

ComplexMatrix ComplexMatrix::identity(std::size_t n) {
  ComplexMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

ComplexMatrix ComplexMatrix::adjoint() const {
  ComplexMatrix out(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) out(c, r) = std::conj((*this)(r, c));
  return out;
}

ComplexVector ComplexMatrix::column(std::size_t c) const {
  ComplexVector out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.cols_ != b.rows_) throw std::invalid_argument("ComplexMatrix product: inner dimension mismatch");
  ComplexMatrix out(a.rows_, b.cols_);
  for (std::size_t i = 0; i < a.rows_; ++i)
    for (std::size_t k = 0; k < a.cols_; ++k) {
      const cplx aik = a(i, k);
      for (std::size_t j = 0; j < b.cols_; ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

ComplexMatrix operator-(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows_ != b.rows_ || a.cols_ != b.cols_) throw std::invalid_argument("ComplexMatrix difference: shape mismatch");
  ComplexMatrix out = a;
  for (std::size_t i = 0; i < out.data_.size(); ++i) out.data_[i] -= b.data_[i];
  return out;
}

ComplexMatrix operator+(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows_ != b.rows_ || a.cols_ != b.cols_) throw std::invalid_argument("ComplexMatrix sum: shape mismatch");
  ComplexMatrix out = a;
  for (std::size_t i = 0; i < out.data_.size(); ++i) out.data_[i] += b.data_[i];
  return out;
}

ComplexVector operator*(const ComplexMatrix& a, std::span<const cplx> v) {
  if (a.cols_ != v.size()) throw std::invalid_argument("ComplexMatrix-vector product: dimension mismatch");
  ComplexVector out(a.rows_);
  for (std::size_t i = 0; i < a.rows_; ++i) {
    cplx acc = 0.0;
    for (std::size_t k = 0; k < a.cols_; ++k) acc += a(i, k) * v[k];
    out[i] = acc;
  }
  return out;
}

double frobenius_norm_sq(const ComplexMatrix& m) { return norm_sq(m.entries()); }

double norm_sq(std::span<const cplx> v) {
  double acc = 0.0;
  for (const cplx& x : v) acc += std::norm(x);
  return acc;
}

QrFactors qr_decompose(const ComplexMatrix& m) {
  const std::size_t rows = m.rows();
  const std::size_t cols = m.cols();
  if (rows < cols) throw std::invalid_argument("qr_decompose: matrix has more columns than rows");
  for (std::size_t c = 0; c < cols; ++c) {
    double col_norm = 0.0;
    for (std::size_t r = 0; r < rows; ++r) col_norm += std::norm(m(r, c));
    if (std::sqrt(col_norm) <= kRankTolerance) {
      throw SingularMatrixError("qr_decompose: column " + std::to_string(c) + " is numerically zero");
    }
  }

  ComplexMatrix a = m;
  std::vector<ComplexVector> reflectors(cols);

  for (std::size_t k = 0; k < cols; ++k) {
    ComplexVector v(rows - k);
    double x_norm_sq = 0.0;
    for (std::size_t r = k; r < rows; ++r) {
      v[r - k] = a(r, k);
      x_norm_sq += std::norm(a(r, k));
    }
    const double x_norm = std::sqrt(x_norm_sq);
    if (x_norm == 0.0) continue;
    const double lead_abs = std::abs(v[0]);
    const cplx phase = lead_abs == 0.0 ? cplx(1.0) : v[0] / lead_abs;
    // alpha = -phase * |x| avoids cancellation in v0 - alpha.
    v[0] += phase * x_norm;
    const double v_norm = std::sqrt(norm_sq(v));
    if (v_norm == 0.0) continue;
    for (cplx& e : v) e /= v_norm;

    for (std::size_t c = k; c < cols; ++c) {
      cplx dot = 0.0;
      for (std::size_t r = k; r < rows; ++r) dot += std::conj(v[r - k]) * a(r, c);
      for (std::size_t r = k; r < rows; ++r) a(r, c) -= 2.0 * v[r - k] * dot;
    }
    reflectors[k] = std::move(v);
  }

  ComplexMatrix q(rows, cols);
  for (std::size_t i = 0; i < cols; ++i) q(i, i) = 1.0;
  for (std::size_t kk = cols; kk-- > 0;) {
    const ComplexVector& v = reflectors[kk];
    if (v.empty()) continue;
    for (std::size_t c = 0; c < cols; ++c) {
      cplx dot = 0.0;
      for (std::size_t r = kk; r < rows; ++r) dot += std::conj(v[r - kk]) * q(r, c);
      for (std::size_t r = kk; r < rows; ++r) q(r, c) -= 2.0 * v[r - kk] * dot;
    }
  }

  ComplexMatrix r(cols, cols);
  for (std::size_t i = 0; i < cols; ++i)
    for (std::size_t j = i; j < cols; ++j) r(i, j) = a(i, j);

  // Rotate row i of R and column i of Q so that r_ii is real and >= 0.
  for (std::size_t i = 0; i < cols; ++i) {
    const double mag = std::abs(r(i, i));
    if (mag < kRankTolerance) {
      throw SingularMatrixError("qr_decompose: pivot " + std::to_string(i) + " below rank tolerance");
    }
    const cplx d = r(i, i) / mag;
    const cplx d_conj = std::conj(d);
    for (std::size_t j = i; j < cols; ++j) r(i, j) *= d_conj;
    r(i, i) = cplx(mag, 0.0);
    for (std::size_t row = 0; row < rows; ++row) q(row, i) *= d;
  }
  return {std::move(q), std::move(r)};
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept {
  // splitmix64 finalizer over a combined word
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), engine_(mix_seed(seed, stream)) {}

RngStream RngStream::split(std::uint64_t id) const { return RngStream(seed_, mix_seed(stream_, id)); }

double RngStream::uniform() { return std::generate_canonical<double, 53>(engine_); }

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::size_t RngStream::uniform_index(std::size_t n) {
  if (n == 0) throw std::invalid_argument("RngStream::uniform_index: empty range");
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
}

double RngStream::normal() { return gauss_(engine_); }

ComplexVector sample_complex_gaussian(std::size_t n, double variance, RngStream& rng) {
  if (!(variance >= 0.0)) throw std::invalid_argument("sample_complex_gaussian: variance must be non-negative");
  ComplexVector out(n);
  if (variance == 0.0) return out;
  const double scale = std::sqrt(variance / 2.0);
  for (cplx& x : out) {
    const double re = rng.normal();
    const double im = rng.normal();
    x = cplx(scale * re, scale * im);
  }
  return out;
}

}  // namespace eqnet::numerics

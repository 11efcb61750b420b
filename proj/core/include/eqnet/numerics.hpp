// SPDX-License-Identifier: Apache-2.0
//
// Small dense complex linear algebra and seeded random streams.

#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

namespace eqnet::numerics {

using cplx = std::complex<double>;
using ComplexVector = std::vector<cplx>;

/// Row-major dense complex matrix.
class ComplexMatrix {
 public:
  ComplexMatrix() = default;
  ComplexMatrix(std::size_t rows, std::size_t cols);
  ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> entries);
  ComplexMatrix(std::initializer_list<std::initializer_list<cplx>> rows);

  static ComplexMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  cplx& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const cplx& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const cplx> entries() const noexcept { return data_; }
  std::span<cplx> entries() noexcept { return data_; }

  ComplexMatrix adjoint() const;
  ComplexVector column(std::size_t c) const;

  friend ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b);
  friend ComplexMatrix operator-(const ComplexMatrix& a, const ComplexMatrix& b);
  friend ComplexMatrix operator+(const ComplexMatrix& a, const ComplexMatrix& b);
  friend ComplexVector operator*(const ComplexMatrix& a, std::span<const cplx> v);

  bool operator==(const ComplexMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<cplx> data_;
};

double frobenius_norm_sq(const ComplexMatrix& m);
double norm_sq(std::span<const cplx> v);

/// Thin QR factorization. Q is rows x cols with orthonormal columns, R is
/// cols x cols upper triangular with a real, non-negative diagonal.
struct QrFactors {
  ComplexMatrix q;
  ComplexMatrix r;
};

inline constexpr double kRankTolerance = 1e-12;

/// Householder QR followed by a per-column phase rotation that makes every
/// diagonal entry of R real and non-negative. Throws SingularMatrixError when
/// a diagonal entry falls below kRankTolerance.
QrFactors qr_decompose(const ComplexMatrix& m);

/// Seeded pseudo-random stream. Identical (seed, stream) pairs produce
/// identical sequences on the same build.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  /// Independent child stream, a pure function of (seed, stream, id).
  RngStream split(std::uint64_t id) const;

  std::uint64_t next_u64() { return engine_(); }
  double uniform();                         // [0, 1)
  double uniform(double lo, double hi);     // [lo, hi)
  std::size_t uniform_index(std::size_t n); // [0, n)
  std::uint8_t bit() { return static_cast<std::uint8_t>(engine_() >> 63); }
  double normal();                          // N(0, 1)

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> gauss_{0.0, 1.0};
};

/// Mixes two words into one; used for deriving stream ids.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept;

/// n circularly-symmetric complex Gaussian samples with E|x|^2 = variance.
ComplexVector sample_complex_gaussian(std::size_t n, double variance, RngStream& rng);

}  // namespace eqnet::numerics

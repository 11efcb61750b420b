// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "eqnet/errors.hpp"
#include "eqnet/numerics.hpp"

namespace {

using eqnet::numerics::ComplexMatrix;
using eqnet::numerics::cplx;
using eqnet::numerics::RngStream;

ComplexMatrix random_matrix(std::size_t rows, std::size_t cols, RngStream& rng) {
  ComplexMatrix m(rows, cols);
  for (auto& e : m.entries()) e = {rng.normal(), rng.normal()};
  return m;
}

double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.entries().size(); ++i) d = std::max(d, std::abs(a.entries()[i] - b.entries()[i]));
  return d;
}

TEST(Qr, IdentityFactorsToItself) {
  const auto f = eqnet::numerics::qr_decompose(ComplexMatrix::identity(2));
  EXPECT_EQ(f.q, ComplexMatrix::identity(2));
  EXPECT_EQ(f.r, ComplexMatrix::identity(2));
}

TEST(Qr, ScalarPhaseMovesIntoQ) {
  const auto f = eqnet::numerics::qr_decompose(ComplexMatrix{{cplx(3, 4)}});
  EXPECT_NEAR(std::abs(f.q(0, 0) - cplx(0.6, 0.8)), 0.0, 1e-15);
  EXPECT_NEAR(f.r(0, 0).real(), 5.0, 1e-15);
  EXPECT_EQ(f.r(0, 0).imag(), 0.0);
}

TEST(Qr, ReconstructsRandomMatrices) {
  RngStream rng(11);
  for (auto [rows, cols] : {std::pair{4, 4}, {2, 2}, {4, 2}, {3, 1}}) {
    for (int trial = 0; trial < 50; ++trial) {
      const auto m = random_matrix(rows, cols, rng);
      const auto f = eqnet::numerics::qr_decompose(m);
      EXPECT_LT(std::sqrt(eqnet::numerics::frobenius_norm_sq(f.q * f.r - m)), 1e-12);
      EXPECT_LT(std::sqrt(eqnet::numerics::frobenius_norm_sq(f.q.adjoint() * f.q - ComplexMatrix::identity(cols))),
                1e-12);
      for (std::size_t i = 0; i < f.r.rows(); ++i) {
        EXPECT_EQ(f.r(i, i).imag(), 0.0);
        EXPECT_GE(f.r(i, i).real(), 0.0);
        for (std::size_t j = 0; j < i && j < f.r.cols(); ++j) EXPECT_EQ(f.r(i, j), cplx(0.0));
      }
    }
  }
}

TEST(Qr, QIsAnIsometry) {
  RngStream rng(12);
  const auto f = eqnet::numerics::qr_decompose(random_matrix(4, 4, rng));
  for (int trial = 0; trial < 20; ++trial) {
    const auto v = eqnet::numerics::sample_complex_gaussian(4, 1.0, rng);
    const auto qv = f.q * v;
    EXPECT_NEAR(eqnet::numerics::norm_sq(qv), eqnet::numerics::norm_sq(v), 1e-10 * eqnet::numerics::norm_sq(v));
  }
}

TEST(Qr, RankDeficientThrows) {
  const ComplexMatrix m{{1.0, 2.0}, {2.0, 4.0}};
  EXPECT_THROW(eqnet::numerics::qr_decompose(m), eqnet::SingularMatrixError);
  EXPECT_THROW(eqnet::numerics::qr_decompose(ComplexMatrix(2, 2)), eqnet::SingularMatrixError);
}

TEST(Qr, WideMatrixRejected) {
  EXPECT_THROW(eqnet::numerics::qr_decompose(ComplexMatrix(2, 3)), std::invalid_argument);
}

TEST(FrobeniusNorm, Examples) {
  EXPECT_EQ(eqnet::numerics::frobenius_norm_sq(ComplexMatrix(2, 2)), 0.0);
  EXPECT_EQ(eqnet::numerics::frobenius_norm_sq(ComplexMatrix::identity(2)), 2.0);
  EXPECT_DOUBLE_EQ(eqnet::numerics::frobenius_norm_sq(ComplexMatrix{{cplx(1, 1), 0.0}, {0.0, 2.0}}), 6.0);
}

TEST(Gaussian, ZeroVarianceIsZero) {
  RngStream rng(1);
  for (auto v : eqnet::numerics::sample_complex_gaussian(16, 0.0, rng)) EXPECT_EQ(v, cplx(0.0));
}

TEST(Gaussian, NegativeVarianceThrows) {
  RngStream rng(1);
  EXPECT_THROW(eqnet::numerics::sample_complex_gaussian(4, -1.0, rng), std::invalid_argument);
}

TEST(Gaussian, SameSeedSameSamples) {
  RngStream a(99, 3);
  RngStream b(99, 3);
  EXPECT_EQ(eqnet::numerics::sample_complex_gaussian(64, 2.0, a), eqnet::numerics::sample_complex_gaussian(64, 2.0, b));
}

TEST(Gaussian, MomentsMatch) {
  RngStream rng(2024);
  const auto v = eqnet::numerics::sample_complex_gaussian(1'000'000, 1.0, rng);
  cplx mean = 0.0;
  double power = 0.0;
  double re_power = 0.0;
  for (auto x : v) {
    mean += x;
    power += std::norm(x);
    re_power += x.real() * x.real();
  }
  const auto n = static_cast<double>(v.size());
  EXPECT_LT(std::abs(mean / n), 0.01);
  EXPECT_NEAR(power / n, 1.0, 0.01);
  EXPECT_NEAR(re_power / n, 0.5, 0.01);
}

TEST(RngStream, SplitStreamsDiffer) {
  RngStream base(5);
  auto a = base.split(1);
  auto b = base.split(2);
  auto a2 = base.split(1);
  EXPECT_NE(a.next_u64(), b.next_u64());
  a = base.split(1);
  EXPECT_EQ(a.next_u64(), a2.next_u64());
}

TEST(RngStream, UniformIndexInRange) {
  RngStream rng(8);
  for (int i = 0; i < 1000; ++i) EXPECT_LT(rng.uniform_index(7), 7u);
}

}  // namespace

// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <sstream>

#include "eqnet/ldpc.hpp"
#include "eqnet/numerics.hpp"

namespace {

using eqnet::ldpc::BitBlock;
using eqnet::numerics::RngStream;

BitBlock random_bits(std::size_t n, RngStream& rng) {
  BitBlock b(n);
  for (auto& x : b) x = rng.bit();
  return b;
}

std::vector<double> noiseless_llr(const BitBlock& cw) {
  std::vector<double> l(cw.size());
  for (std::size_t i = 0; i < cw.size(); ++i) l[i] = cw[i] ? 20.0 : -20.0;
  return l;
}

// Dense GF(2) syndrome straight from the shift table, independent of the CSR
// representation inside LdpcCode.
BitBlock table_syndrome(const BitBlock& cw) {
  const auto base = eqnet::ldpc::ieee80211n_648_r12_base();
  constexpr std::size_t z = 27;
  BitBlock s(12 * z, 0);
  for (std::size_t br = 0; br < 12; ++br)
    for (std::size_t bc = 0; bc < 24; ++bc) {
      const int shift = base[br * 24 + bc];
      if (shift < 0) continue;
      for (std::size_t r = 0; r < z; ++r) s[br * z + r] ^= cw[bc * z + (r + static_cast<std::size_t>(shift)) % z];
    }
  return s;
}

class Ldpc : public ::testing::Test {
 protected:
  static const eqnet::ldpc::LdpcCode& code() {
    static const auto c = eqnet::ldpc::build_code();
    return c;
  }
};

TEST_F(Ldpc, Dimensions) {
  EXPECT_EQ(code().n(), 648u);
  EXPECT_EQ(code().k(), 324u);
  EXPECT_EQ(code().check_count(), 324u);
  EXPECT_EQ(code().rank(), 324u);
}

TEST_F(Ldpc, RowWeights) {
  for (std::size_t c = 0; c < code().check_count(); ++c) {
    EXPECT_GE(code().check_row(c).size(), 7u);
    EXPECT_LE(code().check_row(c).size(), 8u);
  }
}

TEST_F(Ldpc, EncodeGivesZeroSyndrome) {
  RngStream rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    const auto cw = code().encode(random_bits(324, rng));
    ASSERT_EQ(cw.size(), 648u);
    EXPECT_TRUE(code().is_codeword(cw));
    for (auto b : table_syndrome(cw)) ASSERT_EQ(b, 0);
  }
}

TEST_F(Ldpc, EncodeIsSystematicAndLinear) {
  RngStream rng(42);
  EXPECT_EQ(code().encode(BitBlock(324, 0)), BitBlock(648, 0));
  for (int trial = 0; trial < 20; ++trial) {
    const auto u1 = random_bits(324, rng);
    const auto u2 = random_bits(324, rng);
    BitBlock u3(324);
    for (std::size_t i = 0; i < 324; ++i) u3[i] = u1[i] ^ u2[i];
    const auto c1 = code().encode(u1);
    const auto c2 = code().encode(u2);
    const auto c3 = code().encode(u3);
    for (std::size_t i = 0; i < 648; ++i) ASSERT_EQ(c3[i], c1[i] ^ c2[i]);
    const auto pos = code().info_positions();
    for (std::size_t i = 0; i < 324; ++i) ASSERT_EQ(c1[pos[i]], u1[i]);
  }
  EXPECT_THROW(code().encode(BitBlock(323)), std::invalid_argument);
}

TEST_F(Ldpc, NoiselessDecodeConvergesImmediately) {
  RngStream rng(43);
  for (int trial = 0; trial < 100; ++trial) {
    const auto u = random_bits(324, rng);
    const auto cw = code().encode(u);
    const auto r = code().decode(noiseless_llr(cw));
    ASSERT_TRUE(r.converged);
    EXPECT_EQ(r.iterations_used, 1);
    EXPECT_EQ(r.info_bits, u);
    EXPECT_EQ(r.codeword, cw);
  }
}

TEST_F(Ldpc, CorrectsFiveFlips) {
  RngStream rng(44);
  int ok = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto u = random_bits(324, rng);
    auto llr = noiseless_llr(code().encode(u));
    for (int f = 0; f < 5; ++f) {
      auto& v = llr[rng.uniform_index(648)];
      v = -v;
    }
    const auto r = eqnet::ldpc::decode(llr, code(), 50);
    ok += r.converged && r.info_bits == u;
  }
  EXPECT_GE(ok, 99);
}

TEST_F(Ldpc, ZeroInputNeverConverges) {
  const auto r = code().decode(std::vector<double>(648, 0.0), {50, 0.75});
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations_used, 50);
}

TEST_F(Ldpc, PureMinSumIsScaleInvariant) {
  RngStream rng(45);
  const eqnet::ldpc::DecoderOptions opts{50, 1.0};
  for (int trial = 0; trial < 20; ++trial) {
    auto llr = noiseless_llr(code().encode(random_bits(324, rng)));
    for (auto& v : llr) v = v / 20.0 * 1.2 + 1.5 * rng.normal();
    std::vector<double> scaled(llr);
    for (auto& v : scaled) v *= 4.0;  // exact in binary floating point
    const auto a = code().decode(llr, opts);
    const auto b = code().decode(scaled, opts);
    EXPECT_EQ(a.codeword, b.codeword);
    EXPECT_EQ(a.converged, b.converged);
    EXPECT_EQ(a.iterations_used, b.iterations_used);
  }
}

TEST_F(Ldpc, WrongLengthThrows) {
  EXPECT_THROW(code().decode(std::vector<double>(10, 1.0)), std::invalid_argument);
}

TEST(LdpcAlist, ParsesSmallCode) {
  // (7,4) Hamming code.
  std::istringstream in(
      "7 3\n"
      "3 4\n"
      "1 1 2 1 2 2 3\n"
      "4 4 4\n"
      "1 0 0\n2 0 0\n1 2 0\n3 0 0\n1 3 0\n2 3 0\n1 2 3\n"
      "1 3 5 7\n2 3 6 7\n4 5 6 7\n");
  const auto code = eqnet::ldpc::LdpcCode::from_alist(in);
  EXPECT_EQ(code.n(), 7u);
  EXPECT_EQ(code.k(), 4u);
  RngStream rng(46);
  for (int trial = 0; trial < 16; ++trial) EXPECT_TRUE(code.is_codeword(code.encode(random_bits(4, rng))));
}

}  // namespace

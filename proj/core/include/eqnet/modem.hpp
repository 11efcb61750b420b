// SPDX-License-Identifier: Apache-2.0
//
// Gray-coded square QAM.
//
// Bit order: a symbol carries K bits b_0 .. b_{K-1}. The label of point p is
// the integer whose most significant bit is b_0, and points are stored so that
// points()[label] is the symbol for that label. Bits b_0 .. b_{K/2-1} select
// the in-phase level and b_{K/2} .. b_{K-1} the quadrature level, each through
// a binary-reflected Gray code: the level index is gray_decode(axis bits), and
// level index j maps to amplitude (2j - (M - 1)) * scale with M = 2^{K/2}.
// So bit value 1 in the leading axis bit means a positive amplitude.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "eqnet/numerics.hpp"

namespace eqnet::modem {

using numerics::ComplexVector;
using numerics::cplx;
using BitBlock = std::vector<std::uint8_t>;

class QamConstellation {
 public:
  /// K in {2, 4, 6, 8}; throws std::invalid_argument otherwise.
  static QamConstellation build(int bits_per_symbol);

  int bits_per_symbol() const noexcept { return k_; }
  std::size_t size() const noexcept { return points_.size(); }
  std::span<const cplx> points() const noexcept { return points_; }
  const cplx& point(std::size_t label) const { return points_[label]; }

  /// Bit i (0 = most significant) of a label.
  std::uint8_t bit(std::size_t label, int i) const noexcept {
    return static_cast<std::uint8_t>((label >> (k_ - 1 - i)) & 1U);
  }

  /// Normalized per-axis amplitudes, ascending.
  std::span<const double> axis_levels() const noexcept { return levels_; }

  /// Label of the constellation point closest to x (ties -> lowest label).
  std::size_t nearest(cplx x) const noexcept;

 private:
  int k_ = 0;
  std::vector<cplx> points_;
  std::vector<double> levels_;
};

std::uint32_t gray_encode(std::uint32_t v) noexcept;
std::uint32_t gray_decode(std::uint32_t g) noexcept;

/// Maps Nt*K bits to Nt symbols; stream k takes bits [kK, (k+1)K).
ComplexVector bits_to_symbols(std::span<const std::uint8_t> bits, const QamConstellation& c, std::size_t nt);

/// Inverse mapping. Every entry must lie within 1e-9 of a constellation point.
BitBlock symbols_to_bits(std::span<const cplx> x, const QamConstellation& c);

/// Label for each symbol of a bit block (helper for enumeration-based code).
std::vector<std::size_t> bits_to_labels(std::span<const std::uint8_t> bits, const QamConstellation& c);

}  // namespace eqnet::modem

// SPDX-License-Identifier: Apache-2.0

#include "eqnet/modem.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace eqnet::modem {

std::uint32_t gray_encode(std::uint32_t v) noexcept { return v ^ (v >> 1); }

std::uint32_t gray_decode(std::uint32_t g) noexcept {
  std::uint32_t v = g;
  for (std::uint32_t shift = 1; shift < 32; shift <<= 1) v ^= v >> shift;
  return v;
}

QamConstellation QamConstellation::build(int bits_per_symbol) {
  if (bits_per_symbol < 2 || bits_per_symbol > 8 || bits_per_symbol % 2 != 0) {
    throw std::invalid_argument("QamConstellation: bits per symbol must be one of 2, 4, 6, 8");
  }
  QamConstellation c;
  c.k_ = bits_per_symbol;
  const int half = bits_per_symbol / 2;
  const std::uint32_t m = 1U << half;
  const double scale = std::sqrt(3.0 / (2.0 * (static_cast<double>(m) * m - 1.0)));

  c.levels_.resize(m);
  for (std::uint32_t j = 0; j < m; ++j) c.levels_[j] = (2.0 * j - (m - 1.0)) * scale;

  c.points_.resize(std::size_t{1} << bits_per_symbol);
  for (std::uint32_t label = 0; label < c.points_.size(); ++label) {
    const std::uint32_t i_bits = label >> half;
    const std::uint32_t q_bits = label & (m - 1);
    c.points_[label] = cplx(c.levels_[gray_decode(i_bits)], c.levels_[gray_decode(q_bits)]);
  }
  return c;
}

std::size_t QamConstellation::nearest(cplx x) const noexcept {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < points_.size(); ++p) {
    const double d = std::norm(x - points_[p]);
    if (d < best_d) {
      best_d = d;
      best = p;
    }
  }
  return best;
}

std::vector<std::size_t> bits_to_labels(std::span<const std::uint8_t> bits, const QamConstellation& c) {
  const auto k = static_cast<std::size_t>(c.bits_per_symbol());
  if (bits.size() % k != 0) throw std::invalid_argument("bits_to_labels: bit count not divisible by K");
  std::vector<std::size_t> labels(bits.size() / k);
  for (std::size_t s = 0; s < labels.size(); ++s) {
    std::size_t label = 0;
    for (std::size_t i = 0; i < k; ++i) {
      const std::uint8_t b = bits[s * k + i];
      if (b > 1) throw std::invalid_argument("bits_to_labels: bits must be 0 or 1");
      label = (label << 1) | b;
    }
    labels[s] = label;
  }
  return labels;
}

ComplexVector bits_to_symbols(std::span<const std::uint8_t> bits, const QamConstellation& c, std::size_t nt) {
  if (bits.size() != nt * static_cast<std::size_t>(c.bits_per_symbol())) {
    throw std::invalid_argument("bits_to_symbols: expected Nt*K bits");
  }
  const auto labels = bits_to_labels(bits, c);
  ComplexVector x(nt);
  for (std::size_t s = 0; s < nt; ++s) x[s] = c.point(labels[s]);
  return x;
}

BitBlock symbols_to_bits(std::span<const cplx> x, const QamConstellation& c) {
  const int k = c.bits_per_symbol();
  BitBlock bits;
  bits.reserve(x.size() * static_cast<std::size_t>(k));
  for (const cplx& s : x) {
    const std::size_t label = c.nearest(s);
    if (std::abs(s - c.point(label)) > 1e-9) {
      throw std::invalid_argument("symbols_to_bits: input is not a constellation point");
    }
    for (int i = 0; i < k; ++i) bits.push_back(c.bit(label, i));
  }
  return bits;
}

}  // namespace eqnet::modem

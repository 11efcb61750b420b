// SPDX-License-Identifier: Apache-2.0

#include "eqnet/ldpc.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace eqnet::ldpc {
namespace {

// IEEE 802.11n, codeword length 648, rate 1/2, Z = 27.
constexpr std::array<int, 12 * 24> kBase648R12 = {
    0,  -1, -1, -1, 0,  0,  -1, -1, 0,  -1, -1, 0,  1,  0,  -1, -1, -1, -1, -1, -1, -1, -1, -1, -1,
    22, 0,  -1, -1, 17, -1, 0,  0,  12, -1, -1, -1, -1, 0,  0,  -1, -1, -1, -1, -1, -1, -1, -1, -1,
    6,  -1, 0,  -1, 10, -1, -1, -1, 24, -1, 0,  -1, -1, -1, 0,  0,  -1, -1, -1, -1, -1, -1, -1, -1,
    2,  -1, -1, 0,  20, -1, -1, -1, 25, 0,  -1, -1, -1, -1, -1, 0,  0,  -1, -1, -1, -1, -1, -1, -1,
    23, -1, -1, -1, 3,  -1, -1, -1, 0,  -1, 9,  11, -1, -1, -1, -1, 0,  0,  -1, -1, -1, -1, -1, -1,
    24, -1, 23, 1,  17, -1, 3,  -1, 10, -1, -1, -1, -1, -1, -1, -1, -1, 0,  0,  -1, -1, -1, -1, -1,
    25, -1, -1, -1, 8,  -1, -1, -1, 7,  18, -1, -1, 0,  -1, -1, -1, -1, -1, 0,  0,  -1, -1, -1, -1,
    13, 24, -1, -1, 0,  -1, 8,  -1, 6,  -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, 0,  0,  -1, -1, -1,
    7,  20, -1, 16, 22, 10, -1, -1, 23, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, 0,  0,  -1, -1,
    11, -1, -1, -1, 19, -1, -1, -1, 13, -1, 3,  17, -1, -1, -1, -1, -1, -1, -1, -1, -1, 0,  0,  -1,
    25, -1, 8,  -1, 23, 18, -1, 14, 9,  -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, 0,  0,
    3,  -1, -1, -1, 16, -1, -1, 2,  25, 5,  -1, -1, 1,  -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, 0,
};

using Bitset = std::vector<std::uint64_t>;

bool test_bit(const Bitset& b, std::size_t i) { return (b[i >> 6] >> (i & 63)) & 1U; }
void set_bit(Bitset& b, std::size_t i) { b[i >> 6] |= std::uint64_t{1} << (i & 63); }

}  // namespace

LdpcCode::LdpcCode(std::size_t n, std::vector<std::vector<std::uint32_t>> check_rows) : n_(n) {
  if (n == 0 || check_rows.empty()) throw std::invalid_argument("LdpcCode: empty parity-check matrix");
  check_start_.reserve(check_rows.size() + 1);
  check_start_.push_back(0);
  for (auto& row : check_rows) {
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    for (std::uint32_t v : row) {
      if (v >= n) throw std::invalid_argument("LdpcCode: column index out of range");
      edge_var_.push_back(v);
    }
    check_start_.push_back(static_cast<std::uint32_t>(edge_var_.size()));
  }

  // Reduced row echelon form, pivoting from the rightmost column so that a
  // code with an invertible right-hand parity part stays systematic on the
  // leading positions.
  const std::size_t words = (n + 63) / 64;
  std::vector<Bitset> rows(check_rows.size(), Bitset(words, 0));
  for (std::size_t r = 0; r < check_rows.size(); ++r)
    for (std::uint32_t v : check_rows[r]) set_bit(rows[r], v);

  std::vector<std::size_t> pivot_col;
  std::vector<bool> is_pivot(n, false);
  std::size_t next = 0;
  for (std::size_t col = n; col-- > 0 && next < rows.size();) {
    std::size_t found = rows.size();
    for (std::size_t r = next; r < rows.size(); ++r)
      if (test_bit(rows[r], col)) {
        found = r;
        break;
      }
    if (found == rows.size()) continue;
    std::swap(rows[next], rows[found]);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (r != next && test_bit(rows[r], col))
        for (std::size_t w = 0; w < words; ++w) rows[r][w] ^= rows[next][w];
    }
    pivot_col.push_back(col);
    is_pivot[col] = true;
    ++next;
  }

  std::vector<std::uint32_t> info_index(n, 0);
  for (std::size_t v = 0; v < n; ++v)
    if (!is_pivot[v]) {
      info_index[v] = static_cast<std::uint32_t>(info_positions_.size());
      info_positions_.push_back(static_cast<std::uint32_t>(v));
    }
  const std::size_t info_words = (info_positions_.size() + 63) / 64;
  for (std::size_t r = 0; r < pivot_col.size(); ++r) {
    Bitset mask(info_words, 0);
    for (std::uint32_t v : info_positions_)
      if (test_bit(rows[r], v)) set_bit(mask, info_index[v]);
    parity_positions_.push_back(static_cast<std::uint32_t>(pivot_col[r]));
    parity_masks_.push_back(std::move(mask));
  }
}

LdpcCode LdpcCode::from_base_matrix(std::span<const int> base, std::size_t base_rows, std::size_t base_cols,
                                    std::size_t lifting) {
  if (base.size() != base_rows * base_cols) throw std::invalid_argument("from_base_matrix: table size mismatch");
  std::vector<std::vector<std::uint32_t>> checks(base_rows * lifting);
  for (std::size_t br = 0; br < base_rows; ++br)
    for (std::size_t bc = 0; bc < base_cols; ++bc) {
      const int shift = base[br * base_cols + bc];
      if (shift < 0) continue;
      for (std::size_t i = 0; i < lifting; ++i) {
        const std::size_t col = bc * lifting + (i + static_cast<std::size_t>(shift)) % lifting;
        checks[br * lifting + i].push_back(static_cast<std::uint32_t>(col));
      }
    }
  return LdpcCode(base_cols * lifting, std::move(checks));
}

BitBlock LdpcCode::encode(std::span<const std::uint8_t> info) const {
  if (info.size() != k()) throw std::invalid_argument("LdpcCode::encode: expected k information bits");
  Bitset u((k() + 63) / 64, 0);
  BitBlock codeword(n_, 0);
  for (std::size_t i = 0; i < info.size(); ++i) {
    if (info[i] > 1) throw std::invalid_argument("LdpcCode::encode: bits must be 0 or 1");
    if (info[i]) set_bit(u, i);
    codeword[info_positions_[i]] = info[i];
  }
  for (std::size_t p = 0; p < parity_positions_.size(); ++p) {
    unsigned parity = 0;
    for (std::size_t w = 0; w < u.size(); ++w) parity ^= std::popcount(u[w] & parity_masks_[p][w]) & 1U;
    codeword[parity_positions_[p]] = static_cast<std::uint8_t>(parity);
  }
  return codeword;
}

BitBlock LdpcCode::syndrome(std::span<const std::uint8_t> codeword) const {
  if (codeword.size() != n_) throw std::invalid_argument("LdpcCode::syndrome: codeword length mismatch");
  BitBlock s(check_count(), 0);
  for (std::size_t c = 0; c < check_count(); ++c) {
    std::uint8_t acc = 0;
    for (std::uint32_t v : check_row(c)) acc ^= codeword[v] & 1U;
    s[c] = acc;
  }
  return s;
}

bool LdpcCode::is_codeword(std::span<const std::uint8_t> codeword) const {
  const auto s = syndrome(codeword);
  return std::all_of(s.begin(), s.end(), [](std::uint8_t b) { return b == 0; });
}

DecodeResult LdpcCode::decode(std::span<const double> llr, const DecoderOptions& options) const {
  if (llr.size() != n_) throw std::invalid_argument("LdpcCode::decode: LLR length mismatch");
  const std::size_t edges = edge_var_.size();
  const double alpha = options.normalization;

  // Internally L = log P(0)/P(1), the usual min-sum orientation.
  std::vector<double> channel(n_);
  for (std::size_t v = 0; v < n_; ++v) channel[v] = -llr[v];
  std::vector<double> posterior = channel;
  std::vector<double> c2v(edges, 0.0);
  std::vector<double> v2c(edges, 0.0);

  DecodeResult result;
  result.codeword.assign(n_, 0);

  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    for (std::size_t c = 0; c < check_count(); ++c) {
      const std::uint32_t begin = check_start_[c];
      const std::uint32_t end = check_start_[c + 1];
      double min1 = std::numeric_limits<double>::infinity();
      double min2 = min1;
      std::uint32_t min_edge = begin;
      bool negative = false;
      for (std::uint32_t e = begin; e < end; ++e) {
        const double m = posterior[edge_var_[e]] - c2v[e];
        v2c[e] = m;
        const double mag = std::abs(m);
        negative ^= m < 0.0;
        if (mag < min1) {
          min2 = min1;
          min1 = mag;
          min_edge = e;
        } else if (mag < min2) {
          min2 = mag;
        }
      }
      for (std::uint32_t e = begin; e < end; ++e) {
        const double mag = alpha * (e == min_edge ? min2 : min1);
        const bool sign = negative ^ (v2c[e] < 0.0);
        c2v[e] = sign ? -mag : mag;
      }
    }

    posterior = channel;
    for (std::size_t e = 0; e < edges; ++e) posterior[edge_var_[e]] += c2v[e];

    bool erasure = false;
    for (std::size_t v = 0; v < n_; ++v) {
      result.codeword[v] = posterior[v] < 0.0 ? 1 : 0;
      erasure |= posterior[v] == 0.0;
    }
    result.iterations_used = iter;
    if (!erasure && is_codeword(result.codeword)) {
      result.converged = true;
      break;
    }
  }

  result.info_bits.resize(k());
  for (std::size_t i = 0; i < k(); ++i) result.info_bits[i] = result.codeword[info_positions_[i]];
  return result;
}

std::span<const int> ieee80211n_648_r12_base() { return kBase648R12; }

LdpcCode build_code() { return LdpcCode::from_base_matrix(kBase648R12, 12, 24, 27); }

DecodeResult decode(std::span<const double> llr, const LdpcCode& code, int max_iterations) {
  DecoderOptions options;
  options.max_iterations = max_iterations;
  return code.decode(llr, options);
}

}  // namespace eqnet::ldpc

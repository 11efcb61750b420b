// SPDX-License-Identifier: Apache-2.0
//
// Binary LDPC codes: systematic GF(2) encoding and normalized min-sum
// decoding. LLR inputs follow the repository convention
// log P(b = 1) / P(b = 0), i.e. positive values favor a one.

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace eqnet::ldpc {

using BitBlock = std::vector<std::uint8_t>;

struct DecoderOptions {
  int max_iterations = 50;
  double normalization = 0.75;
};

struct DecodeResult {
  BitBlock info_bits;
  BitBlock codeword;
  bool converged = false;
  int iterations_used = 0;
};

class LdpcCode {
 public:
  /// Builds a code from the column indices of each parity-check row.
  LdpcCode(std::size_t n, std::vector<std::vector<std::uint32_t>> check_rows);

  /// Expands a quasi-cyclic base matrix (-1 marks an all-zero block, s >= 0 a
  /// Z x Z identity cyclically shifted right by s).
  static LdpcCode from_base_matrix(std::span<const int> base, std::size_t base_rows, std::size_t base_cols,
                                   std::size_t lifting);

  /// Parses the "alist" sparse matrix text format.
  static LdpcCode from_alist(std::istream& in);

  std::size_t n() const noexcept { return n_; }
  std::size_t k() const noexcept { return info_positions_.size(); }
  std::size_t check_count() const noexcept { return check_start_.size() - 1; }
  std::size_t rank() const noexcept { return n_ - k(); }

  std::span<const std::uint32_t> check_row(std::size_t c) const {
    return {edge_var_.data() + check_start_[c], check_start_[c + 1] - check_start_[c]};
  }
  /// Codeword positions carrying the information bits, ascending.
  std::span<const std::uint32_t> info_positions() const noexcept { return info_positions_; }

  BitBlock encode(std::span<const std::uint8_t> info) const;
  BitBlock syndrome(std::span<const std::uint8_t> codeword) const;
  bool is_codeword(std::span<const std::uint8_t> codeword) const;

  /// Flooding normalized min-sum. A bit whose posterior is exactly zero is an
  /// erasure and prevents convergence.
  DecodeResult decode(std::span<const double> llr, const DecoderOptions& options = {}) const;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint32_t> check_start_;  // CSR over checks
  std::vector<std::uint32_t> edge_var_;
  std::vector<std::uint32_t> info_positions_;
  // Each parity position with the info-bit subset that determines it.
  std::vector<std::uint32_t> parity_positions_;
  std::vector<std::vector<std::uint64_t>> parity_masks_;
};

/// Rate-1/2, n = 648, Z = 27 quasi-cyclic code of IEEE 802.11n.
LdpcCode build_code();

/// The 12 x 24 shift table behind build_code().
std::span<const int> ieee80211n_648_r12_base();

DecodeResult decode(std::span<const double> llr, const LdpcCode& code, int max_iterations);

}  // namespace eqnet::ldpc

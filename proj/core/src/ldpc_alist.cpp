// SPDX-License-Identifier: Apache-2.0
//
// alist format (MacKay):
//   n m
//   max_col_weight max_row_weight
//   n column weights
//   m row weights
//   n lines of 1-based row indices per column (zero padded)
//   m lines of 1-based column indices per row (zero padded)

#include <istream>
#include <stdexcept>

#include "eqnet/ldpc.hpp"

namespace eqnet::ldpc {

LdpcCode LdpcCode::from_alist(std::istream& in) {
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t max_col = 0;
  std::size_t max_row = 0;
  if (!(in >> n >> m >> max_col >> max_row) || n == 0 || m == 0) {
    throw std::invalid_argument("from_alist: malformed header");
  }
  std::vector<std::size_t> col_weight(n);
  std::vector<std::size_t> row_weight(m);
  for (auto& w : col_weight)
    if (!(in >> w) || w > max_col) throw std::invalid_argument("from_alist: bad column weight");
  for (auto& w : row_weight)
    if (!(in >> w) || w > max_row) throw std::invalid_argument("from_alist: bad row weight");

  // Column section: read and discard beyond validation; the row section is authoritative.
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t j = 0; j < max_col; ++j) {
      std::size_t idx = 0;
      if (!(in >> idx)) {
        // Some writers omit the zero padding.
        if (j >= col_weight[c]) {
          in.clear();
          break;
        }
        throw std::invalid_argument("from_alist: truncated column section");
      }
      if (idx > m) throw std::invalid_argument("from_alist: row index out of range");
    }

  std::vector<std::vector<std::uint32_t>> rows(m);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t j = 0; j < max_row; ++j) {
      std::size_t idx = 0;
      if (!(in >> idx)) {
        if (j >= row_weight[r]) {
          in.clear();
          break;
        }
        throw std::invalid_argument("from_alist: truncated row section");
      }
      if (idx == 0) continue;
      if (idx > n) throw std::invalid_argument("from_alist: column index out of range");
      rows[r].push_back(static_cast<std::uint32_t>(idx - 1));
    }
  for (std::size_t r = 0; r < m; ++r)
    if (rows[r].size() != row_weight[r]) throw std::invalid_argument("from_alist: row weight mismatch");
  return LdpcCode(n, std::move(rows));
}

}  // namespace eqnet::ldpc

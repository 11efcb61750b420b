// SPDX-License-Identifier: Apache-2.0
// Internal: one coded packet through the channel.

#pragma once

#include <vector>

#include "eqnet/dataset.hpp"
#include "eqnet/modem.hpp"

namespace eqnet::harness::detail {

struct CodedBlock {
  ldpc::BitBlock info;
  ldpc::BitBlock bits;  // codeword followed by random padding
  std::vector<channel::ChannelUse> uses;
};

inline CodedBlock draw_block(const SystemConfig& sys, const ChannelModel& ch, const ldpc::LdpcCode& code,
                             const modem::QamConstellation& c, double sigma_n, numerics::RngStream& rng) {
  CodedBlock b;
  b.info.resize(code.k());
  for (auto& bit : b.info) bit = rng.bit();
  b.bits = code.encode(b.info);
  const int uses = uses_per_codeword(sys, code.n());
  const auto per_use = static_cast<std::size_t>(sys.llr_count());
  while (b.bits.size() < static_cast<std::size_t>(uses) * per_use) b.bits.push_back(rng.bit());
  b.uses.reserve(static_cast<std::size_t>(uses));
  for (int u = 0; u < uses; ++u) {
    auto h = ch.sample(sys, rng);
    const auto x = modem::bits_to_symbols(std::span(b.bits).subspan(static_cast<std::size_t>(u) * per_use, per_use), c,
                                          static_cast<std::size_t>(sys.nt));
    b.uses.push_back(channel::transmit(h, x, sigma_n, rng));
  }
  return b;
}

}  // namespace eqnet::harness::detail

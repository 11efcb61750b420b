// SPDX-License-Identifier: Apache-2.0
//
// Pre-generated ML training data.
//
// File layout (little-endian):
//   "EQDS" | u32 version | u32 Nt | u32 Nr | u32 K | u64 count | u64 seed
//   | u32 snr count | f64 snr_db...
//   then `count` records of f32: y (2Nr) | H (2NtNr) | sigma_n | ML LLRs (NtK)
// y and H follow the feature layout of eqnet/model.hpp.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "eqnet/channel.hpp"
#include "eqnet/ldpc.hpp"
#include "eqnet/model.hpp"

namespace eqnet::harness {

using channel::SystemConfig;

inline constexpr std::uint32_t kDatasetVersion = 1;

enum class ChannelKind { rayleigh, correlated };

struct ChannelModel {
  ChannelKind kind = ChannelKind::rayleigh;
  double rho = 0.0;

  numerics::ComplexMatrix sample(const SystemConfig& cfg, numerics::RngStream& rng) const;
  std::string label() const;
  bool operator==(const ChannelModel&) const = default;
};

struct Dataset {
  SystemConfig sys;
  std::uint64_t seed = 0;
  std::vector<double> snr_db;
  std::vector<float> records;  // count * record_width()

  std::size_t record_width() const { return static_cast<std::size_t>(2 * sys.nr + 2 * sys.nt * sys.nr + 1 + sys.llr_count()); }
  std::size_t count() const { return records.size() / record_width(); }

  /// Training view: LLRs mapped to the tanh domain.
  model::Samples to_samples() const;
  /// Natural-domain ML LLRs, one column per record.
  model::MatrixF llr_natural() const;
  channel::ChannelUse channel_use(std::size_t i) const;
};

void write_dataset(const std::string& path, const Dataset& ds);
Dataset read_dataset(const std::string& path);

/// Channel uses per codeword; the last use is padded with random bits when
/// Nt*K does not divide the codeword length.
int uses_per_codeword(const SystemConfig& cfg, std::size_t codeword_bits);

/// For each SNR and packet: random information bits, LDPC encoding, Gray
/// mapping, channel, exact ML LLRs. Records are shuffled with the seed.
Dataset generate_dataset(const SystemConfig& cfg, const ChannelModel& ch, const std::vector<double>& snr_db, int packets,
                         std::uint64_t seed, int threads = 1);

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Exceptions from
/// any worker are rethrown on the caller after all workers stop.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace eqnet::harness

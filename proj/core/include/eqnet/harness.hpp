// SPDX-License-Identifier: Apache-2.0
//
// End-to-end coded link simulation and the experiments built on it.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "eqnet/dataset.hpp"
#include "eqnet/ldpc.hpp"
#include "eqnet/model.hpp"

namespace eqnet::harness {

enum class PipelineKind { ml, zfsic, zfsic_compressed, eqnet_est, eqnet_quant, ml_autoencoder };

struct Pipeline {
  PipelineKind kind = PipelineKind::ml;
  int nb = 6;  // eqnet_quant only

  /// "ml", "zfsic", "zfsic-compressed", "eqnet-est", "eqnet-quant", "ml-ae".
  static Pipeline parse(const std::string& name);
  std::string name() const;
  bool needs_models() const;
};

struct GridSearchConfig {
  double lo_db = -10.0;
  double hi_db = 40.0;
  double resolution_db = 0.25;
  double bler_lo = 0.9;     // BLER required at the low end
  double bler_hi = 1e-3;    // BLER required at the high end
  int min_blocks = 50;
  int max_blocks = 2000;
  int target_errors = 20;
  int points = 6;
};

struct DatasetSpec {
  std::string path;
  int packets = 200;  // per SNR
};

struct ExperimentConfig {
  SystemConfig system;
  ChannelModel channel;
  std::vector<double> snr_db;
  int packets = 1000;
  int max_block_errors = 200;
  Pipeline pipeline;
  double csi_sigma = 0.0;
  std::uint64_t seed = 1;
  int threads = 1;
  int decoder_iterations = 50;
  DatasetSpec dataset;
  std::string model_dir;
  GridSearchConfig grid;
  model::EqNetConfig eqnet;
  model::TrainConfig train;

  void validate() const;
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text);
std::string dump_config(const ExperimentConfig& cfg);

/// Trained networks and codebook; any member may be absent.
struct Artifacts {
  std::optional<nn::Model> fq;
  std::optional<nn::Model> g;
  std::optional<nn::Model> fe;
  std::optional<model::Codebook> codebook;
};

/// Model bundle: fq.weights, g.weights, fe.weights, codebook.json,
/// config.json. Missing files leave the member empty.
Artifacts load_bundle(const std::string& dir, const model::EqNetConfig& ec);
void save_bundle(const std::string& dir, const Artifacts& a, const model::EqNetConfig& ec,
                 std::uint64_t dataset_fingerprint = 0);

struct BlerPoint {
  double snr_db = 0.0;
  std::uint64_t blocks = 0;
  std::uint64_t block_errors = 0;
  double bler = 0.0;
  double ber = 0.0;
  bool operator==(const BlerPoint&) const = default;
};

/// CSV columns: snr_db,blocks,block_errors,bler,ber
void write_bler_csv(std::ostream& out, const std::vector<BlerPoint>& points);
std::string format_bler_row(const BlerPoint& p);

struct LinkSetup {
  SystemConfig system;
  ChannelModel channel;
  Pipeline pipeline;
  double csi_sigma = 0.0;
  std::uint64_t seed = 1;
  int threads = 1;
  int max_packets = 1000;
  int max_block_errors = 200;
  int min_blocks = 0;
  int decoder_iterations = 50;

  static LinkSetup from(const ExperimentConfig& cfg);
};

/// One SNR point. Block b uses random streams derived from (seed, snr_index,
/// b) only, and the early stop is applied in block order, so the result does
/// not depend on the thread count.
BlerPoint simulate_point(const LinkSetup& setup, const ldpc::LdpcCode& code, const Artifacts& art, double snr_db,
                         std::uint64_t snr_index);

/// Throws ConfigError when the pipeline needs artifacts that are missing.
std::vector<BlerPoint> run_bler_sweep(const ExperimentConfig& cfg, const Artifacts& art);
std::vector<BlerPoint> run_bler_sweep(const LinkSetup& setup, const std::vector<double>& snr_db, const Artifacts& art);

struct GridProbe {
  double snr_db;
  std::uint64_t blocks;
  std::uint64_t errors;
};

struct GridResult {
  std::vector<double> snr_db;
  std::vector<GridProbe> probes;
};

/// Bisection for the ML BLER band edges, then `points` SNRs uniform in dB.
GridResult find_snr_grid(const SystemConfig& sys, const ChannelModel& ch, const GridSearchConfig& gs,
                         std::uint64_t seed, int threads = 1);

/// SNR at which a BLER curve crosses `target`, by linear interpolation of
/// log10(BLER) between grid points. A point without errors counts as half an
/// error. NaN if the curve never crosses.
double snr_at_bler(const std::vector<BlerPoint>& curve, double target);

// ---------------------------------------------------------------------------
// Experiments

struct CurveRow {
  std::string curve;
  int latent_dim = 0;
  std::uint64_t seed = 0;
  BlerPoint point;
};

/// CSV columns: curve,latent_dim,seed,snr_db,blocks,block_errors,bler,ber
void write_curves_csv(std::ostream& out, const std::vector<CurveRow>& rows);

/// Trains one autoencoder per (latent dim, seed) and evaluates the ML ->
/// autoencoder -> decoder chain; adds "ml" and "zfsic" reference curves.
std::vector<CurveRow> bottleneck_sweep(const ExperimentConfig& cfg, const model::Samples& data,
                                       const std::vector<int>& dims, const std::vector<std::uint64_t>& seeds);

struct CsiRow {
  double csi_sigma;
  BlerPoint point;
};

inline const std::vector<double> kCsiSigmaGrid = {0.0, 0.05, 0.1, 0.15, 0.2, 0.3};

/// Fixed SNR, detector input H + N with N ~ CN(0, sigma^2) per entry.
std::vector<CsiRow> csi_sweep(const ExperimentConfig& cfg, const Artifacts& art, double snr_db,
                              const std::vector<double>& sigmas = kCsiSigmaGrid);
/// CSV columns: csi_sigma,snr_db,blocks,block_errors,bler,ber
void write_csi_csv(std::ostream& out, const std::vector<CsiRow>& rows);

/// Four curves on the shifted channel: estimation with the rayleigh-trained
/// and the shift-trained models, and the ZF-SIC reference for each.
std::vector<CurveRow> shift_sweep(const ExperimentConfig& cfg, const Artifacts& rayleigh_trained,
                                  const Artifacts& shift_trained, const ChannelModel& shifted);

// ---------------------------------------------------------------------------
// Latency

struct LatencyRow {
  std::string pipeline;
  int batch = 0;
  int repetitions = 0;
  double mean_us = 0.0;    // per call
  double stddev_us = 0.0;  // per call
  double per_use_us = 0.0;
};

std::vector<LatencyRow> bench_latency(const SystemConfig& sys, const std::vector<Pipeline>& pipelines,
                                      const std::vector<int>& batches, int repetitions, const Artifacts& art,
                                      std::uint64_t seed, double snr_db = 15.0);
/// CSV columns: pipeline,batch,repetitions,mean_us,stddev_us,per_use_us
void write_latency_csv(std::ostream& out, const std::vector<LatencyRow>& rows);

}  // namespace eqnet::harness

// SPDX-License-Identifier: Apache-2.0
//
// EQ-Net: quantization encoder f_Q, shared decoder g and estimation encoder
// f_E, their training procedures, latent codebooks and inference modes.
//
// Feature layouts (one column per channel use):
//   llr   Nt*K rows, tanh domain, stream-major
//   y     2*Nr rows: Re(y_0..y_{Nr-1}), Im(y_0..y_{Nr-1})
//   h     2*Nt*Nr rows: Re(H) row-major, then Im(H) row-major
//   sigma 1 row, raw sigma_n

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eqnet/channel.hpp"
#include "eqnet/detect.hpp"
#include "eqnet/nn.hpp"

namespace eqnet::model {

using channel::SystemConfig;
using MatrixF = nn::Matrix<float>;

struct EqNetConfig {
  SystemConfig sys;
  int fq_width = 0;  // 0 -> 4*Nt*K
  int fq_hidden = 6;
  int g_branch_hidden = 6;
  int g_branch_width = 16;
  int fe_blocks = 1;  // 1: EQ-Net-L, 3: EQ-Net-P
  int fe_hidden_per_block = 6;
  int fe_width = 0;    // 0 -> 8*Nt*K
  int latent_dim = 0;  // 0 -> 3*Nt; other values only for bottleneck studies
  double sigma_u = 1e-3;

  int resolved_fq_width() const { return fq_width > 0 ? fq_width : 4 * sys.llr_count(); }
  int resolved_fe_width() const { return fe_width > 0 ? fe_width : 8 * sys.llr_count(); }
  int resolved_latent() const { return latent_dim > 0 ? latent_dim : sys.latent_dim(); }
  int g_branches() const { return sys.llr_count(); }

  void validate() const;
  std::uint64_t fingerprint() const;
  bool operator==(const EqNetConfig&) const = default;
};

struct TrainConfig {
  int batch = 4096;
  double lr = 1e-3;
  double joint_lr = 2e-3;
  int epochs = 50;
  int patience = 0;  // plateau patience; 0 -> epochs/5
  bool stage_plateau = false;  // also halve the two-stage learning rates on plateaus
  double clip_norm = 0.0;      // global gradient-norm clip; 0 disables
  double validation_fraction = 0.2;
  std::uint64_t seed = 1;

  int resolved_patience() const { return patience > 0 ? patience : std::max(1, epochs / 5); }
  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_wmse = 0.0;  // end-to-end WMSE through g; NaN where not applicable
  double lr = 0.0;
};
using History = std::vector<EpochRecord>;

/// CSV columns: epoch,train_loss,val_loss,val_wmse,lr
void write_history_csv(std::ostream& out, const History& h);

// ---------------------------------------------------------------------------
// Tanh-domain codec

inline constexpr double kTanhClip = 1.0 - 1e-7;

detect::LlrVector to_tanh_domain(const detect::LlrVector& llr);
detect::LlrVector from_tanh_domain(const detect::LlrVector& v);
inline double to_tanh(double llr) { return std::tanh(0.5 * llr); }
double from_tanh(double v);

// ---------------------------------------------------------------------------
// Networks

struct Networks {
  nn::Model fq;
  nn::Model g;
  nn::Model fe;
};

/// Builds and initializes all three networks. Each network draws from its own
/// sub-stream of `seed`, so any one of them is reproducible on its own.
Networks build_models(const EqNetConfig& ec, std::uint64_t seed);

/// Number of residual blocks in an f_E model (counts skip additions / 3).
int count_residual_blocks(const nn::Model& fe, const EqNetConfig& ec);

// ---------------------------------------------------------------------------
// Training data

/// Column-major training samples. llr is in the tanh domain.
struct Samples {
  MatrixF llr;
  MatrixF y;
  MatrixF h;
  MatrixF sigma;

  Eigen::Index size() const { return llr.cols(); }
  Samples select(std::span<const Eigen::Index> cols) const;
  Samples range(Eigen::Index begin, Eigen::Index count) const;
};

void encode_observation(const channel::ChannelUse& use, float* y_col, float* h_col);

/// Per bit-position weights normalized to sum K.
std::vector<double> compute_weights(const MatrixF& llr_tanh, int k);

struct Split {
  Samples train;
  Samples validation;
};
/// Seeded permutation, then the last validation_fraction of samples validate.
Split split_samples(const Samples& all, double validation_fraction, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Training

struct Stage1Result {
  nn::Model fq;
  nn::Model g;
  History history;
  std::vector<double> weights;
};

struct Stage2Result {
  nn::Model fe;
  History history;
};

struct JointResult {
  nn::Model fe;
  nn::Model g;
  History history;
};

/// Autoencoder g(f_Q(L) + u) -> L under the weighted loss.
Stage1Result train_stage1(const Samples& data, const EqNetConfig& ec, const TrainConfig& tc);

/// Trains f_E against the latent targets of a frozen f_Q. g is only used
/// (read-only) for the end-to-end validation column.
Stage2Result train_stage2(const Samples& data, const nn::Model& fq, const nn::Model& g, const EqNetConfig& ec,
                          const TrainConfig& tc);

/// Single-stage baseline: f_E and g trained end to end from the same
/// initialization as the two-stage pair.
JointResult train_joint_baseline(const Samples& data, const EqNetConfig& ec, const TrainConfig& tc);

/// Weighted loss of g(f_E(obs)) against the llr targets.
double evaluate_estimation_wmse(const Samples& data, const nn::Model& fe, const nn::Model& g,
                                std::span<const double> weights);
/// Weighted loss of g(f_Q(L)) against L (no quantization noise).
double evaluate_autoencoder_wmse(const Samples& data, const nn::Model& fq, const nn::Model& g,
                                 std::span<const double> weights);

// ---------------------------------------------------------------------------
// Codebooks

struct Codebook {
  int nb = 0;
  std::vector<std::vector<double>> levels;  // per dimension, strictly increasing

  int dims() const { return static_cast<int>(levels.size()); }
  std::size_t word_bits() const { return levels.size() * static_cast<std::size_t>(nb); }
  /// Nearest-level index, ties to the lower index.
  std::uint32_t index(int dim, double v) const;
};

struct Lloyd1dResult {
  std::vector<double> levels;
  std::vector<double> distortion;  // mean squared error after each iteration
};

/// k-means++ seeding and Lloyd iterations on scalar data.
Lloyd1dResult fit_levels(std::vector<double> data, int count, numerics::RngStream& rng, int max_iterations = 100,
                         double tolerance = 1e-7);

/// Fits one scalar quantizer per latent dimension on f_Q(L) over the samples.
Codebook fit_codebook(const nn::Model& fq, const MatrixF& llr_tanh, int nb, std::uint64_t seed);

void write_codebook_json(std::ostream& out, const Codebook& cb);
Codebook read_codebook_json(std::istream& in);

/// Packed bitword. Index of dimension d occupies bits [d*Nb, (d+1)*Nb), most
/// significant bit first; bit j of the word is bit (7 - j%8) of byte j/8.
struct Bitword {
  std::vector<std::uint8_t> bytes;
  std::size_t bit_count = 0;
  bool operator==(const Bitword&) const = default;
};

Bitword pack_indices(std::span<const std::uint32_t> indices, int nb);
std::vector<std::uint32_t> unpack_indices(const Bitword& w, int nb);

// ---------------------------------------------------------------------------
// Inference

/// Latent codes f_Q(L) for natural-domain LLR columns.
MatrixF encode_latent(const nn::Model& fq, const MatrixF& llr_natural);

Bitword quantize_llr(const detect::LlrVector& llr, const nn::Model& fq, const Codebook& cb);
detect::LlrVector dequantize_llr(const Bitword& w, const Codebook& cb, const nn::Model& g);

/// Batched quantize -> dequantize path; input and output natural domain.
MatrixF quantize_roundtrip(const MatrixF& llr_natural, const nn::Model& fq, const nn::Model& g, const Codebook& cb);

detect::LlrVector estimate_llr(const channel::ChannelUse& use, const nn::Model& fe, const nn::Model& g);

/// Batched estimation from feature matrices; returns natural-domain LLRs.
MatrixF estimate_batch(const MatrixF& y, const MatrixF& h, const MatrixF& sigma, const nn::Model& fe,
                       const nn::Model& g);

}  // namespace eqnet::model

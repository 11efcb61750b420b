// SPDX-License-Identifier: Apache-2.0

#include "eqnet/model.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "eqnet/errors.hpp"

namespace eqnet::model {
namespace {

std::uint64_t fnv1a(std::uint64_t h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xffU;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::size_t dense_relu_stack(nn::Model& m, std::size_t src, int layers, int width) {
  for (int i = 0; i < layers; ++i) src = m.add_relu(m.add_dense(src, static_cast<std::uint32_t>(width)));
  return src;
}

nn::Model build_fq(const EqNetConfig& ec) {
  nn::Model m;
  auto x = m.add_input(0, static_cast<std::uint32_t>(ec.sys.llr_count()));
  x = dense_relu_stack(m, x, ec.fq_hidden, ec.resolved_fq_width());
  m.add_tanh(m.add_dense(x, static_cast<std::uint32_t>(ec.resolved_latent())));
  return m;
}

nn::Model build_g(const EqNetConfig& ec) {
  nn::Model m;
  const auto z = m.add_input(0, static_cast<std::uint32_t>(ec.resolved_latent()));
  std::vector<std::size_t> heads;
  for (int b = 0; b < ec.g_branches(); ++b) {
    const auto h = dense_relu_stack(m, z, ec.g_branch_hidden, ec.g_branch_width);
    heads.push_back(m.add_dense(h, 1));
  }
  m.add_tanh(m.add_concat(heads));
  return m;
}

nn::Model build_fe(const EqNetConfig& ec) {
  const int w = ec.resolved_fe_width();
  const int wy = w / 4;
  const int wh = w / 2;
  const int ws = w - wy - wh;
  nn::Model m;
  const auto y = m.add_input(0, static_cast<std::uint32_t>(2 * ec.sys.nr));
  const auto h = m.add_input(1, static_cast<std::uint32_t>(2 * ec.sys.nt * ec.sys.nr));
  const auto s = m.add_input(2, 1);
  auto x = m.add_concat({dense_relu_stack(m, y, 1, wy), dense_relu_stack(m, h, 1, wh), dense_relu_stack(m, s, 1, ws)});
  for (int b = 0; b < ec.fe_blocks; ++b) {
    for (int pair = 0; pair < ec.fe_hidden_per_block / 2; ++pair) {
      const auto inner = dense_relu_stack(m, x, 2, w);
      x = m.add_add(inner, x);
    }
  }
  m.add_tanh(m.add_dense(x, static_cast<std::uint32_t>(ec.resolved_latent())));
  return m;
}

}  // namespace

void EqNetConfig::validate() const {
  sys.validate();
  if (fq_width < 0 || fe_width < 0 || latent_dim < 0) throw std::invalid_argument("EqNetConfig: widths must be >= 0");
  if (fq_hidden < 1 || g_branch_hidden < 1 || g_branch_width < 1) throw std::invalid_argument("EqNetConfig: layer counts must be positive");
  if (fe_blocks < 1) throw std::invalid_argument("EqNetConfig: fe_blocks must be >= 1");
  if (fe_hidden_per_block < 2 || fe_hidden_per_block % 2 != 0) {
    throw std::invalid_argument("EqNetConfig: fe_hidden_per_block must be a positive even number");
  }
  if (resolved_fe_width() < 4) throw std::invalid_argument("EqNetConfig: fe_width must be >= 4");
  if (!(sigma_u >= 0.0)) throw std::invalid_argument("EqNetConfig: sigma_u must be >= 0");
}

std::uint64_t EqNetConfig::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::int64_t v : {std::int64_t{sys.nt}, std::int64_t{sys.nr}, std::int64_t{sys.k}, std::int64_t{resolved_fq_width()},
                         std::int64_t{fq_hidden}, std::int64_t{g_branch_hidden}, std::int64_t{g_branch_width},
                         std::int64_t{fe_blocks}, std::int64_t{fe_hidden_per_block}, std::int64_t{resolved_fe_width()},
                         std::int64_t{resolved_latent()}}) {
    h = fnv1a(h, static_cast<std::uint64_t>(v));
  }
  return fnv1a(h, std::bit_cast<std::uint64_t>(sigma_u));
}

void TrainConfig::validate() const {
  if (batch < 1 || epochs < 1) throw std::invalid_argument("TrainConfig: batch and epochs must be positive");
  if (!(lr > 0.0) || !(joint_lr > 0.0)) throw std::invalid_argument("TrainConfig: learning rates must be positive");
  if (!(clip_norm >= 0.0) || patience < 0) throw std::invalid_argument("TrainConfig: clip_norm and patience must be non-negative");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw std::invalid_argument("TrainConfig: validation_fraction must lie in (0, 1)");
  }
}

void write_history_csv(std::ostream& out, const History& h) {
  out << "epoch,train_loss,val_loss,val_wmse,lr\n";
  char buf[256];
  for (const auto& r : h) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g\n", r.epoch, r.train_loss, r.val_loss, r.val_wmse, r.lr);
    out << buf;
  }
}

// ---------------------------------------------------------------------------

double from_tanh(double v) { return 2.0 * std::atanh(std::clamp(v, -kTanhClip, kTanhClip)); }

detect::LlrVector to_tanh_domain(const detect::LlrVector& llr) {
  if (llr.domain != detect::LlrDomain::natural) throw StateError("to_tanh_domain: input is already in the tanh domain");
  detect::LlrVector out{llr.values, detect::LlrDomain::tanh};
  for (double& v : out.values) v = to_tanh(v);
  return out;
}

detect::LlrVector from_tanh_domain(const detect::LlrVector& v) {
  if (v.domain != detect::LlrDomain::tanh) throw StateError("from_tanh_domain: input is not in the tanh domain");
  detect::LlrVector out{v.values, detect::LlrDomain::natural};
  for (double& x : out.values) x = from_tanh(x);
  return out;
}

// ---------------------------------------------------------------------------

Networks build_models(const EqNetConfig& ec, std::uint64_t seed) {
  ec.validate();
  Networks n{build_fq(ec), build_g(ec), build_fe(ec)};
  numerics::RngStream root(seed, 0x6571);
  auto rq = root.split(1);
  auto rg = root.split(2);
  auto re = root.split(3);
  n.fq.initialize(rq);
  n.g.initialize(rg);
  n.fe.initialize(re);
  return n;
}

int count_residual_blocks(const nn::Model& fe, const EqNetConfig& ec) {
  int adds = 0;
  for (const auto& l : fe.layers()) adds += l.kind == nn::LayerKind::add ? 1 : 0;
  return adds / std::max(1, ec.fe_hidden_per_block / 2);
}

// ---------------------------------------------------------------------------

Samples Samples::select(std::span<const Eigen::Index> cols) const {
  Samples s;
  auto pick = [&](const MatrixF& src, MatrixF& dst) {
    dst.resize(src.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < cols.size(); ++i) dst.col(static_cast<Eigen::Index>(i)) = src.col(cols[i]);
  };
  pick(llr, s.llr);
  pick(y, s.y);
  pick(h, s.h);
  pick(sigma, s.sigma);
  return s;
}

Samples Samples::range(Eigen::Index begin, Eigen::Index count) const {
  return {llr.middleCols(begin, count), y.middleCols(begin, count), h.middleCols(begin, count),
          sigma.middleCols(begin, count)};
}

void encode_observation(const channel::ChannelUse& use, float* y_col, float* h_col) {
  const std::size_t nr = use.y.size();
  for (std::size_t r = 0; r < nr; ++r) {
    y_col[r] = static_cast<float>(use.y[r].real());
    y_col[nr + r] = static_cast<float>(use.y[r].imag());
  }
  const auto e = use.h.entries();
  for (std::size_t i = 0; i < e.size(); ++i) {
    h_col[i] = static_cast<float>(e[i].real());
    h_col[e.size() + i] = static_cast<float>(e[i].imag());
  }
}

std::vector<double> compute_weights(const MatrixF& llr_tanh, int k) {
  if (llr_tanh.cols() == 0) throw std::invalid_argument("compute_weights: empty dataset");
  if (k < 1 || llr_tanh.rows() % k != 0) throw std::invalid_argument("compute_weights: width must be a multiple of K");
  std::vector<double> w(static_cast<std::size_t>(k), 0.0);
  for (Eigen::Index c = 0; c < llr_tanh.cols(); ++c)
    for (Eigen::Index r = 0; r < llr_tanh.rows(); ++r) w[static_cast<std::size_t>(r % k)] += std::abs(llr_tanh(r, c));
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  if (!(total > 0.0)) throw std::invalid_argument("compute_weights: all LLR magnitudes are zero");
  for (double& x : w) x *= static_cast<double>(k) / total;
  return w;
}

Split split_samples(const Samples& all, double validation_fraction, std::uint64_t seed) {
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw std::invalid_argument("split_samples: validation fraction must lie in (0, 1)");
  }
  const Eigen::Index n = all.size();
  const auto n_val = static_cast<Eigen::Index>(std::llround(validation_fraction * static_cast<double>(n)));
  if (n_val < 1 || n_val >= n) throw std::invalid_argument("split_samples: too few samples to split");
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  numerics::RngStream rng(seed, 0x5b1);
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_index(i)]);
  const auto n_train = static_cast<std::size_t>(n - n_val);
  return {all.select(std::span(perm).first(n_train)), all.select(std::span(perm).subspan(n_train))};
}

// ---------------------------------------------------------------------------

MatrixF encode_latent(const nn::Model& fq, const MatrixF& llr_natural) {
  MatrixF t = (llr_natural.array() * 0.5f).tanh().matrix();
  return fq.predict(t);
}

namespace {

MatrixF natural_from_tanh(const MatrixF& t) {
  MatrixF out(t.rows(), t.cols());
  for (Eigen::Index i = 0; i < t.size(); ++i) out(i) = static_cast<float>(from_tanh(t(i)));
  return out;
}

MatrixF column_from(const std::vector<double>& v) {
  MatrixF m(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = static_cast<float>(v[i]);
  return m;
}

detect::LlrVector to_llr_vector(const MatrixF& col) {
  detect::LlrVector out;
  out.values.assign(col.data(), col.data() + col.size());
  return out;
}

}  // namespace

Bitword quantize_llr(const detect::LlrVector& llr, const nn::Model& fq, const Codebook& cb) {
  if (llr.domain != detect::LlrDomain::natural) throw StateError("quantize_llr: expects natural-domain LLRs");
  if (llr.size() != fq.input_width(0)) throw std::invalid_argument("quantize_llr: LLR count does not match f_Q");
  if (static_cast<int>(fq.output_width()) != cb.dims()) throw std::invalid_argument("quantize_llr: codebook/f_Q dimension mismatch");
  const MatrixF z = encode_latent(fq, column_from(llr.values));
  std::vector<std::uint32_t> idx(static_cast<std::size_t>(cb.dims()));
  for (int d = 0; d < cb.dims(); ++d) idx[static_cast<std::size_t>(d)] = cb.index(d, z(d, 0));
  return pack_indices(idx, cb.nb);
}

detect::LlrVector dequantize_llr(const Bitword& w, const Codebook& cb, const nn::Model& g) {
  if (w.bit_count != cb.word_bits()) throw std::invalid_argument("dequantize_llr: bitword length must be 3*Nt*Nb");
  if (static_cast<int>(g.input_width(0)) != cb.dims()) throw std::invalid_argument("dequantize_llr: codebook/g dimension mismatch");
  const auto idx = unpack_indices(w, cb.nb);
  MatrixF z(cb.dims(), 1);
  for (int d = 0; d < cb.dims(); ++d) z(d, 0) = static_cast<float>(cb.levels[static_cast<std::size_t>(d)][idx[static_cast<std::size_t>(d)]]);
  return to_llr_vector(natural_from_tanh(g.predict(z)));
}

MatrixF quantize_roundtrip(const MatrixF& llr_natural, const nn::Model& fq, const nn::Model& g, const Codebook& cb) {
  MatrixF z = encode_latent(fq, llr_natural);
  if (z.rows() != cb.dims()) throw std::invalid_argument("quantize_roundtrip: codebook/f_Q dimension mismatch");
  for (Eigen::Index c = 0; c < z.cols(); ++c)
    for (int d = 0; d < cb.dims(); ++d)
      z(d, c) = static_cast<float>(cb.levels[static_cast<std::size_t>(d)][cb.index(d, z(d, c))]);
  return natural_from_tanh(g.predict(z));
}

MatrixF estimate_batch(const MatrixF& y, const MatrixF& h, const MatrixF& sigma, const nn::Model& fe,
                       const nn::Model& g) {
  const MatrixF in[3] = {y, h, sigma};
  const MatrixF z = fe.predict(std::span<const MatrixF>(in));
  return natural_from_tanh(g.predict(z));
}

detect::LlrVector estimate_llr(const channel::ChannelUse& use, const nn::Model& fe, const nn::Model& g) {
  const auto nr = static_cast<Eigen::Index>(use.y.size());
  const auto hn = static_cast<Eigen::Index>(use.h.entries().size());
  if (2 * nr != static_cast<Eigen::Index>(fe.input_width(0)) || 2 * hn != static_cast<Eigen::Index>(fe.input_width(1))) {
    throw std::invalid_argument("estimate_llr: observation dimensions do not match f_E");
  }
  MatrixF y(2 * nr, 1);
  MatrixF h(2 * hn, 1);
  MatrixF s(1, 1);
  encode_observation(use, y.data(), h.data());
  s(0, 0) = static_cast<float>(use.sigma_n);
  return to_llr_vector(estimate_batch(y, h, s, fe, g));
}

}  // namespace eqnet::model

// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>
#include <numeric>

#include "eqnet/errors.hpp"
#include "eqnet/model.hpp"

namespace eqnet::model {
namespace {

constexpr Eigen::Index kEvalChunk = 8192;

using Tape = nn::Model::Tape;

std::vector<Eigen::Index> epoch_order(Eigen::Index n, std::uint64_t seed, int epoch) {
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  numerics::RngStream rng(seed, 0xe90c);
  auto r = rng.split(static_cast<std::uint64_t>(epoch));
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[r.uniform_index(i)]);
  return perm;
}

// Calls fn(batch) for each mini-batch of an epoch; returns the sample-weighted
// mean of the losses fn reports.
template <typename Fn>
double run_epoch(const Samples& train, int batch, std::uint64_t seed, int epoch, Fn&& fn) {
  const auto order = epoch_order(train.size(), seed, epoch);
  double total = 0.0;
  for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(batch)) {
    const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(batch), order.size() - begin);
    const Samples b = train.select(std::span(order).subspan(begin, count));
    const double loss = fn(b);
    if (!std::isfinite(loss)) throw TrainingError("training diverged: non-finite loss", static_cast<std::size_t>(epoch));
    total += loss * static_cast<double>(count);
  }
  return total / static_cast<double>(order.size());
}

template <typename Fn>
double chunked_mean(const Samples& data, Fn&& fn) {
  if (data.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (Eigen::Index begin = 0; begin < data.size(); begin += kEvalChunk) {
    const Eigen::Index count = std::min(kEvalChunk, data.size() - begin);
    total += fn(data.range(begin, count)) * static_cast<double>(count);
  }
  return total / static_cast<double>(data.size());
}

MatrixF fe_forward_value(const nn::Model& fe, const Samples& s) {
  const MatrixF in[3] = {s.y, s.h, s.sigma};
  return fe.predict(std::span<const MatrixF>(in));
}

Tape fe_forward(const nn::Model& fe, const Samples& s) {
  const MatrixF in[3] = {s.y, s.h, s.sigma};
  return fe.forward(std::span<const MatrixF>(in));
}

// Halves the learning rate after `patience` epochs without a new best.
class Plateau {
 public:
  Plateau(double lr, int patience, bool enabled) : lr_(lr), patience_(patience), enabled_(enabled) {}

  double lr() const { return lr_; }

  /// Returns true when `val` is a new best.
  bool update(double val) {
    if (val < best_) {
      best_ = val;
      since_ = 0;
      return true;
    }
    if (enabled_ && ++since_ >= patience_) {
      lr_ *= 0.5;
      since_ = 0;
    }
    return false;
  }

 private:
  double lr_;
  int patience_;
  bool enabled_;
  double best_ = std::numeric_limits<double>::infinity();
  int since_ = 0;
};

template <typename... G>
void clip(const TrainConfig& tc, G&... grads) {
  if (tc.clip_norm <= 0.0) return;
  nn::Model::Gradients* all[] = {&grads...};
  nn::clip_global_norm<float>(std::span<nn::Model::Gradients* const>(all), tc.clip_norm);
}

void check_finite(double v, int epoch) {
  if (!std::isfinite(v)) throw TrainingError("training diverged: non-finite validation loss", static_cast<std::size_t>(epoch));
}

void check_data(const Samples& data, const EqNetConfig& ec) {
  ec.validate();
  if (data.llr.rows() != ec.sys.llr_count()) throw std::invalid_argument("training: LLR width does not match the system");
  if (data.y.rows() != 2 * ec.sys.nr || data.h.rows() != 2 * ec.sys.nt * ec.sys.nr || data.sigma.rows() != 1) {
    throw std::invalid_argument("training: observation widths do not match the system");
  }
}

}  // namespace

double evaluate_autoencoder_wmse(const Samples& data, const nn::Model& fq, const nn::Model& g,
                                 std::span<const double> weights) {
  return chunked_mean(data, [&](const Samples& s) {
    return nn::wmse_loss<float>(g.predict(fq.predict(s.llr)), s.llr, weights).loss;
  });
}

double evaluate_estimation_wmse(const Samples& data, const nn::Model& fe, const nn::Model& g,
                                std::span<const double> weights) {
  return chunked_mean(data, [&](const Samples& s) {
    return nn::wmse_loss<float>(g.predict(fe_forward_value(fe, s)), s.llr, weights).loss;
  });
}

Stage1Result train_stage1(const Samples& data, const EqNetConfig& ec, const TrainConfig& tc) {
  check_data(data, ec);
  tc.validate();
  const Split split = split_samples(data, tc.validation_fraction, tc.seed);
  Stage1Result res;
  res.weights = compute_weights(split.train.llr, ec.sys.k);
  Networks nets = build_models(ec, tc.seed);
  nn::Model fq = std::move(nets.fq);
  nn::Model g = std::move(nets.g);
  auto opt_q = nn::make_adam(fq, tc.lr);
  auto opt_g = nn::make_adam(g, tc.lr);
  numerics::RngStream noise(tc.seed, 0x9015e);
  const auto sigma_u = static_cast<float>(ec.sigma_u);

  Plateau sched(tc.lr, tc.resolved_patience(), tc.stage_plateau);
  res.fq = fq;
  res.g = g;
  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    const double train_loss = run_epoch(split.train, tc.batch, tc.seed, epoch, [&](const Samples& b) {
      const Tape tq = fq.forward(b.llr);
      MatrixF z = tq.output();
      if (sigma_u > 0.0f)
        for (Eigen::Index i = 0; i < z.size(); ++i) z(i) += sigma_u * static_cast<float>(noise.normal());
      const Tape tg = g.forward(z);
      const auto loss = nn::wmse_loss<float>(tg.output(), b.llr, res.weights);
      auto gg = g.backward(tg, loss.grad);
      auto gq = fq.backward(tq, gg.inputs[0]);
      clip(tc, gg, gq);
      nn::adam_step(g, gg, opt_g);
      nn::adam_step(fq, gq, opt_q);
      return loss.loss;
    });
    const double val = evaluate_autoencoder_wmse(split.validation, fq, g, res.weights);
    check_finite(val, epoch);
    res.history.push_back({epoch, train_loss, val, val, sched.lr()});
    if (sched.update(val)) {
      res.fq = fq;
      res.g = g;
    }
    opt_q.learning_rate = opt_g.learning_rate = sched.lr();
  }
  return res;
}

Stage2Result train_stage2(const Samples& data, const nn::Model& fq, const nn::Model& g, const EqNetConfig& ec,
                          const TrainConfig& tc) {
  if (!fq.frozen()) throw StateError("train_stage2: f_Q must be frozen");
  check_data(data, ec);
  tc.validate();
  const Split split = split_samples(data, tc.validation_fraction, tc.seed);
  const auto weights = compute_weights(split.train.llr, ec.sys.k);

  // Latent targets are a fixed function of the LLRs; precompute them once.
  auto targets_for = [&](const Samples& s) {
    MatrixF z(fq.output_width(), s.size());
    for (Eigen::Index begin = 0; begin < s.size(); begin += kEvalChunk) {
      const Eigen::Index count = std::min(kEvalChunk, s.size() - begin);
      z.middleCols(begin, count) = fq.predict(MatrixF(s.llr.middleCols(begin, count)));
    }
    return z;
  };
  // Carry the targets in the llr slot of a copy so batching stays uniform.
  Samples train = split.train;
  train.llr = targets_for(split.train);
  Samples val = split.validation;
  val.llr = targets_for(split.validation);

  Stage2Result res;
  nn::Model fe = std::move(build_models(ec, tc.seed).fe);
  auto opt = nn::make_adam(fe, tc.lr);
  Plateau sched(tc.lr, tc.resolved_patience(), tc.stage_plateau);
  res.fe = fe;
  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    const double train_loss = run_epoch(train, tc.batch, tc.seed, epoch, [&](const Samples& b) {
      const Tape t = fe_forward(fe, b);
      const auto loss = nn::l1_loss<float>(t.output(), b.llr);
      auto ge = fe.backward(t, loss.grad);
      clip(tc, ge);
      nn::adam_step(fe, ge, opt);
      return loss.loss;
    });
    const double val_l1 =
        chunked_mean(val, [&](const Samples& s) { return nn::l1_loss<float>(fe_forward_value(fe, s), s.llr).loss; });
    check_finite(val_l1, epoch);
    const double val_wmse = evaluate_estimation_wmse(split.validation, fe, g, weights);
    res.history.push_back({epoch, train_loss, val_l1, val_wmse, sched.lr()});
    if (sched.update(val_l1)) res.fe = fe;
    opt.learning_rate = sched.lr();
  }
  return res;
}

JointResult train_joint_baseline(const Samples& data, const EqNetConfig& ec, const TrainConfig& tc) {
  check_data(data, ec);
  tc.validate();
  const Split split = split_samples(data, tc.validation_fraction, tc.seed);
  const auto weights = compute_weights(split.train.llr, ec.sys.k);
  Networks nets = build_models(ec, tc.seed);
  nn::Model fe = std::move(nets.fe);
  nn::Model g = std::move(nets.g);
  auto opt_e = nn::make_adam(fe, tc.joint_lr);
  auto opt_g = nn::make_adam(g, tc.joint_lr);

  JointResult res;
  res.fe = fe;
  res.g = g;
  Plateau sched(tc.joint_lr, tc.resolved_patience(), true);
  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    const double train_loss = run_epoch(split.train, tc.batch, tc.seed, epoch, [&](const Samples& b) {
      const Tape te = fe_forward(fe, b);
      const Tape tg = g.forward(te.output());
      const auto loss = nn::wmse_loss<float>(tg.output(), b.llr, weights);
      auto gg = g.backward(tg, loss.grad);
      auto ge = fe.backward(te, gg.inputs[0]);
      clip(tc, gg, ge);
      nn::adam_step(g, gg, opt_g);
      nn::adam_step(fe, ge, opt_e);
      return loss.loss;
    });
    const double val = evaluate_estimation_wmse(split.validation, fe, g, weights);
    check_finite(val, epoch);
    res.history.push_back({epoch, train_loss, val, val, sched.lr()});
    if (sched.update(val)) {
      res.fe = fe;
      res.g = g;
    }
    opt_e.learning_rate = opt_g.learning_rate = sched.lr();
  }
  return res;
}

}  // namespace eqnet::model

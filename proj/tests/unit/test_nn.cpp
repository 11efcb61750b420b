// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>

#include "eqnet/errors.hpp"
#include "eqnet/nn.hpp"

namespace {

using eqnet::nn::BasicModel;
using eqnet::nn::LayerKind;
using eqnet::numerics::RngStream;
using MatD = eqnet::nn::Matrix<double>;
using ModelD = BasicModel<double>;

MatD random_matrix(Eigen::Index r, Eigen::Index c, RngStream& rng, double scale = 1.0) {
  MatD m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = scale * rng.normal();
  return m;
}

// Two inputs, every layer kind, one residual add and one concat.
ModelD every_kind_model(RngStream& rng) {
  ModelD m;
  const auto a = m.add_input(0, 3);
  const auto b = m.add_input(1, 2);
  const auto da = m.add_relu(m.add_dense(a, 4));
  const auto db = m.add_tanh(m.add_dense(b, 4));
  const auto sum = m.add_add(da, db);
  const auto h = m.add_relu(m.add_dense(sum, 4));
  const auto res = m.add_add(h, sum);
  const auto cat = m.add_concat({res, db});
  m.add_tanh(m.add_dense(cat, 3));
  m.initialize(rng);
  // Non-zero biases so that every bias gradient is exercised.
  for (auto& p : m.mutable_params())
    for (Eigen::Index i = 0; i < p.bias.size(); ++i) p.bias(i) = 0.1 * rng.normal();
  return m;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-8, std::abs(a) + std::abs(b)); }

// Worst relative error between analytic and central-difference gradients of
// loss(model(inputs)), over all parameters and inputs.
template <typename Loss>
double gradient_check(ModelD model, std::vector<MatD> inputs, Loss&& loss_fn, double h = 1e-5) {
  const auto tape = model.forward(std::span<const MatD>(inputs));
  const auto grads = model.backward(tape, loss_fn(tape.output()).grad);
  auto value = [&](const ModelD& m, const std::vector<MatD>& in) { return loss_fn(m.predict(std::span<const MatD>(in))).loss; };
  double worst = 0.0;
  for (std::size_t l = 0; l < model.params().size(); ++l) {
    for (int which = 0; which < 2; ++which) {
      const Eigen::Index n = which == 0 ? model.params()[l].weight.size() : model.params()[l].bias.size();
      for (Eigen::Index i = 0; i < n; ++i) {
        auto at = [&](ModelD& m) -> double& {
          auto& p = m.mutable_params()[l];
          return which == 0 ? p.weight(i) : p.bias(i);
        };
        ModelD plus = model;
        ModelD minus = model;
        at(plus) += h;
        at(minus) -= h;
        const double numeric = (value(plus, inputs) - value(minus, inputs)) / (2 * h);
        const double analytic = which == 0 ? grads.params[l].weight(i) : grads.params[l].bias(i);
        worst = std::max(worst, rel_err(analytic, numeric));
      }
    }
  }
  for (std::size_t s = 0; s < inputs.size(); ++s)
    for (Eigen::Index i = 0; i < inputs[s].size(); ++i) {
      auto plus = inputs;
      auto minus = inputs;
      plus[s](i) += h;
      minus[s](i) -= h;
      const double numeric = (value(model, plus) - value(model, minus)) / (2 * h);
      worst = std::max(worst, rel_err(grads.inputs[s](i), numeric));
    }
  return worst;
}

TEST(Forward, ZeroNetworkGivesZero) {
  ModelD m;
  m.add_relu(m.add_dense(m.add_relu(m.add_dense(m.add_input(0, 3), 5)), 2));
  for (auto& p : m.mutable_params()) {
    p.weight.setZero();
    p.bias.setZero();
  }
  RngStream rng(1);
  EXPECT_TRUE(m.predict(random_matrix(3, 7, rng)).isZero());
}

TEST(Forward, IdentityDense) {
  ModelD m;
  m.add_dense(m.add_input(0, 4), 4);
  m.mutable_params()[1].weight = MatD::Identity(4, 4);
  m.mutable_params()[1].bias.setZero();
  RngStream rng(2);
  const auto x = random_matrix(4, 5, rng);
  EXPECT_EQ(m.predict(x), x);
}

TEST(Forward, ShapeAndFiniteness) {
  RngStream rng(3);
  ModelD m;
  m.add_dense(m.add_relu(m.add_dense(m.add_relu(m.add_dense(m.add_input(0, 6), 8)), 8)), 2);
  m.initialize(rng);
  const auto y = m.predict(random_matrix(6, 7, rng));
  EXPECT_EQ(y.rows(), 2);
  EXPECT_EQ(y.cols(), 7);
  EXPECT_TRUE(y.allFinite());
}

TEST(Forward, WidthMismatchThrows) {
  ModelD m;
  m.add_dense(m.add_input(0, 3), 2);
  EXPECT_THROW(m.predict(MatD::Zero(4, 1)), std::invalid_argument);
}

TEST(Backward, HandChainRule) {
  ModelD m;
  m.add_dense(m.add_input(0, 1), 1);
  m.mutable_params()[1].weight(0, 0) = 0.7;
  m.mutable_params()[1].bias(0) = 0.0;
  const MatD x = MatD::Constant(1, 1, 2.0);
  const auto g = m.backward(m.forward(x), MatD::Ones(1, 1));
  EXPECT_DOUBLE_EQ(g.params[1].weight(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(g.params[1].bias(0), 1.0);
  EXPECT_DOUBLE_EQ(g.inputs[0](0, 0), 0.7);
}

TEST(Backward, ReluAtZeroHasZeroSlope) {
  ModelD m;
  m.add_relu(m.add_input(0, 2));
  const MatD x = MatD::Zero(2, 1);
  EXPECT_TRUE(m.backward(m.forward(x), MatD::Ones(2, 1)).inputs[0].isZero());
}

TEST(Backward, StaleTapeThrows) {
  RngStream rng(4);
  ModelD m;
  m.add_dense(m.add_input(0, 2), 2);
  m.initialize(rng);
  const auto tape = m.forward(MatD::Ones(2, 1));
  m.mutable_params();
  EXPECT_THROW(m.backward(tape, MatD::Ones(2, 1)), eqnet::StateError);
  ModelD other = m;
  EXPECT_THROW(other.backward(m.forward(MatD::Ones(2, 1)), MatD::Ones(2, 1)), eqnet::StateError);
}

TEST(GradientCheck, EveryLayerKindBothLosses) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    RngStream rng(seed);
    const auto model = every_kind_model(rng);
    std::vector<MatD> inputs{random_matrix(3, 5, rng), random_matrix(2, 5, rng)};
    MatD target = random_matrix(3, 5, rng, 0.5).array().tanh().matrix();
    const std::vector<double> w3{0.5, 1.5, 1.0};
    const double e_wmse = gradient_check(model, inputs, [&](const MatD& p) { return eqnet::nn::wmse_loss<double>(p, target, w3); });
    // Keep predictions away from the L1 kink.
    const MatD shifted = target.array() + 5.0;
    const double e_l1 = gradient_check(model, inputs, [&](const MatD& p) { return eqnet::nn::l1_loss<double>(p, shifted); });
    EXPECT_LT(e_wmse, 1e-4) << "seed " << seed;
    EXPECT_LT(e_l1, 1e-4) << "seed " << seed;
  }
}

TEST(Adam, FirstStep) {
  ModelD m;
  m.add_dense(m.add_input(0, 1), 1);
  m.mutable_params()[1].weight(0, 0) = 0.0;
  m.mutable_params()[1].bias(0) = 0.0;
  auto opt = eqnet::nn::make_adam(m, 1e-3);
  ModelD::Gradients g{{{}, {MatD::Ones(1, 1), eqnet::nn::Vector<double>::Zero(1)}}, {}};
  eqnet::nn::adam_step(m, g, opt);
  EXPECT_NEAR(m.params()[1].weight(0, 0), -9.99999990e-4, 1e-15);
  EXPECT_EQ(m.params()[1].bias(0), 0.0);
}

TEST(Adam, ZeroGradientLeavesParams) {
  RngStream rng(5);
  ModelD m;
  m.add_dense(m.add_relu(m.add_dense(m.add_input(0, 3), 4)), 2);
  m.initialize(rng);
  const auto before = m.params();
  auto opt = eqnet::nn::make_adam(m, 1e-3);
  ModelD::Gradients g;
  for (const auto& p : m.params()) g.params.push_back({MatD::Zero(p.weight.rows(), p.weight.cols()), eqnet::nn::Vector<double>::Zero(p.bias.size())});
  for (int i = 0; i < 10; ++i) eqnet::nn::adam_step(m, g, opt);
  for (std::size_t i = 0; i < before.size(); ++i) {
    EXPECT_EQ(m.params()[i].weight, before[i].weight);
    EXPECT_EQ(m.params()[i].bias, before[i].bias);
  }
}

TEST(Adam, FrozenModelThrows) {
  ModelD m;
  m.add_dense(m.add_input(0, 1), 1);
  auto opt = eqnet::nn::make_adam(m, 1e-3);
  ModelD::Gradients g{{{}, {MatD::Ones(1, 1), eqnet::nn::Vector<double>::Zero(1)}}, {}};
  m.freeze();
  EXPECT_THROW(eqnet::nn::adam_step(m, g, opt), eqnet::StateError);
}

TEST(Adam, ReplayIsBitIdentical) {
  auto run = [] {
    RngStream rng(6);
    eqnet::nn::Model m;
    m.add_tanh(m.add_dense(m.add_relu(m.add_dense(m.add_input(0, 4), 8)), 4));
    m.initialize(rng);
    auto opt = eqnet::nn::make_adam(m, 1e-3);
    const std::vector<double> w{1.0, 1.0};
    for (int step = 0; step < 100; ++step) {
      eqnet::nn::Matrix<float> x(4, 16);
      for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = static_cast<float>(rng.normal());
      const eqnet::nn::Matrix<float> t = x.array().tanh();
      const auto tape = m.forward(x);
      eqnet::nn::adam_step(m, m.backward(tape, eqnet::nn::wmse_loss<float>(tape.output(), t, w).grad), opt);
    }
    return eqnet::nn::serialize_model(m, 0);
  };
  EXPECT_EQ(run(), run());
}

TEST(Clip, GlobalNormScalesAllSets) {
  ModelD::Gradients a{{{MatD::Constant(1, 1, 3.0), eqnet::nn::Vector<double>::Zero(1)}}, {}};
  ModelD::Gradients b{{{MatD::Constant(1, 1, 4.0), eqnet::nn::Vector<double>::Zero(1)}}, {}};
  ModelD::Gradients* all[] = {&a, &b};
  EXPECT_DOUBLE_EQ(eqnet::nn::clip_global_norm<double>(std::span<ModelD::Gradients* const>(all), 1.0), 5.0);
  EXPECT_DOUBLE_EQ(a.params[0].weight(0, 0), 0.6);
  EXPECT_DOUBLE_EQ(b.params[0].weight(0, 0), 0.8);
  eqnet::nn::clip_global_norm<double>(std::span<ModelD::Gradients* const>(all), 10.0);
  EXPECT_DOUBLE_EQ(a.params[0].weight(0, 0), 0.6);
}

TEST(Wmse, Examples) {
  const std::vector<double> w{1.0};
  const MatD t = MatD::Constant(1, 1, 0.5);
  const MatD p = MatD::Constant(1, 1, 0.6);
  EXPECT_NEAR(eqnet::nn::wmse_loss<double>(p, t, w).loss, 0.01 / 0.500001, 1e-15);
  EXPECT_NEAR(eqnet::nn::wmse_loss<double>(p, t, w).loss, 0.0199999, 1e-7);
  const auto same = eqnet::nn::wmse_loss<double>(t, t, w);
  EXPECT_EQ(same.loss, 0.0);
  EXPECT_TRUE(same.grad.isZero());
}

TEST(Wmse, WeightsIndexByBitPosition) {
  // Two streams of K = 2: rows 0 and 2 share weight 0, rows 1 and 3 weight 1.
  const std::vector<double> w{2.0, 0.0};
  const MatD t = MatD::Constant(4, 1, 0.5);
  MatD p = t;
  p(1, 0) = 0.9;
  p(3, 0) = -0.9;
  EXPECT_EQ(eqnet::nn::wmse_loss<double>(p, t, w).loss, 0.0);
  p(2, 0) = 0.6;
  EXPECT_NEAR(eqnet::nn::wmse_loss<double>(p, t, w).loss, 2.0 * 0.01 / 0.500001 / 2.0, 1e-15);
}

TEST(Wmse, GradientMatchesFiniteDifferences) {
  RngStream rng(7);
  const std::vector<double> w{0.8, 1.2};
  MatD t = random_matrix(4, 3, rng).array().tanh().matrix();
  MatD p = random_matrix(4, 3, rng).array().tanh().matrix();
  const auto r = eqnet::nn::wmse_loss<double>(p, t, w);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    MatD a = p;
    MatD b = p;
    a(i) += 1e-6;
    b(i) -= 1e-6;
    const double numeric = (eqnet::nn::wmse_loss<double>(a, t, w).loss - eqnet::nn::wmse_loss<double>(b, t, w).loss) / 2e-6;
    EXPECT_LT(rel_err(r.grad(i), numeric), 1e-6);
  }
}

TEST(Wmse, ShapeErrors) {
  const std::vector<double> w{1.0, 1.0, 1.0};
  EXPECT_THROW(eqnet::nn::wmse_loss<double>(MatD::Zero(4, 1), MatD::Zero(4, 1), w), std::invalid_argument);
  EXPECT_THROW(eqnet::nn::wmse_loss<double>(MatD::Zero(3, 1), MatD::Zero(3, 2), w), std::invalid_argument);
}

TEST(L1, Examples) {
  MatD p(2, 1);
  p << 0.2, -0.2;
  const auto r = eqnet::nn::l1_loss<double>(p, MatD::Zero(2, 1));
  EXPECT_NEAR(r.loss, 0.2, 1e-15);
  EXPECT_DOUBLE_EQ(r.grad(0), 0.5);
  EXPECT_DOUBLE_EQ(r.grad(1), -0.5);
  EXPECT_EQ(eqnet::nn::l1_loss<double>(p, p).loss, 0.0);
  EXPECT_TRUE(eqnet::nn::l1_loss<double>(p, p).grad.isZero());
  EXPECT_THROW(eqnet::nn::l1_loss<double>(p, MatD::Zero(3, 1)), std::invalid_argument);
}

TEST(Serialization, RoundTripAndFingerprint) {
  RngStream rng(8);
  eqnet::nn::Model m;
  const auto a = m.add_input(0, 3);
  const auto b = m.add_input(1, 2);
  m.add_tanh(m.add_dense(m.add_concat({m.add_relu(m.add_dense(a, 4)), b}), 2));
  m.initialize(rng);
  const auto path = (std::filesystem::temp_directory_path() / "eqnet_nn_roundtrip.weights").string();
  eqnet::nn::save_model(m, path, 0xabcdef);
  std::uint64_t fp = 0;
  const auto back = eqnet::nn::load_model(path, &fp);
  EXPECT_EQ(fp, 0xabcdefu);
  EXPECT_EQ(back.layers(), m.layers());
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    EXPECT_EQ(back.params()[i].weight, m.params()[i].weight);
    EXPECT_EQ(back.params()[i].bias, m.params()[i].bias);
  }
  std::filesystem::remove(path);
}

TEST(Serialization, CorruptInputRejected) {
  RngStream rng(9);
  eqnet::nn::Model m;
  m.add_dense(m.add_input(0, 2), 2);
  m.initialize(rng);
  auto bytes = eqnet::nn::serialize_model(m, 1);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(eqnet::nn::deserialize_model(truncated), eqnet::ConfigError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(eqnet::nn::deserialize_model(bad_magic), eqnet::ConfigError);
  bytes.push_back(0);
  EXPECT_THROW(eqnet::nn::deserialize_model(bytes), eqnet::ConfigError);
}

TEST(Initialization, GlorotBoundsAndZeroBias) {
  RngStream rng(10);
  eqnet::nn::Model m;
  m.add_dense(m.add_input(0, 30), 20);
  m.initialize(rng);
  const float bound = std::sqrt(6.0f / 50.0f);
  EXPECT_LE(m.params()[1].weight.cwiseAbs().maxCoeff(), bound);
  EXPECT_GT(m.params()[1].weight.cwiseAbs().maxCoeff(), 0.8f * bound);
  EXPECT_TRUE(m.params()[1].bias.isZero());
}

TEST(Layers, InvalidWiringThrows) {
  ModelD m;
  const auto a = m.add_input(0, 3);
  const auto b = m.add_input(1, 2);
  EXPECT_THROW(m.add_add(a, b), std::invalid_argument);
  EXPECT_THROW(m.add_dense(7, 2), std::invalid_argument);
  EXPECT_THROW(m.add_input(0, 3), std::invalid_argument);
  EXPECT_EQ(m.layers()[a].kind, LayerKind::input);
}

}  // namespace

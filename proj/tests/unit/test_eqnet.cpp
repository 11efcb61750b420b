// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <openssl/evp.h>

#include <set>
#include <sstream>

#include "eqnet/dataset.hpp"
#include "eqnet/errors.hpp"
#include "eqnet/model.hpp"

namespace {

using eqnet::channel::SystemConfig;
using eqnet::detect::LlrDomain;
using eqnet::detect::LlrVector;
using eqnet::model::EqNetConfig;
using eqnet::model::MatrixF;
using eqnet::model::TrainConfig;
using eqnet::nn::LayerKind;
using eqnet::numerics::RngStream;

EqNetConfig config(SystemConfig sys) {
  EqNetConfig ec;
  ec.sys = sys;
  return ec;
}

const eqnet::model::Samples& small_samples() {
  static const auto s = eqnet::harness::generate_dataset({2, 2, 4}, {}, {10.0, 14.0}, 4, 5).to_samples();
  return s;
}

std::string sha256(const eqnet::nn::Model& m) {
  const auto bytes = eqnet::nn::serialize_model(m, 0);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
  return std::string(reinterpret_cast<const char*>(md), len);
}

std::vector<std::uint32_t> dense_widths(const eqnet::nn::Model& m) {
  std::vector<std::uint32_t> w;
  for (const auto& l : m.layers())
    if (l.kind == LayerKind::dense) w.push_back(l.width);
  return w;
}

TEST(TanhCodec, Examples) {
  EXPECT_EQ(eqnet::model::to_tanh(0.0), 0.0);
  EXPECT_EQ(eqnet::model::to_tanh(1e6), 1.0);
  EXPECT_EQ(eqnet::model::from_tanh(0.0), 0.0);
  EXPECT_NEAR(eqnet::model::from_tanh(1.0), 2.0 * std::atanh(1.0 - 1e-7), 1e-12);
  EXPECT_NEAR(eqnet::model::from_tanh(1.0), 16.81, 0.01);
  EXPECT_NEAR(eqnet::model::from_tanh(-1.0), -eqnet::model::from_tanh(1.0), 0.0);
}

TEST(TanhCodec, RoundTripAndDomainChecks) {
  LlrVector v{{-10.0, -3.3, -0.01, 0.0, 0.5, 7.0, 10.0}, LlrDomain::natural};
  const auto t = eqnet::model::to_tanh_domain(v);
  EXPECT_EQ(t.domain, LlrDomain::tanh);
  for (double x : t.values) EXPECT_LE(std::abs(x), 1.0);
  const auto back = eqnet::model::from_tanh_domain(t);
  EXPECT_EQ(back.domain, LlrDomain::natural);
  for (std::size_t i = 0; i < v.size(); ++i)
    EXPECT_LE(std::abs(back[i] - v[i]), 1e-6 * std::max(1e-3, std::abs(v[i])));
  EXPECT_THROW(eqnet::model::to_tanh_domain(t), eqnet::StateError);
  EXPECT_THROW(eqnet::model::from_tanh_domain(v), eqnet::StateError);
}

TEST(Architecture, SixtyFourQamWidths) {
  const auto nets = eqnet::model::build_models(config({2, 2, 6}), 1);
  EXPECT_EQ(nets.fq.input_width(0), 12u);
  EXPECT_EQ(dense_widths(nets.fq), (std::vector<std::uint32_t>{48, 48, 48, 48, 48, 48, 6}));
  EXPECT_EQ(nets.fq.layers().back().kind, LayerKind::tanh);
  EXPECT_EQ(nets.fq.output_width(), 6u);
  EXPECT_EQ(nets.g.input_width(0), 6u);
  EXPECT_EQ(nets.g.output_width(), 12u);
  // 12 branches of 6 hidden layers plus a scalar output.
  EXPECT_EQ(dense_widths(nets.g).size(), 12u * 7u);
  EXPECT_EQ(nets.fe.input_count(), 3u);
  EXPECT_EQ(nets.fe.input_width(0), 4u);
  EXPECT_EQ(nets.fe.input_width(1), 8u);
  EXPECT_EQ(nets.fe.input_width(2), 1u);
  EXPECT_EQ(nets.fe.output_width(), 6u);
}

TEST(Architecture, ResidualBlockCounts) {
  auto ec = config({2, 2, 4});
  EXPECT_EQ(eqnet::model::count_residual_blocks(eqnet::model::build_models(ec, 1).fe, ec), 1);
  ec.fe_blocks = 3;
  EXPECT_EQ(eqnet::model::count_residual_blocks(eqnet::model::build_models(ec, 1).fe, ec), 3);
}

TEST(Architecture, LatentRangeIsBounded) {
  const auto nets = eqnet::model::build_models(config({2, 2, 4}), 3);
  const auto& s = small_samples();
  MatrixF big = 50.0f * s.llr;
  EXPECT_LE(nets.fq.predict(big).cwiseAbs().maxCoeff(), 1.0f);
  const MatrixF in[3] = {100.0f * s.y, s.h, s.sigma};
  EXPECT_LE(nets.fe.predict(std::span<const MatrixF>(in)).cwiseAbs().maxCoeff(), 1.0f);
}

TEST(Architecture, SeedsAreIndependentPerNetwork) {
  const auto a = eqnet::model::build_models(config({2, 2, 4}), 7);
  const auto b = eqnet::model::build_models(config({2, 2, 4}), 7);
  EXPECT_EQ(eqnet::nn::serialize_model(a.fq, 0), eqnet::nn::serialize_model(b.fq, 0));
  EXPECT_EQ(eqnet::nn::serialize_model(a.fe, 0), eqnet::nn::serialize_model(b.fe, 0));
  EXPECT_NE(eqnet::nn::serialize_model(a.fq, 0), eqnet::nn::serialize_model(eqnet::model::build_models(config({2, 2, 4}), 8).fq, 0));
}

TEST(Architecture, InvalidConfigThrows) {
  auto ec = config({2, 2, 4});
  ec.fe_hidden_per_block = 5;
  EXPECT_THROW(ec.validate(), std::invalid_argument);
  ec = config({2, 2, 4});
  ec.fe_blocks = 0;
  EXPECT_THROW(eqnet::model::build_models(ec, 1), std::invalid_argument);
}

TEST(Weights, UniformMagnitudesGiveOnes) {
  MatrixF llr = MatrixF::Constant(8, 10, 0.3f);
  llr.row(3).setConstant(-0.3f);
  const auto w = eqnet::model::compute_weights(llr, 4);
  for (double v : w) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(Weights, SumToKAndFavorHighSignificance) {
  const auto ds = eqnet::harness::generate_dataset({2, 2, 6}, {}, {18.0}, 3, 9);
  const auto w = eqnet::model::compute_weights(ds.to_samples().llr, 6);
  double sum = 0.0;
  for (double v : w) sum += v;
  EXPECT_NEAR(sum, 6.0, 1e-9);
  // Per axis: bit 0 (I) and bit 3 (Q) are the sign bits.
  EXPECT_GT(w[0], w[2]);
  EXPECT_GT(w[3], w[5]);
  EXPECT_THROW(eqnet::model::compute_weights(MatrixF(8, 0), 4), std::invalid_argument);
}

TEST(Split, DeterministicAndSized) {
  const auto& s = small_samples();
  const auto a = eqnet::model::split_samples(s, 0.2, 3);
  const auto b = eqnet::model::split_samples(s, 0.2, 3);
  EXPECT_EQ(a.train.size() + a.validation.size(), s.size());
  EXPECT_NEAR(static_cast<double>(a.validation.size()), 0.2 * static_cast<double>(s.size()), 1.0);
  EXPECT_EQ(a.validation.llr, b.validation.llr);
}

TEST(Stage1, OverfitsSmallDataset) {
  const auto& s = small_samples();
  const auto sub = s.range(0, 512);
  TrainConfig tc;
  tc.batch = 16;
  tc.lr = 3e-3;
  tc.clip_norm = 2.0;
  tc.stage_plateau = true;
  tc.patience = 300;
  tc.epochs = 2000;
  tc.validation_fraction = 0.01;
  const auto r = eqnet::model::train_stage1(sub, config({2, 2, 4}), tc);
  double best = 1e9;
  for (const auto& h : r.history) best = std::min(best, h.train_loss);
  EXPECT_LT(best, 1e-3);
}

TEST(Stage1, ReplayAndValidationWithoutNoise) {
  const auto& s = small_samples();
  TrainConfig tc;
  tc.batch = 64;
  tc.epochs = 3;
  auto ec = config({2, 2, 4});
  const auto a = eqnet::model::train_stage1(s, ec, tc);
  const auto b = eqnet::model::train_stage1(s, ec, tc);
  ASSERT_EQ(a.history.size(), 3u);
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
    EXPECT_EQ(a.history[i].val_loss, b.history[i].val_loss);
  }
  EXPECT_EQ(eqnet::nn::serialize_model(a.fq, 0), eqnet::nn::serialize_model(b.fq, 0));
  // The recorded validation loss is the noiseless evaluation of the returned models.
  const auto split = eqnet::model::split_samples(s, tc.validation_fraction, tc.seed);
  double best = 1e9;
  for (const auto& h : a.history) best = std::min(best, h.val_loss);
  EXPECT_EQ(eqnet::model::evaluate_autoencoder_wmse(split.validation, a.fq, a.g, a.weights), best);
  // The noise surrogate changes training, not validation.
  ec.sigma_u = 0.0;
  const auto c = eqnet::model::train_stage1(s, ec, tc);
  EXPECT_NE(c.history[0].train_loss, a.history[0].train_loss);
}

TEST(Stage1, DivergenceReportsEpoch) {
  const auto& s = small_samples();
  TrainConfig tc;
  tc.batch = 64;
  tc.epochs = 2;
  tc.lr = std::numeric_limits<double>::infinity();
  try {
    eqnet::model::train_stage1(s, config({2, 2, 4}), tc);
    FAIL() << "expected TrainingError";
  } catch (const eqnet::TrainingError& e) {
    EXPECT_GE(e.epoch(), 1u);
  } catch (const std::invalid_argument&) {
    // Rejected up front is also acceptable.
  }
}

TEST(Stage2, RequiresFrozenEncoderAndLeavesItUntouched) {
  const auto& s = small_samples();
  TrainConfig tc;
  tc.batch = 128;
  tc.epochs = 2;
  const auto ec = config({2, 2, 4});
  auto s1 = eqnet::model::train_stage1(s, ec, tc);
  EXPECT_THROW(eqnet::model::train_stage2(s, s1.fq, s1.g, ec, tc), eqnet::StateError);
  s1.fq.freeze();
  s1.g.freeze();
  const auto fq_before = sha256(s1.fq);
  const auto g_before = sha256(s1.g);
  const auto r = eqnet::model::train_stage2(s, s1.fq, s1.g, ec, tc);
  EXPECT_EQ(sha256(s1.fq), fq_before);
  EXPECT_EQ(sha256(s1.g), g_before);
  EXPECT_NE(sha256(r.fe), sha256(eqnet::model::build_models(ec, tc.seed).fe));
  EXPECT_EQ(r.history.size(), 2u);
  EXPECT_TRUE(std::isfinite(r.history.back().val_wmse));
}

TEST(Stage2, ValidationLossDecreasesEarly) {
  const auto ds = eqnet::harness::generate_dataset({2, 2, 4}, {}, {12.0, 14.0}, 30, 6);
  const auto s = ds.to_samples();
  TrainConfig tc;
  tc.batch = 256;
  tc.epochs = 10;
  const auto ec = config({2, 2, 4});
  auto s1 = eqnet::model::train_stage1(s, ec, tc);
  s1.fq.freeze();
  const auto r = eqnet::model::train_stage2(s, s1.fq, s1.g, ec, tc);
  for (std::size_t i = 1; i < r.history.size(); ++i) EXPECT_LT(r.history[i].val_loss, r.history[i - 1].val_loss) << "epoch " << i + 1;
}

TEST(Stage2, OverfitsSmallDataset) {
  const auto sub = small_samples().range(0, 512);
  TrainConfig tc;
  tc.batch = 512;
  tc.epochs = 200;
  tc.validation_fraction = 0.01;
  const auto ec = config({2, 2, 4});
  auto s1 = eqnet::model::train_stage1(sub, ec, tc);
  s1.fq.freeze();
  tc.epochs = 3000;
  const auto r = eqnet::model::train_stage2(sub, s1.fq, s1.g, ec, tc);
  double best = 1e9;
  for (const auto& h : r.history) best = std::min(best, h.train_loss);
  EXPECT_LT(best, 0.01);
}

TEST(Joint, SharesInitializationAndSchedule) {
  const auto& s = small_samples();
  TrainConfig tc;
  tc.batch = 128;
  tc.epochs = 4;
  tc.patience = 1;
  const auto ec = config({2, 2, 4});
  const auto r = eqnet::model::train_joint_baseline(s, ec, tc);
  ASSERT_EQ(r.history.size(), 4u);
  EXPECT_EQ(r.history[0].lr, tc.joint_lr);
  for (const auto& h : r.history) EXPECT_LE(h.lr, tc.joint_lr);
  // Zero epochs of training would return exactly the shared initialization.
  const auto init = eqnet::model::build_models(ec, tc.seed);
  EXPECT_EQ(init.fe.layers(), r.fe.layers());
  EXPECT_EQ(init.g.layers(), r.g.layers());
  std::ostringstream csv;
  eqnet::model::write_history_csv(csv, r.history);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "epoch,train_loss,val_loss,val_wmse,lr");
}

TEST(Lloyd, ExactClustersHaveZeroDistortion) {
  RngStream rng(1);
  std::vector<double> data;
  const std::vector<double> values{-0.9, -0.5, -0.1, 0.2, 0.4, 0.6, 0.75, 0.99};
  for (int rep = 0; rep < 20; ++rep)
    for (double v : values) data.push_back(v);
  const auto r = eqnet::model::fit_levels(data, 8, rng);
  ASSERT_EQ(r.levels.size(), values.size());
  for (std::size_t i = 0; i < values.size(); ++i) EXPECT_NEAR(r.levels[i], values[i], 1e-12);
  EXPECT_LT(r.distortion.back(), 1e-12);
}

TEST(Lloyd, TwoPointSymmetry) {
  RngStream rng(2);
  const auto r = eqnet::model::fit_levels({-1.0, -1.0, 1.0, 1.0}, 2, rng);
  EXPECT_EQ(r.levels, (std::vector<double>{-1.0, 1.0}));
}

TEST(Lloyd, DistortionNonIncreasing) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    RngStream rng(seed);
    std::vector<double> data(5000);
    for (auto& x : data) x = std::tanh(rng.normal());
    const auto r = eqnet::model::fit_levels(data, 16, rng);
    for (std::size_t i = 1; i < r.distortion.size(); ++i) EXPECT_LE(r.distortion[i], r.distortion[i - 1] + 1e-15);
    for (std::size_t i = 1; i < r.levels.size(); ++i) EXPECT_LT(r.levels[i - 1], r.levels[i]);
  }
}

TEST(Lloyd, DegenerateDataThrows) {
  RngStream rng(3);
  EXPECT_THROW(eqnet::model::fit_levels({0.1, 0.1, 0.2}, 4, rng), eqnet::DegenerateDataError);
}

TEST(Codebook, NearestLevelTiesGoLow) {
  eqnet::model::Codebook cb{2, {{-0.5, 0.0, 0.5, 1.0}}};
  EXPECT_EQ(cb.index(0, -2.0), 0u);
  EXPECT_EQ(cb.index(0, 0.25), 1u);
  EXPECT_EQ(cb.index(0, 0.26), 2u);
  EXPECT_EQ(cb.index(0, 5.0), 3u);
  // Exhaustive check against a linear scan.
  RngStream rng(4);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.uniform(-1.2, 1.2);
    std::uint32_t best = 0;
    for (std::uint32_t j = 1; j < 4; ++j)
      if (std::abs(v - cb.levels[0][j]) < std::abs(v - cb.levels[0][best])) best = j;
    EXPECT_EQ(cb.index(0, v), best);
  }
}

TEST(Codebook, JsonRoundTrip) {
  eqnet::model::Codebook cb{1, {{-0.25, 0.75}, {-1.0, 0.125}}};
  std::stringstream ss;
  eqnet::model::write_codebook_json(ss, cb);
  const auto back = eqnet::model::read_codebook_json(ss);
  EXPECT_EQ(back.nb, 1);
  EXPECT_EQ(back.levels, cb.levels);
  std::istringstream bad(R"({"nb": 1, "levels": [[0.5, 0.25]]})");
  EXPECT_THROW(eqnet::model::read_codebook_json(bad), eqnet::ConfigError);
}

TEST(Bitword, PackLayoutAndRoundTrip) {
  const std::vector<std::uint32_t> idx{0b101, 0b011};
  const auto w = eqnet::model::pack_indices(idx, 3);
  EXPECT_EQ(w.bit_count, 6u);
  ASSERT_EQ(w.bytes.size(), 1u);
  EXPECT_EQ(w.bytes[0], 0b10101100);
  EXPECT_EQ(eqnet::model::unpack_indices(w, 3), idx);
  RngStream rng(5);
  for (int nb = 1; nb <= 8; ++nb) {
    std::vector<std::uint32_t> v(6);
    for (auto& x : v) x = static_cast<std::uint32_t>(rng.uniform_index(std::size_t{1} << nb));
    const auto packed = eqnet::model::pack_indices(v, nb);
    EXPECT_EQ(packed.bit_count, static_cast<std::size_t>(6 * nb));
    EXPECT_EQ(eqnet::model::unpack_indices(packed, nb), v);
  }
  EXPECT_THROW(eqnet::model::pack_indices(std::vector<std::uint32_t>{4}, 2), std::invalid_argument);
}

class Codec : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const auto ds = eqnet::harness::generate_dataset({2, 2, 6}, {}, {18.0}, 2, 3);
    samples_ = new eqnet::model::Samples(ds.to_samples());
    natural_ = new MatrixF(ds.llr_natural());
    nets_ = new eqnet::model::Networks(eqnet::model::build_models(config({2, 2, 6}), 2));
  }
  static void TearDownTestSuite() {
    delete samples_;
    delete natural_;
    delete nets_;
  }
  static eqnet::model::Samples* samples_;
  static MatrixF* natural_;
  static eqnet::model::Networks* nets_;
};
eqnet::model::Samples* Codec::samples_ = nullptr;
MatrixF* Codec::natural_ = nullptr;
eqnet::model::Networks* Codec::nets_ = nullptr;

TEST_F(Codec, BitAccountingIndependentOfK) {
  for (int nb : {6, 5}) {
    const auto cb = eqnet::model::fit_codebook(nets_->fq, samples_->llr, nb, 1);
    EXPECT_EQ(cb.dims(), 6);
    for (const auto& lv : cb.levels) {
      EXPECT_EQ(lv.size(), std::size_t{1} << nb);
      for (std::size_t i = 1; i < lv.size(); ++i) EXPECT_LT(lv[i - 1], lv[i]);
    }
    LlrVector llr{std::vector<double>(12), LlrDomain::natural};
    for (int i = 0; i < 12; ++i) llr.values[static_cast<std::size_t>(i)] = (*natural_)(i, 0);
    const auto w = eqnet::model::quantize_llr(llr, nets_->fq, cb);
    EXPECT_EQ(w.bit_count, static_cast<std::size_t>(6 * nb));
    EXPECT_EQ(w, eqnet::model::quantize_llr(llr, nets_->fq, cb));
    const auto out = eqnet::model::dequantize_llr(w, cb, nets_->g);
    EXPECT_EQ(out.size(), 12u);
    EXPECT_EQ(out.domain, LlrDomain::natural);
    for (double v : out.values) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST_F(Codec, BatchedRoundTripMatchesSingle) {
  const auto cb = eqnet::model::fit_codebook(nets_->fq, samples_->llr, 6, 1);
  const MatrixF cols = natural_->leftCols(5);
  const auto batch = eqnet::model::quantize_roundtrip(cols, nets_->fq, nets_->g, cb);
  for (Eigen::Index c = 0; c < 5; ++c) {
    LlrVector llr{std::vector<double>(12), LlrDomain::natural};
    for (int i = 0; i < 12; ++i) llr.values[static_cast<std::size_t>(i)] = cols(i, c);
    const auto one = eqnet::model::dequantize_llr(eqnet::model::quantize_llr(llr, nets_->fq, cb), cb, nets_->g);
    for (int i = 0; i < 12; ++i) EXPECT_NEAR(batch(i, c), one[static_cast<std::size_t>(i)], 1e-4);
  }
}

TEST_F(Codec, DimensionErrors) {
  const auto cb = eqnet::model::fit_codebook(nets_->fq, samples_->llr, 4, 1);
  LlrVector wrong{std::vector<double>(8), LlrDomain::natural};
  EXPECT_THROW(eqnet::model::quantize_llr(wrong, nets_->fq, cb), std::invalid_argument);
  eqnet::model::Bitword w{{0, 0}, 10};
  EXPECT_THROW(eqnet::model::dequantize_llr(w, cb, nets_->g), std::invalid_argument);
}

TEST_F(Codec, EstimateShapeAndDeterminism) {
  const auto ds = eqnet::harness::generate_dataset({2, 2, 6}, {}, {18.0}, 1, 4);
  const auto use = ds.channel_use(0);
  const auto a = eqnet::model::estimate_llr(use, nets_->fe, nets_->g);
  const auto b = eqnet::model::estimate_llr(use, nets_->fe, nets_->g);
  EXPECT_EQ(a.size(), 12u);
  EXPECT_EQ(a.values, b.values);
  for (double v : a.values) EXPECT_TRUE(std::isfinite(v));
  auto bad = use;
  bad.y.pop_back();
  EXPECT_THROW(eqnet::model::estimate_llr(bad, nets_->fe, nets_->g), std::invalid_argument);
}

}  // namespace

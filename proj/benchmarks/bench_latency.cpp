// SPDX-License-Identifier: Apache-2.0
//
// Per-call latency of the detectors, the estimation and quantization paths,
// and the LDPC decoder. Networks are randomly initialized; timing does not
// depend on the trained values.

#include <benchmark/benchmark.h>

#include <map>

#include "eqnet/dataset.hpp"
#include "eqnet/detect.hpp"

namespace {

using namespace eqnet;

struct Fixture {
  channel::SystemConfig sys;
  modem::QamConstellation c;
  std::vector<channel::ChannelUse> uses;
  model::Networks nets;
  model::Codebook codebook;
  model::MatrixF y, h, sigma, llr;
};

const Fixture& fixture(int k) {
  static std::map<int, Fixture> cache;
  auto it = cache.find(k);
  if (it != cache.end()) return it->second;
  const channel::SystemConfig sys{2, 2, k};
  model::EqNetConfig ec;
  ec.sys = sys;
  const auto ds = harness::generate_dataset(sys, {}, {18.0}, 2, 1);
  Fixture f{sys, modem::QamConstellation::build(k), {}, model::build_models(ec, 1), {}, {}, {}, {}, {}};
  for (std::size_t i = 0; i < ds.count(); ++i) f.uses.push_back(ds.channel_use(i));
  const auto s = ds.to_samples();
  f.y = s.y;
  f.h = s.h;
  f.sigma = s.sigma;
  f.llr = ds.llr_natural();
  f.codebook = model::fit_codebook(f.nets.fq, s.llr, 6, 1);
  return cache.emplace(k, std::move(f)).first->second;
}

void BM_MlLlr(benchmark::State& state) {
  const auto& f = fixture(static_cast<int>(state.range(0)));
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(detect::ml_llr(f.uses[i++ % f.uses.size()], f.c));
}
BENCHMARK(BM_MlLlr)->Arg(4)->Arg(6);

void BM_ZfSicLlr(benchmark::State& state) {
  const auto& f = fixture(static_cast<int>(state.range(0)));
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(detect::zf_sic_llr(detect::to_qr_channel(f.uses[i++ % f.uses.size()]), f.c));
}
BENCHMARK(BM_ZfSicLlr)->Arg(4)->Arg(6);

void BM_Estimate(benchmark::State& state) {
  const auto& f = fixture(6);
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const model::MatrixF y = f.y.leftCols(n), h = f.h.leftCols(n), s = f.sigma.leftCols(n);
  for (auto _ : state) benchmark::DoNotOptimize(model::estimate_batch(y, h, s, f.nets.fe, f.nets.g));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_Estimate)->Arg(1)->Arg(16)->Arg(100);

void BM_QuantizeRoundTrip(benchmark::State& state) {
  const auto& f = fixture(6);
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const model::MatrixF llr = f.llr.leftCols(n);
  for (auto _ : state) benchmark::DoNotOptimize(model::quantize_roundtrip(llr, f.nets.fq, f.nets.g, f.codebook));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_QuantizeRoundTrip)->Arg(1)->Arg(16)->Arg(100);

void BM_LdpcDecode(benchmark::State& state) {
  const auto code = ldpc::build_code();
  numerics::RngStream rng(3);
  std::vector<std::uint8_t> info(code.k());
  for (auto& b : info) b = static_cast<std::uint8_t>(rng.uniform_index(2));
  const auto cw = code.encode(info);
  std::vector<double> llr(code.n());
  for (std::size_t i = 0; i < llr.size(); ++i) llr[i] = (cw[i] ? 2.0 : -2.0) + 1.4 * rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(code.decode(llr, {}));
}
BENCHMARK(BM_LdpcDecode);

}  // namespace

BENCHMARK_MAIN();

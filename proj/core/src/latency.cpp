// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <chrono>
#include <cmath>
#include <ostream>

#include "eqnet/detect.hpp"
#include "eqnet/errors.hpp"
#include "eqnet/harness.hpp"

namespace eqnet::harness {
namespace {

// Keeps results observable so the timed work cannot be optimized away.
volatile double g_sink = 0.0;

struct Batch {
  std::vector<channel::ChannelUse> uses;
  model::MatrixF y, h, sigma, llr;
};

Batch make_batch(const SystemConfig& sys, int n, const modem::QamConstellation& c, double sigma, numerics::RngStream& rng) {
  Batch b;
  const auto cols = static_cast<Eigen::Index>(n);
  b.y.resize(2 * sys.nr, cols);
  b.h.resize(2 * sys.nt * sys.nr, cols);
  b.sigma.resize(1, cols);
  b.llr.resize(sys.llr_count(), cols);
  for (Eigen::Index i = 0; i < cols; ++i) {
    numerics::ComplexVector x(static_cast<std::size_t>(sys.nt));
    for (auto& s : x) s = c.point(rng.uniform_index(c.size()));
    b.uses.push_back(channel::transmit(channel::sample_rayleigh(sys, rng), x, sigma, rng));
    model::encode_observation(b.uses.back(), b.y.col(i).data(), b.h.col(i).data());
    b.sigma(0, i) = static_cast<float>(sigma);
    const auto l = detect::ml_llr(b.uses.back(), c);
    for (std::size_t j = 0; j < l.size(); ++j) b.llr(static_cast<Eigen::Index>(j), i) = static_cast<float>(l.values[j]);
  }
  return b;
}

double run_once(const Pipeline& p, const Batch& b, const modem::QamConstellation& c, const Artifacts& art) {
  double acc = 0.0;
  switch (p.kind) {
    case PipelineKind::ml:
      for (const auto& u : b.uses) acc += detect::ml_llr(u, c).values[0];
      break;
    case PipelineKind::zfsic:
      for (const auto& u : b.uses) acc += detect::zf_sic_llr(detect::to_qr_channel(u), c).values[0];
      break;
    case PipelineKind::zfsic_compressed:
      for (const auto& u : b.uses) acc += detect::zf_sic_compress(detect::to_qr_channel(u), c).z[0];
      break;
    case PipelineKind::eqnet_est:
      acc += model::estimate_batch(b.y, b.h, b.sigma, *art.fe, *art.g)(0, 0);
      break;
    case PipelineKind::eqnet_quant:
      acc += model::quantize_roundtrip(b.llr, *art.fq, *art.g, *art.codebook)(0, 0);
      break;
    case PipelineKind::ml_autoencoder:
      acc += art.g->predict(model::encode_latent(*art.fq, b.llr))(0, 0);
      break;
  }
  return acc;
}

}  // namespace

std::vector<LatencyRow> bench_latency(const SystemConfig& sys, const std::vector<Pipeline>& pipelines,
                                      const std::vector<int>& batches, int repetitions, const Artifacts& art,
                                      std::uint64_t seed, double snr_db) {
  sys.validate();
  if (repetitions < 2) throw std::invalid_argument("bench_latency: repetitions must be >= 2");
  const auto c = modem::QamConstellation::build(sys.k);
  const double sigma = channel::snr_to_sigma(snr_db, sys);
  std::vector<LatencyRow> rows;
  for (const auto& p : pipelines) {
    if ((p.kind == PipelineKind::eqnet_est && (!art.fe || !art.g)) ||
        ((p.kind == PipelineKind::eqnet_quant || p.kind == PipelineKind::ml_autoencoder) && (!art.fq || !art.g)) ||
        (p.kind == PipelineKind::eqnet_quant && !art.codebook)) {
      throw ConfigError("bench_latency: pipeline " + p.name() + " is missing trained artifacts");
    }
    for (int n : batches) {
      if (n < 1) throw std::invalid_argument("bench_latency: batch sizes must be positive");
      numerics::RngStream rng(seed, numerics::mix_seed(0x1a7, static_cast<std::uint64_t>(n)));
      const Batch b = make_batch(sys, n, c, sigma, rng);
      for (int w = 0; w < 3; ++w) g_sink = g_sink + run_once(p, b, c, art);
      std::vector<double> us;
      for (int r = 0; r < repetitions; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        g_sink = g_sink + run_once(p, b, c, art);
        const auto t1 = std::chrono::steady_clock::now();
        us.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
      }
      double mean = 0.0;
      for (double v : us) mean += v;
      mean /= static_cast<double>(us.size());
      double var = 0.0;
      for (double v : us) var += (v - mean) * (v - mean);
      var /= static_cast<double>(us.size() - 1);
      rows.push_back({p.name(), n, repetitions, mean, std::sqrt(var), mean / n});
    }
  }
  return rows;
}

void write_latency_csv(std::ostream& out, const std::vector<LatencyRow>& rows) {
  out << "pipeline,batch,repetitions,mean_us,stddev_us,per_use_us\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%d,%d,%.3f,%.3f,%.4f\n", r.pipeline.c_str(), r.batch, r.repetitions, r.mean_us,
                  r.stddev_us, r.per_use_us);
    out << buf;
  }
}

}  // namespace eqnet::harness

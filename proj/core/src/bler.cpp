// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>

#include "eqnet/detect.hpp"
#include "eqnet/errors.hpp"
#include "eqnet/harness.hpp"
#include "link.hpp"

namespace eqnet::harness {
namespace {

constexpr std::size_t kWave = 32;

struct BlockOutcome {
  bool error = false;
  std::uint64_t bit_errors = 0;
};

void require(const Artifacts& art, const Pipeline& p) {
  auto missing = [&](const char* what) { throw ConfigError("pipeline " + p.name() + " needs " + what); };
  switch (p.kind) {
    case PipelineKind::eqnet_est:
      if (!art.fe) missing("fe.weights");
      if (!art.g) missing("g.weights");
      break;
    case PipelineKind::eqnet_quant:
      if (!art.codebook) missing("codebook.json");
      if (art.codebook->nb != p.nb) throw ConfigError("codebook Nb does not match the pipeline");
      [[fallthrough]];
    case PipelineKind::ml_autoencoder:
      if (!art.fq) missing("fq.weights");
      if (!art.g) missing("g.weights");
      break;
    default: break;
  }
}

void store(std::vector<double>& llr, std::size_t use, std::size_t per_use, const std::vector<double>& v) {
  std::copy(v.begin(), v.end(), llr.begin() + static_cast<std::ptrdiff_t>(use * per_use));
}

void store(std::vector<double>& llr, const model::MatrixF& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) llr[static_cast<std::size_t>(i)] = m(i);
}

BlockOutcome run_block(const LinkSetup& s, const ldpc::LdpcCode& code, const modem::QamConstellation& c,
                       const Artifacts& art, double sigma, std::uint64_t snr_index, std::uint64_t b) {
  numerics::RngStream rng(s.seed, numerics::mix_seed(0xb1e40000ULL + snr_index, b));
  numerics::RngStream csi_rng(s.seed, numerics::mix_seed(0xc5100000ULL + snr_index, b));
  const auto block = detail::draw_block(s.system, s.channel, code, c, sigma, rng);
  const std::size_t uses = block.uses.size();
  const auto per_use = static_cast<std::size_t>(s.system.llr_count());
  std::vector<double> llr(uses * per_use);

  std::vector<channel::ChannelUse> seen;
  seen.reserve(uses);
  for (const auto& u : block.uses) seen.push_back({u.y, channel::corrupt_csi(u.h, s.csi_sigma, csi_rng), u.sigma_n});

  auto ml_matrix = [&] {
    model::MatrixF m(static_cast<Eigen::Index>(per_use), static_cast<Eigen::Index>(uses));
    for (std::size_t u = 0; u < uses; ++u) {
      const auto v = detect::ml_llr(seen[u], c);
      for (std::size_t j = 0; j < per_use; ++j) m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(u)) = static_cast<float>(v.values[j]);
    }
    return m;
  };

  switch (s.pipeline.kind) {
    case PipelineKind::ml:
      for (std::size_t u = 0; u < uses; ++u) store(llr, u, per_use, detect::ml_llr(seen[u], c).values);
      break;
    case PipelineKind::zfsic:
      for (std::size_t u = 0; u < uses; ++u) store(llr, u, per_use, detect::zf_sic_llr(detect::to_qr_channel(seen[u]), c).values);
      break;
    case PipelineKind::zfsic_compressed:
      for (std::size_t u = 0; u < uses; ++u) {
        const auto code_z = detect::zf_sic_compress(detect::to_qr_channel(seen[u]), c);
        store(llr, u, per_use, detect::zf_sic_expand(code_z, c).values);
      }
      break;
    case PipelineKind::eqnet_est: {
      const auto n = static_cast<Eigen::Index>(uses);
      model::MatrixF y(2 * s.system.nr, n), h(2 * s.system.nt * s.system.nr, n), sg(1, n);
      for (Eigen::Index u = 0; u < n; ++u) {
        model::encode_observation(seen[static_cast<std::size_t>(u)], y.col(u).data(), h.col(u).data());
        sg(0, u) = static_cast<float>(sigma);
      }
      store(llr, model::estimate_batch(y, h, sg, *art.fe, *art.g));
      break;
    }
    case PipelineKind::eqnet_quant:
      store(llr, model::quantize_roundtrip(ml_matrix(), *art.fq, *art.g, *art.codebook));
      break;
    case PipelineKind::ml_autoencoder: {
      const model::MatrixF t = art.g->predict(model::encode_latent(*art.fq, ml_matrix()));
      model::MatrixF nat(t.rows(), t.cols());
      for (Eigen::Index i = 0; i < t.size(); ++i) nat(i) = static_cast<float>(model::from_tanh(t(i)));
      store(llr, nat);
      break;
    }
  }

  ldpc::DecoderOptions opt;
  opt.max_iterations = s.decoder_iterations;
  const auto dec = code.decode(std::span<const double>(llr).first(code.n()), opt);
  BlockOutcome out;
  for (std::size_t i = 0; i < block.info.size(); ++i) out.bit_errors += dec.info_bits[i] != block.info[i] ? 1U : 0U;
  out.error = out.bit_errors > 0;
  return out;
}

}  // namespace

Pipeline Pipeline::parse(const std::string& name) {
  static const std::map<std::string, PipelineKind> kinds = {
      {"ml", PipelineKind::ml},
      {"zfsic", PipelineKind::zfsic},
      {"zfsic-compressed", PipelineKind::zfsic_compressed},
      {"eqnet-est", PipelineKind::eqnet_est},
      {"eqnet-quant", PipelineKind::eqnet_quant},
      {"ml-ae", PipelineKind::ml_autoencoder},
  };
  const auto it = kinds.find(name);
  if (it == kinds.end()) throw std::invalid_argument("unknown pipeline '" + name + "'");
  return {it->second, 6};
}

std::string Pipeline::name() const {
  switch (kind) {
    case PipelineKind::ml: return "ml";
    case PipelineKind::zfsic: return "zfsic";
    case PipelineKind::zfsic_compressed: return "zfsic-compressed";
    case PipelineKind::eqnet_est: return "eqnet-est";
    case PipelineKind::eqnet_quant: return "eqnet-quant";
    case PipelineKind::ml_autoencoder: return "ml-ae";
  }
  return "?";
}

bool Pipeline::needs_models() const {
  return kind == PipelineKind::eqnet_est || kind == PipelineKind::eqnet_quant || kind == PipelineKind::ml_autoencoder;
}

LinkSetup LinkSetup::from(const ExperimentConfig& cfg) {
  LinkSetup s;
  s.system = cfg.system;
  s.channel = cfg.channel;
  s.pipeline = cfg.pipeline;
  s.csi_sigma = cfg.csi_sigma;
  s.seed = cfg.seed;
  s.threads = cfg.threads;
  s.max_packets = cfg.packets;
  s.max_block_errors = cfg.max_block_errors;
  s.decoder_iterations = cfg.decoder_iterations;
  return s;
}

BlerPoint simulate_point(const LinkSetup& setup, const ldpc::LdpcCode& code, const Artifacts& art, double snr_db,
                         std::uint64_t snr_index) {
  setup.system.validate();
  if (setup.max_packets < 1) throw std::invalid_argument("simulate_point: packets must be >= 1");
  if (!(setup.csi_sigma >= 0.0)) throw std::invalid_argument("simulate_point: csi_sigma must be >= 0");
  require(art, setup.pipeline);
  const auto c = modem::QamConstellation::build(setup.system.k);
  const double sigma = channel::snr_to_sigma(snr_db, setup.system);
  const auto max_blocks = static_cast<std::uint64_t>(setup.max_packets);
  const auto stop_errors = static_cast<std::uint64_t>(std::max(1, setup.max_block_errors));
  const auto min_blocks = static_cast<std::uint64_t>(std::max(0, setup.min_blocks));

  BlerPoint p;
  p.snr_db = snr_db;
  std::uint64_t bit_errors = 0;
  std::vector<BlockOutcome> wave;
  bool done = false;
  while (!done && p.blocks < max_blocks) {
    const std::size_t n = static_cast<std::size_t>(std::min<std::uint64_t>(kWave, max_blocks - p.blocks));
    wave.assign(n, {});
    const std::uint64_t base = p.blocks;
    parallel_for(n, setup.threads, [&](std::size_t i) { wave[i] = run_block(setup, code, c, art, sigma, snr_index, base + i); });
    for (const auto& o : wave) {
      ++p.blocks;
      p.block_errors += o.error ? 1U : 0U;
      bit_errors += o.bit_errors;
      if (p.block_errors >= stop_errors && p.blocks >= min_blocks) {
        done = true;
        break;
      }
    }
  }
  p.bler = static_cast<double>(p.block_errors) / static_cast<double>(p.blocks);
  p.ber = static_cast<double>(bit_errors) / (static_cast<double>(p.blocks) * static_cast<double>(code.k()));
  return p;
}

std::vector<BlerPoint> run_bler_sweep(const LinkSetup& setup, const std::vector<double>& snr_db, const Artifacts& art) {
  if (snr_db.empty()) throw std::invalid_argument("run_bler_sweep: empty SNR grid");
  require(art, setup.pipeline);
  const auto code = ldpc::build_code();
  std::vector<BlerPoint> out;
  for (std::size_t i = 0; i < snr_db.size(); ++i) out.push_back(simulate_point(setup, code, art, snr_db[i], i));
  return out;
}

std::vector<BlerPoint> run_bler_sweep(const ExperimentConfig& cfg, const Artifacts& art) {
  cfg.validate();
  return run_bler_sweep(LinkSetup::from(cfg), cfg.snr_db, art);
}

std::string format_bler_row(const BlerPoint& p) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%.4f,%llu,%llu,%.9g,%.9g", p.snr_db, static_cast<unsigned long long>(p.blocks),
                static_cast<unsigned long long>(p.block_errors), p.bler, p.ber);
  return buf;
}

void write_bler_csv(std::ostream& out, const std::vector<BlerPoint>& points) {
  out << "snr_db,blocks,block_errors,bler,ber\n";
  for (const auto& p : points) out << format_bler_row(p) << '\n';
}

double snr_at_bler(const std::vector<BlerPoint>& curve, double target) {
  if (!(target > 0.0)) throw std::invalid_argument("snr_at_bler: target must be positive");
  std::vector<BlerPoint> c = curve;
  std::sort(c.begin(), c.end(), [](const BlerPoint& a, const BlerPoint& b) { return a.snr_db < b.snr_db; });
  auto log_bler = [](const BlerPoint& p) {
    const double errors = p.block_errors > 0 ? static_cast<double>(p.block_errors) : 0.5;
    return std::log10(errors / static_cast<double>(std::max<std::uint64_t>(p.blocks, 1)));
  };
  const double lt = std::log10(target);
  for (std::size_t i = 0; i + 1 < c.size(); ++i) {
    const double a = log_bler(c[i]);
    const double b = log_bler(c[i + 1]);
    if (a >= lt && b <= lt) {
      if (a == b) return c[i].snr_db;
      return c[i].snr_db + (a - lt) / (a - b) * (c[i + 1].snr_db - c[i].snr_db);
    }
  }
  if (!c.empty() && log_bler(c.front()) <= lt && c.front().block_errors > 0) return c.front().snr_db;
  return std::numeric_limits<double>::quiet_NaN();
}

GridResult find_snr_grid(const SystemConfig& sys, const ChannelModel& ch, const GridSearchConfig& gs, std::uint64_t seed,
                         int threads) {
  sys.validate();
  if (gs.points < 2 || !(gs.hi_db > gs.lo_db) || !(gs.resolution_db > 0.0)) {
    throw std::invalid_argument("find_snr_grid: invalid search parameters");
  }
  LinkSetup s;
  s.system = sys;
  s.channel = ch;
  s.pipeline = {PipelineKind::ml, 6};
  s.seed = seed;
  s.threads = threads;
  s.max_packets = gs.max_blocks;
  s.max_block_errors = gs.target_errors;
  s.min_blocks = gs.min_blocks;
  const auto code = ldpc::build_code();
  const Artifacts none;

  GridResult res;
  auto probe = [&](double snr) {
    const auto idx = static_cast<std::uint64_t>(0x9000000 + std::llround(snr * 1000.0));
    const auto p = simulate_point(s, code, none, snr, idx);
    res.probes.push_back({snr, p.blocks, p.block_errors});
    return p;
  };
  auto at_least_lo = [&](double snr) { return probe(snr).bler >= gs.bler_lo; };
  auto at_most_hi = [&](double snr) {
    const auto p = probe(snr);
    return static_cast<double>(p.block_errors) <= gs.bler_hi * static_cast<double>(p.blocks);
  };

  double a = gs.lo_db;
  double b = gs.hi_db;
  if (!at_least_lo(a)) throw SearchError("find_snr_grid: ML BLER below the low-end target at the lower bracket");
  if (at_least_lo(b)) throw SearchError("find_snr_grid: ML BLER above the low-end target at the upper bracket");
  while (b - a > gs.resolution_db) {
    const double m = 0.5 * (a + b);
    (at_least_lo(m) ? a : b) = m;
  }
  const double snr_lo = a;

  a = snr_lo;
  b = gs.hi_db;
  if (!at_most_hi(b)) throw SearchError("find_snr_grid: ML BLER above the high-end target at the upper bracket");
  while (b - a > gs.resolution_db) {
    const double m = 0.5 * (a + b);
    (at_most_hi(m) ? b : a) = m;
  }
  const double snr_hi = b;

  // Probe estimates must be non-increasing in SNR up to sampling noise.
  auto sorted = res.probes;
  std::sort(sorted.begin(), sorted.end(), [](const GridProbe& x, const GridProbe& y) { return x.snr_db < y.snr_db; });
  for (std::size_t i = 0; i < sorted.size(); ++i)
    for (std::size_t j = i + 1; j < sorted.size(); ++j) {
      const double pi = static_cast<double>(sorted[i].errors) / static_cast<double>(sorted[i].blocks);
      const double pj = static_cast<double>(sorted[j].errors) / static_cast<double>(sorted[j].blocks);
      const double pool = 0.5 * (pi + pj);
      const double tol = 4.0 * std::sqrt(pool * (1.0 - pool) * (1.0 / static_cast<double>(sorted[i].blocks) +
                                                                   1.0 / static_cast<double>(sorted[j].blocks))) + 0.02;
      if (pj > pi + tol) throw SearchError("find_snr_grid: BLER estimates are not monotone in SNR");
    }

  for (int i = 0; i < gs.points; ++i) {
    res.snr_db.push_back(snr_lo + (snr_hi - snr_lo) * static_cast<double>(i) / static_cast<double>(gs.points - 1));
  }
  return res;
}

}  // namespace eqnet::harness

// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "eqnet/errors.hpp"
#include "eqnet/harness.hpp"

namespace eqnet::cli {
namespace {

namespace fs = std::filesystem;
using harness::ExperimentConfig;

ExperimentConfig load(const Common& c) {
  auto cfg = harness::load_config(c.config);
  if (c.seed) {
    cfg.seed = *c.seed;
    cfg.train.seed = *c.seed;
  }
  return cfg;
}

// Writes to `path`, or to stdout when it is empty.
template <typename Fn>
void emit(const std::string& path, Fn&& write) {
  if (path.empty()) {
    write(std::cout);
    return;
  }
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  write(out);
  if (!out) throw ConfigError("write failed: " + path);
}

std::string dataset_path(const ExperimentConfig& cfg) {
  if (cfg.dataset.path.empty()) throw ConfigError("config: dataset.path is not set");
  return cfg.dataset.path;
}

std::string model_dir(const ExperimentConfig& cfg, const Common& c) {
  const std::string dir = c.out.empty() ? cfg.model_dir : c.out;
  if (dir.empty()) throw ConfigError("config: model_dir is not set and no --out given");
  return dir;
}

harness::Dataset load_dataset(const ExperimentConfig& cfg) {
  auto ds = harness::read_dataset(dataset_path(cfg));
  if (!(ds.sys == cfg.system)) throw ConfigError("dataset system does not match the config");
  return ds;
}

std::uint64_t dataset_fingerprint(const harness::Dataset& ds) {
  std::uint64_t h = numerics::mix_seed(ds.seed, ds.count());
  return numerics::mix_seed(h, static_cast<std::uint64_t>(ds.sys.nt * 10000 + ds.sys.nr * 100 + ds.sys.k));
}

std::vector<double> grid_or_search(const ExperimentConfig& cfg) {
  if (!cfg.snr_db.empty()) return cfg.snr_db;
  std::cerr << "eqnet: snr_db not set, searching for the SNR grid\n";
  return harness::find_snr_grid(cfg.system, cfg.channel, cfg.grid, cfg.seed, cfg.threads).snr_db;
}

void write_history(const std::string& path, const model::History& h) {
  emit(path, [&](std::ostream& o) { model::write_history_csv(o, h); });
}

}  // namespace

int gen_data(const Common& c) {
  const auto cfg = load(c);
  const auto grid = grid_or_search(cfg);
  const auto ds = harness::generate_dataset(cfg.system, cfg.channel, grid, cfg.dataset.packets, cfg.seed, cfg.threads);
  const std::string path = c.out.empty() ? dataset_path(cfg) : c.out;
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  harness::write_dataset(path, ds);
  std::cerr << "eqnet: wrote " << ds.count() << " records to " << path << '\n';
  return 0;
}

int find_grid(const Common& c) {
  const auto cfg = load(c);
  const auto res = harness::find_snr_grid(cfg.system, cfg.channel, cfg.grid, cfg.seed, cfg.threads);
  emit(c.out, [&](std::ostream& o) {
    o << "{\n  \"snr_db\": [";
    char buf[32];
    for (std::size_t i = 0; i < res.snr_db.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.4f", res.snr_db[i]);
      o << (i ? ", " : "") << buf;
    }
    o << "],\n  \"probes\": [\n";
    for (std::size_t i = 0; i < res.probes.size(); ++i) {
      const auto& p = res.probes[i];
      std::snprintf(buf, sizeof buf, "%.4f", p.snr_db);
      o << "    {\"snr_db\": " << buf << ", \"blocks\": " << p.blocks << ", \"errors\": " << p.errors << "}"
        << (i + 1 < res.probes.size() ? ",\n" : "\n");
    }
    o << "  ]\n}\n";
  });
  return 0;
}

int train_q(const Common& c) {
  const auto cfg = load(c);
  const auto ds = load_dataset(cfg);
  auto res = model::train_stage1(ds.to_samples(), cfg.eqnet, cfg.train);
  const auto dir = model_dir(cfg, c);
  harness::Artifacts art;
  art.fq = std::move(res.fq);
  art.g = std::move(res.g);
  harness::save_bundle(dir, art, cfg.eqnet, dataset_fingerprint(ds));
  write_history((fs::path(dir) / "stage1_history.csv").string(), res.history);
  return 0;
}

int train_e(const Common& c) {
  const auto cfg = load(c);
  const auto dir = model_dir(cfg, c);
  auto art = harness::load_bundle(dir, cfg.eqnet);
  if (!art.fq || !art.g) throw ConfigError("train-e needs fq.weights and g.weights in " + dir + " (run train-q first)");
  art.fq->freeze();
  art.g->freeze();
  const auto ds = load_dataset(cfg);
  auto res = model::train_stage2(ds.to_samples(), *art.fq, *art.g, cfg.eqnet, cfg.train);
  harness::Artifacts out;
  out.fe = std::move(res.fe);
  out.fq = std::move(art.fq);
  out.g = std::move(art.g);
  out.codebook = std::move(art.codebook);
  harness::save_bundle(dir, out, cfg.eqnet, dataset_fingerprint(ds));
  write_history((fs::path(dir) / "stage2_history.csv").string(), res.history);
  return 0;
}

int train_joint(const Common& c) {
  const auto cfg = load(c);
  const std::string dir = c.out.empty() ? (fs::path(model_dir(cfg, c)) / "joint").string() : c.out;
  const auto ds = load_dataset(cfg);
  auto res = model::train_joint_baseline(ds.to_samples(), cfg.eqnet, cfg.train);
  harness::Artifacts art;
  art.fe = std::move(res.fe);
  art.g = std::move(res.g);
  harness::save_bundle(dir, art, cfg.eqnet, dataset_fingerprint(ds));
  write_history((fs::path(dir) / "joint_history.csv").string(), res.history);
  return 0;
}

int fit_codebook(const Common& c, int nb) {
  const auto cfg = load(c);
  const auto dir = model_dir(cfg, c);
  auto art = harness::load_bundle(dir, cfg.eqnet);
  if (!art.fq) throw ConfigError("fit-codebook needs fq.weights in " + dir);
  const auto ds = load_dataset(cfg);
  const auto split = model::split_samples(ds.to_samples(), cfg.train.validation_fraction, cfg.train.seed);
  art.codebook = model::fit_codebook(*art.fq, split.train.llr, nb, cfg.seed);
  std::ofstream out(fs::path(dir) / "codebook.json");
  model::write_codebook_json(out, *art.codebook);
  if (!out) throw ConfigError("cannot write codebook.json in " + dir);
  return 0;
}

int eval_bler(const Common& c) {
  auto cfg = load(c);
  cfg.snr_db = grid_or_search(cfg);
  harness::Artifacts art;
  if (cfg.pipeline.needs_models()) {
    if (cfg.model_dir.empty()) throw ConfigError("pipeline " + cfg.pipeline.name() + " needs model_dir");
    art = harness::load_bundle(cfg.model_dir, cfg.eqnet);
  }
  const auto points = harness::run_bler_sweep(cfg, art);
  emit(c.out, [&](std::ostream& o) { harness::write_bler_csv(o, points); });
  return 0;
}

int sweep_bottleneck(const Common& c, const std::vector<int>& dims, const std::vector<std::uint64_t>& seeds) {
  auto cfg = load(c);
  cfg.snr_db = grid_or_search(cfg);
  const auto ds = load_dataset(cfg);
  const auto rows = harness::bottleneck_sweep(cfg, ds.to_samples(), dims, seeds);
  emit(c.out, [&](std::ostream& o) { harness::write_curves_csv(o, rows); });
  return 0;
}

int sweep_robust(const Common& c, const RobustOptions& opt) {
  auto cfg = load(c);
  harness::Artifacts art;
  if (cfg.pipeline.needs_models()) {
    if (cfg.model_dir.empty()) throw ConfigError("pipeline " + cfg.pipeline.name() + " needs model_dir");
    art = harness::load_bundle(cfg.model_dir, cfg.eqnet);
  }
  if (opt.kind == "csi") {
    double snr = opt.snr_db;
    if (!opt.snr_set) {
      const auto grid = grid_or_search(cfg);
      snr = grid[grid.size() / 2];
    }
    const auto rows = harness::csi_sweep(cfg, art, snr, opt.sigmas.empty() ? harness::kCsiSigmaGrid : opt.sigmas);
    emit(c.out, [&](std::ostream& o) { harness::write_csi_csv(o, rows); });
    return 0;
  }
  if (opt.shift_model_dir.empty()) throw ConfigError("sweep-robust --kind shift needs --shift-model-dir");
  cfg.snr_db = grid_or_search(cfg);
  const auto shifted_art = harness::load_bundle(opt.shift_model_dir, cfg.eqnet);
  const harness::ChannelModel shifted{harness::ChannelKind::correlated, opt.rho};
  const auto rows = harness::shift_sweep(cfg, art, shifted_art, shifted);
  emit(c.out, [&](std::ostream& o) { harness::write_curves_csv(o, rows); });
  return 0;
}

int bench(const Common& c, const std::vector<std::string>& pipelines, const std::vector<int>& batches, int reps) {
  const auto cfg = load(c);
  std::vector<harness::Pipeline> ps;
  bool models = false;
  for (const auto& name : pipelines) {
    ps.push_back(harness::Pipeline::parse(name));
    models |= ps.back().needs_models();
  }
  harness::Artifacts art;
  if (models) art = harness::load_bundle(cfg.model_dir, cfg.eqnet);
  const double snr = cfg.snr_db.empty() ? 15.0 : cfg.snr_db[cfg.snr_db.size() / 2];
  const auto rows = harness::bench_latency(cfg.system, ps, batches, reps, art, cfg.seed, snr);
  emit(c.out, [&](std::ostream& o) { harness::write_latency_csv(o, rows); });
  return 0;
}

}  // namespace eqnet::cli

// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <ostream>

#include "eqnet/harness.hpp"

namespace eqnet::harness {
namespace {

void append_curve(std::vector<CurveRow>& rows, const std::string& name, int dim, std::uint64_t seed,
                  const std::vector<BlerPoint>& points) {
  for (const auto& p : points) rows.push_back({name, dim, seed, p});
}

}  // namespace

void write_curves_csv(std::ostream& out, const std::vector<CurveRow>& rows) {
  out << "curve,latent_dim,seed,snr_db,blocks,block_errors,bler,ber\n";
  for (const auto& r : rows) out << r.curve << ',' << r.latent_dim << ',' << r.seed << ',' << format_bler_row(r.point) << '\n';
}

std::vector<CurveRow> bottleneck_sweep(const ExperimentConfig& cfg, const model::Samples& data,
                                       const std::vector<int>& dims, const std::vector<std::uint64_t>& seeds) {
  cfg.validate();
  if (dims.empty() || seeds.empty()) throw std::invalid_argument("bottleneck_sweep: dims and seeds must be non-empty");
  LinkSetup link = LinkSetup::from(cfg);
  std::vector<CurveRow> rows;
  const Artifacts none;
  for (auto kind : {PipelineKind::ml, PipelineKind::zfsic}) {
    link.pipeline = {kind, 6};
    append_curve(rows, link.pipeline.name(), 0, cfg.seed, run_bler_sweep(link, cfg.snr_db, none));
  }
  link.pipeline = {PipelineKind::ml_autoencoder, 6};
  for (int dim : dims) {
    if (dim < 1) throw std::invalid_argument("bottleneck_sweep: latent dims must be positive");
    model::EqNetConfig ec = cfg.eqnet;
    ec.latent_dim = dim;
    for (std::uint64_t seed : seeds) {
      model::TrainConfig tc = cfg.train;
      tc.seed = seed;
      auto trained = model::train_stage1(data, ec, tc);
      Artifacts art;
      art.fq = std::move(trained.fq);
      art.g = std::move(trained.g);
      append_curve(rows, "ml-ae", dim, seed, run_bler_sweep(link, cfg.snr_db, art));
    }
  }
  return rows;
}

std::vector<CsiRow> csi_sweep(const ExperimentConfig& cfg, const Artifacts& art, double snr_db,
                              const std::vector<double>& sigmas) {
  cfg.validate();
  LinkSetup link = LinkSetup::from(cfg);
  const auto code = ldpc::build_code();
  std::vector<CsiRow> rows;
  for (double s : sigmas) {
    if (!(s >= 0.0)) throw std::invalid_argument("csi_sweep: sigma must be >= 0");
    link.csi_sigma = s;
    // Same SNR index for every sigma: only the CSI error differs between rows.
    rows.push_back({s, simulate_point(link, code, art, snr_db, 0)});
  }
  return rows;
}

void write_csi_csv(std::ostream& out, const std::vector<CsiRow>& rows) {
  out << "csi_sigma,snr_db,blocks,block_errors,bler,ber\n";
  char buf[32];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.4f", r.csi_sigma);
    out << buf << ',' << format_bler_row(r.point) << '\n';
  }
}

std::vector<CurveRow> shift_sweep(const ExperimentConfig& cfg, const Artifacts& rayleigh_trained,
                                  const Artifacts& shift_trained, const ChannelModel& shifted) {
  cfg.validate();
  LinkSetup link = LinkSetup::from(cfg);
  std::vector<CurveRow> rows;
  const int dim = cfg.eqnet.resolved_latent();

  link.pipeline = {PipelineKind::eqnet_est, 6};
  link.channel = shifted;
  append_curve(rows, "rayleigh-trained:eqnet-est", dim, cfg.seed, run_bler_sweep(link, cfg.snr_db, rayleigh_trained));
  append_curve(rows, "shift-trained:eqnet-est", dim, cfg.seed, run_bler_sweep(link, cfg.snr_db, shift_trained));

  // ZF-SIC has no trained parameters; both reference curves are the same run on the test channel.
  const Artifacts none;
  link.pipeline = {PipelineKind::zfsic, 6};
  const auto reference = run_bler_sweep(link, cfg.snr_db, none);
  append_curve(rows, "rayleigh-trained:zfsic", 0, cfg.seed, reference);
  append_curve(rows, "shift-trained:zfsic", 0, cfg.seed, reference);
  return rows;
}

}  // namespace eqnet::harness

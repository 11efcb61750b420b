// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "eqnet/errors.hpp"
#include "eqnet/harness.hpp"

namespace eqnet::harness {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json eqnet_to_json(const model::EqNetConfig& e) {
  return {{"fq_width", e.fq_width},       {"fq_hidden", e.fq_hidden},
          {"g_branch_hidden", e.g_branch_hidden}, {"g_branch_width", e.g_branch_width},
          {"fe_blocks", e.fe_blocks},     {"fe_hidden_per_block", e.fe_hidden_per_block},
          {"fe_width", e.fe_width},       {"latent_dim", e.latent_dim},
          {"sigma_u", e.sigma_u}};
}

void eqnet_from_json(const json& j, model::EqNetConfig& e) {
  reject_unknown(j,
                 {"variant", "fq_width", "fq_hidden", "g_branch_hidden", "g_branch_width", "fe_blocks",
                  "fe_hidden_per_block", "fe_width", "latent_dim", "sigma_u"},
                 "eqnet");
  if (j.contains("variant")) {
    const auto v = j.at("variant").get<std::string>();
    if (v == "L") e.fe_blocks = 1;
    else if (v == "P") e.fe_blocks = 3;
    else throw ConfigError("eqnet.variant must be \"L\" or \"P\"");
  }
  read(j, "fq_width", e.fq_width);
  read(j, "fq_hidden", e.fq_hidden);
  read(j, "g_branch_hidden", e.g_branch_hidden);
  read(j, "g_branch_width", e.g_branch_width);
  read(j, "fe_blocks", e.fe_blocks);
  read(j, "fe_hidden_per_block", e.fe_hidden_per_block);
  read(j, "fe_width", e.fe_width);
  read(j, "latent_dim", e.latent_dim);
  read(j, "sigma_u", e.sigma_u);
}

ExperimentConfig from_json(const json& j) {
  reject_unknown(j,
                 {"system", "channel", "snr_db", "packets", "max_block_errors", "pipeline", "nb", "csi_sigma", "seed",
                  "threads", "decoder_iterations", "dataset", "model_dir", "grid", "eqnet", "train"},
                 "config");
  ExperimentConfig c;
  if (j.contains("system")) {
    const auto& s = j.at("system");
    reject_unknown(s, {"nt", "nr", "k"}, "system");
    read(s, "nt", c.system.nt);
    read(s, "nr", c.system.nr);
    read(s, "k", c.system.k);
  }
  if (j.contains("channel")) {
    const auto& ch = j.at("channel");
    reject_unknown(ch, {"kind", "rho"}, "channel");
    const auto kind = ch.value("kind", std::string("rayleigh"));
    if (kind == "rayleigh") c.channel.kind = ChannelKind::rayleigh;
    else if (kind == "correlated") c.channel.kind = ChannelKind::correlated;
    else throw ConfigError("channel.kind must be \"rayleigh\" or \"correlated\"");
    read(ch, "rho", c.channel.rho);
  }
  read(j, "snr_db", c.snr_db);
  read(j, "packets", c.packets);
  read(j, "max_block_errors", c.max_block_errors);
  if (j.contains("pipeline")) {
    try {
      c.pipeline = Pipeline::parse(j.at("pipeline").get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  read(j, "nb", c.pipeline.nb);
  read(j, "csi_sigma", c.csi_sigma);
  read(j, "seed", c.seed);
  read(j, "threads", c.threads);
  read(j, "decoder_iterations", c.decoder_iterations);
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    reject_unknown(d, {"path", "packets"}, "dataset");
    read(d, "path", c.dataset.path);
    read(d, "packets", c.dataset.packets);
  }
  read(j, "model_dir", c.model_dir);
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    reject_unknown(g, {"lo_db", "hi_db", "resolution_db", "bler_lo", "bler_hi", "min_blocks", "max_blocks", "target_errors", "points"},
                   "grid");
    read(g, "lo_db", c.grid.lo_db);
    read(g, "hi_db", c.grid.hi_db);
    read(g, "resolution_db", c.grid.resolution_db);
    read(g, "bler_lo", c.grid.bler_lo);
    read(g, "bler_hi", c.grid.bler_hi);
    read(g, "min_blocks", c.grid.min_blocks);
    read(g, "max_blocks", c.grid.max_blocks);
    read(g, "target_errors", c.grid.target_errors);
    read(g, "points", c.grid.points);
  }
  c.eqnet.sys = c.system;
  if (j.contains("eqnet")) eqnet_from_json(j.at("eqnet"), c.eqnet);
  if (j.contains("train")) {
    const auto& t = j.at("train");
    reject_unknown(t, {"batch", "lr", "joint_lr", "epochs", "patience", "stage_plateau", "clip_norm", "validation_fraction", "seed"},
                  "train");
    read(t, "batch", c.train.batch);
    read(t, "lr", c.train.lr);
    read(t, "joint_lr", c.train.joint_lr);
    read(t, "epochs", c.train.epochs);
    read(t, "patience", c.train.patience);
    read(t, "stage_plateau", c.train.stage_plateau);
    read(t, "clip_norm", c.train.clip_norm);
    read(t, "validation_fraction", c.train.validation_fraction);
    c.train.seed = c.seed;
    read(t, "seed", c.train.seed);
  } else {
    c.train.seed = c.seed;
  }
  return c;
}

}  // namespace

void ExperimentConfig::validate() const {
  system.validate();
  if (packets < 1) throw std::invalid_argument("config: packets must be >= 1");
  if (max_block_errors < 1) throw std::invalid_argument("config: max_block_errors must be >= 1");
  if (!(csi_sigma >= 0.0)) throw std::invalid_argument("config: csi_sigma must be >= 0");
  if (threads < 1) throw std::invalid_argument("config: threads must be >= 1");
  if (decoder_iterations < 1) throw std::invalid_argument("config: decoder_iterations must be >= 1");
  for (std::size_t i = 1; i < snr_db.size(); ++i)
    if (!(snr_db[i] > snr_db[i - 1])) throw std::invalid_argument("config: snr_db must be strictly ascending");
  if (channel.kind == ChannelKind::correlated && !(channel.rho >= 0.0 && channel.rho < 1.0)) {
    throw std::invalid_argument("config: channel.rho must lie in [0, 1)");
  }
  if (pipeline.kind == PipelineKind::eqnet_quant && (pipeline.nb < 1 || pipeline.nb > 8)) {
    throw std::invalid_argument("config: nb must lie in 1..8");
  }
  if (!(eqnet.sys == system)) throw std::invalid_argument("config: eqnet system does not match");
  eqnet.validate();
  train.validate();
}

ExperimentConfig parse_config(const std::string& json_text) {
  ExperimentConfig c;
  try {
    c = from_json(json::parse(json_text));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const ExperimentConfig& c) {
  json j;
  j["system"] = {{"nt", c.system.nt}, {"nr", c.system.nr}, {"k", c.system.k}};
  j["channel"] = {{"kind", c.channel.kind == ChannelKind::rayleigh ? "rayleigh" : "correlated"}, {"rho", c.channel.rho}};
  j["snr_db"] = c.snr_db;
  j["packets"] = c.packets;
  j["max_block_errors"] = c.max_block_errors;
  j["pipeline"] = c.pipeline.name();
  j["nb"] = c.pipeline.nb;
  j["csi_sigma"] = c.csi_sigma;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["decoder_iterations"] = c.decoder_iterations;
  j["dataset"] = {{"path", c.dataset.path}, {"packets", c.dataset.packets}};
  j["model_dir"] = c.model_dir;
  j["grid"] = {{"lo_db", c.grid.lo_db},           {"hi_db", c.grid.hi_db},       {"resolution_db", c.grid.resolution_db},
               {"bler_lo", c.grid.bler_lo},       {"bler_hi", c.grid.bler_hi},   {"min_blocks", c.grid.min_blocks},
               {"max_blocks", c.grid.max_blocks}, {"target_errors", c.grid.target_errors}, {"points", c.grid.points}};
  j["eqnet"] = eqnet_to_json(c.eqnet);
  j["train"] = {{"batch", c.train.batch},
                {"lr", c.train.lr},
                {"joint_lr", c.train.joint_lr},
                {"epochs", c.train.epochs},
                {"patience", c.train.patience},
                {"stage_plateau", c.train.stage_plateau},
                {"clip_norm", c.train.clip_norm},
                {"validation_fraction", c.train.validation_fraction},
                {"seed", c.train.seed}};
  return j.dump(2);
}

Artifacts load_bundle(const std::string& dir, const model::EqNetConfig& ec) {
  Artifacts a;
  const std::uint64_t expected = ec.fingerprint();
  auto load = [&](const char* name, std::optional<nn::Model>& slot) {
    const fs::path p = fs::path(dir) / name;
    if (!fs::exists(p)) return;
    std::uint64_t fp = 0;
    slot = nn::load_model(p.string(), &fp);
    if (fp != expected) throw ConfigError(p.string() + " was trained for a different network configuration");
  };
  load("fq.weights", a.fq);
  load("g.weights", a.g);
  load("fe.weights", a.fe);
  const fs::path cb = fs::path(dir) / "codebook.json";
  if (fs::exists(cb)) {
    std::ifstream in(cb);
    a.codebook = model::read_codebook_json(in);
  }
  return a;
}

void save_bundle(const std::string& dir, const Artifacts& a, const model::EqNetConfig& ec, std::uint64_t dataset_fingerprint) {
  fs::create_directories(dir);
  const std::uint64_t fp = ec.fingerprint();
  if (a.fq) nn::save_model(*a.fq, (fs::path(dir) / "fq.weights").string(), fp);
  if (a.g) nn::save_model(*a.g, (fs::path(dir) / "g.weights").string(), fp);
  if (a.fe) nn::save_model(*a.fe, (fs::path(dir) / "fe.weights").string(), fp);
  if (a.codebook) {
    std::ofstream out(fs::path(dir) / "codebook.json");
    model::write_codebook_json(out, *a.codebook);
  }
  json j;
  j["system"] = {{"nt", ec.sys.nt}, {"nr", ec.sys.nr}, {"k", ec.sys.k}};
  j["eqnet"] = eqnet_to_json(ec);
  j["fingerprint"] = fp;
  j["dataset_fingerprint"] = dataset_fingerprint;
  std::ofstream out(fs::path(dir) / "config.json");
  out << j.dump(2) << '\n';
  if (!out) throw ConfigError("cannot write bundle config in " + dir);
}

}  // namespace eqnet::harness

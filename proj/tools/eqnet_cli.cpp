// SPDX-License-Identifier: Apache-2.0
//
// eqnet command-line tool. Exit codes: 0 success, 1 usage error, 2 runtime
// failure.

#include <CLI11.hpp>
#include <exception>
#include <functional>
#include <iostream>

#include "commands.hpp"

namespace {

constexpr int kUsage = 1;
constexpr int kRuntime = 2;

void add_common(CLI::App* sub, eqnet::cli::Common& c, bool needs_config = true) {
  auto* opt = sub->add_option("--config", c.config, "Experiment configuration (JSON)");
  if (needs_config) opt->required();
  sub->add_option("--seed", c.seed, "Override the configured seed");
  sub->add_option("--out", c.out, "Output path");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"eqnet: soft-output MIMO detection and LLR compression toolkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  eqnet::cli::Common common;
  std::function<int()> action;

  auto simple = [&](const char* name, const char* help, int (*fn)(const eqnet::cli::Common&)) {
    auto* sub = app.add_subcommand(name, help);
    add_common(sub, common);
    sub->callback([&, fn] { action = [&, fn] { return fn(common); }; });
  };
  simple("gen-data", "Generate an ML-labelled training dataset", eqnet::cli::gen_data);
  simple("find-grid", "Search the six-point SNR grid from ML BLER", eqnet::cli::find_grid);
  simple("train-q", "Train the quantization autoencoder (f_Q, g)", eqnet::cli::train_q);
  simple("train-e", "Train the estimation encoder f_E against a frozen f_Q", eqnet::cli::train_e);
  simple("train-joint", "Train the single-stage f_E + g baseline", eqnet::cli::train_joint);
  simple("eval-bler", "Coded BLER sweep for the configured pipeline", eqnet::cli::eval_bler);

  int nb = 6;
  auto* fit = app.add_subcommand("fit-codebook", "Fit per-dimension k-means++ latent quantizers");
  add_common(fit, common);
  fit->add_option("--nb", nb, "Bits per latent dimension")->check(CLI::Range(1, 8));
  fit->callback([&] { action = [&] { return eqnet::cli::fit_codebook(common, nb); }; });

  std::vector<int> dims;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  auto* bott = app.add_subcommand("sweep-bottleneck", "BLER versus autoencoder latent dimension");
  add_common(bott, common);
  bott->add_option("--dims", dims, "Latent dimensions")->delimiter(',')->required();
  bott->add_option("--seeds", seeds, "Training seeds")->delimiter(',');
  bott->callback([&] { action = [&] { return eqnet::cli::sweep_bottleneck(common, dims, seeds); }; });

  eqnet::cli::RobustOptions robust;
  auto* rob = app.add_subcommand("sweep-robust", "CSI-error or channel-shift robustness sweep");
  add_common(rob, common);
  rob->add_option("--kind", robust.kind, "csi or shift")->check(CLI::IsMember({"csi", "shift"}));
  auto* snr_opt = rob->add_option("--snr", robust.snr_db, "SNR in dB for the CSI sweep");
  rob->add_option("--sigmas", robust.sigmas, "CSI error standard deviations")->delimiter(',');
  rob->add_option("--shift-model-dir", robust.shift_model_dir, "Bundle trained on the shifted channel");
  rob->add_option("--rho", robust.rho, "Correlation of the shifted channel")->check(CLI::Range(0.0, 0.999));
  rob->callback([&] {
    robust.snr_set = snr_opt->count() > 0;
    action = [&] { return eqnet::cli::sweep_robust(common, robust); };
  });

  std::vector<std::string> pipelines{"ml", "zfsic"};
  std::vector<int> batches{1, 16, 8192};
  int reps = 100;
  auto* bench = app.add_subcommand("bench", "Wall-clock latency per pipeline and batch size");
  add_common(bench, common);
  bench->add_option("--pipelines", pipelines, "Pipelines to time")->delimiter(',');
  bench->add_option("--batches", batches, "Batch sizes")->delimiter(',');
  bench->add_option("--reps", reps, "Timed calls per batch size")->check(CLI::Range(2, 1000000));
  bench->callback([&] { action = [&] { return eqnet::cli::bench(common, pipelines, batches, reps); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    return action();
  } catch (const std::exception& e) {
    std::cerr << "eqnet: error: " << e.what() << '\n';
    return kRuntime;
  }
}

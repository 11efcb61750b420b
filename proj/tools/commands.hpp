// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace eqnet::cli {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int gen_data(const Common& c);
int find_grid(const Common& c);
int train_q(const Common& c);
int train_e(const Common& c);
int train_joint(const Common& c);
int fit_codebook(const Common& c, int nb);
int eval_bler(const Common& c);
int sweep_bottleneck(const Common& c, const std::vector<int>& dims, const std::vector<std::uint64_t>& seeds);

struct RobustOptions {
  std::string kind = "csi";
  double snr_db = 0.0;
  bool snr_set = false;
  std::vector<double> sigmas;
  std::string shift_model_dir;
  double rho = 0.9;
};
int sweep_robust(const Common& c, const RobustOptions& o);

int bench(const Common& c, const std::vector<std::string>& pipelines, const std::vector<int>& batches, int reps);

}  // namespace eqnet::cli

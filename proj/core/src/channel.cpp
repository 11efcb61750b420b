// SPDX-License-Identifier: Apache-2.0

#include "eqnet/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace eqnet::channel {

void SystemConfig::validate() const {
  if (nt < 1) throw std::invalid_argument("SystemConfig: Nt must be at least 1");
  if (nr < nt) throw std::invalid_argument("SystemConfig: Nr must be at least Nt");
  if (k < 2 || k % 2 != 0) throw std::invalid_argument("SystemConfig: K must be even and at least 2");
}

std::string SystemConfig::label() const {
  return std::to_string(nt) + "x" + std::to_string(nr) + "-" + std::to_string(1 << k) + "qam";
}

ComplexMatrix sample_rayleigh(const SystemConfig& cfg, RngStream& rng) {
  cfg.validate();
  const auto rows = static_cast<std::size_t>(cfg.nr);
  const auto cols = static_cast<std::size_t>(cfg.nt);
  return ComplexMatrix(rows, cols, numerics::sample_complex_gaussian(rows * cols, 1.0, rng));
}

std::vector<double> exponential_correlation_cholesky(int n, double rho) {
  std::vector<double> r(static_cast<std::size_t>(n * n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) r[i * n + j] = std::pow(rho, std::abs(i - j));
  std::vector<double> l(r.size(), 0.0);
  for (int j = 0; j < n; ++j) {
    double d = r[j * n + j];
    for (int p = 0; p < j; ++p) d -= l[j * n + p] * l[j * n + p];
    l[j * n + j] = std::sqrt(d);
    for (int i = j + 1; i < n; ++i) {
      double s = r[i * n + j];
      for (int p = 0; p < j; ++p) s -= l[i * n + p] * l[j * n + p];
      l[i * n + j] = s / l[j * n + j];
    }
  }
  return l;
}

ComplexMatrix sample_correlated(const SystemConfig& cfg, double rho, RngStream& rng) {
  if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("sample_correlated: rho must lie in [0, 1)");
  const ComplexMatrix w = sample_rayleigh(cfg, rng);
  const int nr = cfg.nr;
  const int nt = cfg.nt;
  const auto lr = exponential_correlation_cholesky(nr, rho);
  const auto lt = exponential_correlation_cholesky(nt, rho);

  // H = L_r * W * L_t^T
  ComplexMatrix tmp(nr, nt);
  for (int i = 0; i < nr; ++i)
    for (int j = 0; j < nt; ++j) {
      numerics::cplx acc = 0.0;
      for (int p = 0; p <= i; ++p) acc += lr[i * nr + p] * w(p, j);
      tmp(i, j) = acc;
    }
  ComplexMatrix h(nr, nt);
  for (int i = 0; i < nr; ++i)
    for (int j = 0; j < nt; ++j) {
      numerics::cplx acc = 0.0;
      for (int p = 0; p <= j; ++p) acc += tmp(i, p) * lt[j * nt + p];
      h(i, j) = acc;
    }
  return h;
}

double snr_to_sigma(double snr_db, const SystemConfig& cfg) {
  return std::sqrt(static_cast<double>(cfg.nt * cfg.nr) * std::pow(10.0, -snr_db / 10.0));
}

double sigma_to_snr(double sigma_n, const SystemConfig& cfg) {
  return 10.0 * std::log10(static_cast<double>(cfg.nt * cfg.nr) / (sigma_n * sigma_n));
}

ChannelUse transmit(const ComplexMatrix& h, const ComplexVector& x, double sigma_n, RngStream& rng) {
  if (h.cols() != x.size()) throw std::invalid_argument("transmit: H columns must match x length");
  if (!(sigma_n >= 0.0)) throw std::invalid_argument("transmit: sigma_n must be non-negative");
  ChannelUse use;
  use.y = h * std::span<const numerics::cplx>(x);
  const auto noise = numerics::sample_complex_gaussian(h.rows(), sigma_n * sigma_n, rng);
  for (std::size_t i = 0; i < use.y.size(); ++i) use.y[i] += noise[i];
  use.h = h;
  use.sigma_n = sigma_n;
  return use;
}

ComplexMatrix corrupt_csi(const ComplexMatrix& h, double sigma_csi, RngStream& rng) {
  if (!(sigma_csi >= 0.0)) throw std::invalid_argument("corrupt_csi: sigma_csi must be non-negative");
  if (sigma_csi == 0.0) return h;
  const auto noise = numerics::sample_complex_gaussian(h.rows() * h.cols(), sigma_csi * sigma_csi, rng);
  ComplexMatrix out = h;
  auto e = out.entries();
  for (std::size_t i = 0; i < e.size(); ++i) e[i] += noise[i];
  return out;
}

}  // namespace eqnet::channel

// SPDX-License-Identifier: Apache-2.0
//
// Narrowband MIMO system model y = Hx + n, channel sampling and SNR
// bookkeeping. SNR is E[||H||_F^2] / sigma_n^2 with sigma_n^2 the per-entry
// complex noise variance; for unit-variance channels E[||H||_F^2] = Nt*Nr.

#pragma once

#include <cstddef>
#include <string>

#include "eqnet/numerics.hpp"

namespace eqnet::channel {

using numerics::ComplexMatrix;
using numerics::ComplexVector;
using numerics::RngStream;

struct SystemConfig {
  int nt = 2;
  int nr = 2;
  int k = 4;

  int latent_dim() const noexcept { return 3 * nt; }
  int llr_count() const noexcept { return nt * k; }

  /// Throws std::invalid_argument unless Nr >= Nt >= 1 and K is even.
  void validate() const;
  std::string label() const;

  bool operator==(const SystemConfig&) const = default;
};

struct ChannelUse {
  ComplexVector y;
  ComplexMatrix h;
  double sigma_n = 1.0;
};

/// Nr x Nt matrix with i.i.d. CN(0, 1) entries.
ComplexMatrix sample_rayleigh(const SystemConfig& cfg, RngStream& rng);

/// Kronecker model H = L_r W L_t^T with exponential correlation
/// R[i][j] = rho^|i-j| on both ends (L the Cholesky factor of R).
ComplexMatrix sample_correlated(const SystemConfig& cfg, double rho, RngStream& rng);

/// sigma_n = sqrt(Nt*Nr * 10^(-snr_db/10)).
double snr_to_sigma(double snr_db, const SystemConfig& cfg);
double sigma_to_snr(double sigma_n, const SystemConfig& cfg);

ChannelUse transmit(const ComplexMatrix& h, const ComplexVector& x, double sigma_n, RngStream& rng);

/// H + N with N i.i.d. CN(0, sigma_csi^2).
ComplexMatrix corrupt_csi(const ComplexMatrix& h, double sigma_csi, RngStream& rng);

/// Lower-triangular Cholesky factor of the n x n exponential correlation matrix.
std::vector<double> exponential_correlation_cholesky(int n, double rho);

}  // namespace eqnet::channel

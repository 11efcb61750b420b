// SPDX-License-Identifier: Apache-2.0
//
// Soft-output MIMO detection.
//
// LLR convention: Lambda = log P(y | b = 1) / P(y | b = 0), so a positive value
// favors bit 1. Vectors are stream-major: values[k*K + i] is bit i of stream k.
// All exponents carry the 1/sigma_n^2 factor. Natural-domain outputs are
// clipped to +-kLlrClip.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "eqnet/channel.hpp"
#include "eqnet/modem.hpp"
#include "eqnet/numerics.hpp"

namespace eqnet::detect {

using numerics::ComplexMatrix;
using numerics::ComplexVector;
using numerics::cplx;

inline constexpr double kLlrClip = 80.0;

/// Largest log2 of the candidate count accepted by the ML enumerators.
inline constexpr int kMaxEnumerationBits = 20;

enum class LlrDomain { natural, tanh };

struct LlrVector {
  std::vector<double> values;
  LlrDomain domain = LlrDomain::natural;

  std::size_t size() const noexcept { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
};

/// y_hat = Q^H y and the triangular factor of H = QR.
struct QrChannel {
  ComplexVector y_hat;
  ComplexMatrix r;
  double sigma_n = 1.0;
};

QrChannel to_qr_channel(const channel::ChannelUse& use);

/// Lossless 3*Nt-real representation of the ZF-SIC output. Per stream k:
/// z[3k] = Re(t_k)/sigma_n, z[3k+1] = Im(t_k)/sigma_n, z[3k+2] = r_kk/sigma_n,
/// where t_k is the interference-cancelled observation of stream k.
struct ZfSicCode {
  std::vector<double> z;
};

/// Exact LLRs by enumerating all 2^(K*Nt) transmit vectors.
LlrVector ml_llr(const channel::ChannelUse& use, const modem::QamConstellation& c);

/// Same quantity evaluated in the rotated space, exponents -||y_hat - Rx||^2/sigma^2.
LlrVector ml_llr_qr(const QrChannel& qc, const modem::QamConstellation& c);

/// K LLRs of one stream under t = r*x + n, n ~ CN(0, sigma_n^2).
std::vector<double> scalar_llr(cplx t, double r, double sigma_n, const modem::QamConstellation& c);
void scalar_llr(cplx t, double r, double sigma_n, const modem::QamConstellation& c, std::span<double> out);

/// Soft-output zero-forcing with successive interference cancellation on the
/// triangular system, detecting from the last stream upwards, no reordering.
LlrVector zf_sic_llr(const QrChannel& qc, const modem::QamConstellation& c);

/// Runs the cancellation/hard-decision recursion of zf_sic_llr and emits the
/// 3*Nt code instead of LLRs.
ZfSicCode zf_sic_compress(const QrChannel& qc, const modem::QamConstellation& c);

/// Maps a ZfSicCode back to the full ZF-SIC LLR vector.
LlrVector zf_sic_expand(const ZfSicCode& code, const modem::QamConstellation& c);

}  // namespace eqnet::detect

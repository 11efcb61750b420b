// SPDX-License-Identifier: Apache-2.0

#include "eqnet/detect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "eqnet/errors.hpp"

namespace eqnet::detect {
namespace {

double clip_llr(double v) { return std::clamp(v, -kLlrClip, kLlrClip); }

// log(s1) - log(s0) where at least one of the sums is >= 1.
double llr_from_sums(double s1, double s0) {
  if (s0 <= 0.0) return kLlrClip;
  if (s1 <= 0.0) return -kLlrClip;
  return clip_llr(std::log(s1) - std::log(s0));
}

void check_sigma(double sigma_n) {
  if (!(sigma_n > 0.0) || !std::isfinite(sigma_n)) throw std::invalid_argument("detector: sigma_n must be positive");
}

// Shared enumerator for ||y - A x||^2 / sigma^2 over every x in C^Nt.
LlrVector enumerate_llr(std::span<const cplx> y, const ComplexMatrix& a, double sigma_n,
                        const modem::QamConstellation& c) {
  check_sigma(sigma_n);
  const std::size_t nt = a.cols();
  const std::size_t rows = a.rows();
  const int k = c.bits_per_symbol();
  if (y.size() != rows) throw std::invalid_argument("ml_llr: observation length does not match channel rows");
  if (static_cast<long>(k) * static_cast<long>(nt) > kMaxEnumerationBits) {
    throw SizeError("ml_llr: 2^(K*Nt) exceeds the enumeration guard");
  }
  const std::size_t m = c.size();
  const std::size_t total = std::size_t{1} << (static_cast<std::size_t>(k) * nt);
  const double inv_var = 1.0 / (sigma_n * sigma_n);

  // cols[(j*m + p)*rows + r] = a(r, j) * point(p)
  std::vector<cplx> cols(nt * m * rows);
  for (std::size_t j = 0; j < nt; ++j)
    for (std::size_t p = 0; p < m; ++p)
      for (std::size_t r = 0; r < rows; ++r) cols[(j * m + p) * rows + r] = a(r, j) * c.point(p);

  std::vector<double> metric(total);
  std::vector<cplx> residual((nt + 1) * rows);
  std::copy(y.begin(), y.end(), residual.begin());

  // Depth-first over streams; the last stream varies fastest so that the flat
  // index is sum_j label_j * m^(nt-1-j).
  auto descend = [&](auto&& self, std::size_t level, std::size_t index) -> void {
    const cplx* res = residual.data() + level * rows;
    if (level + 1 == nt) {
      for (std::size_t p = 0; p < m; ++p) {
        const cplx* col = cols.data() + (level * m + p) * rows;
        double d = 0.0;
        for (std::size_t r = 0; r < rows; ++r) d += std::norm(res[r] - col[r]);
        metric[index * m + p] = d * inv_var;
      }
      return;
    }
    cplx* next = residual.data() + (level + 1) * rows;
    for (std::size_t p = 0; p < m; ++p) {
      const cplx* col = cols.data() + (level * m + p) * rows;
      for (std::size_t r = 0; r < rows; ++r) next[r] = res[r] - col[r];
      self(self, level + 1, index * m + p);
    }
  };
  descend(descend, 0, 0);

  const double dmin = *std::min_element(metric.begin(), metric.end());
  std::vector<double> marginal(nt * m, 0.0);
  std::vector<std::size_t> labels(nt, 0);
  for (std::size_t idx = 0; idx < total; ++idx) {
    const double e = std::exp(dmin - metric[idx]);
    for (std::size_t j = 0; j < nt; ++j) marginal[j * m + labels[j]] += e;
    for (std::size_t j = nt; j-- > 0;) {
      if (++labels[j] < m) break;
      labels[j] = 0;
    }
  }

  LlrVector out;
  out.values.resize(nt * static_cast<std::size_t>(k));
  for (std::size_t j = 0; j < nt; ++j)
    for (int i = 0; i < k; ++i) {
      double s1 = 0.0;
      double s0 = 0.0;
      for (std::size_t p = 0; p < m; ++p) (c.bit(p, i) ? s1 : s0) += marginal[j * m + p];
      out.values[j * static_cast<std::size_t>(k) + static_cast<std::size_t>(i)] = llr_from_sums(s1, s0);
    }
  return out;
}

std::size_t hard_decision(cplx t, double r, const modem::QamConstellation& c) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < c.size(); ++p) {
    const double d = std::norm(t - r * c.point(p));
    if (d < best_d) {
      best_d = d;
      best = p;
    }
  }
  return best;
}

// Shared recursion for zf_sic_llr and zf_sic_compress: calls emit(k, t_k, r_kk)
// for k = Nt-1 .. 0.
template <typename Emit>
void zf_sic_recursion(const QrChannel& qc, const modem::QamConstellation& c, Emit&& emit) {
  check_sigma(qc.sigma_n);
  const std::size_t nt = qc.r.cols();
  if (qc.r.rows() != nt || qc.y_hat.size() != nt) throw std::invalid_argument("zf_sic: R must be Nt x Nt and y_hat of length Nt");
  std::vector<cplx> decided(nt);
  for (std::size_t k = nt; k-- > 0;) {
    const double rkk = qc.r(k, k).real();
    if (!(rkk > 0.0)) throw SingularMatrixError("zf_sic: stream " + std::to_string(k) + " has a zero diagonal entry");
    cplx t = qc.y_hat[k];
    for (std::size_t j = k + 1; j < nt; ++j) t -= qc.r(k, j) * decided[j];
    emit(k, t, rkk);
    decided[k] = c.point(hard_decision(t, rkk, c));
  }
}

}  // namespace

QrChannel to_qr_channel(const channel::ChannelUse& use) {
  auto factors = numerics::qr_decompose(use.h);
  QrChannel qc;
  qc.y_hat = factors.q.adjoint() * std::span<const cplx>(use.y);
  qc.r = std::move(factors.r);
  qc.sigma_n = use.sigma_n;
  return qc;
}

LlrVector ml_llr(const channel::ChannelUse& use, const modem::QamConstellation& c) {
  return enumerate_llr(use.y, use.h, use.sigma_n, c);
}

LlrVector ml_llr_qr(const QrChannel& qc, const modem::QamConstellation& c) {
  return enumerate_llr(qc.y_hat, qc.r, qc.sigma_n, c);
}

void scalar_llr(cplx t, double r, double sigma_n, const modem::QamConstellation& c, std::span<double> out) {
  check_sigma(sigma_n);
  if (!(r >= 0.0)) throw std::invalid_argument("scalar_llr: r must be non-negative");
  const int k = c.bits_per_symbol();
  if (out.size() != static_cast<std::size_t>(k)) throw std::invalid_argument("scalar_llr: output span must hold K values");
  // Fold the noise scale into the observation so that the result depends on
  // (t/sigma, r/sigma) only.
  const cplx tn = t / sigma_n;
  const double rn = r / sigma_n;
  const std::size_t m = c.size();
  double metric[256];
  double dmin = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < m; ++p) {
    metric[p] = std::norm(tn - rn * c.point(p));
    dmin = std::min(dmin, metric[p]);
  }
  double s1[8] = {};
  double s0[8] = {};
  for (std::size_t p = 0; p < m; ++p) {
    const double e = std::exp(dmin - metric[p]);
    for (int i = 0; i < k; ++i) (c.bit(p, i) ? s1[i] : s0[i]) += e;
  }
  for (int i = 0; i < k; ++i) out[static_cast<std::size_t>(i)] = llr_from_sums(s1[i], s0[i]);
}

std::vector<double> scalar_llr(cplx t, double r, double sigma_n, const modem::QamConstellation& c) {
  std::vector<double> out(static_cast<std::size_t>(c.bits_per_symbol()));
  scalar_llr(t, r, sigma_n, c, out);
  return out;
}

LlrVector zf_sic_llr(const QrChannel& qc, const modem::QamConstellation& c) {
  const auto k = static_cast<std::size_t>(c.bits_per_symbol());
  LlrVector out;
  out.values.resize(qc.r.cols() * k);
  zf_sic_recursion(qc, c, [&](std::size_t stream, cplx t, double rkk) {
    scalar_llr(t, rkk, qc.sigma_n, c, std::span<double>(out.values).subspan(stream * k, k));
  });
  return out;
}

ZfSicCode zf_sic_compress(const QrChannel& qc, const modem::QamConstellation& c) {
  ZfSicCode code;
  code.z.resize(3 * qc.r.cols());
  const double sigma = qc.sigma_n;
  zf_sic_recursion(qc, c, [&](std::size_t stream, cplx t, double rkk) {
    code.z[3 * stream] = t.real() / sigma;
    code.z[3 * stream + 1] = t.imag() / sigma;
    code.z[3 * stream + 2] = rkk / sigma;
  });
  return code;
}

LlrVector zf_sic_expand(const ZfSicCode& code, const modem::QamConstellation& c) {
  if (code.z.empty() || code.z.size() % 3 != 0) throw std::invalid_argument("zf_sic_expand: code length must be 3*Nt");
  const std::size_t nt = code.z.size() / 3;
  const auto k = static_cast<std::size_t>(c.bits_per_symbol());
  LlrVector out;
  out.values.resize(nt * k);
  for (std::size_t s = 0; s < nt; ++s) {
    const cplx t(code.z[3 * s], code.z[3 * s + 1]);
    scalar_llr(t, code.z[3 * s + 2], 1.0, c, std::span<double>(out.values).subspan(s * k, k));
  }
  return out;
}

}  // namespace eqnet::detect

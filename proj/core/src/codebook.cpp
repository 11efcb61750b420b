// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <nlohmann/json.hpp>
#include <ostream>

#include "eqnet/errors.hpp"
#include "eqnet/model.hpp"

namespace eqnet::model {
namespace {

// Squared distance from every sample to the nearest of the chosen centers,
// updated incrementally as centers are added.
std::vector<double> kmeanspp_seed(const std::vector<double>& data, int count, numerics::RngStream& rng) {
  std::vector<double> centers;
  centers.push_back(data[rng.uniform_index(data.size())]);
  std::vector<double> d2(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) d2[i] = (data[i] - centers[0]) * (data[i] - centers[0]);
  while (static_cast<int>(centers.size()) < count) {
    double total = 0.0;
    for (double v : d2) total += v;
    const double target = rng.uniform() * total;
    double acc = 0.0;
    std::size_t pick = data.size();
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (d2[i] <= 0.0) continue;
      acc += d2[i];
      pick = i;
      if (acc > target) break;
    }
    const double c = data[pick];
    centers.push_back(c);
    for (std::size_t i = 0; i < data.size(); ++i) d2[i] = std::min(d2[i], (data[i] - c) * (data[i] - c));
  }
  std::sort(centers.begin(), centers.end());
  return centers;
}

}  // namespace

Lloyd1dResult fit_levels(std::vector<double> data, int count, numerics::RngStream& rng, int max_iterations,
                         double tolerance) {
  if (count < 1) throw std::invalid_argument("fit_levels: count must be positive");
  for (double v : data)
    if (!std::isfinite(v)) throw std::invalid_argument("fit_levels: non-finite sample");
  std::sort(data.begin(), data.end());
  std::size_t n_distinct = data.empty() ? 0 : 1;
  for (std::size_t i = 1; i < data.size(); ++i) n_distinct += data[i] != data[i - 1] ? 1 : 0;
  if (n_distinct < static_cast<std::size_t>(count)) {
    throw DegenerateDataError("fit_levels: " + std::to_string(n_distinct) + " distinct values for " + std::to_string(count) +
                              " levels");
  }

  const std::size_t n = data.size();
  std::vector<double> s1(n + 1, 0.0);
  std::vector<double> s2(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    s1[i + 1] = s1[i] + data[i];
    s2[i + 1] = s2[i] + data[i] * data[i];
  }

  Lloyd1dResult res;
  res.levels = kmeanspp_seed(data, count, rng);
  auto& c = res.levels;
  std::vector<std::size_t> edge(static_cast<std::size_t>(count) + 1);
  for (int it = 0; it < max_iterations; ++it) {
    // Cluster j owns data[edge[j], edge[j+1]); a sample on a midpoint goes to
    // the lower cluster.
    edge.front() = 0;
    edge.back() = n;
    for (int j = 1; j < count; ++j) {
      const double mid = 0.5 * (c[static_cast<std::size_t>(j - 1)] + c[static_cast<std::size_t>(j)]);
      edge[static_cast<std::size_t>(j)] = static_cast<std::size_t>(std::upper_bound(data.begin(), data.end(), mid) - data.begin());
    }
    double shift = 0.0;
    double distortion = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) {
      const std::size_t a = edge[j];
      const std::size_t b = edge[j + 1];
      if (b > a) {
        const double mean = (s1[b] - s1[a]) / static_cast<double>(b - a);
        shift = std::max(shift, std::abs(mean - c[j]));
        c[j] = mean;
        distortion += std::max(0.0, (s2[b] - s2[a]) - mean * (s1[b] - s1[a]));
      }
    }
    res.distortion.push_back(distortion / static_cast<double>(n));
    if (shift < tolerance) break;
  }
  return res;
}

std::uint32_t Codebook::index(int dim, double v) const {
  const auto& l = levels.at(static_cast<std::size_t>(dim));
  const auto it = std::lower_bound(l.begin(), l.end(), v);
  if (it == l.begin()) return 0;
  if (it == l.end()) return static_cast<std::uint32_t>(l.size() - 1);
  const auto i = static_cast<std::uint32_t>(it - l.begin());
  return (v - l[i - 1] <= l[i] - v) ? i - 1 : i;
}

Codebook fit_codebook(const nn::Model& fq, const MatrixF& llr_tanh, int nb, std::uint64_t seed) {
  if (nb < 1 || nb > 8) throw std::invalid_argument("fit_codebook: Nb must lie in 1..8");
  if (llr_tanh.cols() == 0) throw std::invalid_argument("fit_codebook: empty dataset");
  const auto dims = static_cast<Eigen::Index>(fq.output_width());
  std::vector<std::vector<double>> values(static_cast<std::size_t>(dims));
  for (auto& v : values) v.reserve(static_cast<std::size_t>(llr_tanh.cols()));
  constexpr Eigen::Index kChunk = 8192;
  for (Eigen::Index begin = 0; begin < llr_tanh.cols(); begin += kChunk) {
    const Eigen::Index count = std::min(kChunk, llr_tanh.cols() - begin);
    const MatrixF z = fq.predict(MatrixF(llr_tanh.middleCols(begin, count)));
    for (Eigen::Index c = 0; c < z.cols(); ++c)
      for (Eigen::Index d = 0; d < dims; ++d) values[static_cast<std::size_t>(d)].push_back(z(d, c));
  }
  Codebook cb;
  cb.nb = nb;
  numerics::RngStream root(seed, 0xc0deb00c);
  for (Eigen::Index d = 0; d < dims; ++d) {
    auto rng = root.split(static_cast<std::uint64_t>(d));
    cb.levels.push_back(fit_levels(std::move(values[static_cast<std::size_t>(d)]), 1 << nb, rng).levels);
  }
  return cb;
}

void write_codebook_json(std::ostream& out, const Codebook& cb) {
  nlohmann::json j;
  j["nb"] = cb.nb;
  j["dims"] = cb.dims();
  j["levels"] = cb.levels;
  out << j.dump(1) << '\n';
}

Codebook read_codebook_json(std::istream& in) {
  Codebook cb;
  try {
    const auto j = nlohmann::json::parse(in);
    cb.nb = j.at("nb").get<int>();
    cb.levels = j.at("levels").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("codebook: ") + e.what());
  }
  if (cb.nb < 1 || cb.nb > 8) throw ConfigError("codebook: Nb must lie in 1..8");
  for (const auto& l : cb.levels) {
    if (l.size() != (std::size_t{1} << cb.nb)) throw ConfigError("codebook: level count must be 2^Nb");
    for (std::size_t i = 1; i < l.size(); ++i)
      if (!(l[i] > l[i - 1])) throw ConfigError("codebook: levels must be strictly increasing");
  }
  return cb;
}

Bitword pack_indices(std::span<const std::uint32_t> indices, int nb) {
  if (nb < 1 || nb > 32) throw std::invalid_argument("pack_indices: Nb out of range");
  Bitword w;
  w.bit_count = indices.size() * static_cast<std::size_t>(nb);
  w.bytes.assign((w.bit_count + 7) / 8, 0);
  std::size_t pos = 0;
  for (std::uint32_t idx : indices) {
    if (nb < 32 && (idx >> nb) != 0) throw std::invalid_argument("pack_indices: index does not fit in Nb bits");
    for (int b = nb - 1; b >= 0; --b, ++pos)
      if ((idx >> b) & 1U) w.bytes[pos / 8] |= static_cast<std::uint8_t>(0x80U >> (pos % 8));
  }
  return w;
}

std::vector<std::uint32_t> unpack_indices(const Bitword& w, int nb) {
  if (nb < 1 || nb > 32) throw std::invalid_argument("unpack_indices: Nb out of range");
  if (w.bit_count % static_cast<std::size_t>(nb) != 0 || w.bytes.size() != (w.bit_count + 7) / 8) {
    throw std::invalid_argument("unpack_indices: malformed bitword");
  }
  std::vector<std::uint32_t> out(w.bit_count / static_cast<std::size_t>(nb), 0);
  std::size_t pos = 0;
  for (auto& idx : out)
    for (int b = 0; b < nb; ++b, ++pos) idx = (idx << 1) | ((w.bytes[pos / 8] >> (7 - pos % 8)) & 1U);
  return out;
}

}  // namespace eqnet::model

// SPDX-License-Identifier: Apache-2.0

#include "eqnet/dataset.hpp"

#include <cstdio>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include "eqnet/detect.hpp"
#include "eqnet/errors.hpp"
#include "link.hpp"

namespace eqnet::harness {
namespace {

constexpr char kMagic[4] = {'E', 'Q', 'D', 'S'};

template <typename T>
void put(std::ostream& out, T v) {
  static_assert(std::endian::native == std::endian::little, "dataset I/O assumes a little-endian host");
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw ConfigError("dataset: truncated header");
  return v;
}

}  // namespace

numerics::ComplexMatrix ChannelModel::sample(const SystemConfig& cfg, numerics::RngStream& rng) const {
  return kind == ChannelKind::rayleigh ? channel::sample_rayleigh(cfg, rng) : channel::sample_correlated(cfg, rho, rng);
}

std::string ChannelModel::label() const {
  if (kind == ChannelKind::rayleigh) return "rayleigh";
  char buf[48];
  std::snprintf(buf, sizeof buf, "correlated(%g)", rho);
  return buf;
}

int uses_per_codeword(const SystemConfig& cfg, std::size_t codeword_bits) {
  const auto per = static_cast<std::size_t>(cfg.llr_count());
  return static_cast<int>((codeword_bits + per - 1) / per);
}

model::Samples Dataset::to_samples() const {
  const auto n = static_cast<Eigen::Index>(count());
  const int ny = 2 * sys.nr;
  const int nh = 2 * sys.nt * sys.nr;
  const int nl = sys.llr_count();
  model::Samples s{model::MatrixF(nl, n), model::MatrixF(ny, n), model::MatrixF(nh, n), model::MatrixF(1, n)};
  const std::size_t w = record_width();
  for (Eigen::Index i = 0; i < n; ++i) {
    const float* r = records.data() + static_cast<std::size_t>(i) * w;
    for (int j = 0; j < ny; ++j) s.y(j, i) = r[j];
    for (int j = 0; j < nh; ++j) s.h(j, i) = r[ny + j];
    s.sigma(0, i) = r[ny + nh];
    for (int j = 0; j < nl; ++j) s.llr(j, i) = std::tanh(0.5f * r[ny + nh + 1 + j]);
  }
  return s;
}

model::MatrixF Dataset::llr_natural() const {
  const auto n = static_cast<Eigen::Index>(count());
  const int nl = sys.llr_count();
  const std::size_t off = record_width() - static_cast<std::size_t>(nl);
  model::MatrixF m(nl, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int j = 0; j < nl; ++j) m(j, i) = records[static_cast<std::size_t>(i) * record_width() + off + static_cast<std::size_t>(j)];
  return m;
}

channel::ChannelUse Dataset::channel_use(std::size_t i) const {
  if (i >= count()) throw std::out_of_range("Dataset::channel_use: index out of range");
  const float* r = records.data() + i * record_width();
  const auto nr = static_cast<std::size_t>(sys.nr);
  const auto nt = static_cast<std::size_t>(sys.nt);
  channel::ChannelUse use;
  use.y.resize(nr);
  for (std::size_t j = 0; j < nr; ++j) use.y[j] = {r[j], r[nr + j]};
  use.h = numerics::ComplexMatrix(nr, nt);
  const float* h = r + 2 * nr;
  auto e = use.h.entries();
  for (std::size_t j = 0; j < e.size(); ++j) e[j] = {h[j], h[e.size() + j]};
  use.sigma_n = r[2 * nr + 2 * nr * nt];
  return use;
}

void write_dataset(const std::string& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kDatasetVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.sys.nt));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.sys.nr));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.sys.k));
  put<std::uint64_t>(out, ds.count());
  put<std::uint64_t>(out, ds.seed);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.snr_db.size()));
  for (double s : ds.snr_db) put<double>(out, s);
  out.write(reinterpret_cast<const char*>(ds.records.data()), static_cast<std::streamsize>(ds.records.size() * sizeof(float)));
  if (!out) throw ConfigError("write failed: " + path);
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open dataset " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw ConfigError("dataset: bad magic in " + path);
  const auto version = get<std::uint32_t>(in);
  if (version != kDatasetVersion) throw ConfigError("dataset: unsupported version " + std::to_string(version));
  Dataset ds;
  ds.sys.nt = static_cast<int>(get<std::uint32_t>(in));
  ds.sys.nr = static_cast<int>(get<std::uint32_t>(in));
  ds.sys.k = static_cast<int>(get<std::uint32_t>(in));
  try {
    ds.sys.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("dataset: ") + e.what());
  }
  const auto count = get<std::uint64_t>(in);
  ds.seed = get<std::uint64_t>(in);
  const auto n_snr = get<std::uint32_t>(in);
  if (n_snr > 4096) throw ConfigError("dataset: implausible SNR count");
  for (std::uint32_t i = 0; i < n_snr; ++i) ds.snr_db.push_back(get<double>(in));
  ds.records.resize(count * ds.record_width());
  in.read(reinterpret_cast<char*>(ds.records.data()), static_cast<std::streamsize>(ds.records.size() * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != ds.records.size() * sizeof(float)) {
    throw ConfigError("dataset: record count does not match header");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw ConfigError("dataset: trailing bytes");
  for (float f : ds.records)
    if (!std::isfinite(f)) throw ConfigError("dataset: non-finite value");
  return ds;
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(std::clamp<long>(threads, 1, static_cast<long>(std::max<std::size_t>(n, 1))));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto run = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

Dataset generate_dataset(const SystemConfig& cfg, const ChannelModel& ch, const std::vector<double>& snr_db, int packets,
                         std::uint64_t seed, int threads) {
  cfg.validate();
  if (packets < 1) throw std::invalid_argument("generate_dataset: packets must be >= 1");
  if (snr_db.empty()) throw std::invalid_argument("generate_dataset: empty SNR list");
  const auto code = ldpc::build_code();
  const auto c = modem::QamConstellation::build(cfg.k);
  Dataset ds;
  ds.sys = cfg;
  ds.seed = seed;
  ds.snr_db = snr_db;
  const std::size_t w = ds.record_width();
  const auto uses = static_cast<std::size_t>(uses_per_codeword(cfg, code.n()));
  const std::size_t total_packets = snr_db.size() * static_cast<std::size_t>(packets);
  ds.records.resize(total_packets * uses * w);

  parallel_for(total_packets, threads, [&](std::size_t job) {
    const std::size_t s = job / static_cast<std::size_t>(packets);
    const std::size_t p = job % static_cast<std::size_t>(packets);
    numerics::RngStream rng(seed, numerics::mix_seed(0xda7a0000ULL + s, p));
    const double sigma = channel::snr_to_sigma(snr_db[s], cfg);
    const auto block = detail::draw_block(cfg, ch, code, c, sigma, rng);
    for (std::size_t u = 0; u < uses; ++u) {
      float* r = ds.records.data() + (job * uses + u) * w;
      const auto& use = block.uses[u];
      model::encode_observation(use, r, r + 2 * cfg.nr);
      const std::size_t off = static_cast<std::size_t>(2 * cfg.nr + 2 * cfg.nt * cfg.nr);
      r[off] = static_cast<float>(use.sigma_n);
      const auto llr = detect::ml_llr(use, c);
      for (std::size_t j = 0; j < llr.size(); ++j) r[off + 1 + j] = static_cast<float>(llr.values[j]);
    }
  });

  // Fisher-Yates over whole records.
  numerics::RngStream shuffle(seed, 0x5f1e);
  const std::size_t n = ds.count();
  std::vector<float> tmp(w);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = shuffle.uniform_index(i);
    if (j == i - 1) continue;
    float* a = ds.records.data() + (i - 1) * w;
    float* b = ds.records.data() + j * w;
    std::memcpy(tmp.data(), a, w * sizeof(float));
    std::memcpy(a, b, w * sizeof(float));
    std::memcpy(b, tmp.data(), w * sizeof(float));
  }
  return ds;
}

}  // namespace eqnet::harness

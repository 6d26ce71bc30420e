#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mcq/byte_io.hpp"
#include "mcq/error.hpp"
#include "mcq/latent.hpp"
#include "mcq/parallel.hpp"
#include "mcq/rng.hpp"

namespace mcq {

// Per-level, per-group codeword tables. Level l holds M tables of K_l x d
// reals stored in (group, codeword, dim) order.
class MultiCodebook {
 public:
  MultiCodebook() = default;
  MultiCodebook(std::size_t groups, std::size_t dim, std::vector<std::size_t> codewords)
      : groups_(groups), dim_(dim), codewords_(std::move(codewords)) {
    require(groups_ >= 1 && dim_ >= 1, ErrorCode::kInvalidArgument, "groups and dim must be >= 1");
    require(!codewords_.empty(), ErrorCode::kInvalidArgument, "at least one level required");
    for (auto k : codewords_) require(k >= 1, ErrorCode::kInvalidArgument, "codewords per book must be >= 1");
    for (auto k : codewords_) tables_.emplace_back(groups_ * k * dim_, 0.0);
  }

  std::size_t levels() const { return codewords_.size(); }
  std::size_t groups() const { return groups_; }
  std::size_t dim() const { return dim_; }
  std::size_t channels() const { return groups_ * dim_; }
  std::size_t codewords(std::size_t level) const { return codewords_.at(level); }
  const std::vector<std::size_t>& codewords() const { return codewords_; }

  std::span<const double> table(std::size_t level, std::size_t group) const {
    return {tables_.at(level).data() + group * codewords_[level] * dim_, codewords_[level] * dim_};
  }
  std::span<double> table(std::size_t level, std::size_t group) {
    return {tables_.at(level).data() + group * codewords_[level] * dim_, codewords_[level] * dim_};
  }
  std::span<const double> row(std::size_t level, std::size_t group, std::size_t k) const {
    return table(level, group).subspan(k * dim_, dim_);
  }
  std::span<double> row(std::size_t level, std::size_t group, std::size_t k) {
    return table(level, group).subspan(k * dim_, dim_);
  }
  std::span<const double> level_values(std::size_t level) const { return tables_.at(level); }
  std::span<double> level_values(std::size_t level) { return tables_.at(level); }

  std::size_t parameter_count() const {
    std::size_t total = 0;
    for (auto k : codewords_) total += k * groups_ * dim_;
    return total;
  }

  // Rounds every entry to float32 so the in-memory book equals its serialized form.
  void round_to_float() {
    for (auto& t : tables_)
      for (double& v : t) v = double(static_cast<float>(v));
  }

  friend bool operator==(const MultiCodebook&, const MultiCodebook&) = default;

 private:
  std::size_t groups_ = 0;
  std::size_t dim_ = 0;
  std::vector<std::size_t> codewords_;
  std::vector<std::vector<double>> tables_;
};

struct DuplicateRow {
  std::size_t level;
  std::size_t group;
  std::size_t first;
  std::size_t second;
};

// Pairs of rows in the same (level, group) table within tol in max-abs distance.
inline std::vector<DuplicateRow> find_duplicates(const MultiCodebook& books, double tol = 1e-12) {
  std::vector<DuplicateRow> out;
  for (std::size_t l = 0; l < books.levels(); ++l)
    for (std::size_t m = 0; m < books.groups(); ++m)
      for (std::size_t a = 0; a < books.codewords(l); ++a)
        for (std::size_t b = a + 1; b < books.codewords(l); ++b) {
          auto ra = books.row(l, m, a), rb = books.row(l, m, b);
          bool same = true;
          for (std::size_t j = 0; j < ra.size() && same; ++j) same = std::abs(ra[j] - rb[j]) <= tol;
          if (same) out.push_back({l, m, a, b});
        }
  return out;
}

inline void require_finite(const MultiCodebook& books) {
  for (std::size_t l = 0; l < books.levels(); ++l)
    for (double v : books.level_values(l))
      require(std::isfinite(v), ErrorCode::kNonFinite, "codebook holds a non-finite value");
}

// Codeword indices for one level: h x w positions, M groups each.
struct CodeGrid {
  std::size_t h = 0;
  std::size_t w = 0;
  std::size_t groups = 0;
  std::vector<std::uint32_t> indices;

  CodeGrid() = default;
  CodeGrid(std::size_t h_, std::size_t w_, std::size_t m_)
      : h(h_), w(w_), groups(m_), indices(h_ * w_ * m_, 0) {}

  std::size_t positions() const { return h * w; }
  std::uint32_t& at(std::size_t pos, std::size_t m) { return indices[pos * groups + m]; }
  std::uint32_t at(std::size_t pos, std::size_t m) const { return indices[pos * groups + m]; }

  friend bool operator==(const CodeGrid&, const CodeGrid&) = default;
};

enum class SamplerMode : std::uint8_t { kHard = 0, kGumbel = 1 };

struct SamplerConfig {
  double temperature = 1.0;
  std::uint64_t seed = 0;
  SamplerMode mode = SamplerMode::kHard;
};

// Squared L2 distances from each vector to each table row, via
// |v|^2 + |c|^2 - 2 v.c, clamped at 0. Returns count x K row-major.
inline std::vector<double> pairwise_sq_distances(std::span<const double> vectors,
                                                 std::span<const double> table, std::size_t dim) {
  require(dim >= 1 && vectors.size() % dim == 0 && table.size() % dim == 0,
          ErrorCode::kDimensionMismatch, "vector and codeword dimensions differ");
  const std::size_t count = vectors.size() / dim, k_count = table.size() / dim;
  std::vector<double> c2(k_count, 0.0);
  for (std::size_t k = 0; k < k_count; ++k)
    for (std::size_t j = 0; j < dim; ++j) c2[k] += table[k * dim + j] * table[k * dim + j];
  std::vector<double> out(count * k_count);
  for (std::size_t i = 0; i < count; ++i) {
    const double* v = vectors.data() + i * dim;
    double v2 = 0.0;
    for (std::size_t j = 0; j < dim; ++j) v2 += v[j] * v[j];
    for (std::size_t k = 0; k < k_count; ++k) {
      const double* c = table.data() + k * dim;
      double dot = 0.0;
      for (std::size_t j = 0; j < dim; ++j) dot += v[j] * c[j];
      out[i * k_count + k] = std::max(0.0, v2 + c2[k] - 2.0 * dot);
    }
  }
  return out;
}

// Lowest index among the minima.
inline std::size_t argmin_index(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < values.size(); ++k)
    if (values[k] < values[best]) best = k;
  return best;
}

// softmax(-d / tau), max-shifted.
inline void softmax_neg(std::span<const double> distances, double tau, std::span<double> out) {
  double lo = *std::min_element(distances.begin(), distances.end());
  double z = 0.0;
  for (std::size_t k = 0; k < distances.size(); ++k) {
    out[k] = std::exp(-(distances[k] - lo) / tau);
    z += out[k];
  }
  for (double& p : out) p /= z;
}

// Index of max(-d_k / tau + g_k) with independent Gumbel noise g_k.
inline std::size_t gumbel_pick(std::span<const double> distances, double tau, CounterRng& rng) {
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < distances.size(); ++k) {
    double score = -distances[k] / tau + rng.gumbel();
    if (score > best_score) {
      best_score = score;
      best = k;
    }
  }
  return best;
}

inline std::uint64_t sampler_stream(std::size_t level, std::size_t slot) {
  return (std::uint64_t(level) << 48) ^ std::uint64_t(slot);
}

struct Quantized {
  LatentGrid quantized;
  CodeGrid codes;
  std::vector<double> soft;  // positions x M x K, filled by the stochastic path only
};

namespace detail {

struct LevelNorms {
  std::vector<double> c2;  // M x K
};

inline LevelNorms codeword_norms(const MultiCodebook& books, std::size_t level) {
  const std::size_t k_count = books.codewords(level), d = books.dim();
  LevelNorms out{std::vector<double>(books.groups() * k_count, 0.0)};
  for (std::size_t m = 0; m < books.groups(); ++m) {
    auto t = books.table(level, m);
    for (std::size_t k = 0; k < k_count; ++k)
      for (std::size_t j = 0; j < d; ++j) out.c2[m * k_count + k] += t[k * d + j] * t[k * d + j];
  }
  return out;
}

inline void group_distances(std::span<const double> v, std::span<const double> table,
                            std::span<const double> c2, std::span<double> out) {
  const std::size_t d = v.size();
  double v2 = 0.0;
  for (double x : v) v2 += x * x;
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double* c = table.data() + k * d;
    double dot = 0.0;
    for (std::size_t j = 0; j < d; ++j) dot += v[j] * c[j];
    out[k] = std::max(0.0, v2 + c2[k] - 2.0 * dot);
  }
}

inline void check_level_input(const LatentGrid& grid, const MultiCodebook& books, std::size_t level) {
  require(level < books.levels(), ErrorCode::kInvalidArgument, "level out of range");
  require(grid.n == books.channels(), ErrorCode::kDimensionMismatch,
          "latent channels differ from groups x dim of the codebook");
  require_finite(grid);
}

// Shared driver for hard and stochastic assignment.
inline Quantized quantize_level(const LatentGrid& grid, const MultiCodebook& books, std::size_t level,
                                const SamplerConfig* sampler) {
  check_level_input(grid, books, level);
  const std::size_t M = books.groups(), d = books.dim(), K = books.codewords(level);
  const auto norms = codeword_norms(books, level);
  Quantized out{LatentGrid(grid.h, grid.w, grid.n), CodeGrid(grid.h, grid.w, M), {}};
  if (sampler) out.soft.assign(grid.positions() * M * K, 0.0);
  parallel_for(grid.positions(), [&](std::size_t begin, std::size_t end) {
    std::vector<double> dist(K);
    for (std::size_t pos = begin; pos < end; ++pos) {
      auto v = grid.vec(pos);
      auto q = out.quantized.vec(pos);
      for (std::size_t m = 0; m < M; ++m) {
        auto table = books.table(level, m);
        group_distances(v.subspan(m * d, d), table, std::span(norms.c2).subspan(m * K, K), dist);
        std::size_t k;
        if (sampler) {
          CounterRng rng(sampler->seed, sampler_stream(level, pos * M + m));
          k = gumbel_pick(dist, sampler->temperature, rng);
          softmax_neg(dist, sampler->temperature, std::span(out.soft).subspan((pos * M + m) * K, K));
        } else {
          k = argmin_index(dist);
        }
        out.codes.at(pos, m) = static_cast<std::uint32_t>(k);
        std::copy_n(table.begin() + std::ptrdiff_t(k * d), d, q.begin() + std::ptrdiff_t(m * d));
      }
    }
  }, 64);
  return out;
}

}  // namespace detail

// Nearest codeword per (position, group); ties go to the lowest index.
inline Quantized quantize_hard(const LatentGrid& grid, const MultiCodebook& books, std::size_t level) {
  return detail::quantize_level(grid, books, level, nullptr);
}

// Categorical draw with logits -|y - c_k|^2 / tau via the Gumbel-max trick.
// Each (level, position, group) has its own seeded stream.
inline Quantized quantize_stochastic(const LatentGrid& grid, const MultiCodebook& books, std::size_t level,
                                     const SamplerConfig& cfg) {
  require(cfg.temperature > 0.0 && std::isfinite(cfg.temperature), ErrorCode::kInvalidArgument,
          "temperature must be positive");
  return detail::quantize_level(grid, books, level, &cfg);
}

inline Quantized quantize(const LatentGrid& grid, const MultiCodebook& books, std::size_t level,
                          const SamplerConfig& cfg) {
  return cfg.mode == SamplerMode::kGumbel ? quantize_stochastic(grid, books, level, cfg)
                                          : quantize_hard(grid, books, level);
}

// O(1) table lookup per (position, group).
inline LatentGrid dequantize(const CodeGrid& codes, const MultiCodebook& books, std::size_t level) {
  require(level < books.levels(), ErrorCode::kInvalidArgument, "level out of range");
  require(codes.groups == books.groups(), ErrorCode::kShapeMismatch, "code grid group count differs");
  const std::size_t M = books.groups(), d = books.dim(), K = books.codewords(level);
  LatentGrid out(codes.h, codes.w, M * d);
  for (std::size_t pos = 0; pos < codes.positions(); ++pos) {
    auto dst = out.vec(pos);
    for (std::size_t m = 0; m < M; ++m) {
      std::uint32_t k = codes.at(pos, m);
      if (k >= K) fail(ErrorCode::kIndexOutOfRange, "codeword index " + std::to_string(k) + " >= " + std::to_string(K));
      auto row = books.row(level, m, k);
      std::copy(row.begin(), row.end(), dst.begin() + std::ptrdiff_t(m * d));
    }
  }
  return out;
}

// --- codebook file: "MCQB" v1 ---

inline constexpr std::uint8_t kCodebookVersion = 1;

inline std::vector<std::uint8_t> serialize_codebook(const MultiCodebook& books) {
  require(books.levels() <= 255 && books.groups() <= 0xFFFF && books.dim() <= 0xFFFF,
          ErrorCode::kInvalidArgument, "codebook too large for the file format");
  ByteWriter w;
  w.put_magic("MCQB");
  w.put<std::uint8_t>(kCodebookVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(books.levels()));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(books.groups()));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(books.dim()));
  for (std::size_t l = 0; l < books.levels(); ++l) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(books.codewords(l)));
    for (double v : books.level_values(l)) w.put<float>(static_cast<float>(v));
  }
  return std::move(w).take();
}

inline MultiCodebook parse_codebook(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  require(r.magic_matches("MCQB"), ErrorCode::kCorruptMagic, "not a codebook file");
  require(r.get<std::uint8_t>() == kCodebookVersion, ErrorCode::kVersionUnsupported,
          "unsupported codebook version");
  std::size_t levels = r.get<std::uint8_t>();
  std::size_t groups = r.get<std::uint16_t>();
  std::size_t dim = r.get<std::uint16_t>();
  require(levels >= 1 && groups >= 1 && dim >= 1, ErrorCode::kCorruptStream, "empty codebook dimensions");
  std::vector<std::size_t> ks;
  std::vector<std::vector<float>> raw;
  for (std::size_t l = 0; l < levels; ++l) {
    std::size_t k = r.get<std::uint32_t>();
    require(k >= 1, ErrorCode::kCorruptStream, "level with zero codewords");
    require(k * groups * dim * 4 <= r.remaining(), ErrorCode::kTruncated, "codebook table truncated");
    std::vector<float> vals(k * groups * dim);
    for (float& v : vals) v = r.get<float>();
    ks.push_back(k);
    raw.push_back(std::move(vals));
  }
  require(r.remaining() == 0, ErrorCode::kCorruptStream, "trailing bytes after codebook");
  MultiCodebook books(groups, dim, ks);
  for (std::size_t l = 0; l < levels; ++l) {
    auto dst = books.level_values(l);
    for (std::size_t i = 0; i < raw[l].size(); ++i) dst[i] = raw[l][i];
  }
  require_finite(books);
  return books;
}

}  // namespace mcq

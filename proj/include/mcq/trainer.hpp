#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mcq/cascade.hpp"
#include "mcq/error.hpp"
#include "mcq/latent.hpp"
#include "mcq/parallel.hpp"
#include "mcq/quantizer.hpp"
#include "mcq/rng.hpp"
#include "mcq/transform.hpp"

namespace mcq {

// ---------------------------------------------------------------------------
// Synthetic Gaussian mixtures (diagonal covariance)
// ---------------------------------------------------------------------------

struct GmmSpec {
  std::size_t dim = 0;
  std::vector<double> weights;    // K, sums to 1
  std::vector<double> means;      // K x dim
  std::vector<double> variances;  // K x dim, diagonal

  std::size_t components() const { return weights.size(); }
};

inline void validate(const GmmSpec& g) {
  require(g.dim >= 1 && !g.weights.empty(), ErrorCode::kInvalidArgument, "empty mixture");
  require(g.means.size() == g.components() * g.dim && g.variances.size() == g.means.size(),
          ErrorCode::kDimensionMismatch, "mixture parameter sizes disagree");
  double s = 0.0;
  for (double w : g.weights) {
    require(w >= 0.0, ErrorCode::kInvalidArgument, "negative mixture weight");
    s += w;
  }
  require(std::abs(s - 1.0) <= 1e-12, ErrorCode::kInvalidArgument, "mixture weights must sum to 1");
  for (double v : g.variances) require(v > 0.0, ErrorCode::kInvalidArgument, "variance must be positive");
}

struct GmmSample {
  std::size_t dim = 0;
  std::vector<double> points;       // count x dim
  std::vector<std::size_t> labels;  // generating component, for evaluation only

  std::size_t count() const { return labels.size(); }
};

inline GmmSample sample_gmm(const GmmSpec& spec, std::size_t count, std::uint64_t seed) {
  validate(spec);
  GmmSample out{spec.dim, std::vector<double>(count * spec.dim), std::vector<std::size_t>(count)};
  std::vector<double> cdf(spec.components());
  std::partial_sum(spec.weights.begin(), spec.weights.end(), cdf.begin());
  for (std::size_t i = 0; i < count; ++i) {
    CounterRng rng(seed, i);
    double u = rng.uniform_open() * cdf.back();
    std::size_t k = std::min<std::size_t>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin(),
                                          spec.components() - 1);
    out.labels[i] = k;
    for (std::size_t j = 0; j < spec.dim; ++j)
      out.points[i * spec.dim + j] =
          spec.means[k * spec.dim + j] + std::sqrt(spec.variances[k * spec.dim + j]) * rng.normal();
  }
  return out;
}

// Packs row vectors into 1 x chunk latent grids (the last one may be shorter).
inline std::vector<LatentGrid> vectors_to_corpus(std::span<const double> points, std::size_t dim,
                                                 std::size_t chunk = 256) {
  require(dim >= 1 && points.size() % dim == 0 && chunk >= 1, ErrorCode::kInvalidArgument, "bad vector layout");
  const std::size_t count = points.size() / dim;
  std::vector<LatentGrid> corpus;
  for (std::size_t start = 0; start < count; start += chunk) {
    std::size_t len = std::min(chunk, count - start);
    LatentGrid g(1, len, dim);
    std::copy_n(points.begin() + std::ptrdiff_t(start * dim), len * dim, g.values.begin());
    corpus.push_back(std::move(g));
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class TrainAlgorithm { kGumbelSt, kKmeans };
enum class InitStrategy { kRandomSample, kKmeansPlusPlus };

struct TrainConfig {
  // Codebook shape.
  std::size_t groups = 1;
  std::vector<std::size_t> codewords{16};

  TrainAlgorithm algorithm = TrainAlgorithm::kGumbelSt;
  InitStrategy init = InitStrategy::kKmeansPlusPlus;
  std::size_t epochs = 20;     // SGD epochs, or max Lloyd iterations per level
  std::size_t batch_size = 8;  // grids per SGD step
  double lr_initial = 0.5;
  double lr_final = 0.01;        // cosine annealed
  double temperature_initial = 1.0;
  double temperature_final = 0.1;  // exponential decay
  std::uint64_t seed = 1;
  // Starting codebook; replaces seeding when set (shape must match).
  std::optional<MultiCodebook> warm_start;
};

inline void validate(const TrainConfig& cfg) {
  require(cfg.groups >= 1 && !cfg.codewords.empty(), ErrorCode::kInvalidArgument, "empty codebook shape");
  for (auto k : cfg.codewords) require(k >= 1, ErrorCode::kInvalidArgument, "K must be >= 1");
  require(cfg.epochs >= 1 && cfg.batch_size >= 1, ErrorCode::kInvalidArgument, "epochs and batch size must be >= 1");
  require(cfg.lr_initial > 0 && cfg.lr_final > 0, ErrorCode::kInvalidArgument, "learning rates must be positive");
  require(cfg.temperature_initial > 0 && cfg.temperature_final > 0, ErrorCode::kInvalidArgument,
          "temperatures must be positive");
  if (cfg.warm_start)
    require(cfg.warm_start->groups() == cfg.groups && cfg.warm_start->codewords() == cfg.codewords,
            ErrorCode::kShapeMismatch, "warm start codebook shape differs from the configuration");
}

inline double cosine_lr(const TrainConfig& cfg, std::size_t step, std::size_t total_steps) {
  if (total_steps <= 1) return cfg.lr_initial;
  double t = double(step) / double(total_steps - 1);
  return cfg.lr_final + 0.5 * (cfg.lr_initial - cfg.lr_final) * (1.0 + std::cos(std::numbers::pi * t));
}

inline double decayed_temperature(const TrainConfig& cfg, std::size_t step, std::size_t total_steps) {
  if (total_steps <= 1) return cfg.temperature_initial;
  double t = double(step) / double(total_steps - 1);
  return cfg.temperature_initial * std::pow(cfg.temperature_final / cfg.temperature_initial, t);
}

struct TraceRow {
  std::size_t level = 0;  // k-means only; 0 for joint training
  std::size_t epoch = 0;
  double loss = 0.0;
  double temperature = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  MultiCodebook books;
  std::vector<TraceRow> trace;
  std::vector<DuplicateRow> duplicates;  // rows perturbed after training
  bool diverged = false;
};

// ---------------------------------------------------------------------------
// Level data gathering and initialization
// ---------------------------------------------------------------------------

// Group m's sub-vectors of every grid, concatenated (count x d).
inline std::vector<double> gather_group(std::span<const LatentGrid> grids, std::size_t groups, std::size_t m) {
  std::vector<double> out;
  for (const auto& g : grids) {
    require(g.n % groups == 0, ErrorCode::kInvalidArgument, "channels not divisible by groups");
    const std::size_t d = g.n / groups;
    for (std::size_t p = 0; p < g.positions(); ++p) {
      auto v = g.vec(p).subspan(m * d, d);
      out.insert(out.end(), v.begin(), v.end());
    }
  }
  return out;
}

// Residual inputs of the next level: downsample(y - Q_hard(y)).
inline std::vector<LatentGrid> next_level_inputs(std::span<const LatentGrid> grids, const MultiCodebook& books,
                                                 std::size_t level) {
  std::vector<LatentGrid> out;
  out.reserve(grids.size());
  for (const auto& g : grids) out.push_back(downsample(g - quantize_hard(g, books, level).quantized));
  return out;
}

inline std::vector<double> seed_random_sample(std::span<const double> data, std::size_t dim, std::size_t k,
                                              CounterRng& rng) {
  const std::size_t n = data.size() / dim;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> out(k * dim);
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
    std::copy_n(data.begin() + std::ptrdiff_t(idx[i] * dim), dim, out.begin() + std::ptrdiff_t(i * dim));
  }
  return out;
}

// Standard D^2 seeding.
inline std::vector<double> seed_kmeans_plus_plus(std::span<const double> data, std::size_t dim, std::size_t k,
                                                 CounterRng& rng) {
  const std::size_t n = data.size() / dim;
  std::vector<double> out(k * dim);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t pick = static_cast<std::size_t>(rng.below(n));
  for (std::size_t c = 0; c < k; ++c) {
    std::copy_n(data.begin() + std::ptrdiff_t(pick * dim), dim, out.begin() + std::ptrdiff_t(c * dim));
    const double* centre = out.data() + c * dim;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        double diff = data[i * dim + j] - centre[j];
        s += diff * diff;
      }
      d2[i] = std::min(d2[i], s);
      total += d2[i];
    }
    if (c + 1 == k) break;
    if (total <= 0.0) {
      pick = static_cast<std::size_t>(rng.below(n));
      continue;
    }
    double target = rng.uniform_open() * total, acc = 0.0;
    pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      acc += d2[i];
      if (acc >= target && d2[i] > 0.0) {
        pick = i;
        break;
      }
    }
  }
  return out;
}

inline void init_level(MultiCodebook& books, std::size_t level, std::span<const LatentGrid> inputs,
                       InitStrategy strategy, std::uint64_t seed) {
  const std::size_t d = books.dim(), K = books.codewords(level);
  for (std::size_t m = 0; m < books.groups(); ++m) {
    auto data = gather_group(inputs, books.groups(), m);
    require(data.size() / d >= K, ErrorCode::kInvalidArgument,
            "level " + std::to_string(level) + " has fewer vectors than codewords");
    CounterRng rng(seed, sampler_stream(level, m) ^ 0x1217ull);
    auto rows = strategy == InitStrategy::kRandomSample ? seed_random_sample(data, d, K, rng)
                                                        : seed_kmeans_plus_plus(data, d, K, rng);
    std::copy(rows.begin(), rows.end(), books.table(level, m).begin());
  }
}

// Seeds every level in turn; level l+1 draws from the residuals left by the
// already-seeded lower levels.
inline MultiCodebook init_codebooks(std::span<const LatentGrid> corpus, std::size_t groups,
                                    const std::vector<std::size_t>& codewords, InitStrategy strategy,
                                    std::uint64_t seed) {
  require(!corpus.empty(), ErrorCode::kInvalidArgument, "empty corpus");
  const std::size_t n = corpus.front().n;
  for (const auto& g : corpus) require(g.n == n, ErrorCode::kShapeMismatch, "corpus grids differ in channels");
  require(n % groups == 0, ErrorCode::kInvalidArgument, "channels not divisible by groups");
  MultiCodebook books(groups, n / groups, codewords);
  std::vector<LatentGrid> inputs(corpus.begin(), corpus.end());
  for (std::size_t l = 0; l < codewords.size(); ++l) {
    init_level(books, l, inputs, strategy, seed);
    if (l + 1 < codewords.size()) inputs = next_level_inputs(inputs, books, l);
  }
  return books;
}

// Exact duplicates get 1e-6 noise so every row stays distinguishable.
inline std::vector<DuplicateRow> perturb_duplicates(MultiCodebook& books, std::uint64_t seed) {
  auto dups = find_duplicates(books, 1e-12);
  CounterRng rng(seed, 0xD0D0ull);
  for (const auto& dup : dups)
    for (double& v : books.row(dup.level, dup.group, dup.second)) v += 1e-6 * rng.normal();
  return dups;
}

// ---------------------------------------------------------------------------
// Cascade objective with straight-through / relaxed gradients
// ---------------------------------------------------------------------------

enum class ForwardMode {
  kRelaxed,        // q = sum_k p_k c_k
  kStraightThrough,  // q = c_pick, pick ~ Gumbel-max; soft backward
};

struct ObjectiveOptions {
  ForwardMode mode = ForwardMode::kStraightThrough;
  double temperature = 1.0;
  std::uint64_t seed = 0;  // Gumbel noise key for the straight-through forward
  std::size_t levels = 1;
};

namespace detail {

// Adjoint of crop(upsample(x), h, w): sums each fine cell into its parent.
inline LatentGrid upsample_adjoint(const LatentGrid& g, std::size_t coarse_h, std::size_t coarse_w) {
  LatentGrid out(coarse_h, coarse_w, g.n);
  for (std::size_t y = 0; y < g.h; ++y)
    for (std::size_t x = 0; x < g.w; ++x) {
      auto src = g.at(y, x);
      auto dst = out.at(y / 2, x / 2);
      for (std::size_t c = 0; c < g.n; ++c) dst[c] += src[c];
    }
  return out;
}

// Adjoint of the edge-replicating 2x2 average pool.
inline LatentGrid downsample_adjoint(const LatentGrid& g, std::size_t fine_h, std::size_t fine_w) {
  LatentGrid out(fine_h, fine_w, g.n);
  for (std::size_t y = 0; y < g.h; ++y)
    for (std::size_t x = 0; x < g.w; ++x) {
      auto src = g.at(y, x);
      for (std::size_t dy = 0; dy < 2; ++dy)
        for (std::size_t dx = 0; dx < 2; ++dx) {
          auto dst = out.at(std::min(2 * y + dy, fine_h - 1), std::min(2 * x + dx, fine_w - 1));
          for (std::size_t c = 0; c < g.n; ++c) dst[c] += 0.25 * src[c];
        }
    }
  return out;
}

struct LevelState {
  LatentGrid input;
  LatentGrid quantized;
  std::vector<double> probs;  // positions x M x K
};

}  // namespace detail

// Squared reconstruction error sum |y - decode(encode(y))|^2 of one grid.
// When grad is non-null, its tables receive d(error)/d(codewords): the soft
// assignment p = softmax(-|y - c|^2 / tau) supplies the backward path in
// both modes, including the dependence of each level's input on the levels
// below it.
inline double cascade_objective(const LatentGrid& y1, const MultiCodebook& books, const ObjectiveOptions& opt,
                                MultiCodebook* grad) {
  const std::size_t L = opt.levels, M = books.groups(), d = books.dim();
  require(L >= 1 && L <= books.levels(), ErrorCode::kInvalidArgument, "objective levels out of range");
  require(y1.n == books.channels(), ErrorCode::kDimensionMismatch, "latent channels differ from codebook");
  const double tau = opt.temperature;
  std::vector<detail::LevelState> st(L);
  std::vector<double> dist;
  LatentGrid y = y1;
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t K = books.codewords(l);
    dist.resize(K);
    auto norms = detail::codeword_norms(books, l);
    auto& s = st[l];
    s.quantized = LatentGrid(y.h, y.w, y.n);
    s.probs.assign(y.positions() * M * K, 0.0);
    for (std::size_t pos = 0; pos < y.positions(); ++pos)
      for (std::size_t m = 0; m < M; ++m) {
        auto v = y.vec(pos).subspan(m * d, d);
        auto table = books.table(l, m);
        detail::group_distances(v, table, std::span(norms.c2).subspan(m * K, K), dist);
        auto p = std::span(s.probs).subspan((pos * M + m) * K, K);
        softmax_neg(dist, tau, p);
        auto q = s.quantized.vec(pos).subspan(m * d, d);
        if (opt.mode == ForwardMode::kRelaxed) {
          for (std::size_t k = 0; k < K; ++k)
            for (std::size_t j = 0; j < d; ++j) q[j] += p[k] * table[k * d + j];
        } else {
          CounterRng rng(opt.seed, sampler_stream(l, pos * M + m));
          std::size_t k = gumbel_pick(dist, tau, rng);
          std::copy_n(table.begin() + std::ptrdiff_t(k * d), d, q.begin());
        }
      }
    LatentGrid next;
    if (l + 1 < L) next = downsample(y - s.quantized);
    s.input = std::move(y);
    y = std::move(next);
  }
  std::vector<LatentGrid> qs;
  for (auto& s : st) qs.push_back(s.quantized);
  const LatentGrid recon = combine_levels(qs);
  const double loss = squared_distance(y1, recon);
  if (!grad) return loss;

  // dL/d(recon) at each level, finest first.
  std::vector<LatentGrid> g_recon(L);
  g_recon[0] = LatentGrid(y1.h, y1.w, y1.n);
  for (std::size_t i = 0; i < y1.values.size(); ++i) g_recon[0].values[i] = -2.0 * (y1.values[i] - recon.values[i]);
  for (std::size_t l = 1; l < L; ++l)
    g_recon[l] = detail::upsample_adjoint(g_recon[l - 1], st[l].input.h, st[l].input.w);

  LatentGrid g_input_next;  // dL/d(input of level l+1)
  for (std::size_t l = L; l-- > 0;) {
    const auto& s = st[l];
    const std::size_t K = books.codewords(l);
    LatentGrid from_next = l + 1 < L ? detail::downsample_adjoint(g_input_next, s.input.h, s.input.w)
                                     : LatentGrid(s.input.h, s.input.w, s.input.n);
    // y^{l+1} = down(y^l - q^l): q^l receives -from_next, y^l receives +from_next.
    LatentGrid g_q = g_recon[l] - from_next;
    LatentGrid g_in = from_next;
    std::vector<double> a(K);
    for (std::size_t pos = 0; pos < s.input.positions(); ++pos)
      for (std::size_t m = 0; m < M; ++m) {
        auto v = s.input.vec(pos).subspan(m * d, d);
        auto g = g_q.vec(pos).subspan(m * d, d);
        auto table = books.table(l, m);
        auto gtable = grad->table(l, m);
        auto p = std::span(s.probs).subspan((pos * M + m) * K, K);
        double abar = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          double dot = 0.0;
          for (std::size_t j = 0; j < d; ++j) dot += g[j] * table[k * d + j];
          a[k] = dot;
          abar += p[k] * dot;
        }
        auto gy = g_in.vec(pos).subspan(m * d, d);
        for (std::size_t k = 0; k < K; ++k) {
          const double coef = p[k] * (a[k] - abar) * 2.0 / tau;
          for (std::size_t j = 0; j < d; ++j) {
            const double diff = v[j] - table[k * d + j];
            gtable[k * d + j] += p[k] * g[j] + coef * diff;
            gy[j] -= coef * diff;
          }
        }
      }
    g_input_next = std::move(g_in);
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Gumbel straight-through SGD (all levels jointly)
// ---------------------------------------------------------------------------

inline void check_corpus(std::span<const LatentGrid> corpus, const TrainConfig& cfg) {
  require(!corpus.empty(), ErrorCode::kInvalidArgument, "empty corpus");
  for (const auto& g : corpus) {
    require(g.n == corpus.front().n, ErrorCode::kShapeMismatch, "corpus grids differ in channels");
    require(g.positions() > 0, ErrorCode::kInvalidArgument, "empty grid in corpus");
    require_finite(g);
  }
  require(corpus.front().n % cfg.groups == 0, ErrorCode::kInvalidArgument, "channels not divisible by groups");
}

inline void finalize(TrainResult& result, std::uint64_t seed) {
  result.duplicates = perturb_duplicates(result.books, seed);
  result.books.round_to_float();
}

inline TrainResult train_gumbel_st(std::span<const LatentGrid> corpus, const TrainConfig& cfg) {
  validate(cfg);
  check_corpus(corpus, cfg);
  TrainResult result;
  if (cfg.warm_start) {
    require(cfg.warm_start->channels() == corpus.front().n, ErrorCode::kShapeMismatch,
            "warm start codebook channels differ from the corpus");
    result.books = *cfg.warm_start;
  } else {
    result.books = init_codebooks(corpus, cfg.groups, cfg.codewords, cfg.init, cfg.seed);
  }
  auto& books = result.books;
  const std::size_t L = cfg.codewords.size();
  const std::size_t steps_per_epoch = (corpus.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = steps_per_epoch * cfg.epochs;
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  double initial_loss = -1.0;
  std::size_t blowups = 0;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    CounterRng shuffle(cfg.seed, 0x5EED0000ull + epoch);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
    double epoch_error = 0.0, epoch_positions = 0.0, lr = 0.0, tau = 0.0;
    for (std::size_t b = 0; b < steps_per_epoch; ++b, ++step) {
      lr = cosine_lr(cfg, step, total_steps);
      tau = decayed_temperature(cfg, step, total_steps);
      const std::size_t begin = b * cfg.batch_size, end = std::min(order.size(), begin + cfg.batch_size);
      MultiCodebook grad(books.groups(), books.dim(), books.codewords());
      double batch_error = 0.0, batch_positions = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        const auto& grid = corpus[order[i]];
        ObjectiveOptions opt{ForwardMode::kStraightThrough, tau, splitmix64(cfg.seed ^ (step << 20) ^ i), L};
        batch_error += cascade_objective(grid, books, opt, &grad);
        batch_positions += double(grid.positions());
      }
      // Objective is mean squared error per latent vector.
      for (std::size_t l = 0; l < L; ++l) {
        auto params = books.level_values(l);
        auto g = grad.level_values(l);
        for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * g[i] / batch_positions;
      }
      epoch_error += batch_error;
      epoch_positions += batch_positions;
    }
    const double loss = epoch_error / epoch_positions;
    result.trace.push_back({0, epoch, loss, tau, lr});
    if (initial_loss < 0.0) initial_loss = loss;
    blowups = (!std::isfinite(loss) || loss > 10.0 * initial_loss) ? blowups + 1 : 0;
    if (blowups >= 3) {
      result.diverged = true;
      return result;
    }
  }
  finalize(result, cfg.seed);
  return result;
}

// ---------------------------------------------------------------------------
// Lloyd k-means, greedy level by level
// ---------------------------------------------------------------------------

struct LloydState {
  std::vector<double> data;  // count x d
  std::vector<std::uint32_t> assign;
  std::vector<double> cost;
};

// One assignment pass; returns inertia and whether any assignment changed.
inline std::pair<double, bool> lloyd_assign(LloydState& s, std::span<const double> table, std::size_t d) {
  const std::size_t n = s.data.size() / d, K = table.size() / d;
  std::vector<double> c2(K, 0.0);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t j = 0; j < d; ++j) c2[k] += table[k * d + j] * table[k * d + j];
  bool changed = false;
  double inertia = 0.0;
  std::vector<double> dist(K);
  for (std::size_t i = 0; i < n; ++i) {
    auto v = std::span<const double>(s.data).subspan(i * d, d);
    detail::group_distances(v, table, c2, dist);
    auto k = static_cast<std::uint32_t>(argmin_index(dist));
    // Exact cost, not the clamped expansion, keeps the trace monotone.
    double exact = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double diff = v[j] - table[k * d + j];
      exact += diff * diff;
    }
    changed |= s.assign[i] != k;
    s.assign[i] = k;
    s.cost[i] = exact;
    inertia += exact;
  }
  return {inertia, changed};
}

// Mean update; an empty cluster is re-seeded at the point farthest from its
// own centroid.
inline void lloyd_update(LloydState& s, std::span<double> table, std::size_t d) {
  const std::size_t n = s.data.size() / d, K = table.size() / d;
  std::vector<double> sums(K * d, 0.0);
  std::vector<std::size_t> counts(K, 0);
  for (std::size_t i = 0; i < n; ++i) {
    ++counts[s.assign[i]];
    for (std::size_t j = 0; j < d; ++j) sums[s.assign[i] * d + j] += s.data[i * d + j];
  }
  for (std::size_t k = 0; k < K; ++k)
    if (counts[k] > 0)
      for (std::size_t j = 0; j < d; ++j) table[k * d + j] = sums[k * d + j] / double(counts[k]);
  for (std::size_t k = 0; k < K; ++k) {
    if (counts[k] > 0) continue;
    std::size_t far = std::max_element(s.cost.begin(), s.cost.end()) - s.cost.begin();
    if (s.cost[far] <= 0.0) continue;
    std::copy_n(s.data.begin() + std::ptrdiff_t(far * d), d, table.begin() + std::ptrdiff_t(k * d));
    s.cost[far] = 0.0;
  }
}

inline TrainResult train_kmeans(std::span<const LatentGrid> corpus, const TrainConfig& cfg) {
  validate(cfg);
  check_corpus(corpus, cfg);
  const std::size_t n = corpus.front().n;
  TrainResult result;
  if (cfg.warm_start)
    require(cfg.warm_start->channels() == n, ErrorCode::kShapeMismatch,
            "warm start codebook channels differ from the corpus");
  result.books = cfg.warm_start ? *cfg.warm_start : MultiCodebook(cfg.groups, n / cfg.groups, cfg.codewords);
  auto& books = result.books;
  const std::size_t d = books.dim(), M = books.groups();
  std::vector<LatentGrid> inputs(corpus.begin(), corpus.end());
  for (std::size_t l = 0; l < books.levels(); ++l) {
    if (!cfg.warm_start) init_level(books, l, inputs, cfg.init, cfg.seed);
    std::vector<LloydState> states(M);
    for (std::size_t m = 0; m < M; ++m) {
      states[m].data = gather_group(inputs, M, m);
      states[m].assign.assign(states[m].data.size() / d, std::numeric_limits<std::uint32_t>::max());
      states[m].cost.assign(states[m].assign.size(), 0.0);
    }
    for (std::size_t it = 0; it < cfg.epochs; ++it) {
      double inertia = 0.0;
      bool changed = false;
      for (std::size_t m = 0; m < M; ++m) {
        auto [in, ch] = lloyd_assign(states[m], books.table(l, m), d);
        inertia += in;
        changed |= ch;
      }
      result.trace.push_back({l, it, inertia, 0.0, 0.0});
      if (!changed || it + 1 == cfg.epochs) break;
      for (std::size_t m = 0; m < M; ++m) lloyd_update(states[m], books.table(l, m), d);
    }
    if (l + 1 < books.levels()) inputs = next_level_inputs(inputs, books, l);
  }
  finalize(result, cfg.seed);
  return result;
}

inline TrainResult train(std::span<const LatentGrid> corpus, const TrainConfig& cfg) {
  return cfg.algorithm == TrainAlgorithm::kKmeans ? train_kmeans(corpus, cfg) : train_gumbel_st(corpus, cfg);
}

// ---------------------------------------------------------------------------
// Codeword usage
// ---------------------------------------------------------------------------

struct DeadCode {
  std::size_t level;
  std::size_t group;
  std::size_t index;
  friend bool operator==(const DeadCode&, const DeadCode&) = default;
};

struct DeadCodeReport {
  std::vector<std::vector<std::uint64_t>> usage;  // per (level, group), level-major
  std::vector<DeadCode> dead;
};

inline DeadCodeReport dead_code_report(std::span<const CodeStack> stacks, const std::vector<std::size_t>& codewords,
                                       std::size_t groups) {
  DeadCodeReport rep;
  for (std::size_t l = 0; l < codewords.size(); ++l)
    for (std::size_t m = 0; m < groups; ++m) rep.usage.emplace_back(codewords[l], 0);
  for (const auto& stack : stacks)
    for (std::size_t l = 0; l < stack.size() && l < codewords.size(); ++l)
      for (std::size_t p = 0; p < stack[l].positions(); ++p)
        for (std::size_t m = 0; m < groups; ++m) {
          auto k = stack[l].at(p, m);
          require(k < codewords[l], ErrorCode::kIndexOutOfRange, "code outside codebook");
          ++rep.usage[l * groups + m][k];
        }
  for (std::size_t l = 0; l < codewords.size(); ++l)
    for (std::size_t m = 0; m < groups; ++m)
      for (std::size_t k = 0; k < codewords[l]; ++k)
        if (rep.usage[l * groups + m][k] == 0) rep.dead.push_back({l, m, k});
  return rep;
}

}  // namespace mcq

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "mcq/error.hpp"

namespace mcq {

// Dense h x w x n array of reals; the vector at (y, x) is contiguous.
struct LatentGrid {
  std::size_t h = 0;
  std::size_t w = 0;
  std::size_t n = 0;
  std::vector<double> values;

  LatentGrid() = default;
  LatentGrid(std::size_t h_, std::size_t w_, std::size_t n_, double fill = 0.0)
      : h(h_), w(w_), n(n_), values(h_ * w_ * n_, fill) {}

  std::size_t positions() const { return h * w; }

  std::span<double> at(std::size_t y, std::size_t x) { return {values.data() + (y * w + x) * n, n}; }
  std::span<const double> at(std::size_t y, std::size_t x) const {
    return {values.data() + (y * w + x) * n, n};
  }
  std::span<const double> vec(std::size_t pos) const { return {values.data() + pos * n, n}; }
  std::span<double> vec(std::size_t pos) { return {values.data() + pos * n, n}; }

  bool same_shape(const LatentGrid& o) const { return h == o.h && w == o.w && n == o.n; }

  friend bool operator==(const LatentGrid&, const LatentGrid&) = default;
};

inline void require_finite(const LatentGrid& g) {
  for (double v : g.values)
    if (!std::isfinite(v)) fail(ErrorCode::kNonFinite, "latent grid holds a non-finite value");
}

inline void require_same_shape(const LatentGrid& a, const LatentGrid& b) {
  require(a.same_shape(b), ErrorCode::kShapeMismatch, "latent grid shapes differ");
}

inline LatentGrid operator-(const LatentGrid& a, const LatentGrid& b) {
  require_same_shape(a, b);
  LatentGrid out = a;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] -= b.values[i];
  return out;
}

inline LatentGrid operator+(const LatentGrid& a, const LatentGrid& b) {
  require_same_shape(a, b);
  LatentGrid out = a;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += b.values[i];
  return out;
}

inline double squared_norm(const LatentGrid& g) {
  double s = 0.0;
  for (double v : g.values) s += v * v;
  return s;
}

inline double squared_distance(const LatentGrid& a, const LatentGrid& b) {
  require_same_shape(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    double d = a.values[i] - b.values[i];
    s += d * d;
  }
  return s;
}

// Contiguous channel slices [m*d, (m+1)*d).
inline std::vector<LatentGrid> split_groups(const LatentGrid& grid, std::size_t groups) {
  require(groups >= 1 && grid.n % groups == 0, ErrorCode::kInvalidArgument,
          "channel count not divisible by group count");
  std::size_t d = grid.n / groups;
  std::vector<LatentGrid> out(groups, LatentGrid(grid.h, grid.w, d));
  for (std::size_t p = 0; p < grid.positions(); ++p) {
    auto src = grid.vec(p);
    for (std::size_t m = 0; m < groups; ++m) {
      auto dst = out[m].vec(p);
      for (std::size_t j = 0; j < d; ++j) dst[j] = src[m * d + j];
    }
  }
  return out;
}

inline LatentGrid merge_groups(std::span<const LatentGrid> parts) {
  require(!parts.empty(), ErrorCode::kInvalidArgument, "no groups to merge");
  const auto& first = parts.front();
  std::size_t n = 0;
  for (const auto& p : parts) {
    require(p.h == first.h && p.w == first.w, ErrorCode::kShapeMismatch, "group shapes differ");
    n += p.n;
  }
  LatentGrid out(first.h, first.w, n);
  for (std::size_t pos = 0; pos < out.positions(); ++pos) {
    auto dst = out.vec(pos);
    std::size_t off = 0;
    for (const auto& p : parts) {
      auto src = p.vec(pos);
      for (std::size_t j = 0; j < p.n; ++j) dst[off + j] = src[j];
      off += p.n;
    }
  }
  return out;
}

}  // namespace mcq

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "mcq/error.hpp"
#include "mcq/image.hpp"
#include "mcq/latent.hpp"

namespace mcq {

enum class TransformKind : std::uint8_t { kPatchify = 0, kPatchifyDct = 1 };

inline std::string to_string(TransformKind k) {
  return k == TransformKind::kPatchify ? "patchify" : "patchify-dct";
}

inline TransformKind parse_transform_kind(const std::string& s) {
  if (s == "patchify") return TransformKind::kPatchify;
  if (s == "patchify-dct") return TransformKind::kPatchifyDct;
  fail(ErrorCode::kInvalidArgument, "unknown transform kind '" + s + "'");
}

// Fixed invertible image <-> latent mapping. Each p x p patch becomes one
// latent vector laid out channel-major: index = c*p*p + row*p + col.
struct TransformSpec {
  TransformKind kind = TransformKind::kPatchify;
  std::uint32_t patch = 4;
  std::uint32_t channels = 1;
  std::vector<double> offset{128.0};
  std::vector<double> scale{128.0};

  std::size_t latent_channels() const { return std::size_t(patch) * patch * channels; }

  double offset_of(std::size_t c) const { return offset.size() == 1 ? offset[0] : offset.at(c); }
  double scale_of(std::size_t c) const { return scale.size() == 1 ? scale[0] : scale.at(c); }

  friend bool operator==(const TransformSpec&, const TransformSpec&) = default;
};

inline void validate(const TransformSpec& spec) {
  require(spec.patch >= 1, ErrorCode::kInvalidArgument, "patch size must be >= 1");
  require(spec.channels == 1 || spec.channels == 3, ErrorCode::kInvalidArgument,
          "transform channels must be 1 or 3");
  auto sized = [&](const std::vector<double>& v) { return v.size() == 1 || v.size() == spec.channels; };
  require(sized(spec.offset) && sized(spec.scale), ErrorCode::kInvalidArgument,
          "normalization needs one value or one per channel");
  for (double s : spec.scale)
    require(s > 0.0 && std::isfinite(s), ErrorCode::kInvalidArgument, "normalization scale must be positive");
  for (double o : spec.offset) require(std::isfinite(o), ErrorCode::kInvalidArgument, "non-finite offset");
}

// Orthonormal DCT-II basis: basis[u*p + x] = a(u) cos(pi (2x+1) u / 2p).
inline std::vector<double> dct_basis(std::size_t p) {
  std::vector<double> b(p * p);
  for (std::size_t u = 0; u < p; ++u) {
    double a = u == 0 ? std::sqrt(1.0 / double(p)) : std::sqrt(2.0 / double(p));
    for (std::size_t x = 0; x < p; ++x)
      b[u * p + x] = a * std::cos(std::numbers::pi * double(2 * x + 1) * double(u) / double(2 * p));
  }
  return b;
}

namespace detail {

// out = B * in * B^T (forward) or B^T * in * B (inverse), all p x p row-major.
inline void dct2d(const std::vector<double>& basis, std::size_t p, const double* in, double* out,
                  bool inverse, std::vector<double>& scratch) {
  scratch.assign(p * p, 0.0);
  for (std::size_t r = 0; r < p; ++r)
    for (std::size_t c = 0; c < p; ++c) {
      double s = 0.0;
      for (std::size_t k = 0; k < p; ++k)
        s += (inverse ? basis[k * p + r] : basis[r * p + k]) * in[k * p + c];
      scratch[r * p + c] = s;
    }
  for (std::size_t r = 0; r < p; ++r)
    for (std::size_t c = 0; c < p; ++c) {
      double s = 0.0;
      for (std::size_t k = 0; k < p; ++k)
        s += scratch[r * p + k] * (inverse ? basis[k * p + c] : basis[c * p + k]);
      out[r * p + c] = s;
    }
}

inline std::uint8_t to_u8(double v) {
  double r = std::round(v);  // half away from zero
  return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

}  // namespace detail

inline LatentGrid analysis(const Image& image, const TransformSpec& spec) {
  validate(spec);
  validate(image);
  require(!image.empty(), ErrorCode::kInvalidArgument, "zero-sized image");
  require(image.channels == spec.channels, ErrorCode::kDimensionMismatch,
          "image channels differ from transform channels");
  const std::size_t p = spec.patch;
  require(image.width % p == 0 && image.height % p == 0, ErrorCode::kDimensionMismatch,
          "image dimensions not divisible by patch size; pad first");
  LatentGrid grid(image.height / p, image.width / p, spec.latent_channels());
  const auto basis = spec.kind == TransformKind::kPatchifyDct ? dct_basis(p) : std::vector<double>{};
  std::vector<double> patch(p * p), scratch;
  for (std::size_t gy = 0; gy < grid.h; ++gy)
    for (std::size_t gx = 0; gx < grid.w; ++gx) {
      auto v = grid.at(gy, gx);
      for (std::size_t c = 0; c < spec.channels; ++c) {
        const double off = spec.offset_of(c), sc = spec.scale_of(c);
        for (std::size_t r = 0; r < p; ++r)
          for (std::size_t q = 0; q < p; ++q)
            patch[r * p + q] =
                (double(image.at(std::uint32_t(gx * p + q), std::uint32_t(gy * p + r), std::uint32_t(c))) - off) / sc;
        double* dst = v.data() + c * p * p;
        if (spec.kind == TransformKind::kPatchifyDct)
          detail::dct2d(basis, p, patch.data(), dst, false, scratch);
        else
          std::copy(patch.begin(), patch.end(), dst);
      }
    }
  return grid;
}

inline Image synthesis(const LatentGrid& grid, const TransformSpec& spec) {
  validate(spec);
  require(grid.n == spec.latent_channels(), ErrorCode::kDimensionMismatch,
          "latent channel count does not match transform");
  const std::size_t p = spec.patch;
  Image image(std::uint32_t(grid.w * p), std::uint32_t(grid.h * p), spec.channels);
  const auto basis = spec.kind == TransformKind::kPatchifyDct ? dct_basis(p) : std::vector<double>{};
  std::vector<double> patch(p * p), scratch;
  for (std::size_t gy = 0; gy < grid.h; ++gy)
    for (std::size_t gx = 0; gx < grid.w; ++gx) {
      auto v = grid.at(gy, gx);
      for (std::size_t c = 0; c < spec.channels; ++c) {
        const double* src = v.data() + c * p * p;
        if (spec.kind == TransformKind::kPatchifyDct)
          detail::dct2d(basis, p, src, patch.data(), true, scratch);
        else
          std::copy(src, src + p * p, patch.begin());
        const double off = spec.offset_of(c), sc = spec.scale_of(c);
        for (std::size_t r = 0; r < p; ++r)
          for (std::size_t q = 0; q < p; ++q)
            image.at(std::uint32_t(gx * p + q), std::uint32_t(gy * p + r), std::uint32_t(c)) =
                detail::to_u8(patch[r * p + q] * sc + off);
      }
    }
  return image;
}

// 2x2 average pooling; odd sizes are first padded by edge replication.
inline LatentGrid downsample(const LatentGrid& grid) {
  LatentGrid out((grid.h + 1) / 2, (grid.w + 1) / 2, grid.n);
  for (std::size_t y = 0; y < out.h; ++y)
    for (std::size_t x = 0; x < out.w; ++x) {
      auto dst = out.at(y, x);
      for (std::size_t dy = 0; dy < 2; ++dy)
        for (std::size_t dx = 0; dx < 2; ++dx) {
          auto src = grid.at(std::min(2 * y + dy, grid.h - 1), std::min(2 * x + dx, grid.w - 1));
          for (std::size_t c = 0; c < grid.n; ++c) dst[c] += src[c];
        }
      for (double& v : dst) v *= 0.25;
    }
  return out;
}

// Nearest-neighbour 2x replication per axis.
inline LatentGrid upsample(const LatentGrid& grid) {
  LatentGrid out(grid.h * 2, grid.w * 2, grid.n);
  for (std::size_t y = 0; y < out.h; ++y)
    for (std::size_t x = 0; x < out.w; ++x) {
      auto src = grid.at(y / 2, x / 2);
      std::copy(src.begin(), src.end(), out.at(y, x).begin());
    }
  return out;
}

// Top-left h x w window.
inline LatentGrid crop(const LatentGrid& grid, std::size_t h, std::size_t w) {
  require(h <= grid.h && w <= grid.w, ErrorCode::kShapeMismatch, "crop larger than grid");
  if (h == grid.h && w == grid.w) return grid;
  LatentGrid out(h, w, grid.n);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      auto src = grid.at(y, x);
      std::copy(src.begin(), src.end(), out.at(y, x).begin());
    }
  return out;
}

}  // namespace mcq

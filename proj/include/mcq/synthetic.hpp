#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "mcq/image.hpp"
#include "mcq/rng.hpp"

namespace mcq {

// Dead-leaves image: opaque discs dropped front to back with power-law radii,
// each with a flat colour, a linear shading ramp and mild sensor noise. The
// occlusion model gives edges and a roughly 1/f spectrum, which is a
// reasonable stand-in for photographs when none are available.
inline Image dead_leaves(std::uint32_t width, std::uint32_t height, std::uint32_t channels, std::uint64_t seed,
                         std::size_t max_discs = 200000) {
  require(width > 0 && height > 0 && (channels == 1 || channels == 3), ErrorCode::kInvalidArgument,
          "bad synthetic image shape");
  Image img(width, height, channels);
  std::vector<std::uint8_t> covered(img.pixel_count(), 0);
  std::size_t remaining = img.pixel_count();
  CounterRng rng(seed, 0xDEADull);
  const double rmin = 3.0, rmax = 0.4 * std::min(width, height);
  for (std::size_t disc = 0; disc < max_discs && remaining > 0; ++disc) {
    // Radius density ~ r^-3 between rmin and rmax (inverse CDF).
    const double u = rng.uniform_open();
    const double r = 1.0 / std::sqrt(u / (rmax * rmax) + (1.0 - u) / (rmin * rmin));
    const double cx = width * rng.uniform_open(), cy = height * rng.uniform_open();
    double colour[3];
    const double base = 30 + 200 * rng.uniform_open();
    for (double& c : colour) c = std::clamp(base + 40 * rng.normal(), 0.0, 255.0);
    const double gx = 0.6 * rng.normal(), gy = 0.6 * rng.normal();
    const auto x0 = static_cast<std::uint32_t>(std::max(0.0, std::floor(cx - r)));
    const auto x1 = static_cast<std::uint32_t>(std::min<double>(width - 1, std::ceil(cx + r)));
    const auto y0 = static_cast<std::uint32_t>(std::max(0.0, std::floor(cy - r)));
    const auto y1 = static_cast<std::uint32_t>(std::min<double>(height - 1, std::ceil(cy + r)));
    for (std::uint32_t y = y0; y <= y1; ++y)
      for (std::uint32_t x = x0; x <= x1; ++x) {
        const double dx = x - cx, dy = y - cy;
        const std::size_t idx = std::size_t(y) * width + x;
        if (dx * dx + dy * dy > r * r || covered[idx]) continue;
        covered[idx] = 1;
        --remaining;
        for (std::uint32_t c = 0; c < channels; ++c)
          img.samples[idx * channels + c] =
              static_cast<std::uint8_t>(std::clamp(std::round(colour[c] + gx * dx + gy * dy), 0.0, 255.0));
      }
  }
  // Pixels no disc reached (rare) take the mean grey.
  for (std::size_t i = 0; i < covered.size(); ++i)
    if (!covered[i])
      for (std::uint32_t c = 0; c < channels; ++c) img.samples[i * channels + c] = 128;
  for (auto& s : img.samples) s = static_cast<std::uint8_t>(std::clamp(std::round(s + 2.0 * rng.normal()), 0.0, 255.0));
  return img;
}

}  // namespace mcq

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "mcq/transform.hpp"
#include "test_util.hpp"

namespace mcq {
namespace {

using testing::random_grid;
using testing::random_image;

// Dense O(p^4) 2-D DCT-II of one patch, straight from the definition.
std::vector<double> dense_dct(const std::vector<double>& patch, std::size_t p) {
  std::vector<double> out(p * p, 0.0);
  auto a = [&](std::size_t u) { return u == 0 ? std::sqrt(1.0 / p) : std::sqrt(2.0 / p); };
  for (std::size_t u = 0; u < p; ++u)
    for (std::size_t v = 0; v < p; ++v) {
      double s = 0.0;
      for (std::size_t r = 0; r < p; ++r)
        for (std::size_t c = 0; c < p; ++c)
          s += patch[r * p + c] * std::cos(std::numbers::pi * (2 * r + 1) * u / (2.0 * p)) *
               std::cos(std::numbers::pi * (2 * c + 1) * v / (2.0 * p));
      out[u * p + v] = a(u) * a(v) * s;
    }
  return out;
}

std::vector<double> dense_idct(const std::vector<double>& coef, std::size_t p) {
  std::vector<double> out(p * p, 0.0);
  auto a = [&](std::size_t u) { return u == 0 ? std::sqrt(1.0 / p) : std::sqrt(2.0 / p); };
  for (std::size_t r = 0; r < p; ++r)
    for (std::size_t c = 0; c < p; ++c) {
      double s = 0.0;
      for (std::size_t u = 0; u < p; ++u)
        for (std::size_t v = 0; v < p; ++v)
          s += a(u) * a(v) * coef[u * p + v] * std::cos(std::numbers::pi * (2 * r + 1) * u / (2.0 * p)) *
               std::cos(std::numbers::pi * (2 * c + 1) * v / (2.0 * p));
      out[r * p + c] = s;
    }
  return out;
}

TransformSpec spec(TransformKind kind, std::uint32_t p, std::uint32_t channels = 1) {
  TransformSpec s;
  s.kind = kind;
  s.patch = p;
  s.channels = channels;
  return s;
}

TEST(Analysis, ShapeArithmetic) {
  auto g = analysis(Image(16, 16, 1, 7), spec(TransformKind::kPatchify, 4));
  EXPECT_EQ(g.h, 4u);
  EXPECT_EQ(g.w, 4u);
  EXPECT_EQ(g.n, 16u);
}

TEST(Analysis, ConstantMidGreyMapsToZero) {
  for (auto kind : {TransformKind::kPatchify, TransformKind::kPatchifyDct}) {
    auto g = analysis(Image(8, 8, 3, 128), spec(kind, 4, 3));
    for (double v : g.values) EXPECT_NEAR(v, 0.0, 1e-15);
  }
}

TEST(Analysis, DctRampMatchesDenseOracle) {
  Image ramp(8, 8, 1);
  for (std::uint32_t y = 0; y < 8; ++y)
    for (std::uint32_t x = 0; x < 8; ++x) ramp.at(x, y, 0) = static_cast<std::uint8_t>(16 * x + 10 * y);
  auto s = spec(TransformKind::kPatchifyDct, 4);
  auto g = analysis(ramp, s);
  for (std::size_t gy = 0; gy < 2; ++gy)
    for (std::size_t gx = 0; gx < 2; ++gx) {
      std::vector<double> patch(16);
      for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 4; ++c)
          patch[r * 4 + c] = (ramp.at(std::uint32_t(gx * 4 + c), std::uint32_t(gy * 4 + r), 0) - 128.0) / 128.0;
      auto ref = dense_dct(patch, 4);
      auto v = g.at(gy, gx);
      for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(v[i], ref[i], 1e-12);
    }
}

TEST(Analysis, RejectsIndivisibleAndEmpty) {
  auto s = spec(TransformKind::kPatchify, 4);
  EXPECT_THROW(analysis(Image(6, 8, 1), s), Error);
  EXPECT_THROW(analysis(Image(0, 0, 1), s), Error);
  EXPECT_THROW(analysis(Image(8, 8, 3), s), Error);
}

TEST(Synthesis, InvertsAnalysisExactly) {
  for (auto kind : {TransformKind::kPatchify, TransformKind::kPatchifyDct})
    for (std::uint32_t p : {1u, 2u, 3u, 4u, 8u})
      for (std::uint32_t c : {1u, 3u}) {
        auto img = random_image(p * 5, p * 3, c, p * 10 + c);
        auto s = spec(kind, p, c);
        EXPECT_EQ(synthesis(analysis(img, s), s), img) << to_string(kind) << " p=" << p << " c=" << c;
      }
}

TEST(Synthesis, ZeroGridIsMidGrey) {
  auto s = spec(TransformKind::kPatchifyDct, 4);
  auto img = synthesis(LatentGrid(2, 3, 16), s);
  EXPECT_EQ(img.width, 12u);
  EXPECT_EQ(img.height, 8u);
  for (auto v : img.samples) EXPECT_EQ(v, 128);
}

TEST(Synthesis, DctRoundTripThroughDenseInverseIsWithinOneCode) {
  auto img = random_image(16, 16, 1, 99);
  auto s = spec(TransformKind::kPatchifyDct, 4);
  auto g = analysis(img, s);
  for (std::size_t gy = 0; gy < g.h; ++gy)
    for (std::size_t gx = 0; gx < g.w; ++gx) {
      auto v = g.at(gy, gx);
      auto pix = dense_idct(std::vector<double>(v.begin(), v.end()), 4);
      for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 4; ++c) {
          double back = pix[r * 4 + c] * 128.0 + 128.0;
          EXPECT_LE(std::abs(back - img.at(std::uint32_t(gx * 4 + c), std::uint32_t(gy * 4 + r), 0)), 1.0);
        }
    }
}

TEST(Synthesis, RoundsHalfAwayFromZeroThenClamps) {
  TransformSpec s = spec(TransformKind::kPatchify, 1);
  s.offset = {0.0};
  s.scale = {1.0};
  LatentGrid g(1, 4, 1);
  g.values = {2.5, -0.4, 300.0, 254.5};
  auto img = synthesis(g, s);
  EXPECT_EQ(img.samples, (std::vector<std::uint8_t>{3, 0, 255, 255}));
  EXPECT_THROW(synthesis(LatentGrid(1, 1, 2), s), Error);
}

TEST(Analysis, DctPreservesPatchEnergy) {
  auto img = random_image(32, 32, 3, 5);
  auto plain = analysis(img, spec(TransformKind::kPatchify, 8, 3));
  auto dct = analysis(img, spec(TransformKind::kPatchifyDct, 8, 3));
  for (std::size_t pos = 0; pos < plain.positions(); ++pos)
    for (std::size_t c = 0; c < 3; ++c) {
      double a = 0, b = 0;
      for (std::size_t i = 0; i < 64; ++i) {
        a += plain.vec(pos)[c * 64 + i] * plain.vec(pos)[c * 64 + i];
        b += dct.vec(pos)[c * 64 + i] * dct.vec(pos)[c * 64 + i];
      }
      EXPECT_NEAR(a, b, 1e-9 * std::max(a, 1e-300));
    }
}

TEST(Downsample, AveragesWindows) {
  LatentGrid g(2, 2, 1);
  g.values = {1, 3, 5, 7};
  auto d = downsample(g);
  ASSERT_EQ(d.values.size(), 1u);
  EXPECT_DOUBLE_EQ(d.values[0], 4.0);

  LatentGrid c(6, 4, 3, 2.5);
  for (double v : downsample(c).values) EXPECT_DOUBLE_EQ(v, 2.5);
}

TEST(Downsample, MatchesWindowMeanOracle) {
  auto g = random_grid(4, 4, 2, 11);
  auto d = downsample(g);
  for (std::size_t y = 0; y < 2; ++y)
    for (std::size_t x = 0; x < 2; ++x)
      for (std::size_t c = 0; c < 2; ++c) {
        double s = 0;
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) s += g.at(2 * y + dy, 2 * x + dx)[c];
        EXPECT_NEAR(d.at(y, x)[c], s / 4, 1e-15);
      }
}

TEST(Downsample, OddSizesReplicateEdges) {
  LatentGrid g(3, 1, 1);
  g.values = {1, 2, 5};
  auto d = downsample(g);
  EXPECT_EQ(d.h, 2u);
  EXPECT_EQ(d.w, 1u);
  EXPECT_DOUBLE_EQ(d.values[0], 1.5);
  EXPECT_DOUBLE_EQ(d.values[1], 5.0);
}

TEST(Upsample, ReplicatesBlocks) {
  LatentGrid one(1, 1, 1, 4.0);
  EXPECT_EQ(upsample(one).values, (std::vector<double>{4, 4, 4, 4}));

  auto g = random_grid(2, 3, 1, 12);
  auto u = upsample(g);
  ASSERT_EQ(u.h, 4u);
  ASSERT_EQ(u.w, 6u);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 6; ++x) EXPECT_EQ(u.at(y, x)[0], g.values[(y / 2) * 3 + x / 2]);
}

TEST(Upsample, DownsampleUndoesItExactly) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto g = random_grid(1 + seed % 5, 1 + seed % 7, 3, seed);
    EXPECT_EQ(downsample(upsample(g)), g);
  }
}

TEST(Pad, AlreadyDivisibleIsUnchanged) {
  Image img(768, 512, 3, 9);
  auto [padded, dims] = pad_to_multiple(img, 64);
  EXPECT_EQ(padded, img);
  EXPECT_EQ(dims.width, 768u);
}

TEST(Pad, FiveByFiveToEight) {
  auto img = random_image(5, 5, 1, 3);
  auto [padded, dims] = pad_to_multiple(img, 4);
  EXPECT_EQ(padded.width, 8u);
  EXPECT_EQ(padded.height, 8u);
  EXPECT_EQ(padded.at(7, 7, 0), img.at(4, 4, 0));
  EXPECT_EQ(padded.at(6, 2, 0), img.at(4, 2, 0));
}

TEST(Pad, CropRoundTripAllSmallSizes) {
  for (std::uint32_t h = 1; h <= 64; ++h)
    for (std::uint32_t w = 1; w <= 64; ++w) {
      auto img = random_image(w, h, 1, h * 100 + w);
      auto [padded, dims] = pad_to_multiple(img, 8);
      ASSERT_EQ(padded.width % 8, 0u);
      ASSERT_EQ(crop(padded, dims), img);
    }
}

}  // namespace
}  // namespace mcq

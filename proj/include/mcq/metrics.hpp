#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mcq/error.hpp"
#include "mcq/image.hpp"

namespace mcq {

inline constexpr double kMetricCapDb = 99.0;

inline void require_same_dims(const Image& a, const Image& b) {
  validate(a);
  validate(b);
  require(a.width == b.width && a.height == b.height && a.channels == b.channels,
          ErrorCode::kDimensionMismatch, "images differ in dimensions");
}

inline double mse(const Image& a, const Image& b) {
  require_same_dims(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    double d = double(a.samples[i]) - double(b.samples[i]);
    s += d * d;
  }
  return a.samples.empty() ? 0.0 : s / double(a.samples.size());
}

// 10 log10(255^2 / MSE), capped at 99 dB for identical images.
inline double psnr(const Image& a, const Image& b) {
  double e = mse(a, b);
  if (e == 0.0) return kMetricCapDb;
  return std::min(kMetricCapDb, 10.0 * std::log10(255.0 * 255.0 / e));
}

// -10 log10(1 - v); v >= 1 caps at 99 dB.
inline double db_convert(double v) {
  if (v >= 1.0) return kMetricCapDb;
  return std::min(kMetricCapDb, -10.0 * std::log10(1.0 - v));
}

struct MsSsimResult {
  double value = 1.0;
  std::size_t scales = 5;  // < 5 when the image was too small for all scales
};

inline constexpr std::array<double, 5> kMsSsimWeights{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
inline constexpr std::size_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

namespace detail {

struct Plane {
  std::size_t w = 0, h = 0;
  std::vector<double> v;
  double at(std::size_t x, std::size_t y) const { return v[y * w + x]; }
};

inline std::array<double, kSsimWindow> gaussian_window() {
  std::array<double, kSsimWindow> g{};
  double sum = 0.0;
  for (std::size_t i = 0; i < kSsimWindow; ++i) {
    double x = double(i) - double(kSsimWindow / 2);
    g[i] = std::exp(-x * x / (2.0 * kSsimSigma * kSsimSigma));
    sum += g[i];
  }
  for (double& x : g) x /= sum;
  return g;
}

// Separable 'valid' Gaussian filtering.
inline Plane filter_valid(const Plane& in) {
  static const auto g = gaussian_window();
  const std::size_t ow = in.w - kSsimWindow + 1, oh = in.h - kSsimWindow + 1;
  Plane tmp{ow, in.h, std::vector<double>(ow * in.h)};
  for (std::size_t y = 0; y < in.h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t k = 0; k < kSsimWindow; ++k) s += g[k] * in.at(x + k, y);
      tmp.v[y * ow + x] = s;
    }
  Plane out{ow, oh, std::vector<double>(ow * oh)};
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t k = 0; k < kSsimWindow; ++k) s += g[k] * tmp.at(x, y + k);
      out.v[y * ow + x] = s;
    }
  return out;
}

inline Plane product(const Plane& a, const Plane& b) {
  Plane out{a.w, a.h, std::vector<double>(a.v.size())};
  for (std::size_t i = 0; i < a.v.size(); ++i) out.v[i] = a.v[i] * b.v[i];
  return out;
}

inline Plane halve(const Plane& in) {
  Plane out{in.w / 2, in.h / 2, {}};
  out.v.resize(out.w * out.h);
  for (std::size_t y = 0; y < out.h; ++y)
    for (std::size_t x = 0; x < out.w; ++x)
      out.v[y * out.w + x] = 0.25 * (in.at(2 * x, 2 * y) + in.at(2 * x + 1, 2 * y) + in.at(2 * x, 2 * y + 1) +
                                     in.at(2 * x + 1, 2 * y + 1));
  return out;
}

// Mean contrast-structure term and mean full SSIM at one scale.
inline std::pair<double, double> ssim_terms(const Plane& x, const Plane& y) {
  constexpr double c1 = (0.01 * 255) * (0.01 * 255), c2 = (0.03 * 255) * (0.03 * 255);
  Plane mx = filter_valid(x), my = filter_valid(y);
  Plane xx = filter_valid(product(x, x)), yy = filter_valid(product(y, y)), xy = filter_valid(product(x, y));
  double cs_sum = 0.0, ssim_sum = 0.0;
  for (std::size_t i = 0; i < mx.v.size(); ++i) {
    double mu_x = mx.v[i], mu_y = my.v[i];
    double sxx = xx.v[i] - mu_x * mu_x, syy = yy.v[i] - mu_y * mu_y, sxy = xy.v[i] - mu_x * mu_y;
    double cs = (2.0 * sxy + c2) / (sxx + syy + c2);
    double l = (2.0 * mu_x * mu_y + c1) / (mu_x * mu_x + mu_y * mu_y + c1);
    cs_sum += cs;
    ssim_sum += l * cs;
  }
  double n = double(mx.v.size());
  return {cs_sum / n, ssim_sum / n};
}

inline Plane channel_plane(const Image& img, std::size_t c) {
  Plane p{img.width, img.height, std::vector<double>(img.pixel_count())};
  for (std::size_t i = 0; i < p.v.size(); ++i) p.v[i] = img.samples[i * img.channels + c];
  return p;
}

}  // namespace detail

inline std::size_t ms_ssim_scales(std::size_t width, std::size_t height) {
  std::size_t m = std::min(width, height), scales = 0;
  while (scales < kMsSsimWeights.size() && (m >> scales) >= kSsimWindow) ++scales;
  return scales;
}

// Five-scale MS-SSIM (fewer for small images, weights renormalized), averaged
// over channels. Negative per-scale terms are clamped to 0.
inline MsSsimResult ms_ssim(const Image& a, const Image& b) {
  require_same_dims(a, b);
  const std::size_t scales = ms_ssim_scales(a.width, a.height);
  require(scales >= 1, ErrorCode::kInvalidArgument, "image smaller than the 11x11 SSIM window");
  double wsum = 0.0;
  for (std::size_t j = 0; j < scales; ++j) wsum += kMsSsimWeights[j];
  double total = 0.0;
  for (std::size_t c = 0; c < a.channels; ++c) {
    auto x = detail::channel_plane(a, c), y = detail::channel_plane(b, c);
    double value = 1.0;
    for (std::size_t j = 0; j < scales; ++j) {
      auto [cs, ssim] = detail::ssim_terms(x, y);
      double term = j + 1 == scales ? ssim : cs;
      value *= std::pow(std::max(term, 0.0), kMsSsimWeights[j] / wsum);
      if (j + 1 < scales) {
        x = detail::halve(x);
        y = detail::halve(y);
      }
    }
    total += value;
  }
  return {total / double(a.channels), scales};
}

struct RdPoint {
  double bpp = 0.0;
  double psnr_db = 0.0;
  double msssim_db = 0.0;
};

enum class QualityAxis { kPsnr, kMsSsimDb };

namespace detail {

inline double quality_of(const RdPoint& p, QualityAxis axis) {
  return axis == QualityAxis::kPsnr ? p.psnr_db : p.msssim_db;
}

// Least-squares cubic ln(rate) = c0 + c1 q + c2 q^2 + c3 q^3.
inline Eigen::Vector4d fit_log_rate(std::span<const RdPoint> pts, QualityAxis axis) {
  Eigen::MatrixXd A(pts.size(), 4);
  Eigen::VectorXd b(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double q = quality_of(pts[i], axis);
    A.row(Eigen::Index(i)) << 1.0, q, q * q, q * q * q;
    b(Eigen::Index(i)) = std::log(pts[i].bpp);
  }
  return A.colPivHouseholderQr().solve(b);
}

inline double poly_integral(const Eigen::Vector4d& c, double lo, double hi) {
  auto prim = [&](double q) { return c(0) * q + c(1) * q * q / 2 + c(2) * q * q * q / 3 + c(3) * q * q * q * q / 4; };
  return prim(hi) - prim(lo);
}

}  // namespace detail

// Bjontegaard delta rate of curve b relative to curve a, in percent.
inline double bd_rate(std::span<const RdPoint> a, std::span<const RdPoint> b, QualityAxis axis = QualityAxis::kPsnr) {
  require(a.size() >= 4 && b.size() >= 4, ErrorCode::kInvalidArgument, "BD-rate needs >= 4 points per curve");
  for (auto pts : {a, b})
    for (const auto& p : pts)
      require(p.bpp > 0.0 && std::isfinite(detail::quality_of(p, axis)), ErrorCode::kInvalidArgument,
              "RD points need positive rate and finite quality");
  auto range = [&](std::span<const RdPoint> pts) {
    auto [lo, hi] = std::minmax_element(pts.begin(), pts.end(), [&](const RdPoint& x, const RdPoint& y) {
      return detail::quality_of(x, axis) < detail::quality_of(y, axis);
    });
    return std::pair{detail::quality_of(*lo, axis), detail::quality_of(*hi, axis)};
  };
  auto [alo, ahi] = range(a);
  auto [blo, bhi] = range(b);
  const double lo = std::max(alo, blo), hi = std::min(ahi, bhi);
  require(hi > lo, ErrorCode::kInvalidArgument, "RD curves do not overlap in quality");
  const auto ca = detail::fit_log_rate(a, axis), cb = detail::fit_log_rate(b, axis);
  const double avg = (detail::poly_integral(cb, lo, hi) - detail::poly_integral(ca, lo, hi)) / (hi - lo);
  return (std::exp(avg) - 1.0) * 100.0;
}

struct JackknifeEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
};

// Leave-one-out jackknife of the sample mean. Works on offsets from the first
// value so a constant sample gives exactly zero error.
inline JackknifeEstimate jackknife_mean(std::span<const double> values) {
  require(!values.empty(), ErrorCode::kInvalidArgument, "jackknife of an empty sample");
  const double n = double(values.size()), ref = values[0];
  double sum = 0.0;
  for (double v : values) sum += v - ref;
  JackknifeEstimate est{ref + sum / n, 0.0};
  if (values.size() < 2) return est;
  double loo_mean = 0.0;
  std::vector<double> loo(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    loo[i] = (sum - (values[i] - ref)) / (n - 1.0);
    loo_mean += loo[i] / n;
  }
  double ss = 0.0;
  for (double t : loo) ss += (t - loo_mean) * (t - loo_mean);
  est.standard_error = std::sqrt((n - 1.0) / n * ss);
  return est;
}

}  // namespace mcq

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "mcq/codec.hpp"
#include "mcq/entropy.hpp"
#include "mcq/metrics.hpp"
#include "mcq/quantizer.hpp"
#include "mcq/rng.hpp"

namespace mcq {

inline constexpr const char* kSweepSchema = "mcq-sweep/1";
inline constexpr const char* kBenchSchema = "mcq-bench/1";
inline constexpr const char* kTraceSchema = "mcq-trace/1";

// ---------------------------------------------------------------------------
// Code perturbation
// ---------------------------------------------------------------------------

struct PerturbedCodes {
  CodeStack codes;
  std::size_t selected = 0;  // floor(fraction * total slots)
  std::size_t changed = 0;   // selected slots whose K allowed a different index
};

// Picks floor(fraction * slots) (level, position, group) slots uniformly
// without replacement and replaces each index by a uniformly drawn different one.
inline PerturbedCodes perturb_codes(const CodeStack& codes, const std::vector<std::size_t>& codewords, double fraction,
                                    std::uint64_t seed) {
  require(fraction >= 0.0 && fraction <= 1.0, ErrorCode::kInvalidArgument, "fraction must be in [0, 1]");
  PerturbedCodes out{codes, 0, 0};
  std::vector<std::pair<std::size_t, std::size_t>> slots;  // (level, flat index)
  for (std::size_t l = 0; l < codes.size(); ++l)
    for (std::size_t i = 0; i < codes[l].indices.size(); ++i) slots.emplace_back(l, i);
  out.selected = static_cast<std::size_t>(std::floor(fraction * double(slots.size())));
  CounterRng rng(seed, 0x9E27ull);
  for (std::size_t i = 0; i < out.selected; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.below(slots.size() - i));
    std::swap(slots[i], slots[j]);
    auto [l, idx] = slots[i];
    const std::size_t K = codewords.at(l);
    if (K < 2) continue;
    auto& v = out.codes[l].indices[idx];
    auto r = static_cast<std::uint32_t>(rng.below(K - 1));
    v = r >= v ? r + 1 : r;
    ++out.changed;
  }
  return out;
}

struct QualityReport {
  double bpp = 0.0;
  double psnr_db = 0.0;
  double msssim = 0.0;
  double msssim_db = 0.0;
  std::size_t msssim_scales = 0;
};

inline QualityReport measure(const Image& reference, const Image& decoded, std::size_t stream_bytes) {
  QualityReport q;
  q.bpp = actual_bpp(stream_bytes, reference.width, reference.height);
  q.psnr_db = psnr(reference, decoded);
  auto ms = ms_ssim(reference, decoded);
  q.msssim = ms.value;
  q.msssim_scales = ms.scales;
  q.msssim_db = db_convert(ms.value);
  return q;
}

struct PerturbReport {
  QualityReport before;
  QualityReport after;
  std::size_t selected = 0;
  std::size_t changed = 0;
  std::vector<std::uint8_t> stream;  // perturbed, re-encoded
};

// Perturbs a stream's codes, re-encodes with fresh tables and measures both
// versions against the reference image.
inline PerturbReport perturb_stream(std::span<const std::uint8_t> bytes, const LoadedCodebook& codebook,
                                    const Image& reference, double fraction, std::uint64_t seed) {
  auto stream = read_stream(bytes, &codebook.digest);
  auto codes = decode_codes(stream);
  PerturbReport rep;
  rep.before = measure(reference, decompress_codes(stream.header, codes, codebook.books), bytes.size());
  auto p = perturb_codes(codes, stream.header.codewords_sz(), fraction, seed);
  rep.selected = p.selected;
  rep.changed = p.changed;
  auto enc = package_codes(stream.header, std::move(p.codes));
  rep.after = measure(reference, decompress_codes(enc.stream.header, enc.codes, codebook.books), enc.bytes.size());
  rep.stream = std::move(enc.bytes);
  return rep;
}

// ---------------------------------------------------------------------------
// R-D sweep
// ---------------------------------------------------------------------------

struct SweepRow {
  std::string model;
  std::string image;  // "mean" for the per-model summary row
  QualityReport quality;
  // Jackknife standard errors, summary rows only.
  double bpp_se = 0.0, psnr_se = 0.0, msssim_db_se = 0.0;
};

struct SweepModel {
  ModelSpec spec;
  LoadedCodebook codebook;
};

struct SweepImage {
  std::string name;
  Image image;
};

inline std::vector<SweepRow> run_sweep(const std::vector<SweepImage>& images, const std::vector<SweepModel>& models) {
  require(!images.empty() && !models.empty(), ErrorCode::kInvalidArgument, "sweep needs images and models");
  std::vector<SweepRow> rows;
  for (const auto& model : models) {
    std::vector<double> bpp, ps, msdb, ms;
    for (const auto& img : images) {
      auto enc = compress_image(img.image, model.spec, model.codebook);
      auto dec = decompress_codes(enc.stream.header, enc.codes, model.codebook.books);
      auto q = measure(img.image, dec, enc.bytes.size());
      rows.push_back({model.spec.name, img.name, q});
      bpp.push_back(q.bpp);
      ps.push_back(q.psnr_db);
      ms.push_back(q.msssim);
      msdb.push_back(q.msssim_db);
    }
    SweepRow mean{model.spec.name, "mean", {}};
    auto jb = jackknife_mean(bpp), jp = jackknife_mean(ps), jm = jackknife_mean(ms), jd = jackknife_mean(msdb);
    mean.quality = {jb.mean, jp.mean, jm.mean, jd.mean, 0};
    mean.bpp_se = jb.standard_error;
    mean.psnr_se = jp.standard_error;
    mean.msssim_db_se = jd.standard_error;
    rows.push_back(mean);
  }
  return rows;
}

namespace detail {
inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}
}  // namespace detail

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "# schema=" << kSweepSchema << "\n";
  out << "model_id,image,bpp,psnr_db,msssim,msssim_db,bpp_se,psnr_se,msssim_db_se\n";
  for (const auto& r : rows) {
    out << r.model << ',' << r.image << ',' << detail::fmt_double(r.quality.bpp) << ','
        << detail::fmt_double(r.quality.psnr_db) << ',' << detail::fmt_double(r.quality.msssim) << ','
        << detail::fmt_double(r.quality.msssim_db) << ',';
    if (r.image == "mean")
      out << detail::fmt_double(r.bpp_se) << ',' << detail::fmt_double(r.psnr_se) << ','
          << detail::fmt_double(r.msssim_db_se);
    else
      out << ",,";
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Latency vs codebook size
// ---------------------------------------------------------------------------

struct BenchConfig {
  std::size_t channels = 48;  // N
  std::size_t grid_h = 32;
  std::size_t grid_w = 32;
  std::size_t warmup = 3;
  std::size_t runs = 20;
  std::uint64_t seed = 7;
};

struct BenchRow {
  std::size_t groups = 0;
  std::size_t codewords = 0;
  double encode_ms = 0.0;  // quantize + tables + range coding
  double decode_ms = 0.0;  // range decoding + lookup
};

inline double median(std::vector<double> v) {
  require(!v.empty(), ErrorCode::kInvalidArgument, "median of nothing");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline BenchRow bench_codebook(std::size_t groups, std::size_t codewords, const BenchConfig& cfg) {
  require(cfg.warmup >= 3 && cfg.runs >= 1, ErrorCode::kInvalidArgument, "bench needs >= 3 warmup iterations");
  require(cfg.channels % groups == 0, ErrorCode::kInvalidArgument, "channels not divisible by groups");
  MultiCodebook books(groups, cfg.channels / groups, {codewords});
  CounterRng rng(cfg.seed, codewords * 131 + groups);
  for (double& v : books.level_values(0)) v = rng.normal();
  books.round_to_float();
  LatentGrid latent(cfg.grid_h, cfg.grid_w, cfg.channels);
  for (double& v : latent.values) v = rng.normal();

  using clock = std::chrono::steady_clock;
  std::vector<double> enc_ms, dec_ms;
  std::size_t sink = 0;
  for (std::size_t it = 0; it < cfg.warmup + cfg.runs; ++it) {
    auto t0 = clock::now();
    auto q = quantize_hard(latent, books, 0);
    CodeStack stack{q.codes};
    auto tables = build_tables(stack, {codewords});
    auto streams = encode_indices(stack, tables);
    auto t1 = clock::now();
    auto decoded = decode_indices(streams, tables, {{cfg.grid_h, cfg.grid_w}}, groups);
    auto grid = dequantize(decoded[0], books, 0);
    auto t2 = clock::now();
    sink += grid.values.size() + payload_bytes(streams);
    if (it >= cfg.warmup) {
      enc_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
      dec_ms.push_back(std::chrono::duration<double, std::milli>(t2 - t1).count());
    }
  }
  require(sink > 0, ErrorCode::kInvalidArgument, "empty benchmark");
  return {groups, codewords, median(enc_ms), median(dec_ms)};
}

inline std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << "# schema=" << kBenchSchema << "\n";
  out << "M,K,enc_ms,dec_ms\n";
  for (const auto& r : rows)
    out << r.groups << ',' << r.codewords << ',' << detail::fmt_double(r.encode_ms) << ','
        << detail::fmt_double(r.decode_ms) << '\n';
  return out.str();
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

inline LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, ErrorCode::kInvalidArgument, "line fit needs >= 2 points");
  const double n = double(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n, my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

}  // namespace mcq

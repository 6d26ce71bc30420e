#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "mcq/error.hpp"
#include "mcq/latent.hpp"
#include "mcq/quantizer.hpp"
#include "mcq/transform.hpp"

namespace mcq {

struct CascadeConfig {
  std::size_t levels = 1;
  SamplerConfig sampler{};
};

// One CodeGrid per level; level l+1 has ceil(h/2) x ceil(w/2) positions of level l.
using CodeStack = std::vector<CodeGrid>;

struct GridShape {
  std::size_t h;
  std::size_t w;
  friend bool operator==(const GridShape&, const GridShape&) = default;
};

inline std::vector<GridShape> level_shapes(std::size_t h, std::size_t w, std::size_t levels) {
  std::vector<GridShape> out;
  for (std::size_t l = 0; l < levels; ++l) {
    out.push_back({h, w});
    h = (h + 1) / 2;
    w = (w + 1) / 2;
  }
  return out;
}

inline void validate_stack(const CodeStack& codes, const MultiCodebook& books) {
  require(!codes.empty(), ErrorCode::kShapeMismatch, "empty code stack");
  require(codes.size() <= books.levels(), ErrorCode::kShapeMismatch, "more code levels than codebook levels");
  auto shapes = level_shapes(codes[0].h, codes[0].w, codes.size());
  for (std::size_t l = 0; l < codes.size(); ++l) {
    require(codes[l].h == shapes[l].h && codes[l].w == shapes[l].w, ErrorCode::kShapeMismatch,
            "level " + std::to_string(l) + " violates the halving law");
    require(codes[l].groups == books.groups(), ErrorCode::kShapeMismatch, "group count differs");
  }
}

struct CascadeEncoding {
  CodeStack codes;
  std::vector<LatentGrid> inputs;     // y^l fed to each level
  std::vector<LatentGrid> quantized;  // per-level codeword grids
};

// Level l quantizes y^l; y^{l+1} = downsample(y^l - q^l).
inline CascadeEncoding encode_cascade(const LatentGrid& latent, const MultiCodebook& books,
                                      const CascadeConfig& cfg) {
  require(cfg.levels >= 1 && cfg.levels <= books.levels(), ErrorCode::kInvalidArgument,
          "cascade levels must be in [1, codebook levels]");
  require(latent.h >= 1 && latent.w >= 1, ErrorCode::kInvalidArgument, "empty latent");
  CascadeEncoding enc;
  LatentGrid y = latent;
  for (std::size_t l = 0; l < cfg.levels; ++l) {
    auto q = quantize(y, books, l, cfg.sampler);
    enc.codes.push_back(std::move(q.codes));
    if (l + 1 < cfg.levels) {
      LatentGrid next = downsample(y - q.quantized);
      enc.inputs.push_back(std::move(y));
      y = std::move(next);
    } else {
      enc.inputs.push_back(std::move(y));
    }
    enc.quantized.push_back(std::move(q.quantized));
  }
  return enc;
}

// Reconstruction from per-level codeword grids: start at the coarsest level and
// add each finer level's codewords to the upsampled (cropped) coarser estimate.
// Levels below first_level contribute nothing, which yields a coarse latent.
inline LatentGrid combine_levels(const std::vector<LatentGrid>& quantized, std::size_t first_level = 0) {
  require(!quantized.empty() && first_level < quantized.size(), ErrorCode::kInvalidArgument,
          "first decoded level out of range");
  LatentGrid acc = quantized.back();
  for (std::size_t l = quantized.size() - 1; l-- > 0;) {
    LatentGrid up = crop(upsample(acc), quantized[l].h, quantized[l].w);
    acc = l >= first_level ? quantized[l] + up : std::move(up);
  }
  return acc;
}

inline LatentGrid decode_cascade(const CodeStack& codes, const MultiCodebook& books,
                                 std::size_t first_level = 0) {
  validate_stack(codes, books);
  std::vector<LatentGrid> q;
  q.reserve(codes.size());
  for (std::size_t l = 0; l < codes.size(); ++l) q.push_back(dequantize(codes[l], books, l));
  return combine_levels(q, first_level);
}

struct ReconstructionReport {
  std::vector<double> level_errors;  // |y^l - q^l|^2
  double total_error = 0.0;          // |y^1 - decoded|^2
};

inline ReconstructionReport reconstruction_error(const LatentGrid& latent, const MultiCodebook& books,
                                                 const CascadeConfig& cfg) {
  auto enc = encode_cascade(latent, books, cfg);
  ReconstructionReport report;
  for (std::size_t l = 0; l < enc.inputs.size(); ++l)
    report.level_errors.push_back(squared_distance(enc.inputs[l], enc.quantized[l]));
  report.total_error = squared_distance(latent, combine_levels(enc.quantized));
  return report;
}

}  // namespace mcq

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "mcq/byte_io.hpp"
#include "mcq/cascade.hpp"
#include "mcq/digest.hpp"
#include "mcq/entropy.hpp"
#include "mcq/error.hpp"
#include "mcq/quantizer.hpp"
#include "mcq/transform.hpp"

namespace mcq {

inline constexpr std::uint8_t kStreamVersion = 1;

struct StreamHeader {
  std::uint32_t width = 0;   // before padding
  std::uint32_t height = 0;  // before padding
  std::uint8_t channels = 1;
  TransformSpec transform;
  std::uint8_t levels = 1;
  std::uint16_t groups = 1;
  std::vector<std::uint32_t> codewords;  // K per coded level
  Digest codebook_digest{};
  bool sampled = false;  // codes drawn by the stochastic sampler
  std::vector<FrequencyTable> tables;

  std::vector<std::size_t> codewords_sz() const { return {codewords.begin(), codewords.end()}; }

  friend bool operator==(const StreamHeader&, const StreamHeader&) = default;
};

struct CompressedStream {
  StreamHeader header;
  PayloadStreams payload;

  friend bool operator==(const CompressedStream&, const CompressedStream&) = default;
};

// Level-1 grid dims follow from the padded image and patch size.
inline std::vector<GridShape> stream_level_shapes(const StreamHeader& h) {
  const std::size_t p = h.transform.patch;
  const std::size_t gh = (h.height + p - 1) / p, gw = (h.width + p - 1) / p;
  return level_shapes(gh, gw, h.levels);
}

inline void validate(const StreamHeader& h) {
  validate(h.transform);
  require(h.width > 0 && h.height > 0, ErrorCode::kCorruptStream, "zero image dimensions");
  require(h.channels == h.transform.channels, ErrorCode::kCorruptStream, "channel count disagrees with transform");
  require(h.levels >= 1 && h.codewords.size() == h.levels, ErrorCode::kCorruptStream, "level count mismatch");
  require(h.groups >= 1, ErrorCode::kCorruptStream, "zero groups");
  require(h.tables.size() == std::size_t(h.levels) * h.groups, ErrorCode::kCorruptStream, "table count mismatch");
  for (std::size_t l = 0; l < h.levels; ++l)
    for (std::size_t m = 0; m < h.groups; ++m)
      require(h.tables[l * h.groups + m].symbols() == h.codewords[l], ErrorCode::kCorruptStream,
              "table size differs from K");
}

inline std::vector<std::uint8_t> write_stream(const CompressedStream& s) {
  const auto& h = s.header;
  validate(h);
  require(s.payload.size() == h.tables.size(), ErrorCode::kInvalidArgument, "payload stream count mismatch");
  ByteWriter w;
  w.put_magic("MCQ1");
  w.put<std::uint8_t>(kStreamVersion);
  w.put<std::uint32_t>(h.width);
  w.put<std::uint32_t>(h.height);
  w.put<std::uint8_t>(h.channels);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(h.transform.kind));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(h.transform.patch));
  for (std::size_t c = 0; c < h.channels; ++c) {
    w.put<double>(h.transform.offset_of(c));
    w.put<double>(h.transform.scale_of(c));
  }
  w.put<std::uint8_t>(h.levels);
  w.put<std::uint16_t>(h.groups);
  for (auto k : h.codewords) w.put<std::uint32_t>(k);
  w.put_bytes(h.codebook_digest);
  w.put<std::uint8_t>(h.sampled ? 1 : 0);
  write_tables(w, h.tables);
  write_payload(w, s.payload);
  return std::move(w).take();
}

// Parses and validates a stream. When expected_digest is given, a stream made
// with a different codebook is rejected before any payload is touched.
inline CompressedStream read_stream(std::span<const std::uint8_t> bytes, const Digest* expected_digest = nullptr) {
  ByteReader r(bytes);
  require(r.magic_matches("MCQ1"), ErrorCode::kCorruptMagic, "not an MCQ1 stream");
  require(r.get<std::uint8_t>() == kStreamVersion, ErrorCode::kVersionUnsupported, "unsupported stream version");
  CompressedStream s;
  auto& h = s.header;
  h.width = r.get<std::uint32_t>();
  h.height = r.get<std::uint32_t>();
  h.channels = r.get<std::uint8_t>();
  require(h.channels == 1 || h.channels == 3, ErrorCode::kCorruptStream, "bad channel count");
  auto kind = r.get<std::uint8_t>();
  require(kind <= 1, ErrorCode::kCorruptStream, "unknown transform kind");
  h.transform.kind = static_cast<TransformKind>(kind);
  h.transform.patch = r.get<std::uint16_t>();
  h.transform.channels = h.channels;
  h.transform.offset.clear();
  h.transform.scale.clear();
  for (std::size_t c = 0; c < h.channels; ++c) {
    h.transform.offset.push_back(r.get<double>());
    h.transform.scale.push_back(r.get<double>());
  }
  h.levels = r.get<std::uint8_t>();
  h.groups = r.get<std::uint16_t>();
  require(h.levels >= 1 && h.groups >= 1, ErrorCode::kCorruptStream, "zero levels or groups");
  for (std::size_t l = 0; l < h.levels; ++l) {
    h.codewords.push_back(r.get<std::uint32_t>());
    require(h.codewords.back() >= 1 && h.codewords.back() <= kMaxFrequencyTotal, ErrorCode::kCorruptStream,
            "codeword count out of range");
  }
  auto digest = r.get_bytes(32);
  std::copy(digest.begin(), digest.end(), h.codebook_digest.begin());
  if (expected_digest && *expected_digest != h.codebook_digest)
    fail(ErrorCode::kDigestMismatch, "stream was encoded with codebook " + to_hex(h.codebook_digest) +
                                         ", decoder holds " + to_hex(*expected_digest));
  auto flag = r.get<std::uint8_t>();
  require(flag <= 1, ErrorCode::kCorruptStream, "bad sampling flag");
  h.sampled = flag == 1;
  h.tables = read_tables(r, h.codewords_sz(), h.groups);
  s.payload = read_payload(r, h.tables.size());
  require(r.remaining() == 0, ErrorCode::kCorruptStream, "trailing bytes after payload");
  validate(h);
  return s;
}

// Theoretical bpp ceiling: M * sum_l bits_l / factor_l^2.
inline double sup_bpp(std::size_t groups, std::span<const double> bits_per_level,
                      std::span<const double> spatial_factors) {
  require(bits_per_level.size() == spatial_factors.size(), ErrorCode::kInvalidArgument,
          "bits and factors differ in length");
  double sum = 0.0;
  for (std::size_t l = 0; l < bits_per_level.size(); ++l) {
    require(spatial_factors[l] >= 1.0, ErrorCode::kInvalidArgument, "spatial factor must be >= 1");
    sum += bits_per_level[l] / (spatial_factors[l] * spatial_factors[l]);
  }
  return double(groups) * sum;
}

// Same ceiling from exact per-level grid sizes: M * sum_l log2(K_l) h_l w_l / (H W).
inline double sup_bpp_for_shapes(std::size_t groups, std::span<const std::size_t> codewords,
                                 std::span<const GridShape> shapes, std::size_t width, std::size_t height) {
  require(codewords.size() == shapes.size(), ErrorCode::kInvalidArgument, "levels differ in length");
  double bits = 0.0;
  for (std::size_t l = 0; l < shapes.size(); ++l)
    bits += std::log2(double(codewords[l])) * double(shapes[l].h * shapes[l].w);
  return double(groups) * bits / double(width * height);
}

inline double actual_bpp(std::size_t bytes, std::size_t width, std::size_t height) {
  require(width > 0 && height > 0, ErrorCode::kInvalidArgument, "zero image dimensions");
  return 8.0 * double(bytes) / double(width * height);
}

}  // namespace mcq

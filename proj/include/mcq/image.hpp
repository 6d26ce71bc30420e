#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "mcq/error.hpp"

namespace mcq {

// 8-bit interleaved image, row-major.
struct Image {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t channels = 1;
  std::vector<std::uint8_t> samples;

  Image() = default;
  Image(std::uint32_t w, std::uint32_t h, std::uint32_t c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c), samples(std::size_t(w) * h * c, fill) {}

  std::size_t pixel_count() const { return std::size_t(width) * height; }
  bool empty() const { return width == 0 || height == 0; }

  std::uint8_t& at(std::uint32_t x, std::uint32_t y, std::uint32_t c) {
    return samples[(std::size_t(y) * width + x) * channels + c];
  }
  std::uint8_t at(std::uint32_t x, std::uint32_t y, std::uint32_t c) const {
    return samples[(std::size_t(y) * width + x) * channels + c];
  }

  friend bool operator==(const Image&, const Image&) = default;
};

inline void validate(const Image& image) {
  require(image.channels == 1 || image.channels == 3, ErrorCode::kInvalidArgument,
          "image channels must be 1 or 3");
  require(image.samples.size() == image.pixel_count() * image.channels,
          ErrorCode::kDimensionMismatch, "sample count does not match dimensions");
}

struct OriginalDims {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
};

// Edge-replicating pad on the right and bottom up to the next multiple.
inline std::pair<Image, OriginalDims> pad_to_multiple(const Image& image, std::uint32_t multiple) {
  require(multiple >= 1, ErrorCode::kInvalidArgument, "pad multiple must be >= 1");
  validate(image);
  OriginalDims dims{image.width, image.height};
  auto round_up = [&](std::uint32_t v) { return (v + multiple - 1) / multiple * multiple; };
  std::uint32_t w = round_up(image.width), h = round_up(image.height);
  if (w == image.width && h == image.height) return {image, dims};
  Image out(w, h, image.channels);
  for (std::uint32_t y = 0; y < h; ++y) {
    std::uint32_t sy = std::min(y, image.height - 1);
    for (std::uint32_t x = 0; x < w; ++x) {
      std::uint32_t sx = std::min(x, image.width - 1);
      for (std::uint32_t c = 0; c < image.channels; ++c) out.at(x, y, c) = image.at(sx, sy, c);
    }
  }
  return {out, dims};
}

inline Image crop(const Image& image, OriginalDims dims) {
  require(dims.width <= image.width && dims.height <= image.height, ErrorCode::kDimensionMismatch,
          "crop larger than image");
  if (dims.width == image.width && dims.height == image.height) return image;
  Image out(dims.width, dims.height, image.channels);
  for (std::uint32_t y = 0; y < dims.height; ++y) {
    auto src = image.samples.begin() + std::ptrdiff_t(std::size_t(y) * image.width * image.channels);
    std::copy_n(src, std::size_t(dims.width) * image.channels,
                out.samples.begin() + std::ptrdiff_t(std::size_t(y) * dims.width * image.channels));
  }
  return out;
}

// --- PPM / PGM (binary P5/P6, maxval 255) ---

namespace detail {

inline std::uint32_t read_pnm_int(const std::vector<std::uint8_t>& buf, std::size_t& pos) {
  for (;;) {
    while (pos < buf.size() && std::isspace(buf[pos])) ++pos;
    if (pos < buf.size() && buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  require(pos < buf.size() && std::isdigit(buf[pos]), ErrorCode::kCorruptStream,
          "malformed PNM header");
  std::uint64_t v = 0;
  while (pos < buf.size() && std::isdigit(buf[pos])) {
    v = v * 10 + (buf[pos++] - '0');
    require(v <= 0xFFFFFFFFu, ErrorCode::kCorruptStream, "PNM header value overflow");
  }
  return static_cast<std::uint32_t>(v);
}

}  // namespace detail

inline Image decode_pnm(const std::vector<std::uint8_t>& buf) {
  require(buf.size() >= 2 && buf[0] == 'P' && (buf[1] == '5' || buf[1] == '6'),
          ErrorCode::kCorruptMagic, "not a binary PGM/PPM (P5/P6)");
  std::size_t pos = 2;
  std::uint32_t channels = buf[1] == '6' ? 3 : 1;
  std::uint32_t w = detail::read_pnm_int(buf, pos);
  std::uint32_t h = detail::read_pnm_int(buf, pos);
  std::uint32_t maxval = detail::read_pnm_int(buf, pos);
  require(maxval == 255, ErrorCode::kInvalidArgument, "only maxval 255 is supported");
  require(pos < buf.size() && std::isspace(buf[pos]), ErrorCode::kCorruptStream,
          "missing separator after PNM header");
  ++pos;
  require(w > 0 && h > 0, ErrorCode::kInvalidArgument, "zero-sized image");
  std::size_t need = std::size_t(w) * h * channels;
  require(buf.size() - pos >= need, ErrorCode::kTruncated, "PNM pixel data truncated");
  Image img(w, h, channels);
  std::copy_n(buf.begin() + std::ptrdiff_t(pos), need, img.samples.begin());
  return img;
}

inline std::vector<std::uint8_t> encode_pnm(const Image& image) {
  validate(image);
  std::string header = std::string(image.channels == 3 ? "P6" : "P5") + "\n" +
                       std::to_string(image.width) + " " + std::to_string(image.height) +
                       "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.samples.begin(), image.samples.end());
  return out;
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Writes to a sibling temp file and renames, so a failed write leaves no partial output.
inline void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    out.close();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      fail(ErrorCode::kIo, "write failed for " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

inline Image read_pnm(const std::filesystem::path& path) { return decode_pnm(read_file(path)); }

inline void write_pnm(const std::filesystem::path& path, const Image& image) {
  write_file_atomic(path, encode_pnm(image));
}

}  // namespace mcq

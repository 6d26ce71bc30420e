#pragma once

// Optional PNG adapter; requires linking libpng (CMake target PNG::PNG).

#include <png.h>

#include <filesystem>

#include "mcq/error.hpp"
#include "mcq/image.hpp"

namespace mcq {

inline Image read_png(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  require(png_image_begin_read_from_memory(&png, bytes.data(), bytes.size()) != 0, ErrorCode::kIo,
          "not a readable PNG: " + path.string());
  // Gray stays gray; anything with colour becomes RGB. Alpha is dropped.
  const bool gray = (png.format & PNG_FORMAT_FLAG_COLOR) == 0;
  png.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  Image img(png.width, png.height, gray ? 1 : 3);
  if (png_image_finish_read(&png, nullptr, img.samples.data(), 0, nullptr) == 0) {
    std::string msg = png.message;
    png_image_free(&png);
    fail(ErrorCode::kIo, "PNG decode failed: " + msg);
  }
  return img;
}

inline void write_png(const std::filesystem::path& path, const Image& image) {
  validate(image);
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = image.width;
  png.height = image.height;
  png.format = image.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  require(png_image_write_to_memory(&png, nullptr, &size, 0, image.samples.data(), 0, nullptr) != 0, ErrorCode::kIo,
          "PNG size query failed");
  std::vector<std::uint8_t> out(size);
  require(png_image_write_to_memory(&png, out.data(), &size, 0, image.samples.data(), 0, nullptr) != 0,
          ErrorCode::kIo, "PNG encode failed");
  out.resize(size);
  write_file_atomic(path, out);
}

}  // namespace mcq

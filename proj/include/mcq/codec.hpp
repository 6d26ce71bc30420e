#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "mcq/cascade.hpp"
#include "mcq/container.hpp"
#include "mcq/digest.hpp"
#include "mcq/entropy.hpp"
#include "mcq/image.hpp"
#include "mcq/model_spec.hpp"
#include "mcq/quantizer.hpp"
#include "mcq/transform.hpp"

namespace mcq {

// A codebook together with the digest that identifies it in streams.
struct LoadedCodebook {
  MultiCodebook books;
  Digest digest{};
};

inline LoadedCodebook make_loaded(MultiCodebook books) {
  LoadedCodebook out{std::move(books), {}};
  out.books.round_to_float();
  out.digest = sha256(serialize_codebook(out.books));
  return out;
}

inline LoadedCodebook load_codebook(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  return {parse_codebook(bytes), sha256(bytes)};
}

inline void save_codebook(const std::filesystem::path& path, const MultiCodebook& books) {
  write_file_atomic(path, serialize_codebook(books));
}

inline void check_compatible(const ModelSpec& spec, const MultiCodebook& books) {
  require(books.groups() == spec.groups && books.channels() == spec.latent_channels(), ErrorCode::kShapeMismatch,
          "codebook shape does not match the model spec");
  require(books.levels() >= spec.levels, ErrorCode::kShapeMismatch, "codebook has fewer levels than the model spec");
  for (std::size_t l = 0; l < spec.levels; ++l)
    require(books.codewords(l) == spec.codewords[l], ErrorCode::kShapeMismatch, "codebook K differs from the model spec");
}

struct EncodedImage {
  CompressedStream stream;
  std::vector<std::uint8_t> bytes;
  CodeStack codes;
};

// Builds a stream from an already-computed code stack using fresh tables.
inline EncodedImage package_codes(const StreamHeader& base, CodeStack codes) {
  EncodedImage out;
  out.stream.header = base;
  std::vector<std::size_t> ks(base.codewords.begin(), base.codewords.end());
  out.stream.header.tables = build_tables(codes, ks);
  out.stream.payload = encode_indices(codes, out.stream.header.tables);
  out.bytes = write_stream(out.stream);
  out.codes = std::move(codes);
  return out;
}

inline EncodedImage compress_image(const Image& image, const ModelSpec& spec, const LoadedCodebook& codebook,
                                   const SamplerConfig& sampler = {}) {
  validate(spec);
  check_compatible(spec, codebook.books);
  auto [padded, dims] = pad_to_multiple(image, spec.transform.patch);
  auto latent = analysis(padded, spec.transform);
  auto enc = encode_cascade(latent, codebook.books, {spec.levels, sampler});
  StreamHeader h;
  h.width = dims.width;
  h.height = dims.height;
  h.channels = static_cast<std::uint8_t>(image.channels);
  h.transform = spec.transform;
  h.levels = static_cast<std::uint8_t>(spec.levels);
  h.groups = static_cast<std::uint16_t>(spec.groups);
  for (std::size_t l = 0; l < spec.levels; ++l) h.codewords.push_back(static_cast<std::uint32_t>(spec.codewords[l]));
  h.codebook_digest = codebook.digest;
  h.sampled = sampler.mode == SamplerMode::kGumbel;
  return package_codes(h, std::move(enc.codes));
}

inline CodeStack decode_codes(const CompressedStream& stream) {
  const auto& h = stream.header;
  return decode_indices(stream.payload, h.tables, stream_level_shapes(h), h.groups);
}

// levels_used = 0 decodes every level; otherwise only the coarsest levels_used.
inline Image decompress_codes(const StreamHeader& h, const CodeStack& codes, const MultiCodebook& books,
                              std::size_t levels_used = 0) {
  require(h.groups == books.groups() && h.transform.latent_channels() == books.channels(),
          ErrorCode::kShapeMismatch, "stream shape does not match codebook");
  require(levels_used <= h.levels, ErrorCode::kInvalidArgument, "cannot decode more levels than coded");
  const std::size_t first = levels_used == 0 ? 0 : h.levels - levels_used;
  auto latent = decode_cascade(codes, books, first);
  return crop(synthesis(latent, h.transform), {h.width, h.height});
}

inline Image decompress_stream(std::span<const std::uint8_t> bytes, const LoadedCodebook& codebook,
                               std::size_t levels_used = 0) {
  auto stream = read_stream(bytes, &codebook.digest);
  return decompress_codes(stream.header, decode_codes(stream), codebook.books, levels_used);
}

// ---------------------------------------------------------------------------
// Corpus loading: PGM/PPM images (transformed on the fly) and raw latent dumps
// ---------------------------------------------------------------------------

// "MCQL": u32 h, u32 w, u32 n, then h*w*n float32.
inline std::vector<std::uint8_t> serialize_latent(const LatentGrid& g) {
  ByteWriter w;
  w.put_magic("MCQL");
  w.put<std::uint32_t>(static_cast<std::uint32_t>(g.h));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(g.w));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(g.n));
  for (double v : g.values) w.put<float>(static_cast<float>(v));
  return std::move(w).take();
}

inline LatentGrid parse_latent(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  require(r.magic_matches("MCQL"), ErrorCode::kCorruptMagic, "not a latent dump");
  std::size_t h = r.get<std::uint32_t>(), w = r.get<std::uint32_t>(), n = r.get<std::uint32_t>();
  require(h * w * n * 4 == r.remaining(), ErrorCode::kTruncated, "latent payload size mismatch");
  LatentGrid g(h, w, n);
  for (double& v : g.values) v = r.get<float>();
  require_finite(g);
  return g;
}

inline std::vector<LatentGrid> load_corpus(const std::filesystem::path& dir, const TransformSpec& transform) {
  require(std::filesystem::is_directory(dir), ErrorCode::kIo, "corpus is not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<LatentGrid> corpus;
  for (const auto& f : files) {
    auto ext = f.extension().string();
    if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") {
      auto [padded, dims] = pad_to_multiple(read_pnm(f), transform.patch);
      corpus.push_back(analysis(padded, transform));
    } else if (ext == ".mcql") {
      corpus.push_back(parse_latent(read_file(f)));
      require(corpus.back().n == transform.latent_channels(), ErrorCode::kShapeMismatch,
              "latent dump channels differ from the model: " + f.string());
    }
  }
  require(!corpus.empty(), ErrorCode::kIo, "no .ppm/.pgm/.mcql files in " + dir.string());
  return corpus;
}

}  // namespace mcq

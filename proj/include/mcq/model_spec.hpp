#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mcq/error.hpp"
#include "mcq/transform.hpp"

namespace mcq {

// Model description read from a "key = value" text file ('#' starts a comment).
//
//   name      = desk1
//   transform = patchify-dct      # or patchify
//   patch     = 4
//   channels  = 3
//   offset    = 128               # one value or one per channel
//   scale     = 128
//   levels    = 3
//   groups    = 2
//   codewords = 256,64,16
//   codebook  = desk1.mcqb        # relative to this file
struct ModelSpec {
  std::string name = "model";
  TransformSpec transform;
  std::size_t levels = 1;
  std::size_t groups = 1;
  std::vector<std::size_t> codewords{16};
  std::filesystem::path codebook;

  std::size_t latent_channels() const { return transform.latent_channels(); }
  std::size_t group_dim() const { return latent_channels() / groups; }
};

inline void validate(const ModelSpec& s) {
  validate(s.transform);
  require(s.levels >= 1 && s.levels <= 255, ErrorCode::kInvalidArgument, "levels must be in [1, 255]");
  require(s.codewords.size() == s.levels, ErrorCode::kInvalidArgument, "codewords list must have one K per level");
  for (auto k : s.codewords) require(k >= 1 && k <= 65536, ErrorCode::kInvalidArgument, "K must be in [1, 65536]");
  require(s.groups >= 1 && s.latent_channels() % s.groups == 0, ErrorCode::kInvalidArgument,
          "latent channels N = patch^2 * channels must be divisible by groups");
}

namespace detail {

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  auto t = trim(text);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  require(ec == std::errc() && ptr == t.data() + t.size(), ErrorCode::kInvalidArgument,
          "bad value for '" + key + "': " + text);
  return value;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<T>(key, item));
  require(!out.empty(), ErrorCode::kInvalidArgument, "empty list for '" + key + "'");
  return out;
}

}  // namespace detail

inline ModelSpec parse_model_spec(const std::string& text, const std::filesystem::path& base_dir = {}) {
  std::map<std::string, std::string> kv;
  std::stringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::kInvalidArgument, "line " + std::to_string(lineno) + ": expected key = value");
    kv[detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
  }
  ModelSpec s;
  for (const auto& [key, value] : kv) {
    if (key == "name") s.name = value;
    else if (key == "transform") s.transform.kind = parse_transform_kind(value);
    else if (key == "patch") s.transform.patch = detail::parse_number<std::uint32_t>(key, value);
    else if (key == "channels") s.transform.channels = detail::parse_number<std::uint32_t>(key, value);
    else if (key == "offset") s.transform.offset = detail::parse_list<double>(key, value);
    else if (key == "scale") s.transform.scale = detail::parse_list<double>(key, value);
    else if (key == "levels") s.levels = detail::parse_number<std::size_t>(key, value);
    else if (key == "groups") s.groups = detail::parse_number<std::size_t>(key, value);
    else if (key == "codewords") s.codewords = detail::parse_list<std::size_t>(key, value);
    else if (key == "codebook") s.codebook = std::filesystem::path(value);
    else if (key == "latent_channels") {
    } else fail(ErrorCode::kInvalidArgument, "unknown key '" + key + "'");
  }
  if (kv.count("latent_channels"))
    require(detail::parse_number<std::size_t>("latent_channels", kv["latent_channels"]) == s.latent_channels(),
            ErrorCode::kInvalidArgument, "latent_channels disagrees with patch^2 * channels");
  if (!s.codebook.empty() && s.codebook.is_relative() && !base_dir.empty()) s.codebook = base_dir / s.codebook;
  validate(s);
  return s;
}

inline ModelSpec load_model_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open spec " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model_spec(ss.str(), path.parent_path());
}

}  // namespace mcq

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mcq/byte_io.hpp"
#include "mcq/cascade.hpp"
#include "mcq/error.hpp"

namespace mcq {

// Largest total the 32-bit coder accepts; keeps range/total >= 2^8.
inline constexpr std::uint32_t kMaxFrequencyTotal = 1u << 16;

// Static symbol frequencies for one (level, group) stream. Every count >= 1.
class FrequencyTable {
 public:
  FrequencyTable() = default;
  explicit FrequencyTable(std::vector<std::uint32_t> counts) : counts_(std::move(counts)) {
    require(!counts_.empty(), ErrorCode::kInvalidArgument, "empty frequency table");
    std::uint64_t sum = 0;
    for (auto c : counts_) {
      require(c >= 1, ErrorCode::kCorruptStream, "frequency count of zero");
      sum += c;
    }
    require(sum <= kMaxFrequencyTotal, ErrorCode::kCorruptStream, "frequency total exceeds coder precision");
    cumulative_.assign(counts_.size() + 1, 0);
    for (std::size_t i = 0; i < counts_.size(); ++i) cumulative_[i + 1] = cumulative_[i] + counts_[i];
    // One slot per unit of frequency, so decoding a symbol costs O(1) in K.
    slots_.resize(cumulative_.back());
    for (std::size_t i = 0; i < counts_.size(); ++i)
      std::fill(slots_.begin() + std::ptrdiff_t(cumulative_[i]), slots_.begin() + std::ptrdiff_t(cumulative_[i + 1]),
                static_cast<std::uint16_t>(i));
  }

  std::size_t symbols() const { return counts_.size(); }
  std::uint32_t total() const { return cumulative_.back(); }
  std::uint32_t count(std::size_t s) const { return cumulative_[s + 1] - cumulative_[s]; }
  std::uint32_t start(std::size_t s) const { return cumulative_[s]; }
  const std::vector<std::uint32_t>& counts() const { return counts_; }

  // Symbol whose cumulative interval contains value (value < total).
  std::size_t find(std::uint32_t value) const { return slots_[value]; }

  friend bool operator==(const FrequencyTable& a, const FrequencyTable& b) { return a.counts_ == b.counts_; }

 private:
  std::vector<std::uint32_t> counts_;
  std::vector<std::uint32_t> cumulative_;
  std::vector<std::uint16_t> slots_;
};

// Histogram + 1 smoothing. Totals above the coder limit are rescaled
// proportionally, keeping every count >= 1.
inline FrequencyTable make_table(std::span<const std::uint64_t> histogram) {
  const std::size_t K = histogram.size();
  require(K >= 1 && K <= kMaxFrequencyTotal, ErrorCode::kInvalidArgument, "alphabet size out of range");
  std::vector<std::uint64_t> c(K);
  for (std::size_t i = 0; i < K; ++i) c[i] = histogram[i] + 1;
  std::uint64_t total = std::accumulate(c.begin(), c.end(), std::uint64_t{0});
  std::vector<std::uint32_t> counts(K);
  if (total <= kMaxFrequencyTotal) {
    for (std::size_t i = 0; i < K; ++i) counts[i] = static_cast<std::uint32_t>(c[i]);
  } else {
    const std::uint64_t budget = kMaxFrequencyTotal - K;
    for (std::size_t i = 0; i < K; ++i)
      counts[i] = static_cast<std::uint32_t>(1 + (histogram[i] * budget) / total);
  }
  return FrequencyTable(std::move(counts));
}

inline std::size_t stream_index(std::size_t level, std::size_t group, std::size_t groups) {
  return level * groups + group;
}

// One table per (level, group), ordered level-major.
inline std::vector<FrequencyTable> build_tables(const CodeStack& codes, const std::vector<std::size_t>& codewords) {
  require(codes.size() <= codewords.size(), ErrorCode::kInvalidArgument, "more levels than alphabets");
  std::vector<FrequencyTable> tables;
  for (std::size_t l = 0; l < codes.size(); ++l) {
    const auto& grid = codes[l];
    for (std::size_t m = 0; m < grid.groups; ++m) {
      std::vector<std::uint64_t> hist(codewords[l], 0);
      for (std::size_t p = 0; p < grid.positions(); ++p) {
        auto s = grid.at(p, m);
        require(s < hist.size(), ErrorCode::kIndexOutOfRange, "symbol outside alphabet");
        ++hist[s];
      }
      tables.push_back(make_table(hist));
    }
  }
  return tables;
}

// Byte-oriented range coder: 64-bit low with carry into a cached byte,
// 32-bit range renormalized whenever it drops below 2^24.
class RangeEncoder {
 public:
  void encode(std::uint32_t start, std::uint32_t size, std::uint32_t total) {
    const std::uint32_t r = range_ / total;
    low_ += std::uint64_t(start) * r;
    range_ = r * size;
    while (range_ < kTop) {
      range_ <<= 8;
      shift_low();
    }
  }

  std::vector<std::uint8_t> finish() && {
    for (int i = 0; i < 5; ++i) shift_low();
    return std::move(out_);
  }

  std::uint32_t range() const { return range_; }

 private:
  static constexpr std::uint32_t kTop = 1u << 24;

  void shift_low() {
    if (static_cast<std::uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
      const auto carry = static_cast<std::uint8_t>(low_ >> 32);
      std::uint8_t temp = cache_;
      do {
        out_.push_back(static_cast<std::uint8_t>(temp + carry));
        temp = 0xFF;
      } while (--cache_size_ != 0);
      cache_ = static_cast<std::uint8_t>(low_ >> 24);
    }
    ++cache_size_;
    low_ = (low_ & 0x00FFFFFFu) << 8;
  }

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
  std::vector<std::uint8_t> out_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> in) : in_(in) {
    for (int i = 0; i < 5; ++i) code_ = (code_ << 8) | next_byte();
  }

  std::size_t decode(const FrequencyTable& table) {
    const std::uint32_t r = range_ / table.total();
    const std::uint32_t value = code_ / r;
    require(value < table.total(), ErrorCode::kCorruptStream, "range decoder out of table");
    const std::size_t s = table.find(value);
    code_ -= table.start(s) * r;
    range_ = r * table.count(s);
    while (range_ < (1u << 24)) {
      code_ = (code_ << 8) | next_byte();
      range_ <<= 8;
    }
    return s;
  }

  std::size_t consumed() const { return pos_; }

 private:
  std::uint32_t next_byte() {
    require(pos_ < in_.size(), ErrorCode::kTruncated, "range-coded payload truncated");
    return in_[pos_++];
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
  std::uint32_t code_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
};

using PayloadStreams = std::vector<std::vector<std::uint8_t>>;

inline std::vector<std::uint8_t> encode_symbols(std::span<const std::uint32_t> symbols, const FrequencyTable& table) {
  RangeEncoder enc;
  for (auto s : symbols) {
    require(s < table.symbols(), ErrorCode::kIndexOutOfRange, "symbol outside frequency table");
    enc.encode(table.start(s), table.count(s), table.total());
  }
  return std::move(enc).finish();
}

inline std::vector<std::uint32_t> decode_symbols(std::span<const std::uint8_t> payload, const FrequencyTable& table,
                                                 std::size_t count) {
  RangeDecoder dec(payload);
  std::vector<std::uint32_t> out(count);
  for (auto& s : out) s = static_cast<std::uint32_t>(dec.decode(table));
  require(dec.consumed() == payload.size(), ErrorCode::kCorruptStream, "payload longer than its symbols");
  return out;
}

// Group m's symbols of one level in raster order.
inline std::vector<std::uint32_t> group_symbols(const CodeGrid& grid, std::size_t m) {
  std::vector<std::uint32_t> out(grid.positions());
  for (std::size_t p = 0; p < grid.positions(); ++p) out[p] = grid.at(p, m);
  return out;
}

// One independently coded stream per (level, group), level-major.
inline PayloadStreams encode_indices(const CodeStack& codes, const std::vector<FrequencyTable>& tables) {
  PayloadStreams streams;
  for (std::size_t l = 0; l < codes.size(); ++l)
    for (std::size_t m = 0; m < codes[l].groups; ++m) {
      const std::size_t idx = stream_index(l, m, codes[l].groups);
      require(idx < tables.size(), ErrorCode::kInvalidArgument, "missing frequency table");
      streams.push_back(encode_symbols(group_symbols(codes[l], m), tables[idx]));
    }
  return streams;
}

inline CodeStack decode_indices(const PayloadStreams& streams, const std::vector<FrequencyTable>& tables,
                                const std::vector<GridShape>& shapes, std::size_t groups) {
  require(streams.size() == shapes.size() * groups && tables.size() == streams.size(),
          ErrorCode::kCorruptStream, "stream count does not match levels x groups");
  CodeStack codes;
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    CodeGrid grid(shapes[l].h, shapes[l].w, groups);
    for (std::size_t m = 0; m < groups; ++m) {
      const std::size_t idx = stream_index(l, m, groups);
      auto symbols = decode_symbols(streams[idx], tables[idx], grid.positions());
      for (std::size_t p = 0; p < grid.positions(); ++p) grid.at(p, m) = symbols[p];
    }
    codes.push_back(std::move(grid));
  }
  return codes;
}

// Ideal code length under the tables: sum of -log2(count / total).
inline double estimate_rate_bits(const CodeStack& codes, const std::vector<FrequencyTable>& tables) {
  double bits = 0.0;
  for (std::size_t l = 0; l < codes.size(); ++l)
    for (std::size_t m = 0; m < codes[l].groups; ++m) {
      const auto& t = tables.at(stream_index(l, m, codes[l].groups));
      const double log_total = std::log2(double(t.total()));
      for (std::size_t p = 0; p < codes[l].positions(); ++p)
        bits += log_total - std::log2(double(t.count(codes[l].at(p, m))));
    }
  return bits;
}

inline std::size_t payload_bytes(const PayloadStreams& streams) {
  std::size_t n = 0;
  for (const auto& s : streams) n += s.size();
  return n;
}

// Wire layout: for each stream, u32 length then bytes.
inline void write_payload(ByteWriter& w, const PayloadStreams& streams) {
  for (const auto& s : streams) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    w.put_bytes(s);
  }
}

inline PayloadStreams read_payload(ByteReader& r, std::size_t count) {
  PayloadStreams streams(count);
  for (auto& s : streams) {
    std::size_t len = r.get<std::uint32_t>();
    auto bytes = r.get_bytes(len);
    s.assign(bytes.begin(), bytes.end());
  }
  return streams;
}

inline void write_tables(ByteWriter& w, const std::vector<FrequencyTable>& tables) {
  for (const auto& t : tables)
    for (auto c : t.counts()) w.put<std::uint32_t>(c);
}

inline std::vector<FrequencyTable> read_tables(ByteReader& r, const std::vector<std::size_t>& codewords,
                                               std::size_t groups) {
  std::vector<FrequencyTable> tables;
  for (auto k : codewords)
    for (std::size_t m = 0; m < groups; ++m) {
      require(k * 4 <= r.remaining(), ErrorCode::kTruncated, "frequency table truncated");
      std::vector<std::uint32_t> counts(k);
      for (auto& c : counts) c = r.get<std::uint32_t>();
      tables.emplace_back(std::move(counts));
    }
  return tables;
}

}  // namespace mcq

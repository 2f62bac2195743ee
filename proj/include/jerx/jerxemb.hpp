#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "jerx/error.hpp"

// JERX-EMB v1: per-word-token contextual vectors (and optionally attention
// weights) keyed by sentence. All integers and floats are little-endian.
//
//   header : "JERXEMB1" | version u32 | hidden_size u32 | layer_count u32
//            | head_count u32 | sentence_count u64
//   record : key_len u32 | key bytes (UTF-8) | token_count u32
//            | embeddings f32[token_count * hidden_size]   (token-major)
//            | attention_present u8
//            | [attention f32[layers * heads * token_count * token_count]]

namespace jerx::emb {

inline constexpr std::string_view kMagic = "JERXEMB1";
inline constexpr std::uint32_t kVersion = 1;
inline constexpr double kAttentionRowTolerance = 1e-5;

struct Header {
  std::uint32_t version = kVersion;
  std::uint32_t hidden_size = 0;
  std::uint32_t layer_count = 0;
  std::uint32_t head_count = 0;
};

struct Record {
  std::string key;
  std::uint32_t token_count = 0;
  std::vector<float> embeddings;                // token_count * hidden_size
  std::optional<std::vector<float>> attention;  // layers * heads * n * n

  float embedding(std::size_t token, std::size_t dim, std::size_t hidden) const {
    return embeddings[token * hidden + dim];
  }
  float attention_weight(const Header& h, std::size_t layer, std::size_t head, std::size_t row, std::size_t col) const {
    const std::size_t n = token_count;
    return (*attention)[((layer * h.head_count + head) * n + row) * n + col];
  }
};

struct File {
  Header header;
  std::vector<Record> records;
  std::map<std::string, std::size_t, std::less<>> index;

  void add(Record record) {
    if (!index.emplace(record.key, records.size()).second) {
      fail(ErrorKind::kInvalidArgument, "duplicate record key '" + record.key + "'");
    }
    records.push_back(std::move(record));
  }

  const Record* find(std::string_view key) const {
    auto it = index.find(key);
    return it == index.end() ? nullptr : &records[it->second];
  }
};

namespace detail {

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(std::string_view s) { bytes_.append(s); }
  std::string take() { return std::move(bytes_); }

 private:
  std::string bytes_;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint32_t u32() {
    const auto s = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[i])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    const auto s = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[i])) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string_view take(std::size_t n) {
    if (bytes_.size() - pos_ < n) {
      fail(ErrorKind::kParseError, "JERX-EMB truncated at byte " + std::to_string(pos_) + " (wanted " +
                                       std::to_string(n) + " more)");
    }
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline void validate_attention(const Header& h, const Record& r) {
  if (!r.attention) return;
  const std::size_t n = r.token_count;
  for (std::size_t l = 0; l < h.layer_count; ++l)
    for (std::size_t a = 0; a < h.head_count; ++a)
      for (std::size_t i = 0; i < n; ++i) {
        double sum = 0;
        for (std::size_t j = 0; j < n; ++j) sum += r.attention_weight(h, l, a, i, j);
        if (std::abs(sum - 1.0) > kAttentionRowTolerance) {
          fail(ErrorKind::kInvariantViolation, "record '" + r.key + "': attention row (layer " + std::to_string(l) +
                                                   ", head " + std::to_string(a) + ", row " + std::to_string(i) +
                                                   ") sums to " + std::to_string(sum));
        }
      }
}

inline std::string serialize(const File& file) {
  detail::Writer w;
  const auto& h = file.header;
  w.raw(kMagic);
  w.u32(h.version);
  w.u32(h.hidden_size);
  w.u32(h.layer_count);
  w.u32(h.head_count);
  w.u64(file.records.size());
  for (const auto& r : file.records) {
    require(r.embeddings.size() == static_cast<std::size_t>(r.token_count) * h.hidden_size,
            ErrorKind::kDimensionMismatch, "record '" + r.key + "' embedding payload size");
    w.u32(static_cast<std::uint32_t>(r.key.size()));
    w.raw(r.key);
    w.u32(r.token_count);
    for (float v : r.embeddings) w.f32(v);
    w.u8(r.attention ? 1 : 0);
    if (r.attention) {
      const std::size_t n = r.token_count;
      require(r.attention->size() == static_cast<std::size_t>(h.layer_count) * h.head_count * n * n,
              ErrorKind::kDimensionMismatch, "record '" + r.key + "' attention payload size");
      for (float v : *r.attention) w.f32(v);
    }
  }
  return w.take();
}

inline File parse(std::string_view bytes) {
  detail::Reader in(bytes);
  if (in.take(kMagic.size()) != kMagic) fail(ErrorKind::kParseError, "not a JERX-EMB file (bad magic)");
  File file;
  auto& h = file.header;
  h.version = in.u32();
  if (h.version != kVersion) fail(ErrorKind::kParseError, "unsupported JERX-EMB version " + std::to_string(h.version));
  h.hidden_size = in.u32();
  h.layer_count = in.u32();
  h.head_count = in.u32();
  const std::uint64_t count = in.u64();
  if (h.hidden_size == 0) fail(ErrorKind::kParseError, "hidden_size is zero");
  for (std::uint64_t s = 0; s < count; ++s) {
    Record r;
    const auto key_len = in.u32();
    r.key = std::string(in.take(key_len));
    r.token_count = in.u32();
    const std::size_t n = r.token_count;
    r.embeddings.resize(n * h.hidden_size);
    for (auto& v : r.embeddings) v = in.f32();
    const auto present = in.u8();
    if (present > 1) fail(ErrorKind::kParseError, "record '" + r.key + "': bad attention_present flag");
    if (present == 1) {
      if (h.layer_count == 0 || h.head_count == 0) {
        fail(ErrorKind::kParseError, "record '" + r.key + "' carries attention but header declares none");
      }
      std::vector<float> att(static_cast<std::size_t>(h.layer_count) * h.head_count * n * n);
      for (auto& v : att) v = in.f32();
      r.attention = std::move(att);
    }
    validate_attention(h, r);
    if (file.find(r.key)) fail(ErrorKind::kParseError, "duplicate record key '" + r.key + "'");
    file.add(std::move(r));
  }
  if (!in.done()) fail(ErrorKind::kParseError, "trailing bytes after " + std::to_string(count) + " records");
  return file;
}

inline File read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIoError, "cannot open '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse(bytes);
}

inline void write(const std::string& path, const File& file) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIoError, "cannot write '" + path + "'");
  const auto bytes = serialize(file);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace jerx::emb

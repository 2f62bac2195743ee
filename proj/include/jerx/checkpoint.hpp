#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "jerx/config.hpp"
#include "jerx/jerxemb.hpp"
#include "jerx/model.hpp"

// Checkpoint v1, little-endian:
//   "JERXCKP1" | version u32 | config text (u32 len + bytes)
//   | encoder hidden size u32
//   | entity types (u32 count, each u32 len + bytes)
//   | relation types without NEG (same layout)
//   | toy vocabulary without <unk> (same layout)
//   | tensor count u32 | per tensor: name, rows u32, cols u32, f64[rows*cols] column-major

namespace jerx {

inline constexpr std::string_view kCheckpointMagic = "JERXCKP1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
struct Checkpoint {
  Config config;
  JointModel<T> model;
};

namespace detail {

inline void put_string(emb::detail::Writer& w, std::string_view s) {
  w.u32(static_cast<std::uint32_t>(s.size()));
  w.raw(s);
}

inline std::string get_string(emb::detail::Reader& r) {
  const auto n = r.u32();
  return std::string(r.take(n));
}

inline void put_strings(emb::detail::Writer& w, const std::vector<std::string>& items) {
  w.u32(static_cast<std::uint32_t>(items.size()));
  for (const auto& s : items) put_string(w, s);
}

inline std::vector<std::string> get_strings(emb::detail::Reader& r) {
  const auto n = r.u32();
  std::vector<std::string> out;
  for (std::uint32_t i = 0; i < n; ++i) out.push_back(get_string(r));
  return out;
}

}  // namespace detail

template <typename T>
std::string serialize_checkpoint(const JointModel<T>& model, const Config& config) {
  emb::detail::Writer w;
  w.raw(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  detail::put_string(w, serialize_config(config));
  w.u32(static_cast<std::uint32_t>(model.shape().encoder.hidden_size));
  detail::put_strings(w, model.labels().entity_types());
  const auto& re = model.labels().re_labels();
  detail::put_strings(w, std::vector<std::string>(re.begin() + 1, re.end()));
  const auto& words = model.tokens().words();
  detail::put_strings(w, std::vector<std::string>(words.begin() + 1, words.end()));

  std::uint32_t count = 0;
  model.params().visit([&](const char*, const Matrix<T>&, bool) { ++count; });
  w.u32(count);
  model.params().visit([&](const char* name, const Matrix<T>& m, bool) {
    detail::put_string(w, name);
    w.u32(static_cast<std::uint32_t>(m.rows()));
    w.u32(static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) w.u64(std::bit_cast<std::uint64_t>(static_cast<double>(m(i, j))));
  });
  return w.take();
}

template <typename T>
Checkpoint<T> parse_checkpoint(std::string_view bytes) {
  emb::detail::Reader r(bytes);
  if (r.take(kCheckpointMagic.size()) != kCheckpointMagic) fail(ErrorKind::kParseError, "not a checkpoint (bad magic)");
  const auto version = r.u32();
  if (version != kCheckpointVersion) fail(ErrorKind::kParseError, "unsupported checkpoint version " + std::to_string(version));
  Config config = parse_config(detail::get_string(r));
  const std::size_t hidden_size = r.u32();
  const auto entity_types = detail::get_strings(r);
  const auto relation_types = detail::get_strings(r);
  auto words = detail::get_strings(r);
  LabelVocab labels({entity_types.begin(), entity_types.end()}, {relation_types.begin(), relation_types.end()});
  if (labels.entity_types() != entity_types) fail(ErrorKind::kVocabMismatch, "checkpoint entity types not canonical");

  TokenVocab tokens(std::move(words));
  JointModel<T> model(config.shape(hidden_size), std::move(labels), std::move(tokens));

  const auto count = r.u32();
  std::uint32_t expected = 0;
  model.params().visit([&](const char*, Matrix<T>&, bool) { ++expected; });
  if (count != expected) {
    fail(ErrorKind::kVocabMismatch, "checkpoint holds " + std::to_string(count) + " tensors, model expects " +
                                        std::to_string(expected));
  }
  model.params().visit([&](const char* name, Matrix<T>& m, bool) {
    const auto stored = detail::get_string(r);
    const auto rows = r.u32();
    const auto cols = r.u32();
    if (stored != name || rows != m.rows() || cols != m.cols()) {
      fail(ErrorKind::kVocabMismatch, "tensor '" + stored + "' (" + std::to_string(rows) + "x" + std::to_string(cols) +
                                          ") does not fit '" + name + "' (" + std::to_string(m.rows()) + "x" +
                                          std::to_string(m.cols()) + ")");
    }
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<T>(std::bit_cast<double>(r.u64()));
  });
  if (!r.done()) fail(ErrorKind::kParseError, "trailing bytes in checkpoint");
  return {std::move(config), std::move(model)};
}

template <typename T>
void save_checkpoint(const std::string& path, const JointModel<T>& model, const Config& config) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIoError, "cannot write '" + path + "'");
  const auto bytes = serialize_checkpoint(model, config);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

// Reads only the stored config; used to pick precision and encoder before
// the full load.
inline Config peek_checkpoint_config(const std::string& path) {
  const std::string bytes = read_file(path);
  emb::detail::Reader r(bytes);
  if (r.take(kCheckpointMagic.size()) != kCheckpointMagic) fail(ErrorKind::kParseError, "not a checkpoint (bad magic)");
  r.u32();
  return parse_config(detail::get_string(r));
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path) {
  return parse_checkpoint<T>(read_file(path));
}

}  // namespace jerx

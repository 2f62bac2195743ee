#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "jerx/encoder.hpp"
#include "jerx/error.hpp"
#include "jerx/jerxemb.hpp"

namespace jerx {

// One N x N attention matrix (row = attending token), row-major.
struct AttentionMap {
  std::size_t tokens = 0;
  std::vector<double> weights;

  double at(std::size_t row, std::size_t col) const { return weights[row * tokens + col]; }
};

inline AttentionMap select_head(const AttentionTensor& att, std::size_t layer, std::size_t head) {
  require(layer < att.layers, ErrorKind::kInvalidArgument,
          "layer " + std::to_string(layer) + " out of range (" + std::to_string(att.layers) + " layers)");
  require(head < att.heads, ErrorKind::kInvalidArgument,
          "head " + std::to_string(head) + " out of range (" + std::to_string(att.heads) + " heads)");
  AttentionMap map{att.tokens, std::vector<double>(att.tokens * att.tokens)};
  for (std::size_t i = 0; i < att.tokens; ++i)
    for (std::size_t j = 0; j < att.tokens; ++j) map.weights[i * att.tokens + j] = att.at(layer, head, i, j);
  return map;
}

inline AttentionMap select_head(const emb::Header& header, const emb::Record& record, std::size_t layer,
                                std::size_t head) {
  if (!record.attention) fail(ErrorKind::kMissingEmbeddingRecord, "record '" + record.key + "' has no attention block");
  return select_head(AttentionTensor{header.layer_count, header.head_count, record.token_count, *record.attention},
                     layer, head);
}

inline std::string heatmap_csv(const AttentionMap& map, const std::vector<std::string>& tokens) {
  std::string out = "token";
  for (const auto& t : tokens) out += "," + t;
  out += "\n";
  char buf[32];
  for (std::size_t i = 0; i < map.tokens; ++i) {
    out += i < tokens.size() ? tokens[i] : std::to_string(i);
    for (std::size_t j = 0; j < map.tokens; ++j) {
      std::snprintf(buf, sizeof(buf), ",%.6f", map.at(i, j));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

// Binary PGM (P5). Each weight becomes a cell_size x cell_size block with
// gray = round(255 * (1 - w)), w clamped to [0, 1]: darker is heavier.
inline std::string heatmap_pgm(const AttentionMap& map, std::size_t cell_size = 1) {
  require(cell_size >= 1, ErrorKind::kInvalidArgument, "cell size must be at least 1");
  const std::size_t side = map.tokens * cell_size;
  std::string out = "P5\n" + std::to_string(side) + " " + std::to_string(side) + "\n255\n";
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      const double w = std::clamp(map.at(y / cell_size, x / cell_size), 0.0, 1.0);
      out.push_back(static_cast<char>(static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - w)))));
    }
  }
  return out;
}

enum class AttentionPattern { kNone, kNextWord, kPreviousWord, kSelf, kEndOfSentence };

inline std::string_view to_string(AttentionPattern p) {
  switch (p) {
    case AttentionPattern::kNone: return "none";
    case AttentionPattern::kNextWord: return "next-word";
    case AttentionPattern::kPreviousWord: return "previous-word";
    case AttentionPattern::kSelf: return "self";
    case AttentionPattern::kEndOfSentence: return "end-of-sentence";
  }
  return "none";
}

// Mean weight along each candidate stripe; the strongest stripe wins if its
// mean exceeds `threshold`.
inline AttentionPattern detect_pattern(const AttentionMap& map, double threshold = 0.5) {
  const std::size_t n = map.tokens;
  if (n < 2) return AttentionPattern::kNone;
  auto stripe_mean = [&](auto col_of, std::size_t first_row, std::size_t last_row) {
    double sum = 0;
    for (std::size_t i = first_row; i < last_row; ++i) sum += map.at(i, col_of(i));
    return sum / static_cast<double>(last_row - first_row);
  };
  const std::pair<AttentionPattern, double> scores[] = {
      {AttentionPattern::kNextWord, stripe_mean([](std::size_t i) { return i + 1; }, 0, n - 1)},
      {AttentionPattern::kPreviousWord, stripe_mean([](std::size_t i) { return i - 1; }, 1, n)},
      {AttentionPattern::kSelf, stripe_mean([](std::size_t i) { return i; }, 0, n)},
      {AttentionPattern::kEndOfSentence, stripe_mean([n](std::size_t) { return n - 1; }, 0, n)},
  };
  const auto* best = std::max_element(std::begin(scores), std::end(scores),
                                      [](const auto& a, const auto& b) { return a.second < b.second; });
  return best->second > threshold ? best->first : AttentionPattern::kNone;
}

}  // namespace jerx

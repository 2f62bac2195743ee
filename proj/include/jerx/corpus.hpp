#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "jerx/error.hpp"
#include "jerx/rng.hpp"

namespace jerx {

struct Token {
  std::string text;
  std::size_t index = 0;
};

// Inclusive token range [start, end] with a type label.
struct EntitySpan {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string type;

  std::size_t length() const { return end - start + 1; }
  bool overlaps(const EntitySpan& other) const { return start <= other.end && other.start <= end; }

  auto operator<=>(const EntitySpan&) const = default;
};

// head/tail index into AnnotatedSentence::entities.
struct RelationAnnotation {
  std::size_t head = 0;
  std::size_t tail = 0;
  std::string type;

  auto operator<=>(const RelationAnnotation&) const = default;
};

struct AnnotatedSentence {
  std::string key;
  std::vector<Token> tokens;
  std::vector<EntitySpan> entities;
  std::vector<RelationAnnotation> relations;

  std::size_t size() const { return tokens.size(); }
};

inline std::vector<Token> make_tokens(const std::vector<std::string>& words) {
  std::vector<Token> tokens;
  tokens.reserve(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) tokens.push_back({words[i], i});
  return tokens;
}

// ---------------------------------------------------------------------------
// BIOES tags
// ---------------------------------------------------------------------------

enum class Bioes : std::uint8_t { kO, kB, kI, kE, kS };

struct Tag {
  Bioes prefix = Bioes::kO;
  std::string type;

  static Tag outside() { return {}; }

  bool is_outside() const { return prefix == Bioes::kO; }
  // Last token of an entity: the anchor for relation candidates.
  bool ends_entity() const { return prefix == Bioes::kE || prefix == Bioes::kS; }

  std::string str() const {
    switch (prefix) {
      case Bioes::kO: return "O";
      case Bioes::kB: return "B-" + type;
      case Bioes::kI: return "I-" + type;
      case Bioes::kE: return "E-" + type;
      case Bioes::kS: return "S-" + type;
    }
    return "O";
  }

  static Tag parse(std::string_view label) {
    if (label == "O") return outside();
    if (label.size() < 3 || label[1] != '-') fail(ErrorKind::kUnknownLabel, "malformed tag '" + std::string(label) + "'");
    Tag tag;
    switch (label[0]) {
      case 'B': tag.prefix = Bioes::kB; break;
      case 'I': tag.prefix = Bioes::kI; break;
      case 'E': tag.prefix = Bioes::kE; break;
      case 'S': tag.prefix = Bioes::kS; break;
      default: fail(ErrorKind::kUnknownLabel, "malformed tag '" + std::string(label) + "'");
    }
    tag.type = std::string(label.substr(2));
    return tag;
  }

  bool operator==(const Tag&) const = default;
};

using TagSequence = std::vector<Tag>;

inline TagSequence encode_bioes(std::span<const EntitySpan> entities, std::size_t sentence_len) {
  TagSequence tags(sentence_len);
  std::vector<bool> taken(sentence_len, false);
  for (const auto& span : entities) {
    if (span.start > span.end || span.end >= sentence_len) {
      fail(ErrorKind::kSpanOutOfBounds, "span [" + std::to_string(span.start) + "," + std::to_string(span.end) +
                                            "] outside sentence of length " + std::to_string(sentence_len));
    }
    for (std::size_t i = span.start; i <= span.end; ++i) {
      if (taken[i]) fail(ErrorKind::kOverlappingSpans, "token " + std::to_string(i) + " covered by two spans");
      taken[i] = true;
    }
    if (span.start == span.end) {
      tags[span.start] = {Bioes::kS, span.type};
      continue;
    }
    tags[span.start] = {Bioes::kB, span.type};
    for (std::size_t i = span.start + 1; i < span.end; ++i) tags[i] = {Bioes::kI, span.type};
    tags[span.end] = {Bioes::kE, span.type};
  }
  return tags;
}

// Strict left-to-right decoding: only S-X and complete B-X (I-X)* E-X runs
// produce spans; every other fragment is discarded.
inline std::vector<EntitySpan> decode_bioes(const TagSequence& tags) {
  std::vector<EntitySpan> spans;
  std::optional<std::size_t> open;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const Tag& tag = tags[i];
    switch (tag.prefix) {
      case Bioes::kO:
        open.reset();
        break;
      case Bioes::kS:
        open.reset();
        spans.push_back({i, i, tag.type});
        break;
      case Bioes::kB:
        open = i;
        break;
      case Bioes::kI:
        if (open && tags[*open].type != tag.type) open.reset();
        break;
      case Bioes::kE:
        if (open && tags[*open].type == tag.type) spans.push_back({*open, i, tag.type});
        open.reset();
        break;
    }
  }
  return spans;
}

inline std::vector<EntitySpan> decode_bioes(std::span<const std::string> labels) {
  TagSequence tags;
  tags.reserve(labels.size());
  for (const auto& label : labels) tags.push_back(Tag::parse(label));
  return decode_bioes(tags);
}

// ---------------------------------------------------------------------------
// Label vocabulary
// ---------------------------------------------------------------------------

inline constexpr std::string_view kNegLabel = "NEG";

// NER labels sorted lexicographically; relation labels with NEG pinned at 0
// followed by the remaining types in lexicographic order.
class LabelVocab {
 public:
  LabelVocab() = default;

  LabelVocab(std::set<std::string> entity_types, std::set<std::string> relation_types) {
    for (const auto& type : entity_types) {
      require(!type.empty(), ErrorKind::kInvalidArgument, "empty entity type");
      entity_types_.push_back(type);
    }
    std::vector<std::string> labels{"O"};
    for (const auto& type : entity_types_) {
      for (const char* prefix : {"B-", "I-", "E-", "S-"}) labels.push_back(prefix + type);
    }
    std::sort(labels.begin(), labels.end());
    for (const auto& label : labels) {
      ner_index_.emplace(label, ner_labels_.size());
      ner_labels_.push_back(label);
      ner_tags_.push_back(Tag::parse(label));
    }
    relation_types.erase(std::string(kNegLabel));
    re_labels_.emplace_back(kNegLabel);
    for (const auto& type : relation_types) re_labels_.push_back(type);
    for (std::size_t i = 0; i < re_labels_.size(); ++i) re_index_.emplace(re_labels_[i], i);
  }

  static LabelVocab from_corpus(std::span<const AnnotatedSentence> corpus) {
    std::set<std::string> entity_types;
    std::set<std::string> relation_types;
    for (const auto& sentence : corpus) {
      for (const auto& e : sentence.entities) entity_types.insert(e.type);
      for (const auto& r : sentence.relations) relation_types.insert(r.type);
    }
    return LabelVocab(std::move(entity_types), std::move(relation_types));
  }

  std::size_t ner_size() const { return ner_labels_.size(); }
  std::size_t re_size() const { return re_labels_.size(); }
  std::size_t neg_index() const { return 0; }

  const std::vector<std::string>& entity_types() const { return entity_types_; }
  const std::vector<std::string>& ner_labels() const { return ner_labels_; }
  const std::vector<std::string>& re_labels() const { return re_labels_; }

  std::size_t ner_index(const Tag& tag) const { return ner_index(tag.str()); }
  std::size_t ner_index(const std::string& label) const {
    auto it = ner_index_.find(label);
    if (it == ner_index_.end()) fail(ErrorKind::kUnknownLabel, "NER label '" + label + "' not in vocabulary");
    return it->second;
  }
  const Tag& ner_tag(std::size_t index) const {
    if (index >= ner_tags_.size()) fail(ErrorKind::kUnknownLabel, "NER label index " + std::to_string(index));
    return ner_tags_[index];
  }

  bool has_relation(const std::string& label) const { return re_index_.count(label) != 0; }
  bool has_entity_type(const std::string& type) const {
    return std::binary_search(entity_types_.begin(), entity_types_.end(), type);
  }
  std::size_t re_index(const std::string& label) const {
    auto it = re_index_.find(label);
    if (it == re_index_.end()) fail(ErrorKind::kUnknownLabel, "relation label '" + label + "' not in vocabulary");
    return it->second;
  }
  const std::string& re_label(std::size_t index) const {
    if (index >= re_labels_.size()) fail(ErrorKind::kLabelOutOfRange, "relation index " + std::to_string(index));
    return re_labels_[index];
  }

  std::vector<std::size_t> to_indices(const TagSequence& tags) const {
    std::vector<std::size_t> ids;
    ids.reserve(tags.size());
    for (const auto& tag : tags) ids.push_back(ner_index(tag));
    return ids;
  }
  TagSequence to_tags(std::span<const std::size_t> ids) const {
    TagSequence tags;
    tags.reserve(ids.size());
    for (auto id : ids) tags.push_back(ner_tag(id));
    return tags;
  }

  bool operator==(const LabelVocab& other) const {
    return ner_labels_ == other.ner_labels_ && re_labels_ == other.re_labels_;
  }

 private:
  std::vector<std::string> entity_types_;
  std::vector<std::string> ner_labels_;
  std::vector<Tag> ner_tags_;
  std::map<std::string, std::size_t> ner_index_;
  std::vector<std::string> re_labels_;
  std::map<std::string, std::size_t> re_index_;
};

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

enum class CorpusFormat { kCanonicalJson, kConll04 };

struct LoadReport {
  std::size_t dropped_relations = 0;  // relations whose arguments overlap or were dropped
  std::size_t dropped_entities = 0;   // entities overlapping an earlier-kept entity
};

namespace detail {

inline void check_sentence(const AnnotatedSentence& s, const std::string& where) {
  if (s.tokens.empty()) fail(ErrorKind::kInvariantViolation, where + ": sentence has no tokens");
  for (std::size_t i = 0; i < s.tokens.size(); ++i) {
    if (s.tokens[i].text.empty()) fail(ErrorKind::kInvariantViolation, where + ": empty token at " + std::to_string(i));
    if (s.tokens[i].index != i) fail(ErrorKind::kInvariantViolation, where + ": token indices not contiguous");
  }
  for (const auto& e : s.entities) {
    if (e.start > e.end || e.end >= s.tokens.size()) {
      fail(ErrorKind::kInvariantViolation, where + ": entity [" + std::to_string(e.start) + "," +
                                               std::to_string(e.end) + "] out of bounds");
    }
    if (e.type.empty()) fail(ErrorKind::kInvariantViolation, where + ": entity without type");
  }
  for (const auto& r : s.relations) {
    if (r.head >= s.entities.size() || r.tail >= s.entities.size()) {
      fail(ErrorKind::kInvariantViolation, where + ": relation references a missing entity");
    }
    if (r.head == r.tail) fail(ErrorKind::kInvariantViolation, where + ": relation head equals tail");
    if (r.type.empty() || r.type == kNegLabel) {
      fail(ErrorKind::kInvariantViolation, where + ": relation type '" + r.type + "' is reserved or empty");
    }
  }
}

// Drops relations whose arguments overlap each other, then keeps a
// non-overlapping subset of entities (earliest start, longest first) and
// drops relations that referenced a removed entity.
inline void remove_overlaps(AnnotatedSentence& s, LoadReport& report) {
  std::vector<RelationAnnotation> relations;
  for (const auto& r : s.relations) {
    if (s.entities[r.head].overlaps(s.entities[r.tail])) {
      ++report.dropped_relations;
    } else {
      relations.push_back(r);
    }
  }

  std::vector<std::size_t> order(s.entities.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ea = s.entities[a];
    const auto& eb = s.entities[b];
    if (ea.start != eb.start) return ea.start < eb.start;
    return ea.length() > eb.length();
  });
  std::vector<bool> keep(s.entities.size(), false);
  std::vector<std::size_t> kept;
  for (auto i : order) {
    bool clash = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) { return s.entities[k].overlaps(s.entities[i]); });
    if (clash) {
      ++report.dropped_entities;
    } else {
      keep[i] = true;
      kept.push_back(i);
    }
  }

  std::vector<std::size_t> remap(s.entities.size(), SIZE_MAX);
  std::vector<EntitySpan> entities;
  for (std::size_t i = 0; i < s.entities.size(); ++i) {
    if (!keep[i]) continue;
    remap[i] = entities.size();
    entities.push_back(s.entities[i]);
  }
  s.relations.clear();
  for (auto r : relations) {
    if (remap[r.head] == SIZE_MAX || remap[r.tail] == SIZE_MAX) {
      ++report.dropped_relations;
      continue;
    }
    r.head = remap[r.head];
    r.tail = remap[r.tail];
    s.relations.push_back(r);
  }
  s.entities = std::move(entities);
}

inline std::size_t line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream in(line);
  std::string field;
  while (in >> field) fields.push_back(field);
  return fields;
}

}  // namespace detail

// Canonical layout: a JSON array of
//   {"id": "...", "tokens": [...], "entities": [{"start","end","type"}],
//    "relations": [{"head","tail","type"}]}
// with inclusive entity ends and relation arguments indexing "entities".
// "id" is optional and defaults to the record's position.
inline std::vector<AnnotatedSentence> parse_corpus_json(std::string_view text, LoadReport& report) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::kParseError, "line " + std::to_string(detail::line_of_offset(text, e.byte)) + ": " + e.what());
  }
  if (!doc.is_array()) fail(ErrorKind::kParseError, "corpus root must be an array of sentence records");

  std::vector<AnnotatedSentence> corpus;
  corpus.reserve(doc.size());
  for (std::size_t r = 0; r < doc.size(); ++r) {
    const auto& rec = doc[r];
    const std::string where = "record " + std::to_string(r);
    AnnotatedSentence s;
    try {
      s.key = rec.contains("id") ? rec.at("id").get<std::string>() : std::to_string(r);
      s.tokens = make_tokens(rec.at("tokens").get<std::vector<std::string>>());
      if (rec.contains("entities")) {
        for (const auto& e : rec.at("entities")) {
          s.entities.push_back({e.at("start").get<std::size_t>(), e.at("end").get<std::size_t>(),
                                e.at("type").get<std::string>()});
        }
      }
      if (rec.contains("relations")) {
        for (const auto& rel : rec.at("relations")) {
          s.relations.push_back({rel.at("head").get<std::size_t>(), rel.at("tail").get<std::size_t>(),
                                 rel.at("type").get<std::string>()});
        }
      }
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::kParseError, where + ": " + e.what());
    }
    detail::check_sentence(s, where);
    detail::remove_overlaps(s, report);
    corpus.push_back(std::move(s));
  }
  return corpus;
}

// CoNLL04 tabular layout (Roth & Yih distribution): each sentence is a block
// of tab-separated token rows
//   sent_id  entity_class  token_no  POS  word  ...
// where multi-word entities are joined with '/' in the word column, followed
// by an optional block of relation rows "arg1_token_no arg2_token_no type".
inline std::vector<AnnotatedSentence> parse_corpus_conll04(std::string_view text, LoadReport& report) {
  std::vector<AnnotatedSentence> corpus;
  std::vector<std::size_t> entity_of_row;  // row number -> entity index in current sentence
  std::vector<std::size_t> relation_lines;

  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  enum class Block { kNone, kTokens, kRelations } block = Block::kNone;
  bool have_sentence = false;

  auto finish = [&]() {
    if (!have_sentence) return;
    auto& s = corpus.back();
    detail::check_sentence(s, "sentence '" + s.key + "'");
    detail::remove_overlaps(s, report);
    have_sentence = false;
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto fields = detail::split_ws(line);
    if (fields.empty()) {
      if (block == Block::kTokens) block = Block::kNone;
      else if (block == Block::kRelations) block = Block::kNone;
      continue;
    }
    const std::string where = "line " + std::to_string(line_no);
    if (fields.size() >= 5) {
      if (block != Block::kTokens) {
        finish();
        corpus.emplace_back();
        corpus.back().key = fields[0];
        entity_of_row.clear();
        have_sentence = true;
        block = Block::kTokens;
      }
      auto& s = corpus.back();
      std::size_t row = 0;
      try {
        row = std::stoul(fields[2]);
      } catch (const std::exception&) {
        fail(ErrorKind::kParseError, where + ": bad token number '" + fields[2] + "'");
      }
      if (row != entity_of_row.size()) fail(ErrorKind::kParseError, where + ": token rows out of order");
      std::vector<std::string> words;
      std::string piece;
      std::istringstream word_in(fields[4]);
      while (std::getline(word_in, piece, '/')) {
        if (piece.empty()) continue;
        words.push_back(piece == "COMMA" ? "," : piece);
      }
      if (words.empty()) words.push_back(fields[4]);
      const std::size_t start = s.tokens.size();
      for (const auto& w : words) s.tokens.push_back({w, s.tokens.size()});
      if (fields[1] != "O") {
        entity_of_row.push_back(s.entities.size());
        s.entities.push_back({start, s.tokens.size() - 1, fields[1]});
      } else {
        entity_of_row.push_back(SIZE_MAX);
      }
    } else if (fields.size() == 3) {
      if (!have_sentence) fail(ErrorKind::kParseError, where + ": relation row before any sentence");
      block = Block::kRelations;
      auto& s = corpus.back();
      std::size_t a = 0, b = 0;
      try {
        a = std::stoul(fields[0]);
        b = std::stoul(fields[1]);
      } catch (const std::exception&) {
        fail(ErrorKind::kParseError, where + ": bad relation row");
      }
      if (a >= entity_of_row.size() || b >= entity_of_row.size() || entity_of_row[a] == SIZE_MAX ||
          entity_of_row[b] == SIZE_MAX) {
        fail(ErrorKind::kInvariantViolation, where + ": relation argument is not an entity row");
      }
      s.relations.push_back({entity_of_row[a], entity_of_row[b], fields[2]});
    } else {
      fail(ErrorKind::kParseError, where + ": expected a token row (>=5 fields) or relation row (3 fields)");
    }
  }
  finish();
  return corpus;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIoError, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline std::vector<AnnotatedSentence> load_corpus(const std::string& path, CorpusFormat format, LoadReport& report) {
  const std::string text = read_file(path);
  auto corpus = format == CorpusFormat::kCanonicalJson ? parse_corpus_json(text, report)
                                                        : parse_corpus_conll04(text, report);
  if (report.dropped_relations > 0 || report.dropped_entities > 0) {
    std::clog << "warning: " << path << ": dropped " << report.dropped_relations
              << " relation(s) and " << report.dropped_entities << " entity(ies) with overlapping spans\n";
  }
  return corpus;
}

inline std::vector<AnnotatedSentence> load_corpus(const std::string& path,
                                                  CorpusFormat format = CorpusFormat::kCanonicalJson) {
  LoadReport report;
  return load_corpus(path, format, report);
}

inline nlohmann::json sentence_to_json(const AnnotatedSentence& s) {
  nlohmann::json rec;
  rec["id"] = s.key;
  auto tokens = nlohmann::json::array();
  for (const auto& t : s.tokens) tokens.push_back(t.text);
  rec["tokens"] = std::move(tokens);
  auto entities = nlohmann::json::array();
  for (const auto& e : s.entities) entities.push_back({{"start", e.start}, {"end", e.end}, {"type", e.type}});
  rec["entities"] = std::move(entities);
  auto relations = nlohmann::json::array();
  for (const auto& r : s.relations) relations.push_back({{"head", r.head}, {"tail", r.tail}, {"type", r.type}});
  rec["relations"] = std::move(relations);
  return rec;
}

inline std::string write_corpus_json(std::span<const AnnotatedSentence> corpus) {
  auto doc = nlohmann::json::array();
  for (const auto& s : corpus) doc.push_back(sentence_to_json(s));
  return doc.dump(1);
}

// ---------------------------------------------------------------------------
// Folds
// ---------------------------------------------------------------------------

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// Test sets are the k contiguous chunks of one seeded permutation, so they
// partition the corpus; test_frac must therefore equal 1/k. Validation takes
// the next round(val_frac * n) permuted indices after the fold's test chunk.
inline std::vector<Fold> make_folds(std::size_t corpus_size, std::size_t k, double val_frac, double test_frac,
                                    std::uint64_t seed) {
  require(k >= 2, ErrorKind::kInvalidArgument, "k must be at least 2");
  require(val_frac >= 0.0 && test_frac > 0.0 && val_frac + test_frac < 1.0, ErrorKind::kInvalidArgument,
          "fractions must be non-negative and sum to less than 1");
  require(std::abs(test_frac * static_cast<double>(k) - 1.0) < 1e-9, ErrorKind::kInvalidArgument,
          "test fraction must equal 1/k for test sets to partition the corpus");

  const std::size_t n = corpus_size;
  const auto n_val = static_cast<std::size_t>(std::llround(val_frac * static_cast<double>(n)));
  if (n < k) fail(ErrorKind::kCorpusTooSmall, std::to_string(n) + " sentences for " + std::to_string(k) + " folds");

  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(perm));

  std::vector<Fold> folds(k);
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t begin = f * n / k;
    const std::size_t end = (f + 1) * n / k;
    const std::size_t n_test = end - begin;
    if (n_test + n_val >= n) {
      fail(ErrorKind::kCorpusTooSmall, "fold " + std::to_string(f) + " leaves no training data");
    }
    Fold& fold = folds[f];
    fold.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(begin), perm.begin() + static_cast<std::ptrdiff_t>(end));
    std::vector<bool> used(n, false);
    for (std::size_t i = begin; i < end; ++i) used[i] = true;
    for (std::size_t j = 0; j < n_val; ++j) {
      const std::size_t pos = (end + j) % n;
      fold.val.push_back(perm[pos]);
      used[pos] = true;
    }
    for (std::size_t pos = 0; pos < n; ++pos) {
      if (!used[pos]) fold.train.push_back(perm[pos]);
    }
    std::sort(fold.train.begin(), fold.train.end());
    std::sort(fold.val.begin(), fold.val.end());
    std::sort(fold.test.begin(), fold.test.end());
  }
  return folds;
}

template <typename T>
std::vector<T> select(std::span<const T> items, std::span<const std::size_t> indices) {
  std::vector<T> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(items[i]);
  return out;
}

}  // namespace jerx

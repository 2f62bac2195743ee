#pragma once

#include <cstdint>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "jerx/error.hpp"
#include "jerx/model.hpp"

namespace jerx {

enum class Precision { kFloat32, kFloat64 };

// Hyperparameters. Defaults: dropout 0.1, 128-d entity embeddings, 512-d
// head/tail projections, 1 NER layer, 2 RE layers, AdamW with weight decay
// 0.1, gradient norm clipped at 1, batch 16, learning rate 3e-5.
struct Config {
  double dropout = 0.1;
  std::size_t entity_emb_dim = 128;
  std::size_t head_tail_dim = 512;
  std::size_t ner_ffnn_layers = 1;
  std::size_t re_ffnn_layers = 2;
  double grad_clip = 1.0;
  double weight_decay = 0.1;
  std::size_t batch_size = 16;
  double learning_rate = 3e-5;
  std::size_t epochs = 10;
  std::uint64_t seed = 42;
  Ablations ablations;
  bool gold_re_mode = false;

  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  EncoderKind encoder = EncoderKind::kToy;
  std::string embeddings_path;  // file-backed encoder input
  std::size_t toy_hidden_size = 64;
  std::size_t toy_embedding_dim = 64;
  std::size_t toy_window = 2;

  Precision precision = Precision::kFloat32;
  double val_frac = 0.1;  // held out from the training corpus when no validation corpus is given

  void validate() const {
    auto check = [](bool ok, const std::string& what) { require(ok, ErrorKind::kConfigError, what); };
    check(dropout >= 0.0 && dropout < 1.0, "dropout must be in [0, 1)");
    check(entity_emb_dim > 0, "entity_embeddings must be positive");
    check(head_tail_dim > 0, "head_tail_dim must be positive");
    check(ner_ffnn_layers >= 1 && re_ffnn_layers >= 1, "layer counts must be at least 1");
    check(grad_clip > 0.0, "gradient_normalization must be positive");
    check(weight_decay >= 0.0, "weight_decay must be non-negative");
    check(batch_size > 0, "batch_size must be positive");
    check(learning_rate >= 0.0, "learning_rate must be non-negative");
    check(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0, "adam betas must be in [0, 1)");
    check(adam_epsilon > 0.0, "adam_epsilon must be positive");
    check(val_frac >= 0.0 && val_frac < 1.0, "val_frac must be in [0, 1)");
    if (encoder == EncoderKind::kToy) {
      check(toy_hidden_size > 0 && toy_embedding_dim > 0, "toy encoder sizes must be positive");
    } else {
      check(!embeddings_path.empty(), "file encoder requires 'embeddings'");
    }
  }

  ModelShape shape(std::size_t file_hidden_size = 0) const {
    ModelShape s;
    s.encoder.kind = encoder;
    s.encoder.hidden_size = encoder == EncoderKind::kToy ? toy_hidden_size : file_hidden_size;
    s.encoder.embedding_dim = toy_embedding_dim;
    s.encoder.window = toy_window;
    s.entity_emb_dim = entity_emb_dim;
    s.head_tail_dim = head_tail_dim;
    s.ner_layers = ner_ffnn_layers;
    s.re_layers = re_ffnn_layers;
    s.ablations = ablations;
    return s;
  }
};

inline const std::vector<std::string>& ablation_names() {
  static const std::vector<std::string> names{"no_pretraining", "no_entity_embeddings", "single_ffnn", "no_head_tail",
                                              "no_bilinear"};
  return names;
}

inline bool& ablation_flag(Ablations& a, std::string_view name) {
  if (name == "no_pretraining") return a.no_pretraining;
  if (name == "no_entity_embeddings") return a.no_entity_embeddings;
  if (name == "single_ffnn") return a.single_ffnn;
  if (name == "no_head_tail") return a.no_head_tail;
  if (name == "no_bilinear") return a.no_bilinear;
  fail(ErrorKind::kConfigError, "unknown ablation '" + std::string(name) + "'");
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string unquote(std::string s) {
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) return s.substr(1, s.size() - 2);
  return s;
}

inline std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace detail

// Applies one `key = value` setting.
inline void set_config_value(Config& c, const std::string& key, const std::string& raw) {
  const std::string value = detail::unquote(raw);
  auto as_double = [&]() {
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (value.empty() || *end != '\0') fail(ErrorKind::kConfigError, key + ": expected a number, got '" + value + "'");
    return v;
  };
  auto as_size = [&]() {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
    if (value.empty() || *end != '\0' || value[0] == '-') {
      fail(ErrorKind::kConfigError, key + ": expected a non-negative integer, got '" + value + "'");
    }
    return static_cast<std::size_t>(v);
  };
  auto as_bool = [&]() {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    fail(ErrorKind::kConfigError, key + ": expected true/false, got '" + value + "'");
  };

  if (key == "dropout") c.dropout = as_double();
  else if (key == "entity_embeddings") c.entity_emb_dim = as_size();
  else if (key == "head_tail_dim") c.head_tail_dim = as_size();
  else if (key == "ner_layers") c.ner_ffnn_layers = as_size();
  else if (key == "re_layers") c.re_ffnn_layers = as_size();
  else if (key == "gradient_normalization") c.grad_clip = as_double();
  else if (key == "weight_decay") c.weight_decay = as_double();
  else if (key == "batch_size") c.batch_size = as_size();
  else if (key == "learning_rate") c.learning_rate = as_double();
  else if (key == "epochs") c.epochs = as_size();
  else if (key == "seed") c.seed = as_size();
  else if (key == "gold_re_mode") c.gold_re_mode = as_bool();
  else if (key == "adam_beta1") c.adam_beta1 = as_double();
  else if (key == "adam_beta2") c.adam_beta2 = as_double();
  else if (key == "adam_epsilon") c.adam_epsilon = as_double();
  else if (key == "toy_hidden_size") c.toy_hidden_size = as_size();
  else if (key == "toy_embedding_dim") c.toy_embedding_dim = as_size();
  else if (key == "toy_window") c.toy_window = as_size();
  else if (key == "val_frac") c.val_frac = as_double();
  else if (key == "embeddings") c.embeddings_path = value;
  else if (key == "encoder") {
    if (value == "toy") c.encoder = EncoderKind::kToy;
    else if (value == "file") c.encoder = EncoderKind::kFileBacked;
    else fail(ErrorKind::kConfigError, "encoder: expected toy or file, got '" + value + "'");
  } else if (key == "precision") {
    if (value == "float32") c.precision = Precision::kFloat32;
    else if (value == "float64") c.precision = Precision::kFloat64;
    else fail(ErrorKind::kConfigError, "precision: expected float32 or float64, got '" + value + "'");
  } else if (key == "optimizer") {
    if (value != "AdamW" && value != "adamw") fail(ErrorKind::kConfigError, "optimizer: only AdamW is supported");
  } else if (key == "tagging_scheme") {
    if (value != "BIOES" && value != "bioes") fail(ErrorKind::kConfigError, "tagging_scheme: only BIOES is supported");
  } else if (key == "ablations") {
    c.ablations = {};
    std::istringstream in(value);
    std::string name;
    while (std::getline(in, name, ',')) {
      name = detail::trim(name);
      if (!name.empty()) ablation_flag(c.ablations, name) = true;
    }
  } else {
    bool matched = false;
    for (const auto& name : ablation_names()) {
      if (key == name) {
        ablation_flag(c.ablations, name) = as_bool();
        matched = true;
      }
    }
    if (!matched) fail(ErrorKind::kConfigError, "unknown config key '" + key + "'");
  }
}

// Flat `key = value` lines; '#' starts a comment; blank lines ignored.
inline Config parse_config(std::string_view text) {
  Config c;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::kConfigError, "line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      set_config_value(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      fail(ErrorKind::kConfigError, "line " + std::to_string(line_no) + ": " + e.message());
    }
  }
  c.validate();
  return c;
}

inline std::string serialize_config(const Config& c) {
  std::ostringstream out;
  out << "tagging_scheme = BIOES\n"
      << "optimizer = AdamW\n"
      << "dropout = " << detail::format_double(c.dropout) << "\n"
      << "entity_embeddings = " << c.entity_emb_dim << "\n"
      << "head_tail_dim = " << c.head_tail_dim << "\n"
      << "ner_layers = " << c.ner_ffnn_layers << "\n"
      << "re_layers = " << c.re_ffnn_layers << "\n"
      << "gradient_normalization = " << detail::format_double(c.grad_clip) << "\n"
      << "weight_decay = " << detail::format_double(c.weight_decay) << "\n"
      << "batch_size = " << c.batch_size << "\n"
      << "learning_rate = " << detail::format_double(c.learning_rate) << "\n"
      << "epochs = " << c.epochs << "\n"
      << "seed = " << c.seed << "\n"
      << "gold_re_mode = " << (c.gold_re_mode ? "true" : "false") << "\n"
      << "adam_beta1 = " << detail::format_double(c.adam_beta1) << "\n"
      << "adam_beta2 = " << detail::format_double(c.adam_beta2) << "\n"
      << "adam_epsilon = " << detail::format_double(c.adam_epsilon) << "\n"
      << "encoder = " << (c.encoder == EncoderKind::kToy ? "toy" : "file") << "\n";
  if (!c.embeddings_path.empty()) out << "embeddings = \"" << c.embeddings_path << "\"\n";
  out << "toy_hidden_size = " << c.toy_hidden_size << "\n"
      << "toy_embedding_dim = " << c.toy_embedding_dim << "\n"
      << "toy_window = " << c.toy_window << "\n"
      << "precision = " << (c.precision == Precision::kFloat32 ? "float32" : "float64") << "\n"
      << "val_frac = " << detail::format_double(c.val_frac) << "\n";
  Ablations a = c.ablations;
  for (const auto& name : ablation_names()) out << name << " = " << (ablation_flag(a, name) ? "true" : "false") << "\n";
  return out.str();
}

}  // namespace jerx

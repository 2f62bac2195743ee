#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "jerx/jerx.hpp"

#ifndef JERX_REVISION
#define JERX_REVISION "unknown"
#endif

// Command-line front end. Exit codes: 0 ok, 1 configuration or checkpoint
// mismatch, 2 bad or missing data, 3 runtime failure.

namespace jerx::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitRuntime = 3;

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfigError:
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kVocabMismatch:
      return kExitConfig;
    case ErrorKind::kNonFiniteLoss:
      return kExitRuntime;
    default:
      return kExitData;
  }
}

inline std::string fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIoError, "cannot write '" + path.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

inline CorpusFormat corpus_format(const std::string& name, const std::string& path) {
  if (name == "json") return CorpusFormat::kCanonicalJson;
  if (name == "conll04") return CorpusFormat::kConll04;
  if (name != "auto") fail(ErrorKind::kConfigError, "unknown corpus format '" + name + "'");
  return std::filesystem::path(path).extension() == ".json" ? CorpusFormat::kCanonicalJson : CorpusFormat::kConll04;
}

template <typename F>
int with_precision(Precision p, F&& f) {
  if (p == Precision::kFloat64) return f(double{});
  return f(float{});
}

// Options shared by the verbs that build a Config.
struct ConfigOptions {
  std::string path;
  std::vector<std::string> overrides;  // key=value
  std::vector<std::string> ablations;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  bool gold_mode = false;

  void attach(CLI::App* app) {
    app->add_option("--config", path, "key = value config file");
    app->add_option("--set", overrides, "override one config key (key=value), repeatable");
    app->add_option("--ablation", ablations, "enable an ablation, repeatable")
        ->check(CLI::IsMember(ablation_names()));
    app->add_option("--seed", seed, "seed (takes precedence over JERX_SEED and the config)");
    app->add_option("--epochs", epochs, "number of training epochs");
    app->add_flag("--gold-mode", gold_mode, "build relation candidates from gold entities");
  }

  // Precedence, lowest first: defaults, config file, --set, JERX_SEED, flags.
  Config build() const {
    Config c;
    if (!path.empty()) {
      std::string text;
      try {
        text = read_file(path);
      } catch (const Error& e) {
        fail(ErrorKind::kConfigError, e.message());
      }
      c = parse_config(text);
    }
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) fail(ErrorKind::kConfigError, "--set expects key=value, got '" + kv + "'");
      set_config_value(c, detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)));
    }
    if (const char* env = std::getenv("JERX_SEED"); env && *env) set_config_value(c, "seed", env);
    if (seed) c.seed = *seed;
    if (epochs) c.epochs = *epochs;
    for (const auto& a : ablations) ablation_flag(c.ablations, a) = true;
    if (gold_mode) c.gold_re_mode = true;
    c.validate();
    return c;
  }
};

struct CorpusOptions {
  std::string path;
  std::string format = "auto";

  void attach(CLI::App* app, const std::string& flag = "--corpus", bool required = true) {
    auto* opt = app->add_option(flag, path, "corpus file (canonical JSON or CoNLL04)");
    if (required) opt->required();
    app->add_option("--format", format, "auto, json or conll04")->check(CLI::IsMember({"auto", "json", "conll04"}));
  }

  std::vector<AnnotatedSentence> load() const { return load_corpus(path, corpus_format(format, path)); }
};

inline std::vector<std::string> enabled_ablations(const Ablations& a) {
  Ablations copy = a;
  std::vector<std::string> out;
  for (const auto& name : ablation_names())
    if (ablation_flag(copy, name)) out.push_back(name);
  return out;
}

inline nlohmann::json manifest(const std::string& command, const Config& config, const std::string& corpus_path,
                               const std::string& started_at) {
  nlohmann::json m;
  m["command"] = command;
  m["config"] = serialize_config(config);
  m["ablations"] = enabled_ablations(config.ablations);
  m["corpus"] = corpus_path;
  m["corpus_checksum"] = "fnv1a64:" + fnv1a64(read_file(corpus_path));
  m["seed"] = config.seed;
  m["revision"] = JERX_REVISION;
  m["started_at"] = started_at;
  m["finished_at"] = utc_timestamp();
  return m;
}

// Deterministic train/validation split of one corpus.
inline std::pair<std::vector<AnnotatedSentence>, std::vector<AnnotatedSentence>> split_validation(
    const std::vector<AnnotatedSentence>& corpus, double val_frac, std::uint64_t seed) {
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed ^ 0x5851f42d4c957f2dULL);
  rng.shuffle(std::span<std::size_t>(order));
  const auto n_val = static_cast<std::size_t>(std::llround(val_frac * static_cast<double>(corpus.size())));
  require(n_val < corpus.size(), ErrorKind::kCorpusTooSmall, "validation split leaves no training sentences");
  std::vector<AnnotatedSentence> train, val;
  for (std::size_t i = 0; i < order.size(); ++i) (i < n_val ? val : train).push_back(corpus[order[i]]);
  return {std::move(train), std::move(val)};
}

inline std::optional<FileBackedEncoder> open_encoder(const Config& config) {
  if (config.encoder != EncoderKind::kFileBacked) return std::nullopt;
  return FileBackedEncoder::open(config.embeddings_path);
}

// ---------------------------------------------------------------------------
// Verbs
// ---------------------------------------------------------------------------

struct TrainArgs {
  ConfigOptions config;
  CorpusOptions corpus;
  std::string val_path;
  std::string out_dir;
  bool quiet = false;
};

inline int cmd_train(const TrainArgs& args, std::ostream& out) {
  const std::string started = utc_timestamp();
  const Config config = args.config.build();
  const auto corpus = args.corpus.load();
  require(!corpus.empty(), ErrorKind::kEmptyInput, "corpus '" + args.corpus.path + "' has no sentences");

  std::vector<AnnotatedSentence> train_set, val_set;
  if (!args.val_path.empty()) {
    train_set = corpus;
    val_set = load_corpus(args.val_path, corpus_format(args.corpus.format, args.val_path));
  } else {
    std::tie(train_set, val_set) = split_validation(corpus, config.val_frac, config.seed);
  }
  std::vector<AnnotatedSentence> everything = train_set;
  everything.insert(everything.end(), val_set.begin(), val_set.end());

  const auto encoder = open_encoder(config);
  const std::filesystem::path dir(args.out_dir);
  std::filesystem::create_directories(dir);

  nlohmann::json summary;
  with_precision(config.precision, [&](auto zero) {
    using T = decltype(zero);
    auto model = make_model<T>(config, everything, encoder ? &*encoder : nullptr);
    auto result = train<T>(std::move(model), train_set, val_set, config, args.quiet ? nullptr : &out);
    save_checkpoint((dir / "checkpoint.bin").string(), result.model, config);
    write_text(dir / "metrics.csv", metrics_csv(result.log));
    summary["best_epoch"] = result.best_epoch;
    summary["best_val_overall"] = result.best_val_overall;
    summary["parameters"] = result.model.params().parameter_count();
    return 0;
  });

  auto m = manifest("train", config, args.corpus.path, started);
  m["train_sentences"] = train_set.size();
  m["val_sentences"] = val_set.size();
  m["outputs"] = {"checkpoint.bin", "metrics.csv"};
  m.update(summary);
  write_text(dir / "manifest.json", m.dump(2) + "\n");
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint;
  CorpusOptions corpus;
  std::string embeddings;
  bool gold_mode = false;
  bool boundary_only = false;
  std::string out_json;
  std::string out_csv;
};

template <typename T>
Checkpoint<T> load_for_inference(const std::string& path, const std::string& embeddings_override,
                                 std::optional<FileBackedEncoder>& encoder) {
  Checkpoint<T> ckpt = load_checkpoint<T>(path);
  if (!embeddings_override.empty()) ckpt.config.embeddings_path = embeddings_override;
  encoder = open_encoder(ckpt.config);
  if (encoder) {
    const auto expected = ckpt.model.shape().encoder.hidden_size;
    if (encoder->hidden_size() != expected) {
      fail(ErrorKind::kVocabMismatch, "embedding file hidden size " + std::to_string(encoder->hidden_size()) +
                                          " does not match checkpoint (" + std::to_string(expected) + ")");
    }
    ckpt.model.set_file_encoder(&*encoder);
  }
  return ckpt;
}

inline std::string eval_csv_header() {
  return "checkpoint,corpus,mode,criterion,entity_p,entity_r,entity_f1,relation_p,relation_r,relation_f1,overall\n";
}

inline int cmd_eval(const EvalArgs& args, std::ostream& out) {
  const Config stored = peek_checkpoint_config(args.checkpoint);
  const auto corpus = args.corpus.load();
  const CandidateMode mode = args.gold_mode ? CandidateMode::kGold : CandidateMode::kPredicted;
  const MatchCriterion criterion = args.boundary_only ? MatchCriterion::kBoundaryOnly : MatchCriterion::kStrict;

  EvaluationResult result;
  with_precision(stored.precision, [&](auto zero) {
    using T = decltype(zero);
    std::optional<FileBackedEncoder> encoder;
    const auto ckpt = load_for_inference<T>(args.checkpoint, args.embeddings, encoder);
    result = evaluate(ckpt.model, std::span<const AnnotatedSentence>(corpus), mode, criterion);
    return 0;
  });

  const std::string json = to_json(result).dump(2) + "\n";
  if (args.out_json.empty()) out << json;
  else write_text(args.out_json, json);

  if (!args.out_csv.empty()) {
    const bool fresh = !std::filesystem::exists(args.out_csv);
    std::ofstream csv(args.out_csv, std::ios::app);
    if (!csv) fail(ErrorKind::kIoError, "cannot write '" + args.out_csv + "'");
    if (fresh) csv << eval_csv_header();
    char buf[256];
    std::snprintf(buf, sizeof(buf), ",%s,%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.2f\n",
                  args.gold_mode ? "gold" : "predicted", args.boundary_only ? "boundary" : "strict",
                  result.entity.precision, result.entity.recall, result.entity.f1, result.relation.precision,
                  result.relation.recall, result.relation.f1, result.overall());
    csv << args.checkpoint << "," << args.corpus.path << buf;
  }
  return kExitOk;
}

struct PredictArgs {
  std::string checkpoint;
  std::string input;
  std::string embeddings;
  std::string out;
};

// Input is canonical JSON (annotations ignored) or plain text with one
// whitespace-tokenized sentence per line.
inline std::vector<AnnotatedSentence> read_unlabeled(const std::string& path) {
  const std::string text = read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  if (text[first] == '[') {
    LoadReport report;
    return parse_corpus_json(text, report);
  }
  std::vector<AnnotatedSentence> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto words = detail::split_ws(line);
    if (words.empty()) continue;
    AnnotatedSentence s;
    s.key = std::to_string(out.size());
    s.tokens = make_tokens(words);
    out.push_back(std::move(s));
  }
  return out;
}

inline AnnotatedSentence with_prediction(const AnnotatedSentence& input, const Prediction& p) {
  AnnotatedSentence s;
  s.key = input.key;
  s.tokens = input.tokens;
  s.entities = p.entities;
  auto index_of = [&](const EntitySpan& span) {
    for (std::size_t i = 0; i < s.entities.size(); ++i)
      if (s.entities[i] == span) return i;
    s.entities.push_back(span);
    return s.entities.size() - 1;
  };
  for (const auto& r : p.relations) s.relations.push_back({index_of(r.head), index_of(r.tail), r.type});
  return s;
}

inline int cmd_predict(const PredictArgs& args, std::ostream& out) {
  const Config stored = peek_checkpoint_config(args.checkpoint);
  const auto input = read_unlabeled(args.input);
  std::vector<AnnotatedSentence> predicted;
  with_precision(stored.precision, [&](auto zero) {
    using T = decltype(zero);
    std::optional<FileBackedEncoder> encoder;
    const auto ckpt = load_for_inference<T>(args.checkpoint, args.embeddings, encoder);
    for (const auto& s : input) {
      for (const auto& e : s.entities) {
        if (!ckpt.model.labels().has_entity_type(e.type)) {
          fail(ErrorKind::kVocabMismatch, "entity type '" + e.type + "' in '" + s.key + "' is unknown to the checkpoint");
        }
      }
      predicted.push_back(with_prediction(s, ckpt.model.predict(s)));
    }
    return 0;
  });
  const std::string json = write_corpus_json(predicted) + "\n";
  if (args.out.empty()) out << json;
  else write_text(args.out, json);
  return kExitOk;
}

struct AblateArgs {
  ConfigOptions config;
  CorpusOptions corpus;
  std::string out_dir;
  std::size_t runs = 3;
  std::size_t k = 5;
  std::size_t fold = 0;
  double test_frac = 0.2;
};

struct AblationRow {
  std::string name;
  std::vector<double> entity, relation, overall;  // percent, one per run
};

inline std::string ablation_table(const std::vector<AblationRow>& rows) {
  const MeanSd full = summarize(rows.front().overall);
  std::string out = "model,entity,relation,overall,delta\n";
  for (const auto& row : rows) {
    const MeanSd o = summarize(row.overall);
    std::string delta = "\xE2\x80\x94";
    if (&row != &rows.front()) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%+.2f", round_2dp(o.mean - full.mean));
      delta = buf;
    }
    out += row.name + "," + format_mean_sd(summarize(row.entity)) + "," + format_mean_sd(summarize(row.relation)) + "," +
           format_mean_sd(o) + "," + delta + "\n";
  }
  return out;
}

inline int cmd_ablate(const AblateArgs& args, std::ostream& out) {
  const std::string started = utc_timestamp();
  const Config base = args.config.build();
  require(args.runs >= 1, ErrorKind::kConfigError, "--runs must be at least 1");
  const auto corpus = args.corpus.load();
  const auto folds = make_folds(corpus.size(), args.k, base.val_frac, args.test_frac, base.seed);
  require(args.fold < folds.size(), ErrorKind::kConfigError, "--fold out of range");
  const auto& fold = folds[args.fold];
  const auto train_set = select<AnnotatedSentence>(corpus, fold.train);
  const auto val_set = select<AnnotatedSentence>(corpus, fold.val);
  const auto test_set = select<AnnotatedSentence>(corpus, fold.test);
  const auto encoder = open_encoder(base);
  const std::filesystem::path dir(args.out_dir);
  std::filesystem::create_directories(dir);

  std::vector<std::string> variants{"full"};
  for (const auto& name : ablation_names()) variants.push_back(name);
  std::vector<AblationRow> rows;
  std::string runs_csv = "model,run,seed,entity_f1,relation_f1,overall\n";
  for (const auto& variant : variants) {
    AblationRow row{variant, {}, {}, {}};
    for (std::size_t r = 0; r < args.runs; ++r) {
      Config config = base;
      config.ablations = {};
      if (variant != "full") ablation_flag(config.ablations, variant) = true;
      config.seed = base.seed + r;
      const CandidateMode mode = config.gold_re_mode ? CandidateMode::kGold : CandidateMode::kPredicted;
      EvaluationResult ev;
      with_precision(config.precision, [&](auto zero) {
        using T = decltype(zero);
        auto model = make_model<T>(config, corpus, encoder ? &*encoder : nullptr);
        auto result = train<T>(std::move(model), train_set, val_set, config);
        ev = evaluate(result.model, std::span<const AnnotatedSentence>(test_set), mode);
        return 0;
      });
      row.entity.push_back(100.0 * ev.entity.f1);
      row.relation.push_back(100.0 * ev.relation.f1);
      row.overall.push_back(ev.overall());
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%s,%zu,%llu,%.6f,%.6f,%.2f\n", variant.c_str(), r,
                    static_cast<unsigned long long>(config.seed), ev.entity.f1, ev.relation.f1, ev.overall());
      runs_csv += buf;
    }
    rows.push_back(std::move(row));
  }

  const std::string table = ablation_table(rows);
  out << table;
  write_text(dir / "ablation.csv", table);
  write_text(dir / "ablation_runs.csv", runs_csv);
  auto m = manifest("ablate", base, args.corpus.path, started);
  m["runs"] = args.runs;
  m["fold"] = args.fold;
  m["k"] = args.k;
  m["outputs"] = {"ablation.csv", "ablation_runs.csv"};
  write_text(dir / "manifest.json", m.dump(2) + "\n");
  return kExitOk;
}

struct FoldsArgs {
  CorpusOptions corpus;
  std::size_t size = 0;
  std::size_t k = 5;
  double val_frac = 0.1;
  double test_frac = 0.2;
  std::uint64_t seed = 42;
  std::string out;
};

inline int cmd_folds(const FoldsArgs& args, std::ostream& out) {
  std::size_t n = args.size;
  std::vector<AnnotatedSentence> corpus;
  if (!args.corpus.path.empty()) {
    corpus = args.corpus.load();
    n = corpus.size();
  }
  const auto folds = make_folds(n, args.k, args.val_frac, args.test_frac, args.seed);
  auto doc = nlohmann::json::array();
  for (std::size_t i = 0; i < folds.size(); ++i) {
    nlohmann::json f{{"fold", i}, {"train", folds[i].train}, {"val", folds[i].val}, {"test", folds[i].test}};
    if (!corpus.empty()) {
      auto keys = [&](const std::vector<std::size_t>& idx) {
        std::vector<std::string> k;
        for (auto j : idx) k.push_back(corpus[j].key);
        return k;
      };
      f["test_keys"] = keys(folds[i].test);
    }
    doc.push_back(std::move(f));
  }
  const std::string json = doc.dump(1) + "\n";
  if (args.out.empty()) out << json;
  else write_text(args.out, json);
  return kExitOk;
}

struct HeatmapArgs {
  std::string embeddings;
  std::string key;
  std::size_t layer = 0;
  std::size_t head = 0;
  std::size_t cell_size = 8;
  std::string out_prefix;
};

inline int cmd_attn_heatmap(const HeatmapArgs& args, std::ostream& out) {
  const emb::File file = emb::read(args.embeddings);
  const emb::Record* record = file.find(args.key);
  if (!record) fail(ErrorKind::kMissingEmbeddingRecord, "no record '" + args.key + "' in '" + args.embeddings + "'");
  const AttentionMap map = select_head(file.header, *record, args.layer, args.head);
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < map.tokens; ++i) labels.push_back(std::to_string(i));
  write_text(args.out_prefix + ".csv", heatmap_csv(map, labels));
  write_text(args.out_prefix + ".pgm", heatmap_pgm(map, args.cell_size));
  out << "pattern: " << to_string(detect_pattern(map)) << "\n";
  return kExitOk;
}

struct SynthArgs {
  std::size_t count = 500;
  std::uint64_t seed = 7;
  std::string out;
};

inline int cmd_synth(const SynthArgs& args, std::ostream& out) {
  const std::string json = write_corpus_json(synthetic::corpus(args.count, args.seed)) + "\n";
  if (args.out.empty()) out << json;
  else write_text(args.out, json);
  return kExitOk;
}

// ---------------------------------------------------------------------------

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"jerx: joint entity and relation extraction"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train a model and write checkpoint, metrics and manifest");
  train_args.config.attach(train_cmd);
  train_args.corpus.attach(train_cmd);
  train_cmd->add_option("--val", train_args.val_path, "validation corpus (default: split off val_frac)");
  train_cmd->add_option("--out-dir", train_args.out_dir, "output directory")->required();
  train_cmd->add_flag("--quiet", train_args.quiet, "do not print per-epoch metrics");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint on an annotated corpus");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "checkpoint file")->required();
  eval_args.corpus.attach(eval_cmd);
  eval_cmd->add_option("--embeddings", eval_args.embeddings, "JERX-EMB file (file-backed encoder)");
  eval_cmd->add_flag("--gold-mode", eval_args.gold_mode, "relation candidates from gold entities");
  eval_cmd->add_flag("--boundary-only", eval_args.boundary_only, "ignore argument entity types in relation matching");
  eval_cmd->add_option("--out", eval_args.out_json, "results JSON (default: stdout)");
  eval_cmd->add_option("--csv", eval_args.out_csv, "append a summary row to this CSV");

  PredictArgs predict_args;
  auto* predict_cmd = app.add_subcommand("predict", "tag and relate unlabeled sentences");
  predict_cmd->add_option("--checkpoint", predict_args.checkpoint, "checkpoint file")->required();
  predict_cmd->add_option("--input", predict_args.input, "canonical JSON or one tokenized sentence per line")
      ->required();
  predict_cmd->add_option("--embeddings", predict_args.embeddings, "JERX-EMB file (file-backed encoder)");
  predict_cmd->add_option("--out", predict_args.out, "output JSON (default: stdout)");

  AblateArgs ablate_args;
  auto* ablate_cmd = app.add_subcommand("ablate", "full model and the five ablations over shared folds and seeds");
  ablate_args.config.attach(ablate_cmd);
  ablate_args.corpus.attach(ablate_cmd);
  ablate_cmd->add_option("--out-dir", ablate_args.out_dir, "output directory")->required();
  ablate_cmd->add_option("--runs", ablate_args.runs, "repetitions per row (seeds seed..seed+runs-1)");
  ablate_cmd->add_option("--k", ablate_args.k, "number of folds");
  ablate_cmd->add_option("--fold", ablate_args.fold, "fold used for train/val/test");
  ablate_cmd->add_option("--test-frac", ablate_args.test_frac, "test fraction per fold");

  FoldsArgs folds_args;
  auto* folds_cmd = app.add_subcommand("folds", "k-fold train/validation/test index splits");
  folds_args.corpus.attach(folds_cmd, "--corpus", false);
  folds_cmd->add_option("--size", folds_args.size, "corpus size when no corpus is given");
  folds_cmd->add_option("--k", folds_args.k, "number of folds");
  folds_cmd->add_option("--val-frac", folds_args.val_frac, "validation fraction");
  folds_cmd->add_option("--test-frac", folds_args.test_frac, "test fraction (k * test_frac must be 1)");
  folds_cmd->add_option("--seed", folds_args.seed, "permutation seed");
  folds_cmd->add_option("--out", folds_args.out, "output JSON (default: stdout)");

  HeatmapArgs heatmap_args;
  auto* heatmap_cmd = app.add_subcommand("attn-heatmap", "attention heatmap (CSV + PGM) for one layer and head");
  heatmap_cmd->add_option("--embeddings", heatmap_args.embeddings, "JERX-EMB file with attention")->required();
  heatmap_cmd->add_option("--key", heatmap_args.key, "sentence key")->required();
  heatmap_cmd->add_option("--layer", heatmap_args.layer, "layer index");
  heatmap_cmd->add_option("--head", heatmap_args.head, "head index");
  heatmap_cmd->add_option("--cell-size", heatmap_args.cell_size, "pixels per cell")->check(CLI::PositiveNumber);
  heatmap_cmd->add_option("--out-prefix", heatmap_args.out_prefix, "writes <prefix>.csv and <prefix>.pgm")->required();

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "generate the synthetic PER/LOC corpus");
  synth_cmd->add_option("--count", synth_args.count, "number of sentences");
  synth_cmd->add_option("--seed", synth_args.seed, "generator seed");
  synth_cmd->add_option("--out", synth_args.out, "output JSON (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train_args, out);
    if (eval_cmd->parsed()) return cmd_eval(eval_args, out);
    if (predict_cmd->parsed()) return cmd_predict(predict_args, out);
    if (ablate_cmd->parsed()) return cmd_ablate(ablate_args, out);
    if (folds_cmd->parsed()) return cmd_folds(folds_args, out);
    if (heatmap_cmd->parsed()) return cmd_attn_heatmap(heatmap_args, out);
    if (synth_cmd->parsed()) return cmd_synth(synth_args, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace jerx::cli

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "jerx/corpus.hpp"
#include "jerx/model.hpp"

namespace jerx {

struct PRF {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  static PRF from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
    PRF s;
    s.tp = tp;
    s.fp = fp;
    s.fn = fn;
    s.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    s.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    s.f1 = s.precision + s.recall == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
  }

  PRF& operator+=(const PRF& o) {
    *this = from_counts(tp + o.tp, fp + o.fp, fn + o.fn);
    return *this;
  }
};

inline nlohmann::json to_json(const PRF& s) {
  return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"tp", s.tp}, {"fp", s.fp}, {"fn", s.fn}};
}

enum class MatchCriterion { kStrict, kBoundaryOnly };

namespace detail {

// Multiset intersection size of two unsorted lists.
template <typename K>
std::size_t matched(std::vector<K> pred, std::vector<K> gold) {
  std::sort(pred.begin(), pred.end());
  std::sort(gold.begin(), gold.end());
  std::size_t tp = 0;
  auto p = pred.begin();
  auto g = gold.begin();
  while (p != pred.end() && g != gold.end()) {
    if (*p < *g) {
      ++p;
    } else if (*g < *p) {
      ++g;
    } else {
      ++tp;
      ++p;
      ++g;
    }
  }
  return tp;
}

inline RelationMention relation_key(RelationMention r, MatchCriterion criterion) {
  if (criterion == MatchCriterion::kBoundaryOnly) {
    r.head.type.clear();
    r.tail.type.clear();
  }
  return r;
}

}  // namespace detail

// Micro-averaged span F1: exact boundaries and type.
inline PRF score_ner(std::span<const std::vector<EntitySpan>> pred, std::span<const std::vector<EntitySpan>> gold) {
  require(pred.size() == gold.size(), ErrorKind::kInvalidArgument, "prediction and gold sentence counts differ");
  std::size_t tp = 0, n_pred = 0, n_gold = 0;
  for (std::size_t s = 0; s < pred.size(); ++s) {
    tp += detail::matched(pred[s], gold[s]);
    n_pred += pred[s].size();
    n_gold += gold[s].size();
  }
  return PRF::from_counts(tp, n_pred - tp, n_gold - tp);
}

// Strict: both argument spans (boundaries and types), relation type and
// direction must match. Boundary-only ignores the argument entity types.
inline PRF score_re(std::span<const std::vector<RelationMention>> pred, std::span<const std::vector<RelationMention>> gold,
                    MatchCriterion criterion = MatchCriterion::kStrict) {
  require(pred.size() == gold.size(), ErrorKind::kInvalidArgument, "prediction and gold sentence counts differ");
  std::size_t tp = 0, n_pred = 0, n_gold = 0;
  for (std::size_t s = 0; s < pred.size(); ++s) {
    std::vector<RelationMention> p, g;
    for (const auto& r : pred[s]) p.push_back(detail::relation_key(r, criterion));
    for (const auto& r : gold[s]) g.push_back(detail::relation_key(r, criterion));
    tp += detail::matched(std::move(p), std::move(g));
    n_pred += pred[s].size();
    n_gold += gold[s].size();
  }
  return PRF::from_counts(tp, n_pred - tp, n_gold - tp);
}

// Rounds half-up on the shortest decimal form that round-trips `value`, so
// a mean printed as 70.785 reports 70.79 whatever its binary expansion.
inline double round_2dp(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed);
  if (ec != std::errc{}) return std::round(value * 100.0) / 100.0;
  std::string s(buf, end);
  const bool negative = !s.empty() && s[0] == '-';
  if (negative) s.erase(0, 1);
  auto dot = s.find('.');
  if (dot == std::string::npos) {
    s += ".";
    dot = s.size() - 1;
  }
  s.append(3, '0');
  // Integer count of hundredths, then round on the thousandths digit.
  std::string digits = s.substr(0, dot) + s.substr(dot + 1, 2);
  long long hundredths = std::stoll(digits);
  if (s[dot + 3] >= '5') ++hundredths;
  const double out = static_cast<double>(hundredths) / 100.0;
  return negative ? -out : out;
}

// Mean of entity and relation F1, rounded to two decimals.
inline double overall_score(double entity_f1, double relation_f1) { return round_2dp((entity_f1 + relation_f1) / 2.0); }

// ---------------------------------------------------------------------------
// Cross-validation aggregation
// ---------------------------------------------------------------------------

struct FoldScore {
  PRF entity;
  PRF relation;
  std::map<std::string, PRF> entity_by_class;
  std::map<std::string, PRF> relation_by_class;
};

enum class CvScheme { kMicroPool, kMacroMean };

struct MeanSd {
  double mean = 0;
  double sd = 0;  // sample standard deviation; 0 for a single value
  std::size_t n = 0;
};

inline MeanSd summarize(std::span<const double> values) {
  require(!values.empty(), ErrorKind::kEmptyInput, "no values to summarize");
  MeanSd out;
  out.n = values.size();
  double sum = 0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

// "66.83 (0.4)": two-decimal mean with a one-decimal standard deviation.
inline std::string format_mean_sd(const MeanSd& s) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f (%.1f)", round_2dp(s.mean), s.sd);
  return buf;
}

struct CvSummary {
  double entity_f1 = 0;
  double relation_f1 = 0;
  double overall = 0;
  std::vector<double> entity_per_fold;
  std::vector<double> relation_per_fold;
};

namespace detail {

inline double fold_value(const PRF& micro, const std::map<std::string, PRF>& by_class, CvScheme scheme) {
  if (scheme == CvScheme::kMicroPool || by_class.empty()) return micro.f1;
  double sum = 0;
  for (const auto& [name, prf] : by_class) sum += prf.f1;
  return sum / static_cast<double>(by_class.size());
}

}  // namespace detail

// Averages fold-level F1 across folds: micro-pool uses each fold's pooled
// (micro) F1; macro-mean uses each fold's class-averaged F1, falling back to
// the micro value when a fold carries no per-class breakdown.
inline CvSummary aggregate_cv(std::span<const FoldScore> folds, CvScheme scheme) {
  require(!folds.empty(), ErrorKind::kEmptyInput, "no folds to aggregate");
  CvSummary out;
  for (const auto& f : folds) {
    out.entity_per_fold.push_back(detail::fold_value(f.entity, f.entity_by_class, scheme));
    out.relation_per_fold.push_back(detail::fold_value(f.relation, f.relation_by_class, scheme));
  }
  out.entity_f1 = summarize(out.entity_per_fold).mean;
  out.relation_f1 = summarize(out.relation_per_fold).mean;
  out.overall = (out.entity_f1 + out.relation_f1) / 2.0;
  return out;
}

// ---------------------------------------------------------------------------
// Model evaluation
// ---------------------------------------------------------------------------

struct EvaluationResult {
  PRF entity;
  PRF relation;
  std::map<std::string, PRF> entity_by_class;
  std::map<std::string, PRF> relation_by_class;
  std::vector<std::string> relation_labels;
  std::vector<std::vector<std::size_t>> confusion;  // gold class x predicted class over candidates
  MatchCriterion criterion = MatchCriterion::kStrict;
  CandidateMode mode = CandidateMode::kPredicted;

  double overall() const { return overall_score(100.0 * entity.f1, 100.0 * relation.f1); }

  FoldScore fold_score() const { return {entity, relation, entity_by_class, relation_by_class}; }
};

inline nlohmann::json to_json(const EvaluationResult& r) {
  nlohmann::json out;
  out["criterion"] = r.criterion == MatchCriterion::kStrict ? "strict" : "boundary";
  out["mode"] = r.mode == CandidateMode::kGold ? "gold" : "predicted";
  out["entity"] = to_json(r.entity);
  out["relation"] = to_json(r.relation);
  for (const auto& [k, v] : r.entity_by_class) out["entity_by_class"][k] = to_json(v);
  for (const auto& [k, v] : r.relation_by_class) out["relation_by_class"][k] = to_json(v);
  out["overall"] = r.overall();
  out["confusion"] = {{"labels", r.relation_labels}, {"matrix", r.confusion}};
  return out;
}

template <typename T>
EvaluationResult evaluate(const JointModel<T>& model, std::span<const AnnotatedSentence> corpus,
                          CandidateMode mode = CandidateMode::kPredicted,
                          MatchCriterion criterion = MatchCriterion::kStrict) {
  EvaluationResult result;
  result.mode = mode;
  result.criterion = criterion;
  const auto& labels = model.labels();
  result.relation_labels = labels.re_labels();
  result.confusion.assign(labels.re_size(), std::vector<std::size_t>(labels.re_size(), 0));

  std::vector<std::vector<EntitySpan>> pred_entities, gold_entities;
  std::vector<std::vector<RelationMention>> pred_relations, gold_relations;
  for (const auto& sentence : corpus) {
    Prediction p = model.predict(sentence, mode);
    for (const auto& c : p.candidates) ++result.confusion[c.gold_class][*c.predicted_class];
    pred_entities.push_back(std::move(p.entities));
    gold_entities.push_back(sentence.entities);
    pred_relations.push_back(std::move(p.relations));
    gold_relations.push_back(relation_mentions(sentence));
  }
  result.entity = score_ner(pred_entities, gold_entities);
  result.relation = score_re(pred_relations, gold_relations, criterion);

  for (const auto& type : labels.entity_types()) {
    auto only = [&](const std::vector<std::vector<EntitySpan>>& all) {
      std::vector<std::vector<EntitySpan>> out(all.size());
      for (std::size_t s = 0; s < all.size(); ++s)
        for (const auto& e : all[s])
          if (e.type == type) out[s].push_back(e);
      return out;
    };
    result.entity_by_class[type] = score_ner(only(pred_entities), only(gold_entities));
  }
  for (std::size_t c = 1; c < labels.re_size(); ++c) {
    const auto& type = labels.re_label(c);
    auto only = [&](const std::vector<std::vector<RelationMention>>& all) {
      std::vector<std::vector<RelationMention>> out(all.size());
      for (std::size_t s = 0; s < all.size(); ++s)
        for (const auto& r : all[s])
          if (r.type == type) out[s].push_back(r);
      return out;
    };
    result.relation_by_class[type] = score_re(only(pred_relations), only(gold_relations), criterion);
  }
  return result;
}

}  // namespace jerx

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "jerx/corpus.hpp"
#include "oracles.hpp"

using namespace jerx;

namespace {

std::vector<std::string> strs(const TagSequence& tags) {
  std::vector<std::string> out;
  for (const auto& t : tags) out.push_back(t.str());
  return out;
}

TagSequence tags_of(std::initializer_list<const char*> labels) {
  TagSequence out;
  for (const char* l : labels) out.push_back(Tag::parse(l));
  return out;
}

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::kIoError;  // sentinel: nothing thrown
}

}  // namespace

TEST(Bioes, EncodesSingleAndMultiTokenSpans) {
  std::vector<EntitySpan> spans{{0, 1, "PER"}, {4, 4, "LOC"}};
  EXPECT_EQ(strs(encode_bioes(spans, 5)), (std::vector<std::string>{"B-PER", "E-PER", "O", "O", "S-LOC"}));
  EXPECT_EQ(strs(encode_bioes({}, 3)), (std::vector<std::string>{"O", "O", "O"}));
  std::vector<EntitySpan> org{{0, 2, "ORG"}};
  EXPECT_EQ(strs(encode_bioes(org, 3)), (std::vector<std::string>{"B-ORG", "I-ORG", "E-ORG"}));
}

TEST(Bioes, EncodeRejectsBadSpans) {
  std::vector<EntitySpan> overlap{{0, 2, "PER"}, {2, 3, "LOC"}};
  EXPECT_EQ(kind_of([&] { encode_bioes(overlap, 5); }), ErrorKind::kOverlappingSpans);
  std::vector<EntitySpan> oob{{3, 5, "PER"}};
  EXPECT_EQ(kind_of([&] { encode_bioes(oob, 5); }), ErrorKind::kSpanOutOfBounds);
}

TEST(Bioes, DecodesWellFormedAndRepairsStrictly) {
  EXPECT_EQ(decode_bioes(tags_of({"B-PER", "E-PER", "O", "O", "S-LOC"})),
            (std::vector<EntitySpan>{{0, 1, "PER"}, {4, 4, "LOC"}}));
  EXPECT_TRUE(decode_bioes(tags_of({"I-PER", "O"})).empty());
  EXPECT_EQ(decode_bioes(tags_of({"B-PER", "B-LOC", "E-LOC"})), (std::vector<EntitySpan>{{1, 2, "LOC"}}));
  EXPECT_TRUE(decode_bioes(tags_of({"B-PER", "I-LOC", "E-PER"})).empty());
  EXPECT_TRUE(decode_bioes(tags_of({"E-PER", "B-PER"})).empty());
}

TEST(Bioes, UnknownLabelThrows) {
  EXPECT_EQ(kind_of([] { Tag::parse("X-PER"); }), ErrorKind::kUnknownLabel);
  EXPECT_EQ(kind_of([] { Tag::parse("B-"); }), ErrorKind::kUnknownLabel);
  std::vector<std::string> labels{"O", "Q"};
  EXPECT_EQ(kind_of([&] { decode_bioes(std::span<const std::string>(labels)); }), ErrorKind::kUnknownLabel);
}

// Every tag sequence of length <= 5 over two types: decoder output equals
// the pattern oracle, and spans never overlap or leave the sentence.
TEST(Bioes, ExhaustiveAgainstPatternOracle) {
  const LabelVocab vocab({"A", "B"}, {});
  const std::size_t c = vocab.ner_size();
  std::size_t checked = 0;
  for (std::size_t len = 0; len <= 5; ++len) {
    std::vector<std::size_t> ids(len, 0);
    while (true) {
      const TagSequence tags = vocab.to_tags(ids);
      const auto got = decode_bioes(tags);
      ASSERT_EQ(got, oracle::decode_by_pattern(tags));
      for (std::size_t i = 0; i < got.size(); ++i) {
        ASSERT_LT(got[i].end, len);
        for (std::size_t j = i + 1; j < got.size(); ++j) ASSERT_FALSE(got[i].overlaps(got[j]));
      }
      ++checked;
      std::size_t k = 0;
      while (k < len && ++ids[k] == c) ids[k++] = 0;
      if (k == len) break;
    }
  }
  EXPECT_EQ(checked, 1u + 9 + 81 + 729 + 6561 + 59049);
}

TEST(Bioes, RandomRoundTrip) {
  Rng rng(3);
  const std::vector<std::string> types{"PER", "LOC", "ORG"};
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t len = 1 + rng.index(20);
    const auto spans = oracle::random_spans(len, types, rng);
    ASSERT_EQ(decode_bioes(encode_bioes(spans, len)), spans);
  }
}

TEST(LabelVocab, SizesAndOrdering) {
  const LabelVocab v({"PER", "LOC", "ORG"}, {"WorksFor", "LivesIn"});
  EXPECT_EQ(v.ner_size(), 4u * 3 + 1);
  EXPECT_TRUE(std::is_sorted(v.ner_labels().begin(), v.ner_labels().end()));
  EXPECT_EQ(v.re_labels(), (std::vector<std::string>{"NEG", "LivesIn", "WorksFor"}));
  EXPECT_EQ(v.neg_index(), 0u);
  EXPECT_EQ(v.ner_tag(v.ner_index("E-LOC")).str(), "E-LOC");
  EXPECT_EQ(kind_of([&] { v.ner_index("S-DATE"); }), ErrorKind::kUnknownLabel);
}

TEST(LabelVocab, FromCorpusIsOrderIndependent) {
  AnnotatedSentence a{"a", make_tokens({"x", "y"}), {{0, 0, "PER"}, {1, 1, "LOC"}}, {{0, 1, "R1"}}};
  AnnotatedSentence b{"b", make_tokens({"z"}), {{0, 0, "ORG"}}, {}};
  std::vector<AnnotatedSentence> ab{a, b}, ba{b, a};
  EXPECT_EQ(LabelVocab::from_corpus(ab), LabelVocab::from_corpus(ba));
}

const char* kTwoSentences = R"([
  {"id": "s1", "tokens": ["John", "Smith", "lives", "in", "Paris"],
   "entities": [{"start": 0, "end": 1, "type": "PER"}, {"start": 4, "end": 4, "type": "LOC"}],
   "relations": [{"head": 0, "tail": 1, "type": "LivesIn"}]},
  {"tokens": ["Hello"]}
])";

TEST(CorpusJson, ParsesCanonicalRecords) {
  LoadReport report;
  const auto corpus = parse_corpus_json(kTwoSentences, report);
  ASSERT_EQ(corpus.size(), 2u);
  EXPECT_EQ(corpus[0].key, "s1");
  EXPECT_EQ(corpus[1].key, "1");
  EXPECT_EQ(corpus[0].entities[0], (EntitySpan{0, 1, "PER"}));
  EXPECT_EQ(corpus[0].relations[0], (RelationAnnotation{0, 1, "LivesIn"}));
  EXPECT_EQ(report.dropped_relations, 0u);
}

TEST(CorpusJson, RoundTripsThroughWriter) {
  LoadReport report;
  const auto corpus = parse_corpus_json(kTwoSentences, report);
  const auto again = parse_corpus_json(write_corpus_json(corpus), report);
  ASSERT_EQ(again.size(), corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    EXPECT_EQ(again[i].key, corpus[i].key);
    EXPECT_EQ(again[i].entities, corpus[i].entities);
    EXPECT_EQ(again[i].relations, corpus[i].relations);
  }
}

TEST(CorpusJson, OverlappingRelationDroppedAndCounted) {
  const char* text = R"([{"tokens": ["aspirin", "induced", "rash"],
    "entities": [{"start": 0, "end": 2, "type": "Adverse"}, {"start": 0, "end": 0, "type": "Drug"}],
    "relations": [{"head": 1, "tail": 0, "type": "AdverseEffect"}]}])";
  LoadReport report;
  const auto corpus = parse_corpus_json(text, report);
  EXPECT_EQ(report.dropped_relations, 1u);
  EXPECT_TRUE(corpus[0].relations.empty());
  EXPECT_EQ(corpus[0].entities.size(), 1u);
  EXPECT_EQ(corpus[0].entities[0].type, "Adverse");
}

TEST(CorpusJson, ErrorsCarryLocation) {
  LoadReport report;
  const std::string truncated = std::string(kTwoSentences).substr(0, 80);
  try {
    parse_corpus_json(truncated, report);
    FAIL() << "truncated input parsed";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kParseError);
    EXPECT_NE(std::string(e.what()).find("line"), std::string::npos);
  }
  try {
    parse_corpus_json(R"([{"tokens": ["a"]}, {"entities": []}])", report);
    FAIL() << "record without tokens parsed";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kParseError);
    EXPECT_NE(std::string(e.what()).find("record 1"), std::string::npos);
  }
  EXPECT_EQ(kind_of([&] {
              parse_corpus_json(R"([{"tokens": ["a"], "entities": [{"start": 0, "end": 3, "type": "X"}]}])", report);
            }),
            ErrorKind::kInvariantViolation);
  EXPECT_EQ(kind_of([&] {
              parse_corpus_json(R"([{"tokens": ["a", "b"], "entities": [{"start": 0, "end": 0, "type": "X"}],
                                    "relations": [{"head": 0, "tail": 0, "type": "R"}]}])",
                                report);
            }),
            ErrorKind::kInvariantViolation);
}

TEST(CorpusConll04, ReadsTokenAndRelationBlocks) {
  const char* text =
      "5\tPeop\t0\tNNP/NNP\tJohn/Smith\tO\tO\tO\tO\n"
      "5\tO\t1\tVBZ\tlives\tO\tO\tO\tO\n"
      "5\tO\t2\tIN\tin\tO\tO\tO\tO\n"
      "5\tLoc\t3\tNNP\tParis\tO\tO\tO\tO\n"
      "5\tO\t4\t,\tCOMMA\tO\tO\tO\tO\n"
      "\n"
      "0\t3\tLive_In\n"
      "\n"
      "6\tOrg\t0\tNNP\tIBM\tO\tO\tO\tO\n"
      "6\tO\t1\t.\t.\tO\tO\tO\tO\n"
      "\n"
      "\n";
  LoadReport report;
  const auto corpus = parse_corpus_conll04(text, report);
  ASSERT_EQ(corpus.size(), 2u);
  const auto& s = corpus[0];
  EXPECT_EQ(s.key, "5");
  ASSERT_EQ(s.tokens.size(), 6u);
  EXPECT_EQ(s.tokens[1].text, "Smith");
  EXPECT_EQ(s.tokens[5].text, ",");
  EXPECT_EQ(s.entities, (std::vector<EntitySpan>{{0, 1, "Peop"}, {4, 4, "Loc"}}));
  EXPECT_EQ(s.relations, (std::vector<RelationAnnotation>{{0, 1, "Live_In"}}));
  EXPECT_TRUE(corpus[1].relations.empty());
}

TEST(CorpusConll04, MalformedRowsFail) {
  LoadReport report;
  EXPECT_EQ(kind_of([&] { parse_corpus_conll04("1\tO\t0\tNN\n", report); }), ErrorKind::kParseError);
  EXPECT_EQ(kind_of([&] { parse_corpus_conll04("1\tO\t0\tNN\tx\n\n0\t0\tR\n", report); }),
            ErrorKind::kInvariantViolation);
}

TEST(LoadCorpus, MissingFileNamesPath) {
  try {
    load_corpus("/nonexistent/corpus.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIoError);
    EXPECT_NE(std::string(e.what()).find("/nonexistent/corpus.json"), std::string::npos);
  }
}

TEST(Folds, SizesFollowFractions) {
  for (const auto& f : make_folds(100, 10, 0.1, 0.1, 1)) {
    EXPECT_EQ(f.train.size(), 80u);
    EXPECT_EQ(f.val.size(), 10u);
    EXPECT_EQ(f.test.size(), 10u);
  }
  for (const auto& f : make_folds(100, 5, 0.1, 0.2, 1)) {
    EXPECT_EQ(f.train.size(), 70u);
    EXPECT_EQ(f.val.size(), 10u);
    EXPECT_EQ(f.test.size(), 20u);
  }
}

TEST(Folds, PartitionAndDeterminism) {
  for (std::size_t n : {7u, 23u, 100u, 101u}) {
    const auto folds = make_folds(n, 5, 0.1, 0.2, 9);
    std::multiset<std::size_t> all_test;
    for (const auto& f : folds) {
      all_test.insert(f.test.begin(), f.test.end());
      std::set<std::size_t> seen;
      for (const auto* part : {&f.train, &f.val, &f.test})
        for (auto i : *part) EXPECT_TRUE(seen.insert(i).second) << "index " << i << " appears twice";
      EXPECT_EQ(seen.size(), n);
    }
    std::multiset<std::size_t> expected;
    for (std::size_t i = 0; i < n; ++i) expected.insert(i);
    EXPECT_EQ(all_test, expected);
    const auto again = make_folds(n, 5, 0.1, 0.2, 9);
    for (std::size_t f = 0; f < folds.size(); ++f) {
      EXPECT_EQ(folds[f].train, again[f].train);
      EXPECT_EQ(folds[f].test, again[f].test);
    }
  }
  EXPECT_NE(make_folds(50, 5, 0.1, 0.2, 1)[0].test, make_folds(50, 5, 0.1, 0.2, 2)[0].test);
}

TEST(Folds, RejectsBadArguments) {
  EXPECT_EQ(kind_of([] { make_folds(3, 5, 0.1, 0.2, 0); }), ErrorKind::kCorpusTooSmall);
  EXPECT_EQ(kind_of([] { make_folds(100, 1, 0.1, 0.2, 0); }), ErrorKind::kInvalidArgument);
  EXPECT_EQ(kind_of([] { make_folds(100, 5, 0.1, 0.3, 0); }), ErrorKind::kInvalidArgument);
  EXPECT_EQ(kind_of([] { make_folds(5, 5, 0.8, 0.2, 0); }), ErrorKind::kInvalidArgument);
}

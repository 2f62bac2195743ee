#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "jerx/corpus.hpp"
#include "jerx/rng.hpp"

// Generator for a small grammar-based corpus with two entity types (PER, LOC)
// and two directed relation types (LivesIn, WorksIn, both PER -> LOC). The
// relation holding for a PER/LOC pair is signalled by the preposition in
// front of the location: "in" for LivesIn, "at" for WorksIn; "near",
// "visited" and "of" introduce unrelated locations.

namespace jerx::synthetic {

namespace detail {

inline constexpr std::array<std::string_view, 24> kFirstNames{
    "Alice", "Bruno", "Carla", "Dmitri", "Elena", "Farid", "Greta", "Hiro",  "Ines",  "Jonas", "Kemal", "Lena",
    "Marco", "Nadia", "Oskar", "Priya",  "Quinn", "Rosa",  "Sven",  "Tara",  "Umar",  "Vera",  "Wim",   "Yara"};
inline constexpr std::array<std::string_view, 16> kLastNames{
    "Adler", "Brandt", "Costa", "Dubois", "Eriksen", "Fischer", "Garcia", "Horvat",
    "Ivanov", "Jensen", "Kowalski", "Larsen", "Moreau", "Novak", "Okafor", "Petrov"};
inline constexpr std::array<std::string_view, 6> kInitials{"A.", "J.", "K.", "M.", "R.", "T."};
inline constexpr std::array<std::string_view, 20> kCities{
    "Avalon", "Brightwater", "Corvale", "Dunmore", "Eastwick", "Fairhaven", "Glenrock", "Highmoor", "Ironbridge", "Juniper",
    "Kingsport", "Lakeside", "Millbrook", "Northgate", "Oakridge", "Pinecrest", "Queensbury", "Riverton", "Stonefield", "Thornbury"};
inline constexpr std::array<std::string_view, 5> kCityPrefixes{"New", "Port", "Lake", "Mount", "San"};
inline constexpr std::array<std::string_view, 3> kCitySuffixes{"City", "Heights", "Springs"};

struct Builder {
  AnnotatedSentence s;

  void words(std::initializer_list<std::string_view> ws) {
    for (auto w : ws) s.tokens.push_back({std::string(w), s.tokens.size()});
  }
  std::size_t entity(const std::vector<std::string>& ws, std::string_view type) {
    const std::size_t start = s.tokens.size();
    for (const auto& w : ws) s.tokens.push_back({w, s.tokens.size()});
    s.entities.push_back({start, s.tokens.size() - 1, std::string(type)});
    return s.entities.size() - 1;
  }
  void relation(std::size_t head, std::size_t tail, std::string_view type) {
    s.relations.push_back({head, tail, std::string(type)});
  }
};

template <std::size_t N>
std::string pick(const std::array<std::string_view, N>& items, Rng& rng) {
  return std::string(items[rng.index(N)]);
}

inline std::vector<std::string> person(Rng& rng) {
  const double u = rng.uniform();
  if (u < 0.4) return {pick(kFirstNames, rng)};
  if (u < 0.85) return {pick(kFirstNames, rng), pick(kLastNames, rng)};
  return {pick(kFirstNames, rng), pick(kInitials, rng), pick(kLastNames, rng)};
}

inline std::vector<std::string> location(Rng& rng) {
  const double u = rng.uniform();
  if (u < 0.5) return {pick(kCities, rng)};
  if (u < 0.8) return {pick(kCityPrefixes, rng), pick(kCities, rng)};
  if (u < 0.9) return {pick(kCities, rng), pick(kCitySuffixes, rng)};
  return {pick(kCityPrefixes, rng), pick(kCities, rng), pick(kCitySuffixes, rng)};
}

}  // namespace detail

inline AnnotatedSentence sentence(Rng& rng) {
  detail::Builder b;
  switch (rng.index(8)) {
    case 0: {  // P lives in L .
      auto p = b.entity(detail::person(rng), "PER");
      b.words({"lives", "in"});
      auto l = b.entity(detail::location(rng), "LOC");
      b.words({"."});
      b.relation(p, l, "LivesIn");
      break;
    }
    case 1: {  // P works at L .
      auto p = b.entity(detail::person(rng), "PER");
      b.words({"works", "at"});
      auto l = b.entity(detail::location(rng), "LOC");
      b.words({"."});
      b.relation(p, l, "WorksIn");
      break;
    }
    case 2: {  // P and P2 live in L .
      auto p = b.entity(detail::person(rng), "PER");
      b.words({"and"});
      auto q = b.entity(detail::person(rng), "PER");
      b.words({"live", "in"});
      auto l = b.entity(detail::location(rng), "LOC");
      b.words({"."});
      b.relation(p, l, "LivesIn");
      b.relation(q, l, "LivesIn");
      break;
    }
    case 3: {  // P works at L near L2 .
      auto p = b.entity(detail::person(rng), "PER");
      b.words({"works", "at"});
      auto l = b.entity(detail::location(rng), "LOC");
      b.words({"near"});
      b.entity(detail::location(rng), "LOC");
      b.words({"."});
      b.relation(p, l, "WorksIn");
      break;
    }
    case 4: {  // P , who lives in L , works at L2 .
      auto p = b.entity(detail::person(rng), "PER");
      b.words({",", "who", "lives", "in"});
      auto l = b.entity(detail::location(rng), "LOC");
      b.words({",", "works", "at"});
      auto m = b.entity(detail::location(rng), "LOC");
      b.words({"."});
      b.relation(p, l, "LivesIn");
      b.relation(p, m, "WorksIn");
      break;
    }
    case 5: {  // P visited L yesterday .
      b.entity(detail::person(rng), "PER");
      b.words({"visited"});
      b.entity(detail::location(rng), "LOC");
      b.words({"yesterday", "."});
      break;
    }
    case 6: {  // In L , P works at L2 .
      b.words({"In"});
      b.entity(detail::location(rng), "LOC");
      b.words({","});
      auto p = b.entity(detail::person(rng), "PER");
      b.words({"works", "at"});
      auto l = b.entity(detail::location(rng), "LOC");
      b.words({"."});
      b.relation(p, l, "WorksIn");
      break;
    }
    default: {  // the mayor of L met P .
      b.words({"the", "mayor", "of"});
      b.entity(detail::location(rng), "LOC");
      b.words({"met"});
      b.entity(detail::person(rng), "PER");
      b.words({"."});
      break;
    }
  }
  return std::move(b.s);
}

inline std::vector<AnnotatedSentence> corpus(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<AnnotatedSentence> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(sentence(rng));
    out.back().key = "synth-" + std::to_string(i);
  }
  return out;
}

}  // namespace jerx::synthetic

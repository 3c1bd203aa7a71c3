#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dodbench/core_model.hpp"

namespace dodbench::testkit {

struct RandomDatasetOptions {
  std::size_t max_records = 500;
  bool unicode = true;
  bool allow_empty_authors = true;
  bool allow_duplicate_authors = true;
};

inline const std::vector<std::string>& title_words() {
  static const std::vector<std::string> w = {
      "database",  "Database", "DATABASES", "text",       "Text",   "texts",     "mining",  "Mining",
      "datamining", "textual", "query",     "processing", "graph",  "learning",  "systems", "web",
      "index",     "XML",      "JSON",      "stream",     "of",     "for",       "and",     "the",
      "a",         "on",       "efficient", "scalable",   "model",  "benchmark", "data",    "retrieval"};
  return w;
}

inline const std::vector<std::string>& unicode_words() {
  static const std::vector<std::string> w = {"Übersicht", "naïve", "数据库", "Données", "Łódź", "データ", "ünïcödé",
                                             "Ελληνικά", "😀",   "DATABASE\xc3\xa9"};
  return w;
}

inline const std::vector<std::string>& author_pool() {
  static const std::vector<std::string> a = {"Alice Smith", "Bob Jones",   "Carol White", "Dan Brown",
                                             "Eve Adams",   "Frank Green", "Grace Hall",  "Henry Ives",
                                             "Ivy King",    "Jack Lee",    "Kim Moore",   "Liam Nash"};
  return a;
}

inline const std::vector<std::string>& unicode_authors() {
  static const std::vector<std::string> a = {"José Pérez", "Jürgen Müller", "李明", "Zoë Ødegaard", "Ångström A."};
  return a;
}

// A valid random record of the given kind.
inline CanonicalRecord random_record(std::mt19937_64& rng, std::size_t serial, const RandomDatasetOptions& o) {
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  CanonicalRecord r;
  r.kind = static_cast<RecordKind>(pick(4));
  r.record_id = std::string(is_article(r.kind) ? "journals/rnd/" : "books/rnd/") + std::to_string(serial) + "-" +
                std::to_string(rng() % 100000);
  std::size_t words = 1 + pick(7);
  for (std::size_t i = 0; i < words; ++i) {
    if (i) r.title += pick(6) == 0 ? "-" : " ";
    if (o.unicode && pick(6) == 0) r.title += unicode_words()[pick(unicode_words().size())];
    else r.title += title_words()[pick(title_words().size())];
  }
  if (pick(3) == 0) r.title += ".";
  if (pick(20) == 0) r.title += " <&> \"quoted\" 'apostrophe'";
  r.year = 1990 + static_cast<int>(pick(31));
  std::size_t nauthors = o.allow_empty_authors ? pick(5) : 1 + pick(4);
  for (std::size_t i = 0; i < nauthors; ++i) {
    if (o.unicode && pick(5) == 0) r.authors.push_back(unicode_authors()[pick(unicode_authors().size())]);
    else r.authors.push_back(author_pool()[pick(author_pool().size())]);
  }
  if (o.allow_duplicate_authors && !r.authors.empty() && pick(10) == 0) r.authors.push_back(r.authors.front());
  if (pick(2)) r.url = "db/" + std::to_string(serial) + ".html#x";
  if (pick(2)) r.pages = std::to_string(pick(300)) + "-" + std::to_string(300 + pick(300));
  if (pick(3) == 0) r.publisher = pick(2) ? "Springer" : "ACM & Co";
  if (is_article(r.kind)) {
    if (pick(4) != 0) {
      VenueRef v;
      v.venue_type = r.kind == RecordKind::JournalArticle ? (pick(5) == 0 ? VenueType::SpecialIssue : VenueType::Journal)
                                                          : VenueType::Proceedings;
      v.venue_title = pick(2) ? "Journal of Data" : "Proc. <Text> & Mining";
      if (pick(2)) v.volume = std::to_string(1 + pick(40));
      if (pick(2)) v.issue = std::to_string(1 + pick(12));
      if (pick(3) == 0) v.issn = "1234-567" + std::to_string(pick(10));
      r.venue = v;
    }
  } else {
    if (pick(2)) r.isbn = "978-3-" + std::to_string(pick(100000));
    std::size_t neditors = pick(3);
    for (std::size_t i = 0; i < neditors; ++i) r.editors.push_back(author_pool()[pick(author_pool().size())]);
  }
  return r;
}

inline std::vector<CanonicalRecord> random_dataset(std::uint64_t seed, const RandomDatasetOptions& o = {}) {
  std::mt19937_64 rng(seed);
  std::size_t n = static_cast<std::size_t>(rng() % (o.max_records + 1));
  std::vector<CanonicalRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_record(rng, i, o));
  return out;
}

// Deterministic 1,000-record fixture: the record number's bits decide which
// of database / text / mining appear (with varying case and as substrings of
// longer words), so every combination of the three terms is populated.
inline std::vector<CanonicalRecord> hand_built_fixture() {
  static const char* kDatabase[] = {"database", "Database", "DATABASES", "relationaldatabase"};
  static const char* kText[] = {"text", "Text", "hypertext", "TEXTUAL"};
  static const char* kMining[] = {"mining", "Mining", "datamining", "MINING"};
  static const char* kFiller[] = {"systems", "query", "graphs", "learning", "web", "index", "tät", "数据"};
  std::vector<CanonicalRecord> out;
  for (int i = 0; i < 1000; ++i) {
    CanonicalRecord r;
    r.kind = static_cast<RecordKind>(i % 4);
    r.record_id = "fixture/" + std::to_string(i);
    std::string t = kFiller[i % 8];
    if (i & 1) t += std::string(" ") + kDatabase[(i / 8) % 4];
    if (i & 2) t += std::string(" for ") + kText[(i / 16) % 4];
    if (i & 4) t += std::string(" ") + kMining[(i / 32) % 4];
    if (i % 7 == 0) t += " data base";  // near miss, never a match
    if (i % 11 == 0) t += " minin g";
    r.title = t;
    r.year = 2000 + (i % 13);
    int na = i % 5;
    for (int a = 0; a < na; ++a) r.authors.push_back(author_pool()[static_cast<std::size_t>(i * 7 + a * 3) % 12]);
    if (i % 17 == 0 && !r.authors.empty()) r.authors.push_back(r.authors.front());
    if (is_article(r.kind)) {
      VenueRef v;
      v.venue_title = r.kind == RecordKind::JournalArticle ? "Fixture Journal" : "Fixture Conference";
      v.venue_type = r.kind == RecordKind::JournalArticle ? VenueType::Journal : VenueType::Proceedings;
      r.venue = v;
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace dodbench::testkit

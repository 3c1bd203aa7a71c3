#pragma once

// Canonical bibliographic record model and the line-delimited interchange
// format shared by ingest, datagen and the oracle.

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dodbench/error.hpp"

namespace dodbench {

enum class RecordKind { JournalArticle, ConferenceArticle, Book, BookChapter };

enum class VenueType { Journal, Proceedings, SpecialIssue };

inline std::string_view to_string(RecordKind k) {
  switch (k) {
    case RecordKind::JournalArticle: return "JournalArticle";
    case RecordKind::ConferenceArticle: return "ConferenceArticle";
    case RecordKind::Book: return "Book";
    case RecordKind::BookChapter: return "BookChapter";
  }
  return "?";
}

inline std::optional<RecordKind> parse_record_kind(std::string_view s) {
  if (s == "JournalArticle") return RecordKind::JournalArticle;
  if (s == "ConferenceArticle") return RecordKind::ConferenceArticle;
  if (s == "Book") return RecordKind::Book;
  if (s == "BookChapter") return RecordKind::BookChapter;
  return std::nullopt;
}

inline std::string_view to_string(VenueType t) {
  switch (t) {
    case VenueType::Journal: return "Journal";
    case VenueType::Proceedings: return "Proceedings";
    case VenueType::SpecialIssue: return "SpecialIssue";
  }
  return "?";
}

inline std::optional<VenueType> parse_venue_type(std::string_view s) {
  if (s == "Journal") return VenueType::Journal;
  if (s == "Proceedings") return VenueType::Proceedings;
  if (s == "SpecialIssue") return VenueType::SpecialIssue;
  return std::nullopt;
}

inline bool is_article(RecordKind k) {
  return k == RecordKind::JournalArticle || k == RecordKind::ConferenceArticle;
}

struct VenueRef {
  std::optional<std::string> issn;
  std::string venue_title;
  VenueType venue_type = VenueType::Journal;
  std::optional<std::string> volume;
  std::optional<std::string> issue;

  friend bool operator==(const VenueRef&, const VenueRef&) = default;
};

// One publication. Authors, editors and the venue are embedded, so no joins
// are needed to answer any of the benchmark queries. An empty editors list
// means "absent".
struct CanonicalRecord {
  std::string record_id;
  std::string title;
  std::optional<std::string> url;
  int year = 0;
  std::vector<std::string> authors;
  RecordKind kind = RecordKind::JournalArticle;
  std::optional<std::string> pages;
  std::optional<VenueRef> venue;
  std::optional<std::string> publisher;
  std::vector<std::string> editors;
  std::optional<std::string> isbn;

  friend bool operator==(const CanonicalRecord&, const CanonicalRecord&) = default;
};

inline bool operator<(const CanonicalRecord& a, const CanonicalRecord& b) {
  return a.record_id < b.record_id;
}

class ScaleFactor {
 public:
  static constexpr std::array<double, 4> kAll = {0.125, 0.25, 0.5, 1.0};

  explicit ScaleFactor(double v) : value_(v) {
    for (double allowed : kAll)
      if (v == allowed) return;
    throw InvalidScaleFactor("scale factor must be one of 0.125, 0.25, 0.5, 1.0; got " +
                             std::to_string(v));
  }

  static ScaleFactor parse(std::string_view text) {
    if (text == "0.125") return ScaleFactor(0.125);
    if (text == "0.25") return ScaleFactor(0.25);
    if (text == "0.5") return ScaleFactor(0.5);
    if (text == "1" || text == "1.0") return ScaleFactor(1.0);
    throw InvalidScaleFactor("scale factor must be one of 0.125, 0.25, 0.5, 1.0; got '" +
                             std::string(text) + "'");
  }

  double value() const noexcept { return value_; }

  // 1-based axis position used by the figure CSVs (NO_DOCS column).
  int position() const noexcept {
    for (std::size_t i = 0; i < kAll.size(); ++i)
      if (kAll[i] == value_) return static_cast<int>(i) + 1;
    return 0;
  }

  std::string label() const {
    if (value_ == 0.125) return "0.125";
    if (value_ == 0.25) return "0.25";
    if (value_ == 0.5) return "0.5";
    return "1";
  }

  friend bool operator==(ScaleFactor a, ScaleFactor b) { return a.value_ == b.value_; }
  friend bool operator<(ScaleFactor a, ScaleFactor b) { return a.value_ < b.value_; }

 private:
  double value_;
};

struct TermParam {
  int index = 1;  // 1..3
  std::string term;

  TermParam() = default;
  TermParam(int i, std::string t) : index(i), term(std::move(t)) {
    if (index < 1 || index > 3) throw InvalidQuery("term index must be 1, 2 or 3");
    if (term.empty()) throw InvalidQuery("term t" + std::to_string(index) + " is empty");
  }

  friend bool operator==(const TermParam&, const TermParam&) = default;
};

// Default query parameters: t1, t2, t3.
inline std::vector<TermParam> default_terms() {
  return {TermParam(1, "database"), TermParam(2, "text"), TermParam(3, "mining")};
}

inline std::vector<std::string> validate_record(const CanonicalRecord& r) {
  std::vector<std::string> v;
  if (r.record_id.empty()) v.emplace_back("empty record_id");
  if (r.title.empty()) v.emplace_back("empty title");
  if (is_article(r.kind)) {
    if (r.isbn) v.emplace_back("article carries isbn");
    if (!r.editors.empty()) v.emplace_back("article carries editors");
  } else if (r.venue) {
    v.emplace_back("book carries venue");
  }
  if (r.venue && r.venue->venue_title.empty()) v.emplace_back("empty venue_title");
  for (const auto& a : r.authors)
    if (a.empty()) {
      v.emplace_back("empty author name");
      break;
    }
  return v;
}

// ---------------------------------------------------------------------------
// Canonical interchange format: one JSON object per line, keys named after
// the CanonicalRecord fields, absent optionals omitted.

inline nlohmann::json to_canonical_json(const CanonicalRecord& r) {
  nlohmann::json j = nlohmann::json::object();
  j["record_id"] = r.record_id;
  j["title"] = r.title;
  if (r.url) j["url"] = *r.url;
  j["year"] = r.year;
  j["authors"] = r.authors;
  j["kind"] = std::string(to_string(r.kind));
  if (r.pages) j["pages"] = *r.pages;
  if (r.venue) {
    nlohmann::json v = nlohmann::json::object();
    if (r.venue->issn) v["issn"] = *r.venue->issn;
    v["venue_title"] = r.venue->venue_title;
    v["venue_type"] = std::string(to_string(r.venue->venue_type));
    if (r.venue->volume) v["volume"] = *r.venue->volume;
    if (r.venue->issue) v["issue"] = *r.venue->issue;
    j["venue"] = std::move(v);
  }
  if (r.publisher) j["publisher"] = *r.publisher;
  if (!r.editors.empty()) j["editors"] = r.editors;
  if (r.isbn) j["isbn"] = *r.isbn;
  return j;
}

namespace detail {

inline std::optional<std::string> opt_string(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw std::invalid_argument(std::string("field '") + key + "' is not a string");
  return it->get<std::string>();
}

inline std::string req_string(const nlohmann::json& j, const char* key) {
  auto v = opt_string(j, key);
  if (!v) throw std::invalid_argument(std::string("missing field '") + key + "'");
  return *v;
}

inline std::vector<std::string> string_list(const nlohmann::json& j, const char* key) {
  std::vector<std::string> out;
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return out;
  if (!it->is_array()) throw std::invalid_argument(std::string("field '") + key + "' is not a list");
  for (const auto& e : *it) {
    if (!e.is_string()) throw std::invalid_argument(std::string("field '") + key + "' holds a non-string");
    out.push_back(e.get<std::string>());
  }
  return out;
}

}  // namespace detail

// Throws std::invalid_argument on a shape error; callers attach line numbers.
inline CanonicalRecord from_canonical_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("record is not an object");
  CanonicalRecord r;
  r.record_id = detail::req_string(j, "record_id");
  r.title = detail::req_string(j, "title");
  r.url = detail::opt_string(j, "url");
  auto y = j.find("year");
  if (y == j.end() || !y->is_number_integer()) throw std::invalid_argument("missing or non-integer 'year'");
  r.year = y->get<int>();
  r.authors = detail::string_list(j, "authors");
  auto kind = parse_record_kind(detail::req_string(j, "kind"));
  if (!kind) throw std::invalid_argument("unknown kind");
  r.kind = *kind;
  r.pages = detail::opt_string(j, "pages");
  if (auto v = j.find("venue"); v != j.end() && !v->is_null()) {
    if (!v->is_object()) throw std::invalid_argument("'venue' is not an object");
    VenueRef venue;
    venue.issn = detail::opt_string(*v, "issn");
    venue.venue_title = detail::req_string(*v, "venue_title");
    auto vt = parse_venue_type(detail::req_string(*v, "venue_type"));
    if (!vt) throw std::invalid_argument("unknown venue_type");
    venue.venue_type = *vt;
    venue.volume = detail::opt_string(*v, "volume");
    venue.issue = detail::opt_string(*v, "issue");
    r.venue = std::move(venue);
  }
  r.publisher = detail::opt_string(j, "publisher");
  r.editors = detail::string_list(j, "editors");
  r.isbn = detail::opt_string(j, "isbn");
  return r;
}

inline std::string to_canonical_line(const CanonicalRecord& r) {
  return to_canonical_json(r).dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
}

class CanonicalWriter {
 public:
  explicit CanonicalWriter(std::ostream& out) : out_(&out) {}

  void write(const CanonicalRecord& r) {
    *out_ << to_canonical_line(r) << '\n';
    if (!*out_) throw IoFailure("failed writing canonical record");
    ++count_;
  }
  void operator()(const CanonicalRecord& r) { write(r); }

  std::size_t count() const noexcept { return count_; }

 private:
  std::ostream* out_;
  std::size_t count_ = 0;
};

// Streams records from a canonical file. Blank lines are ignored; anything
// unparseable or failing validate_record raises CorruptRecord(line).
inline std::size_t read_canonical(std::istream& in,
                                  const std::function<void(CanonicalRecord&&)>& sink) {
  std::string line;
  std::size_t lineno = 0;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    CanonicalRecord r;
    try {
      r = from_canonical_json(nlohmann::json::parse(line));
    } catch (const std::exception& e) {
      throw CorruptRecord(lineno, e.what());
    }
    if (auto v = validate_record(r); !v.empty()) throw CorruptRecord(lineno, v.front());
    sink(std::move(r));
    ++n;
  }
  if (in.bad()) throw IoFailure("read error in canonical stream");
  return n;
}

inline std::vector<CanonicalRecord> read_canonical_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path);
  std::vector<CanonicalRecord> out;
  read_canonical(in, [&](CanonicalRecord&& r) { out.push_back(std::move(r)); });
  return out;
}

inline void write_canonical_file(const std::string& path, const std::vector<CanonicalRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoFailure("cannot open " + path + " for writing");
  CanonicalWriter w(out);
  for (const auto& r : records) w.write(r);
  out.flush();
  if (!out) throw IoFailure("failed writing " + path);
}

}  // namespace dodbench

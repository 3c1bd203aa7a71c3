#pragma once

// Scale-factor subsets and the XML / JSON document emitters.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dodbench/core_model.hpp"
#include "dodbench/dblp_ingest.hpp"
#include "dodbench/error.hpp"
#include "dodbench/xml_text.hpp"

namespace dodbench {

// ---------------------------------------------------------------------------
// Subsets
//
// Every record gets a rank from (seed, record_id); a subset of size k holds
// the k lowest-ranked records, emitted in input order. Smaller scale factors
// therefore always select a prefix of the same seeded permutation, which
// makes the four subsets nested.

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t permutation_rank(std::uint64_t seed, std::string_view record_id) {
  return splitmix64(fnv1a64(record_id) ^ splitmix64(seed));
}

// round(n * sf), halves rounded away from zero.
inline std::size_t subset_size(std::size_t n, ScaleFactor sf) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(n) * sf.value()));
}

// Selection mask over records given their ids in input order. Ties in rank
// are broken by input position.
inline std::vector<bool> subset_mask(const std::vector<std::string>& ids, ScaleFactor sf, std::uint64_t seed) {
  const std::size_t n = ids.size();
  const std::size_t k = subset_size(n, sf);
  std::vector<bool> mask(n, k == n);
  if (k == n || k == 0) return mask;
  struct Ranked {
    std::uint64_t rank;
    std::uint32_t pos;
  };
  std::vector<Ranked> ranked(n);
  for (std::size_t i = 0; i < n; ++i) ranked[i] = {permutation_rank(seed, ids[i]), static_cast<std::uint32_t>(i)};
  auto less = [](const Ranked& a, const Ranked& b) { return a.rank != b.rank ? a.rank < b.rank : a.pos < b.pos; };
  std::nth_element(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k - 1), ranked.end(), less);
  const Ranked cutoff = ranked[k - 1];
  for (std::size_t i = 0; i < n; ++i) {
    Ranked r{permutation_rank(seed, ids[i]), static_cast<std::uint32_t>(i)};
    mask[i] = !less(cutoff, r);
  }
  return mask;
}

inline std::vector<CanonicalRecord> subset(const std::vector<CanonicalRecord>& records, ScaleFactor sf,
                                           std::uint64_t seed) {
  std::vector<std::string> ids;
  ids.reserve(records.size());
  for (const auto& r : records) ids.push_back(r.record_id);
  auto mask = subset_mask(ids, sf, seed);
  std::vector<CanonicalRecord> out;
  out.reserve(subset_size(records.size(), sf));
  for (std::size_t i = 0; i < records.size(); ++i)
    if (mask[i]) out.push_back(records[i]);
  return out;
}

// Two streaming passes over a canonical file: ids first, then the selected
// lines are copied through verbatim. Returns the number of records written.
inline std::size_t subset_file(const std::string& in_path, const std::string& out_path, ScaleFactor sf,
                               std::uint64_t seed) {
  std::vector<std::string> ids;
  {
    std::ifstream in(in_path, std::ios::binary);
    if (!in) throw IoFailure("cannot open " + in_path);
    read_canonical(in, [&](CanonicalRecord&& r) { ids.push_back(std::move(r.record_id)); });
  }
  auto mask = subset_mask(ids, sf, seed);
  std::ifstream in(in_path, std::ios::binary);
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!in) throw IoFailure("cannot open " + in_path);
  if (!out) throw IoFailure("cannot open " + out_path + " for writing");
  std::string line;
  std::size_t idx = 0, written = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (mask[idx++]) {
      out << line << '\n';
      ++written;
    }
  }
  out.flush();
  if (!out) throw IoFailure("failed writing " + out_path);
  return written;
}

// ---------------------------------------------------------------------------
// XML emission. The element name encodes the record kind; authors and
// editors repeat as sibling elements; absent optionals are omitted. Venue
// titles use <journal> for journal articles and <booktitle> for conference
// articles, with a type attribute only when the venue type differs from the
// one implied by that element.

namespace detail {

inline void xml_field(std::string& out, std::string_view name, std::string_view value) {
  out += '<';
  out += name;
  out += '>';
  xml::append_escaped(out, value, false);
  out += "</";
  out += name;
  out += ">\n";
}

}  // namespace detail

inline void append_xml(std::string& out, const CanonicalRecord& r) {
  std::string_view tag = element_name_for(r.kind);
  out += '<';
  out += tag;
  out += " key=\"";
  xml::append_escaped(out, r.record_id, true);
  out += "\">\n";
  for (const auto& a : r.authors) detail::xml_field(out, "author", a);
  detail::xml_field(out, "title", r.title);
  detail::xml_field(out, "year", std::to_string(r.year));
  if (r.pages) detail::xml_field(out, "pages", *r.pages);
  if (r.url) detail::xml_field(out, "url", *r.url);
  if (r.venue) {
    const bool journal = r.kind == RecordKind::JournalArticle;
    std::string_view vtag = journal ? "journal" : "booktitle";
    VenueType implied = journal ? VenueType::Journal : VenueType::Proceedings;
    out += '<';
    out += vtag;
    if (r.venue->venue_type != implied) {
      out += " type=\"";
      out += to_string(r.venue->venue_type);
      out += '"';
    }
    out += '>';
    xml::append_escaped(out, r.venue->venue_title, false);
    out += "</";
    out += vtag;
    out += ">\n";
    if (r.venue->volume) detail::xml_field(out, "volume", *r.venue->volume);
    if (r.venue->issue) detail::xml_field(out, "number", *r.venue->issue);
    if (r.venue->issn) detail::xml_field(out, "issn", *r.venue->issn);
  }
  if (r.publisher) detail::xml_field(out, "publisher", *r.publisher);
  for (const auto& e : r.editors) detail::xml_field(out, "editor", e);
  if (r.isbn) detail::xml_field(out, "isbn", *r.isbn);
  out += "</";
  out += tag;
  out += ">\n";
}

inline std::string to_xml(const CanonicalRecord& r) {
  std::string s;
  append_xml(s, r);
  return s;
}

class XmlEmitter {
 public:
  explicit XmlEmitter(std::ostream& out, std::string root = "dblp") : out_(&out), root_(std::move(root)) {
    *out_ << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<" << root_ << ">\n";
  }
  XmlEmitter(const XmlEmitter&) = delete;
  XmlEmitter& operator=(const XmlEmitter&) = delete;
  ~XmlEmitter() {
    if (!closed_) {
      try {
        close();
      } catch (...) {
      }
    }
  }

  void write(const CanonicalRecord& r) {
    buf_.clear();
    append_xml(buf_, r);
    out_->write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    if (!*out_) throw IoFailure("failed writing XML document");
    ++count_;
  }

  void close() {
    closed_ = true;
    *out_ << "</" << root_ << ">\n";
    out_->flush();
    if (!*out_) throw IoFailure("failed writing XML document");
  }

  std::size_t count() const noexcept { return count_; }

 private:
  std::ostream* out_;
  std::string root_;
  std::string buf_;
  std::size_t count_ = 0;
  bool closed_ = false;
};

// ---------------------------------------------------------------------------
// JSON emission: one document per line. Authors become the list-valued
// `authors` label, scalar attributes are top-level labels, and the venue is
// a nested document.

namespace detail {

inline void json_string(std::string& out, std::string_view s) {
  static constexpr char kHex[] = "0123456789abcdef";
  out += '"';
  for (char c : s) {
    unsigned char u = static_cast<unsigned char>(c);
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (u < 0x20) {
          out += "\\u00";
          out += kHex[u >> 4];
          out += kHex[u & 0xF];
        } else {
          out += c;
        }
    }
  }
  out += '"';
}

inline void json_key(std::string& out, std::string_view k) {
  out += ',';
  json_string(out, k);
  out += ':';
}

inline void json_list(std::string& out, const std::vector<std::string>& v) {
  out += '[';
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    json_string(out, v[i]);
  }
  out += ']';
}

}  // namespace detail

inline void append_json(std::string& out, const CanonicalRecord& r) {
  out += "{\"_id\":";
  detail::json_string(out, r.record_id);
  detail::json_key(out, "type");
  detail::json_string(out, element_name_for(r.kind));
  detail::json_key(out, "title");
  detail::json_string(out, r.title);
  detail::json_key(out, "year");
  out += std::to_string(r.year);
  detail::json_key(out, "authors");
  detail::json_list(out, r.authors);
  if (r.pages) {
    detail::json_key(out, "pages");
    detail::json_string(out, *r.pages);
  }
  if (r.url) {
    detail::json_key(out, "url");
    detail::json_string(out, *r.url);
  }
  if (r.venue) {
    detail::json_key(out, "venue");
    out += "{\"title\":";
    detail::json_string(out, r.venue->venue_title);
    detail::json_key(out, "type");
    detail::json_string(out, to_string(r.venue->venue_type));
    if (r.venue->volume) {
      detail::json_key(out, "volume");
      detail::json_string(out, *r.venue->volume);
    }
    if (r.venue->issue) {
      detail::json_key(out, "issue");
      detail::json_string(out, *r.venue->issue);
    }
    if (r.venue->issn) {
      detail::json_key(out, "issn");
      detail::json_string(out, *r.venue->issn);
    }
    out += '}';
  }
  if (r.publisher) {
    detail::json_key(out, "publisher");
    detail::json_string(out, *r.publisher);
  }
  if (!r.editors.empty()) {
    detail::json_key(out, "editors");
    detail::json_list(out, r.editors);
  }
  if (r.isbn) {
    detail::json_key(out, "isbn");
    detail::json_string(out, *r.isbn);
  }
  out += '}';
}

inline std::string to_json_document(const CanonicalRecord& r) {
  std::string s;
  append_json(s, r);
  return s;
}

// Reads one emitted JSON document back into a record. Parsing goes through
// nlohmann::json, independent of the hand-written emitter above.
inline CanonicalRecord parse_json_document(const nlohmann::json& j) {
  using detail::opt_string;
  using detail::req_string;
  using detail::string_list;
  if (!j.is_object()) throw std::invalid_argument("document is not an object");
  CanonicalRecord r;
  r.record_id = req_string(j, "_id");
  auto kind = map_kind(req_string(j, "type"));
  if (!kind) throw std::invalid_argument("unknown document type");
  r.kind = *kind;
  r.title = req_string(j, "title");
  auto y = j.find("year");
  if (y == j.end() || !y->is_number_integer()) throw std::invalid_argument("missing or non-integer 'year'");
  r.year = y->get<int>();
  r.authors = string_list(j, "authors");
  r.pages = opt_string(j, "pages");
  r.url = opt_string(j, "url");
  if (auto v = j.find("venue"); v != j.end() && !v->is_null()) {
    VenueRef venue;
    venue.venue_title = req_string(*v, "title");
    auto vt = parse_venue_type(req_string(*v, "type"));
    if (!vt) throw std::invalid_argument("unknown venue type");
    venue.venue_type = *vt;
    venue.volume = opt_string(*v, "volume");
    venue.issue = opt_string(*v, "issue");
    venue.issn = opt_string(*v, "issn");
    r.venue = std::move(venue);
  }
  r.publisher = opt_string(j, "publisher");
  r.editors = string_list(j, "editors");
  r.isbn = opt_string(j, "isbn");
  return r;
}

inline CanonicalRecord parse_json_line(std::string_view line) {
  return parse_json_document(nlohmann::json::parse(line));
}

class JsonEmitter {
 public:
  explicit JsonEmitter(std::ostream& out) : out_(&out) {}

  void write(const CanonicalRecord& r) {
    buf_.clear();
    append_json(buf_, r);
    buf_ += '\n';
    out_->write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    if (!*out_) throw IoFailure("failed writing JSON documents");
    ++count_;
  }

  std::size_t count() const noexcept { return count_; }

 private:
  std::ostream* out_;
  std::string buf_;
  std::size_t count_ = 0;
};

// Reads line-delimited JSON documents; CorruptRecord carries the line number.
template <typename Sink>
std::size_t read_json_documents(std::istream& in, Sink&& sink) {
  std::string line;
  std::size_t lineno = 0, n = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    CanonicalRecord r;
    try {
      r = parse_json_line(line);
    } catch (const std::exception& e) {
      throw CorruptRecord(lineno, e.what());
    }
    sink(std::move(r));
    ++n;
  }
  return n;
}

enum class EmitFormat { Xml, Json, Both };

inline EmitFormat parse_emit_format(std::string_view s) {
  if (s == "xml") return EmitFormat::Xml;
  if (s == "json") return EmitFormat::Json;
  if (s == "both") return EmitFormat::Both;
  throw ConfigError("format must be xml, json or both; got '" + std::string(s) + "'");
}

inline std::size_t emit_xml_file(const std::vector<CanonicalRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoFailure("cannot open " + path + " for writing");
  XmlEmitter em(out);
  for (const auto& r : records) em.write(r);
  em.close();
  return em.count();
}

inline std::size_t emit_json_file(const std::vector<CanonicalRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoFailure("cannot open " + path + " for writing");
  JsonEmitter em(out);
  for (const auto& r : records) em.write(r);
  out.flush();
  if (!out) throw IoFailure("failed writing " + path);
  return em.count();
}

struct DatagenOutputs {
  std::string canonical;
  std::string xml;
  std::string json;
  std::size_t records = 0;
};

// File names for one scale factor inside an output directory.
inline DatagenOutputs datagen_paths(const std::filesystem::path& dir, ScaleFactor sf) {
  std::string stem = "dblp_sf" + sf.label();
  return {(dir / (stem + ".jsonl")).string(), (dir / (stem + ".xml")).string(),
          (dir / (stem + ".json")).string(), 0};
}

// Subsets the canonical input and writes the requested document formats into
// `out_dir` (created if needed). The canonical subset is always written so the
// oracle can load exactly what the backends receive.
inline DatagenOutputs run_datagen(const std::string& in_path, ScaleFactor sf, std::uint64_t seed, EmitFormat fmt,
                                  const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoFailure("cannot create " + out_dir.string() + ": " + ec.message());
  DatagenOutputs o = datagen_paths(out_dir, sf);
  o.records = subset_file(in_path, o.canonical, sf, seed);
  std::ifstream in(o.canonical, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + o.canonical);
  std::ofstream xml_out, json_out;
  std::optional<XmlEmitter> xml_em;
  std::optional<JsonEmitter> json_em;
  if (fmt != EmitFormat::Json) {
    xml_out.open(o.xml, std::ios::binary | std::ios::trunc);
    if (!xml_out) throw IoFailure("cannot open " + o.xml + " for writing");
    xml_em.emplace(xml_out);
  } else {
    o.xml.clear();
  }
  if (fmt != EmitFormat::Xml) {
    json_out.open(o.json, std::ios::binary | std::ios::trunc);
    if (!json_out) throw IoFailure("cannot open " + o.json + " for writing");
    json_em.emplace(json_out);
  } else {
    o.json.clear();
  }
  read_canonical(in, [&](CanonicalRecord&& r) {
    if (xml_em) xml_em->write(r);
    if (json_em) json_em->write(r);
  });
  if (xml_em) xml_em->close();
  if (json_em) {
    json_out.flush();
    if (!json_out) throw IoFailure("failed writing " + o.json);
  }
  return o;
}

}  // namespace dodbench

#pragma once

// Streaming conversion of DBLP-style XML into CanonicalRecords.
//
// The reader walks the document with a hand-rolled pull tokenizer and only
// ever materializes one publication element at a time, so memory use is
// bounded by IngestOptions::max_element_bytes regardless of file size.

#include <array>
#include <cctype>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dodbench/core_model.hpp"
#include "dodbench/error.hpp"
#include "dodbench/xml_text.hpp"

namespace dodbench {

struct IngestOptions {
  std::size_t max_element_bytes = 1u << 20;
};

struct IngestStats {
  std::uint64_t records_accepted = 0;
  std::uint64_t records_skipped = 0;
  std::map<std::string, std::uint64_t> skip_reasons;
  std::uint64_t bytes_read = 0;

  std::uint64_t total() const noexcept { return records_accepted + records_skipped; }
  friend bool operator==(const IngestStats&, const IngestStats&) = default;
};

namespace skip_reason {
inline constexpr std::string_view kUnmappedKind = "unmapped kind";
inline constexpr std::string_view kMissingKey = "missing key";
inline constexpr std::string_view kEmptyTitle = "empty title";
inline constexpr std::string_view kMissingYear = "missing year";
inline constexpr std::string_view kInvalidYear = "invalid year";
}  // namespace skip_reason

using XmlAttributes = std::vector<std::pair<std::string, std::string>>;

inline const std::string* find_attribute(const XmlAttributes& attrs, std::string_view name) {
  for (const auto& [k, v] : attrs)
    if (k == name) return &v;
  return nullptr;
}

// DBLP element name -> record kind. Everything outside the four publication
// sub-types (phdthesis, mastersthesis, proceedings, www, data, ...) is unmapped.
inline std::optional<RecordKind> map_kind(std::string_view element_name, const XmlAttributes& = {}) {
  if (element_name == "article") return RecordKind::JournalArticle;
  if (element_name == "inproceedings") return RecordKind::ConferenceArticle;
  if (element_name == "book") return RecordKind::Book;
  if (element_name == "incollection") return RecordKind::BookChapter;
  return std::nullopt;
}

inline std::string_view element_name_for(RecordKind k) {
  switch (k) {
    case RecordKind::JournalArticle: return "article";
    case RecordKind::ConferenceArticle: return "inproceedings";
    case RecordKind::Book: return "book";
    case RecordKind::BookChapter: return "incollection";
  }
  return "article";
}

// A publication element flattened to its direct children. Text of nested
// markup (e.g. <i> inside <title>) is folded into the child's text.
struct PublicationElement {
  std::string name;
  XmlAttributes attributes;
  struct Child {
    std::string name;
    XmlAttributes attributes;
    std::string text;
  };
  std::vector<Child> children;
  std::uint64_t offset = 0;

  const Child* first(std::string_view n) const {
    for (const auto& c : children)
      if (c.name == n) return &c;
    return nullptr;
  }
};

// Result of mapping one element: a record, or the reason it was skipped.
struct MappedPublication {
  std::optional<CanonicalRecord> record;
  std::string skip_reason;
};

inline MappedPublication map_publication(const PublicationElement& el) {
  MappedPublication out;
  auto kind = map_kind(el.name, el.attributes);
  if (!kind) {
    out.skip_reason = skip_reason::kUnmappedKind;
    return out;
  }
  const std::string* key = find_attribute(el.attributes, "key");
  if (!key || key->empty()) {
    out.skip_reason = skip_reason::kMissingKey;
    return out;
  }
  CanonicalRecord r;
  r.record_id = *key;
  r.kind = *kind;
  if (auto* t = el.first("title")) r.title = t->text;
  if (r.title.empty()) {
    out.skip_reason = skip_reason::kEmptyTitle;
    return out;
  }
  auto* year = el.first("year");
  if (!year) {
    out.skip_reason = skip_reason::kMissingYear;
    return out;
  }
  {
    std::string_view y = year->text;
    while (!y.empty() && (y.front() == ' ' || y.front() == '\n' || y.front() == '\t' || y.front() == '\r'))
      y.remove_prefix(1);
    while (!y.empty() && (y.back() == ' ' || y.back() == '\n' || y.back() == '\t' || y.back() == '\r'))
      y.remove_suffix(1);
    bool neg = !y.empty() && y.front() == '-';
    if (neg) y.remove_prefix(1);
    if (y.empty() || y.size() > 6) {
      out.skip_reason = skip_reason::kInvalidYear;
      return out;
    }
    int v = 0;
    for (char c : y) {
      if (c < '0' || c > '9') {
        out.skip_reason = skip_reason::kInvalidYear;
        return out;
      }
      v = v * 10 + (c - '0');
    }
    r.year = neg ? -v : v;
  }
  const bool article = is_article(r.kind);
  const PublicationElement::Child* venue_el = nullptr;
  for (const auto& c : el.children) {
    if (c.name == "author") {
      r.authors.push_back(c.text);
    } else if (c.name == "url") {
      if (!r.url) r.url = c.text;
    } else if (c.name == "pages") {
      if (!r.pages) r.pages = c.text;
    } else if (c.name == "publisher") {
      if (!r.publisher) r.publisher = c.text;
    } else if (!article && c.name == "editor") {
      r.editors.push_back(c.text);
    } else if (!article && c.name == "isbn") {
      if (!r.isbn) r.isbn = c.text;
    } else if (article && (c.name == "journal" || c.name == "booktitle")) {
      if (!venue_el) venue_el = &c;
    }
  }
  if (venue_el && !venue_el->text.empty()) {
    VenueRef v;
    v.venue_title = venue_el->text;
    v.venue_type = venue_el->name == "journal" ? VenueType::Journal : VenueType::Proceedings;
    if (auto* t = find_attribute(venue_el->attributes, "type"))
      if (auto parsed = parse_venue_type(*t)) v.venue_type = *parsed;
    if (auto* c = el.first("volume")) v.volume = c->text;
    if (auto* c = el.first("number")) v.issue = c->text;
    if (auto* c = el.first("issn")) v.issn = c->text;
    r.venue = std::move(v);
  }
  if (auto violations = validate_record(r); !violations.empty()) {
    out.skip_reason = violations.front();
    return out;
  }
  out.record = std::move(r);
  return out;
}

namespace detail {

class ByteSource {
 public:
  explicit ByteSource(std::istream& in) : in_(&in) {}

  // -1 on end of input.
  int get() {
    if (pos_ == len_ && !fill()) return -1;
    ++offset_;
    return static_cast<unsigned char>(buf_[pos_++]);
  }
  int peek() {
    if (pos_ == len_ && !fill()) return -1;
    return static_cast<unsigned char>(buf_[pos_]);
  }
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  bool fill() {
    if (!*in_) return false;
    in_->read(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    len_ = static_cast<std::size_t>(in_->gcount());
    pos_ = 0;
    return len_ > 0;
  }

  std::istream* in_;
  std::array<char, 1 << 16> buf_{};
  std::size_t pos_ = 0;
  std::size_t len_ = 0;
  std::uint64_t offset_ = 0;
};

enum class TokenKind { Eof, Text, Start, End, Empty, Skipped };

struct Token {
  TokenKind kind = TokenKind::Eof;
  std::string name;
  XmlAttributes attributes;
  std::uint64_t offset = 0;
};

class XmlTokenizer {
 public:
  explicit XmlTokenizer(std::istream& in) : src_(in) {}

  std::uint64_t offset() const noexcept { return src_.offset(); }

  // Caps the number of bytes a single token (text run or tag) may hold;
  // 0 disables. Text is appended into `text` rather than stored in the token.
  void set_token_limit(std::size_t limit) { limit_ = limit; }

  // Reads the next token. For Text tokens the decoded characters are appended
  // to *text when text is non-null and discarded otherwise (whitespace between
  // publications never needs to be kept).
  Token next(std::string* text, bool* text_is_blank = nullptr) {
    Token t;
    t.offset = src_.offset();
    int c = src_.peek();
    if (c < 0) return t;
    if (c != '<') {
      t.kind = TokenKind::Text;
      read_text(text, text_is_blank);
      return t;
    }
    src_.get();
    c = src_.peek();
    if (c == '?') {
      src_.get();
      std::string body = read_until("?>", t.offset);
      if (body.rfind("xml", 0) == 0) note_declaration(body);
      t.kind = TokenKind::Skipped;
      return t;
    }
    if (c == '!') {
      src_.get();
      read_bang(t, text);
      return t;
    }
    if (c == '/') {
      src_.get();
      t.kind = TokenKind::End;
      t.name = read_name(t.offset);
      skip_space();
      expect('>', t.offset);
      return t;
    }
    t.kind = TokenKind::Start;
    t.name = read_name(t.offset);
    for (;;) {
      bool had_space = skip_space();
      c = src_.get();
      if (c < 0) throw MalformedXml(src_.offset(), "unterminated start tag <" + t.name);
      if (c == '>') break;
      if (c == '/') {
        expect('>', t.offset);
        t.kind = TokenKind::Empty;
        break;
      }
      if (!had_space) throw MalformedXml(src_.offset(), "expected whitespace before attribute in <" + t.name);
      std::string attr_name(1, static_cast<char>(c));
      attr_name += read_name_tail();
      skip_space();
      expect('=', t.offset);
      skip_space();
      int quote = src_.get();
      if (quote != '"' && quote != '\'') throw MalformedXml(src_.offset(), "attribute value must be quoted");
      std::string value;
      for (;;) {
        int v = src_.get();
        if (v < 0) throw MalformedXml(src_.offset(), "unterminated attribute value");
        if (v == quote) break;
        if (v == '<') throw MalformedXml(src_.offset(), "'<' in attribute value");
        if (v == '&') {
          decode_reference_into(value);
          continue;
        }
        append_char(value, v);
        check_limit(value.size(), t.offset);
      }
      t.attributes.emplace_back(std::move(attr_name), std::move(value));
    }
    return t;
  }

 private:
  static bool is_space(int c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }
  static bool is_name_char(int c) {
    return c >= 0x80 || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '_' || c == ':' || c == '-' || c == '.';
  }

  void check_limit(std::size_t size, std::uint64_t start) const {
    if (limit_ && size > limit_) throw OversizedElement(start, limit_);
  }

  void append_char(std::string& out, int c) {
    if (latin1_ && c >= 0x80) xml::append_utf8(out, static_cast<std::uint32_t>(c));
    else out.push_back(static_cast<char>(c));
  }

  bool skip_space() {
    bool any = false;
    while (is_space(src_.peek())) {
      src_.get();
      any = true;
    }
    return any;
  }

  void expect(char want, std::uint64_t) {
    int c = src_.get();
    if (c != want) throw MalformedXml(src_.offset(), std::string("expected '") + want + "'");
  }

  std::string read_name(std::uint64_t) {
    int c = src_.peek();
    if (c < 0 || !is_name_char(c) || c == '-' || c == '.' || (c >= '0' && c <= '9'))
      throw MalformedXml(src_.offset(), "invalid element name");
    return read_name_tail();
  }

  std::string read_name_tail() {
    std::string n;
    while (is_name_char(src_.peek())) {
      n.push_back(static_cast<char>(src_.get()));
      if (n.size() > 1024) throw MalformedXml(src_.offset(), "name too long");
    }
    return n;
  }

  void decode_reference_into(std::string& out) {
    const auto at = src_.offset() - 1;
    std::string body;
    for (;;) {
      int c = src_.get();
      if (c < 0) throw MalformedXml(at, "unterminated entity reference");
      if (c == ';') break;
      body.push_back(static_cast<char>(c));
      if (body.size() > 32) throw MalformedXml(at, "unterminated entity reference");
    }
    auto cp = xml::decode_reference(body);
    if (!cp) throw MalformedXml(at, "unknown entity &" + body + ";");
    xml::append_utf8(out, *cp);
  }

  void read_text(std::string* text, bool* blank) {
    const auto start = src_.offset();
    bool all_blank = true;
    std::size_t appended = 0;
    for (;;) {
      int c = src_.peek();
      if (c < 0 || c == '<') break;
      src_.get();
      if (!is_space(c)) all_blank = false;
      if (c == '&') {
        if (text) {
          auto before = text->size();
          decode_reference_into(*text);
          appended += text->size() - before;
        } else {
          std::string scratch;
          decode_reference_into(scratch);
        }
      } else if (text) {
        append_char(*text, c);
        ++appended;
      }
      if (text) check_limit(appended, start);
    }
    if (blank) *blank = all_blank;
  }

  std::string read_until(std::string_view terminator, std::uint64_t start) {
    std::string body;
    for (;;) {
      int c = src_.get();
      if (c < 0) throw MalformedXml(start, "unterminated markup");
      body.push_back(static_cast<char>(c));
      if (body.size() >= terminator.size() &&
          std::string_view(body).substr(body.size() - terminator.size()) == terminator) {
        body.resize(body.size() - terminator.size());
        return body;
      }
      check_limit(body.size(), start);
    }
  }

  void read_bang(Token& t, std::string* text) {
    if (src_.peek() == '-') {
      src_.get();
      expect('-', t.offset);
      // Comment bodies are discarded without buffering.
      int dashes = 0;
      for (;;) {
        int c = src_.get();
        if (c < 0) throw MalformedXml(t.offset, "unterminated comment");
        if (c == '>' && dashes >= 2) break;
        dashes = c == '-' ? dashes + 1 : 0;
      }
      t.kind = TokenKind::Skipped;
      return;
    }
    if (src_.peek() == '[') {
      src_.get();
      for (char want : std::string_view("CDATA[")) expect(want, t.offset);
      std::string body = read_until("]]>", t.offset);
      if (text) {
        for (unsigned char c : body) append_char(*text, c);
      }
      t.kind = TokenKind::Text;
      return;
    }
    // DOCTYPE, possibly with an internal subset.
    int depth = 0;
    int quote = 0;
    for (;;) {
      int c = src_.get();
      if (c < 0) throw MalformedXml(t.offset, "unterminated declaration");
      if (quote) {
        if (c == quote) quote = 0;
        continue;
      }
      if (c == '"' || c == '\'') quote = c;
      else if (c == '[') ++depth;
      else if (c == ']') --depth;
      else if (c == '>' && depth <= 0) break;
    }
    t.kind = TokenKind::Skipped;
  }

  void note_declaration(const std::string& body) {
    auto p = body.find("encoding");
    if (p == std::string::npos) return;
    auto q = body.find_first_of("\"'", p);
    if (q == std::string::npos) return;
    auto e = body.find(body[q], q + 1);
    if (e == std::string::npos) return;
    std::string enc = body.substr(q + 1, e - q - 1);
    for (auto& ch : enc) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    latin1_ = enc == "iso-8859-1" || enc == "latin1" || enc == "iso_8859-1" || enc == "latin-1";
  }

  ByteSource src_;
  std::size_t limit_ = 0;
  bool latin1_ = false;
};

}  // namespace detail

// Reads the publication elements under the root one at a time.
class PublicationReader {
 public:
  explicit PublicationReader(std::istream& in, IngestOptions opts = {}) : tok_(in), opts_(opts) {
    tok_.set_token_limit(opts_.max_element_bytes);
  }

  // Returns the next publication element, or nullopt once the root closes.
  std::optional<PublicationElement> next() {
    if (!started_) open_root();
    if (finished_) return std::nullopt;
    for (;;) {
      bool blank = true;
      detail::Token t = tok_.next(nullptr, &blank);
      switch (t.kind) {
        case detail::TokenKind::Eof:
          throw MalformedXml(tok_.offset(), "unexpected end of input inside <" + root_ + ">");
        case detail::TokenKind::Text:
        case detail::TokenKind::Skipped:
          continue;
        case detail::TokenKind::End:
          if (t.name != root_) throw MalformedXml(t.offset, "mismatched end tag </" + t.name + ">");
          finish();
          return std::nullopt;
        case detail::TokenKind::Empty:
        case detail::TokenKind::Start: {
          PublicationElement el;
          el.name = std::move(t.name);
          el.attributes = std::move(t.attributes);
          el.offset = t.offset;
          if (t.kind == detail::TokenKind::Start) read_body(el);
          return el;
        }
      }
    }
  }

  std::uint64_t bytes_read() const noexcept { return tok_.offset(); }

 private:
  void open_root() {
    started_ = true;
    for (;;) {
      bool blank = true;
      detail::Token t = tok_.next(nullptr, &blank);
      switch (t.kind) {
        case detail::TokenKind::Eof: throw MalformedXml(tok_.offset(), "no root element");
        case detail::TokenKind::Skipped: continue;
        case detail::TokenKind::Text:
          if (!blank) throw MalformedXml(t.offset, "text before root element");
          continue;
        case detail::TokenKind::End: throw MalformedXml(t.offset, "end tag before root element");
        case detail::TokenKind::Empty:
          root_ = t.name;
          finish();
          return;
        case detail::TokenKind::Start: root_ = t.name; return;
      }
    }
  }

  void finish() {
    finished_ = true;
    for (;;) {
      bool blank = true;
      detail::Token t = tok_.next(nullptr, &blank);
      if (t.kind == detail::TokenKind::Eof) return;
      if (t.kind == detail::TokenKind::Skipped) continue;
      if (t.kind == detail::TokenKind::Text && blank) continue;
      throw MalformedXml(t.offset, "content after root element");
    }
  }

  void read_body(PublicationElement& el) {
    std::vector<std::string> open{el.name};
    std::string* field_text = nullptr;
    std::string scratch;
    for (;;) {
      if (tok_.offset() - el.offset > opts_.max_element_bytes)
        throw OversizedElement(el.offset, opts_.max_element_bytes);
      detail::Token t;
      try {
        t = tok_.next(field_text ? field_text : &scratch);
      } catch (const OversizedElement&) {
        // The tokenizer knows only the token start; report the publication.
        throw OversizedElement(el.offset, opts_.max_element_bytes);
      }
      scratch.clear();
      switch (t.kind) {
        case detail::TokenKind::Eof:
          throw MalformedXml(tok_.offset(), "unexpected end of input inside <" + open.back() + ">");
        case detail::TokenKind::Text:
        case detail::TokenKind::Skipped:
          break;
        case detail::TokenKind::Start:
        case detail::TokenKind::Empty:
          if (open.size() == 1) {
            el.children.push_back({t.name, std::move(t.attributes), {}});
            field_text = &el.children.back().text;
          }
          if (t.kind == detail::TokenKind::Start) open.push_back(std::move(t.name));
          else if (open.size() == 1) field_text = nullptr;
          break;
        case detail::TokenKind::End:
          if (t.name != open.back())
            throw MalformedXml(t.offset, "mismatched end tag </" + t.name + ">, expected </" + open.back() + ">");
          open.pop_back();
          if (open.size() == 1) field_text = nullptr;
          if (open.empty()) {
            if (tok_.offset() - el.offset > opts_.max_element_bytes)
              throw OversizedElement(el.offset, opts_.max_element_bytes);
            return;
          }
          break;
      }
    }
  }

  detail::XmlTokenizer tok_;
  IngestOptions opts_;
  std::string root_;
  bool started_ = false;
  bool finished_ = false;
};

// Delivers each valid publication to `sink` in document order. Elements that
// do not yield a valid record are counted per reason in the returned stats.
template <typename Sink>
IngestStats ingest_stream(std::istream& xml_input, Sink&& sink, IngestOptions opts = {}) {
  IngestStats stats;
  PublicationReader reader(xml_input, opts);
  while (auto el = reader.next()) {
    MappedPublication m = map_publication(*el);
    if (m.record) {
      sink(std::move(*m.record));
      ++stats.records_accepted;
    } else {
      ++stats.records_skipped;
      ++stats.skip_reasons[m.skip_reason];
    }
  }
  stats.bytes_read = reader.bytes_read();
  return stats;
}

inline std::string format_stats(const IngestStats& s) {
  std::string out;
  out += "records_accepted: " + std::to_string(s.records_accepted) + "\n";
  out += "records_skipped: " + std::to_string(s.records_skipped) + "\n";
  out += "bytes_read: " + std::to_string(s.bytes_read) + "\n";
  out += "skip_reasons:\n";
  for (const auto& [reason, n] : s.skip_reasons) out += "  " + reason + ": " + std::to_string(n) + "\n";
  return out;
}

}  // namespace dodbench

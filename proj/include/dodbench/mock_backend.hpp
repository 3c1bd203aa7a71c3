#pragma once

// A small HTTP document store that answers the CouchDB and Couchbase query
// forms produced by translate(). It exists so the runner and the
// translations can be exercised end to end without a real database.
//
// Routes:
//   GET    /                          ping
//   POST   /{db}/_load                newline-delimited emitted JSON documents
//   POST   /{db}/_bulk_docs           {"docs": [...]}
//   GET    /{db}/_count               {"count": n}
//   DELETE /{db}                      drop all documents
//   POST   /{db}/_find                Mango selector ($and, $or, $regex)
//   PUT    /{db}/_design/{name}       view with a generated map function
//   GET    /{db}/_design/{name}/_view/q?group=true
//   POST   /query/service             {"statement": "..."} (N1QL subset)
//
// A request header X-Mock-Delay-Ms delays the response.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <thread>
#include <variant>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "dodbench/core_model.hpp"
#include "dodbench/datagen.hpp"
#include "dodbench/error.hpp"
#include "dodbench/query_model.hpp"

namespace dodbench {

namespace mock {

// ---------------------------------------------------------------------------
// Title predicates shared by the Mango and view interpreters.

struct TitlePredicate {
  enum class Kind { Substring, Regex, And, Or } kind = Kind::Substring;
  std::string needle;
  bool fold = false;
  std::shared_ptr<std::regex> re;
  std::vector<TitlePredicate> children;

  bool operator()(std::string_view title) const {
    switch (kind) {
      case Kind::Substring: {
        if (!fold) return title.find(needle) != std::string_view::npos;
        return lowercase(title).find(needle) != std::string::npos;
      }
      case Kind::Regex: return std::regex_search(title.begin(), title.end(), *re);
      case Kind::And:
        return std::all_of(children.begin(), children.end(), [&](const auto& c) { return c(title); });
      case Kind::Or:
        return std::any_of(children.begin(), children.end(), [&](const auto& c) { return c(title); });
    }
    return false;
  }
};

inline TitlePredicate parse_mango_selector(const nlohmann::json& sel) {
  if (!sel.is_object() || sel.size() != 1) throw InvalidQuery("selector must be an object with one key");
  const auto& [key, value] = *sel.items().begin();
  if (key == "$and" || key == "$or") {
    TitlePredicate p;
    p.kind = key == "$and" ? TitlePredicate::Kind::And : TitlePredicate::Kind::Or;
    if (!value.is_array() || value.empty()) throw InvalidQuery(key + " needs a non-empty array");
    for (const auto& c : value) p.children.push_back(parse_mango_selector(c));
    return p;
  }
  if (key != "title") throw InvalidQuery("unsupported selector field '" + key + "'");
  if (!value.is_object() || !value.contains("$regex")) throw InvalidQuery("title selector needs $regex");
  std::string pattern = value.at("$regex").get<std::string>();
  auto flags = std::regex::ECMAScript;
  if (pattern.rfind("(?i)", 0) == 0) {
    pattern.erase(0, 4);
    flags |= std::regex::icase;
  }
  TitlePredicate p;
  p.kind = TitlePredicate::Kind::Regex;
  p.re = std::make_shared<std::regex>(pattern, flags);
  return p;
}

// Understands map functions of the shape translate() generates:
//   function (doc) { ... [var title = doc.title.toLowerCase();]
//     [if (X.indexOf("t") !== -1 && ...) {] for (...) { emit(KEY, 1); } ... }
struct ViewDefinition {
  std::optional<TitlePredicate> filter;
  bool key_has_year = false;
};

inline ViewDefinition parse_map_function(std::string_view fn) {
  ViewDefinition v;
  if (fn.find("emit(") == std::string_view::npos) throw InvalidQuery("map function never emits");
  v.key_has_year = fn.find("emit([doc.authors[i], doc.year]") != std::string_view::npos;
  if (!v.key_has_year && fn.find("emit(doc.authors[i]") == std::string_view::npos)
    throw InvalidQuery("unsupported emit key");
  const bool folded = fn.find("doc.title.toLowerCase()") != std::string_view::npos;
  auto cond_start = fn.find("if (title.indexOf(");
  if (cond_start == std::string_view::npos) cond_start = fn.find("if (doc.title.indexOf(");
  if (cond_start == std::string_view::npos) return v;
  cond_start += 4;
  auto cond_end = fn.find(") { for", cond_start);
  if (cond_end == std::string_view::npos) throw InvalidQuery("unterminated condition in map function");
  std::string_view cond = fn.substr(cond_start, cond_end - cond_start);
  TitlePredicate p;
  const bool has_and = cond.find(" && ") != std::string_view::npos;
  const bool has_or = cond.find(" || ") != std::string_view::npos;
  if (has_and && has_or) throw InvalidQuery("mixed && and || in map function");
  p.kind = has_or ? TitlePredicate::Kind::Or : TitlePredicate::Kind::And;
  std::string_view sep = has_or ? " || " : " && ";
  while (!cond.empty()) {
    auto cut = cond.find(sep);
    std::string_view leaf = cond.substr(0, cut);
    cond = cut == std::string_view::npos ? std::string_view{} : cond.substr(cut + sep.size());
    auto a = leaf.find(".indexOf(");
    auto b = leaf.rfind(") !== -1");
    if (a == std::string_view::npos || b == std::string_view::npos || b < a)
      throw InvalidQuery("unsupported condition '" + std::string(leaf) + "'");
    std::string_view lit = leaf.substr(a + 9, b - a - 9);
    TitlePredicate t;
    t.needle = nlohmann::json::parse(lit).get<std::string>();
    t.fold = folded;
    p.children.push_back(std::move(t));
  }
  v.filter = std::move(p);
  return v;
}

// ---------------------------------------------------------------------------
// N1QL subset:
//   SELECT item[, item]* FROM `c` [AS] d [UNNEST d.authors [AS] a]
//   [WHERE pred] [GROUP BY expr[, expr]*] [ORDER BY expr[, expr]*] [;]
// item: d.title | d.year | a | COUNT(*) | COUNT(META(d).id), each [AS alias]
// pred: CONTAINS(d.title | LOWER(d.title), "s") with AND, OR, parentheses.

struct N1qlToken {
  enum class Kind { Word, String, Ident, Punct, End } kind = Kind::End;
  std::string text;
};

inline std::vector<N1qlToken> tokenize_n1ql(std::string_view s) {
  std::vector<N1qlToken> out;
  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '"' || c == '\'') {
      std::size_t j = i + 1;
      while (j < s.size() && s[j] != c) j += s[j] == '\\' ? 2 : 1;
      if (j >= s.size()) throw InvalidQuery("unterminated string literal");
      std::string lit(s.substr(i, j - i + 1));
      if (c == '\'') lit = "\"" + lit.substr(1, lit.size() - 2) + "\"";
      out.push_back({N1qlToken::Kind::String, nlohmann::json::parse(lit).get<std::string>()});
      i = j + 1;
    } else if (c == '`') {
      std::string id;
      std::size_t j = i + 1;
      for (; j < s.size(); ++j) {
        if (s[j] == '`') {
          if (j + 1 < s.size() && s[j + 1] == '`') {
            id += '`';
            ++j;
            continue;
          }
          break;
        }
        id += s[j];
      }
      if (j >= s.size()) throw InvalidQuery("unterminated identifier");
      out.push_back({N1qlToken::Kind::Ident, id});
      i = j + 1;
    } else if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
      out.push_back({N1qlToken::Kind::Word, std::string(s.substr(i, j - i))});
      i = j;
    } else {
      out.push_back({N1qlToken::Kind::Punct, std::string(1, c)});
      ++i;
    }
  }
  out.push_back({});
  return out;
}

enum class N1qlExpr { Title, Year, Author, Count };

struct N1qlItem {
  N1qlExpr expr;
  std::string alias;
};

struct N1qlQuery {
  std::vector<N1qlItem> select;
  std::string from;
  bool unnest = false;
  std::optional<TitlePredicate> where;
  std::vector<N1qlExpr> group_by;
  std::vector<N1qlExpr> order_by;
};

class N1qlParser {
 public:
  explicit N1qlParser(std::string_view text) : toks_(tokenize_n1ql(text)) { scan_aliases(); }

  N1qlQuery parse() {
    N1qlQuery q;
    expect_word("SELECT");
    do q.select.push_back(item()); while (accept_punct(","));
    expect_word("FROM");
    q.from = name();
    accept_word("AS");
    name();
    if (accept_word("UNNEST")) {
      expect_doc_field("authors");
      accept_word("AS");
      name();
      q.unnest = true;
    }
    if (accept_word("WHERE")) q.where = or_expr();
    if (accept_word("GROUP")) {
      expect_word("BY");
      do q.group_by.push_back(expr()); while (accept_punct(","));
    }
    if (accept_word("ORDER")) {
      expect_word("BY");
      do {
        q.order_by.push_back(expr());
        if (accept_word("DESC")) throw InvalidQuery("DESC ordering is not supported");
        accept_word("ASC");
      } while (accept_punct(","));
    }
    accept_punct(";");
    if (peek().kind != N1qlToken::Kind::End) throw InvalidQuery("unexpected '" + peek().text + "'");
    for (const auto& e : q.select)
      if (e.expr == N1qlExpr::Author && !q.unnest) throw InvalidQuery("author alias used without UNNEST");
    return q;
  }

 private:
  const N1qlToken& peek() const { return toks_[pos_]; }
  const N1qlToken& take() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

  static bool word_is(const N1qlToken& t, std::string_view w) {
    if (t.kind != N1qlToken::Kind::Word || t.text.size() != w.size()) return false;
    for (std::size_t i = 0; i < w.size(); ++i)
      if (std::toupper(static_cast<unsigned char>(t.text[i])) != w[i]) return false;
    return true;
  }
  bool accept_word(std::string_view w) {
    if (!word_is(peek(), w)) return false;
    ++pos_;
    return true;
  }
  void expect_word(std::string_view w) {
    if (!accept_word(w)) throw InvalidQuery("expected " + std::string(w) + " near '" + peek().text + "'");
  }
  bool accept_punct(std::string_view p) {
    if (peek().kind != N1qlToken::Kind::Punct || peek().text != p) return false;
    ++pos_;
    return true;
  }
  void expect_punct(std::string_view p) {
    if (!accept_punct(p)) throw InvalidQuery("expected '" + std::string(p) + "' near '" + peek().text + "'");
  }
  std::string name() {
    const auto& t = take();
    if (t.kind != N1qlToken::Kind::Word && t.kind != N1qlToken::Kind::Ident)
      throw InvalidQuery("expected a name near '" + t.text + "'");
    return t.text;
  }
  void expect_doc_field(std::string_view field) {
    if (name() != doc_) throw InvalidQuery("unknown alias");
    expect_punct(".");
    if (name() != field) throw InvalidQuery("expected field " + std::string(field));
  }

  N1qlExpr expr() {
    if (accept_word("COUNT")) {
      expect_punct("(");
      if (!accept_punct("*")) {
        expect_word("META");
        expect_punct("(");
        if (name() != doc_) throw InvalidQuery("unknown alias in META()");
        expect_punct(")");
        expect_punct(".");
        expect_word("ID");
      }
      expect_punct(")");
      return N1qlExpr::Count;
    }
    std::string n = name();
    if (!author_.empty() && n == author_) return N1qlExpr::Author;
    if (n != doc_) throw InvalidQuery("unknown alias '" + n + "'");
    expect_punct(".");
    std::string f = name();
    if (f == "title") return N1qlExpr::Title;
    if (f == "year") return N1qlExpr::Year;
    throw InvalidQuery("unsupported field '" + f + "'");
  }

  N1qlItem item() {
    N1qlItem it;
    it.expr = expr();
    if (accept_word("AS")) it.alias = name();
    else if (it.expr == N1qlExpr::Author) it.alias = author_;
    else if (it.expr == N1qlExpr::Title) it.alias = "title";
    else if (it.expr == N1qlExpr::Year) it.alias = "year";
    else it.alias = "$1";
    return it;
  }

  // The select list refers to aliases declared later, so find them first.
  void scan_aliases() {
    auto is_name = [&](std::size_t i) {
      return i < toks_.size() && (toks_[i].kind == N1qlToken::Kind::Word || toks_[i].kind == N1qlToken::Kind::Ident);
    };
    for (std::size_t i = 0; i < toks_.size(); ++i) {
      if (word_is(toks_[i], "FROM") && is_name(i + 1)) {
        std::size_t j = i + 2;
        if (j < toks_.size() && word_is(toks_[j], "AS")) ++j;
        if (is_name(j)) doc_ = toks_[j].text;
      } else if (word_is(toks_[i], "UNNEST")) {
        std::size_t j = i + 4;
        if (j < toks_.size() && word_is(toks_[j], "AS")) ++j;
        if (is_name(j)) author_ = toks_[j].text;
      }
    }
    if (doc_.empty()) throw InvalidQuery("missing FROM clause");
  }

  TitlePredicate or_expr() {
    TitlePredicate first = and_expr();
    if (!word_is(peek(), "OR")) return first;
    TitlePredicate p;
    p.kind = TitlePredicate::Kind::Or;
    p.children.push_back(std::move(first));
    while (accept_word("OR")) p.children.push_back(and_expr());
    return p;
  }
  TitlePredicate and_expr() {
    TitlePredicate first = primary();
    if (!word_is(peek(), "AND")) return first;
    TitlePredicate p;
    p.kind = TitlePredicate::Kind::And;
    p.children.push_back(std::move(first));
    while (accept_word("AND")) p.children.push_back(primary());
    return p;
  }
  TitlePredicate primary() {
    if (accept_punct("(")) {
      TitlePredicate p = or_expr();
      expect_punct(")");
      return p;
    }
    expect_word("CONTAINS");
    expect_punct("(");
    TitlePredicate p;
    if (accept_word("LOWER")) {
      expect_punct("(");
      expect_doc_field("title");
      expect_punct(")");
      p.fold = true;
    } else {
      expect_doc_field("title");
    }
    expect_punct(",");
    const auto& lit = take();
    if (lit.kind != N1qlToken::Kind::String) throw InvalidQuery("CONTAINS needs a string literal");
    p.needle = lit.text;
    expect_punct(")");
    return p;
  }

  std::vector<N1qlToken> toks_;
  std::size_t pos_ = 0;
  std::string doc_;
  std::string author_;
};

inline N1qlQuery parse_n1ql(std::string_view text) { return N1qlParser(text).parse(); }

using N1qlValue = std::variant<std::string, int>;

inline nlohmann::json run_n1ql(const N1qlQuery& q, const std::vector<CanonicalRecord>& records) {
  struct Row {
    const CanonicalRecord* rec;
    const std::string* author;
  };
  std::vector<Row> rows;
  for (const auto& r : records) {
    if (q.where && !(*q.where)(r.title)) continue;
    if (q.unnest) {
      for (const auto& a : r.authors) rows.push_back({&r, &a});
    } else {
      rows.push_back({&r, nullptr});
    }
  }
  auto value = [](N1qlExpr e, const Row& row) -> N1qlValue {
    switch (e) {
      case N1qlExpr::Title: return row.rec->title;
      case N1qlExpr::Year: return row.rec->year;
      case N1qlExpr::Author: return *row.author;
      case N1qlExpr::Count: break;
    }
    throw InvalidQuery("COUNT cannot be used as a grouping key");
  };
  const bool aggregate = !q.group_by.empty() || std::any_of(q.select.begin(), q.select.end(), [](const auto& i) {
    return i.expr == N1qlExpr::Count;
  });
  auto to_json = [](const N1qlValue& v) {
    return std::holds_alternative<int>(v) ? nlohmann::json(std::get<int>(v)) : nlohmann::json(std::get<std::string>(v));
  };
  nlohmann::json results = nlohmann::json::array();
  if (!aggregate) {
    for (const auto& row : rows) {
      nlohmann::json o = nlohmann::json::object();
      for (const auto& it : q.select) o[it.alias] = to_json(value(it.expr, row));
      results.push_back(std::move(o));
    }
    return results;
  }
  for (const auto& it : q.select)
    if (it.expr != N1qlExpr::Count && std::find(q.group_by.begin(), q.group_by.end(), it.expr) == q.group_by.end())
      throw InvalidQuery("selected expression is neither aggregated nor grouped");
  std::map<std::vector<N1qlValue>, std::uint64_t> groups;
  for (const auto& row : rows) {
    std::vector<N1qlValue> key;
    for (auto e : q.group_by) key.push_back(value(e, row));
    ++groups[key];
  }
  if (q.group_by.empty() && groups.empty()) groups[{}] = 0;
  std::vector<std::pair<std::vector<N1qlValue>, std::uint64_t>> ordered(groups.begin(), groups.end());
  if (!q.order_by.empty()) {
    std::vector<std::size_t> positions;
    for (auto e : q.order_by) {
      auto it = std::find(q.group_by.begin(), q.group_by.end(), e);
      if (it == q.group_by.end()) throw InvalidQuery("ORDER BY expression is not grouped");
      positions.push_back(static_cast<std::size_t>(it - q.group_by.begin()));
    }
    std::stable_sort(ordered.begin(), ordered.end(), [&](const auto& a, const auto& b) {
      for (auto p : positions) {
        if (a.first[p] < b.first[p]) return true;
        if (b.first[p] < a.first[p]) return false;
      }
      return false;
    });
  }
  for (const auto& [key, n] : ordered) {
    nlohmann::json o = nlohmann::json::object();
    for (const auto& it : q.select) {
      if (it.expr == N1qlExpr::Count) {
        o[it.alias] = n;
      } else {
        auto p = static_cast<std::size_t>(std::find(q.group_by.begin(), q.group_by.end(), it.expr) - q.group_by.begin());
        o[it.alias] = to_json(key[p]);
      }
    }
    results.push_back(std::move(o));
  }
  return results;
}

}  // namespace mock

class MockBackend {
 public:
  MockBackend() { routes(); }
  MockBackend(const MockBackend&) = delete;
  MockBackend& operator=(const MockBackend&) = delete;
  ~MockBackend() { stop(); }

  // Binds to host:port (port 0 picks a free port) and serves on a thread.
  int start(const std::string& host = "127.0.0.1", int port = 0) {
    port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (port_ < 0) throw BackendUnreachable("mock backend cannot bind " + host + ":" + std::to_string(port));
    host_ = host;
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  // Serves on the calling thread until stop() is called from elsewhere.
  void serve(const std::string& host, int port) {
    host_ = host;
    port_ = port;
    if (!server_.listen(host, port)) throw BackendUnreachable("mock backend cannot listen on " + host);
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  std::string url() const { return "http://" + host_ + ":" + std::to_string(port_); }
  int port() const noexcept { return port_; }

  void set_delay(std::chrono::milliseconds d) { delay_ms_ = d.count(); }

  std::size_t count(const std::string& db) const {
    std::lock_guard lock(mu_);
    auto it = dbs_.find(db);
    return it == dbs_.end() ? 0 : it->second.records.size();
  }

  void insert(const std::string& db, std::vector<CanonicalRecord> records) {
    std::lock_guard lock(mu_);
    auto& v = dbs_[db].records;
    v.insert(v.end(), std::make_move_iterator(records.begin()), std::make_move_iterator(records.end()));
  }

  std::uint64_t requests_served() const noexcept { return requests_; }

 private:
  struct Database {
    std::vector<CanonicalRecord> records;
    std::map<std::string, std::string> design_docs;  // name -> body
  };

  static void reply(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void fail(httplib::Response& res, int status, const std::string& reason) {
    reply(res, status, {{"error", status == 404 ? "not_found" : "bad_request"}, {"reason", reason}});
  }

  void pause(const httplib::Request& req) {
    ++requests_;
    long long ms = delay_ms_;
    if (req.has_header("X-Mock-Delay-Ms")) ms = std::stoll(req.get_header_value("X-Mock-Delay-Ms"));
    if (ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(ms));
  }

  // Wraps a handler with the delay and error-to-HTTP mapping.
  template <typename F>
  httplib::Server::Handler guarded(F f) {
    return [this, f](const httplib::Request& req, httplib::Response& res) {
      pause(req);
      try {
        f(req, res);
      } catch (const nlohmann::json::exception& e) {
        fail(res, 400, e.what());
      } catch (const std::regex_error& e) {
        fail(res, 400, e.what());
      } catch (const std::exception& e) {
        fail(res, 400, e.what());
      }
    };
  }

  void routes() {
    server_.Get("/", guarded([](const httplib::Request&, httplib::Response& res) {
                  reply(res, 200, {{"mock", "dodbench"}, {"ok", true}});
                }));

    server_.Post(R"(/([^/_][^/]*)/_load)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                   std::vector<CanonicalRecord> recs;
                   std::size_t start = 0, lineno = 0;
                   const std::string& b = req.body;
                   while (start < b.size()) {
                     auto end = b.find('\n', start);
                     if (end == std::string::npos) end = b.size();
                     std::string_view line(b.data() + start, end - start);
                     ++lineno;
                     if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
                       try {
                         recs.push_back(parse_json_line(line));
                       } catch (const std::exception& e) {
                         throw CorruptRecord(lineno, e.what());
                       }
                     }
                     start = end + 1;
                   }
                   std::size_t n = recs.size();
                   insert(req.matches[1], std::move(recs));
                   reply(res, 201, {{"ok", true}, {"loaded", n}});
                 }));

    server_.Post(R"(/([^/_][^/]*)/_bulk_docs)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                   auto j = nlohmann::json::parse(req.body);
                   std::vector<CanonicalRecord> recs;
                   for (const auto& d : j.at("docs")) recs.push_back(parse_json_document(d));
                   std::size_t n = recs.size();
                   insert(req.matches[1], std::move(recs));
                   reply(res, 201, {{"ok", true}, {"loaded", n}});
                 }));

    server_.Get(R"(/([^/_][^/]*)/_count)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  reply(res, 200, {{"count", count(req.matches[1])}});
                }));

    server_.Delete(R"(/([^/_][^/]*))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                     std::lock_guard lock(mu_);
                     dbs_.erase(req.matches[1]);
                     reply(res, 200, {{"ok", true}});
                   }));

    server_.Post(R"(/([^/_][^/]*)/_find)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                   auto j = nlohmann::json::parse(req.body);
                   auto pred = mock::parse_mango_selector(j.at("selector"));
                   std::uint64_t limit = j.value("limit", std::uint64_t{25});
                   std::vector<std::string> fields;
                   if (j.contains("fields")) fields = j.at("fields").get<std::vector<std::string>>();
                   nlohmann::json docs = nlohmann::json::array();
                   std::lock_guard lock(mu_);
                   auto it = dbs_.find(req.matches[1]);
                   if (it == dbs_.end()) return fail(res, 404, "Database does not exist.");
                   for (const auto& r : it->second.records) {
                     if (docs.size() >= limit) break;
                     if (!pred(r.title)) continue;
                     nlohmann::json full = nlohmann::json::parse(to_json_document(r));
                     if (fields.empty()) {
                       docs.push_back(std::move(full));
                     } else {
                       nlohmann::json d = nlohmann::json::object();
                       for (const auto& f : fields)
                         if (full.contains(f)) d[f] = full[f];
                       docs.push_back(std::move(d));
                     }
                   }
                   reply(res, 200, {{"docs", std::move(docs)}});
                 }));

    server_.Put(R"(/([^/_][^/]*)/_design/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  auto j = nlohmann::json::parse(req.body);
                  mock::parse_map_function(j.at("views").at("q").at("map").get<std::string>());
                  std::lock_guard lock(mu_);
                  auto& db = dbs_[req.matches[1]];
                  std::string name = req.matches[2];
                  if (db.design_docs.count(name)) return fail(res, 409, "Document update conflict.");
                  db.design_docs[name] = req.body;
                  reply(res, 201, {{"ok", true}, {"id", "_design/" + name}});
                }));

    server_.Get(R"(/([^/_][^/]*)/_design/([^/]+)/_view/([^/?]+))",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  std::lock_guard lock(mu_);
                  auto it = dbs_.find(req.matches[1]);
                  if (it == dbs_.end()) return fail(res, 404, "Database does not exist.");
                  auto d = it->second.design_docs.find(req.matches[2]);
                  if (d == it->second.design_docs.end()) return fail(res, 404, "missing design document");
                  auto j = nlohmann::json::parse(d->second);
                  auto view = mock::parse_map_function(
                      j.at("views").at(std::string(req.matches[3])).at("map").get<std::string>());
                  std::map<std::pair<std::string, int>, std::uint64_t> counts;
                  for (const auto& r : it->second.records) {
                    if (view.filter && !(*view.filter)(r.title)) continue;
                    for (const auto& a : r.authors) ++counts[{a, view.key_has_year ? r.year : 0}];
                  }
                  nlohmann::json rows = nlohmann::json::array();
                  for (const auto& [k, n] : counts) {
                    nlohmann::json key = view.key_has_year ? nlohmann::json::array({k.first, k.second})
                                                           : nlohmann::json(k.first);
                    rows.push_back({{"key", std::move(key)}, {"value", n}});
                  }
                  reply(res, 200, {{"rows", std::move(rows)}});
                }));

    server_.Post("/query/service", guarded([this](const httplib::Request& req, httplib::Response& res) {
                   std::string statement;
                   if (req.has_param("statement")) {
                     statement = req.get_param_value("statement");
                   } else {
                     statement = nlohmann::json::parse(req.body).at("statement").get<std::string>();
                   }
                   auto q = mock::parse_n1ql(statement);
                   std::lock_guard lock(mu_);
                   auto it = dbs_.find(q.from);
                   if (it == dbs_.end()) return fail(res, 404, "Keyspace not found: " + q.from);
                   reply(res, 200, {{"status", "success"}, {"results", mock::run_n1ql(q, it->second.records)}});
                 }));
  }

  httplib::Server server_;
  std::thread thread_;
  std::string host_ = "127.0.0.1";
  int port_ = -1;
  std::atomic<long long> delay_ms_{0};
  std::atomic<std::uint64_t> requests_{0};
  mutable std::mutex mu_;
  std::map<std::string, Database> dbs_;
};

}  // namespace dodbench

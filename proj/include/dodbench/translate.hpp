#pragma once

// QuerySpec -> backend query text.
//
//   XQuery31        FLWOR; aggregation with group by / order by
//   XQuery10        FLWOR; aggregation via distinct-values + let + order by
//   MongoPipeline   shell script: find() for selection, aggregate() with
//                   $unwind over authors for aggregation
//   CouchMangoView  HTTP requests: Mango _find for selection; a map/reduce
//                   design document (installed as setup) for aggregation
//   N1QL            SELECT ... UNNEST d.authors ... GROUP BY
//
// Every dialect folds the constraint into a single boolean expression and
// orders aggregation output by group key.

#include <cstdint>
#include <cstdio>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "dodbench/datagen.hpp"
#include "dodbench/error.hpp"
#include "dodbench/query_model.hpp"

namespace dodbench {

enum class Dialect { XQuery31, XQuery10, MongoPipeline, CouchMangoView, N1QL };

inline constexpr Dialect kAllDialects[] = {Dialect::XQuery31, Dialect::XQuery10, Dialect::MongoPipeline,
                                           Dialect::CouchMangoView, Dialect::N1QL};

inline std::string_view to_string(Dialect d) {
  switch (d) {
    case Dialect::XQuery31: return "XQuery31";
    case Dialect::XQuery10: return "XQuery10";
    case Dialect::MongoPipeline: return "MongoPipeline";
    case Dialect::CouchMangoView: return "CouchMangoView";
    case Dialect::N1QL: return "N1QL";
  }
  return "?";
}

inline Dialect parse_dialect(std::string_view s) {
  std::string l = lowercase(s);
  if (l == "xquery31" || l == "xquery3.1") return Dialect::XQuery31;
  if (l == "xquery10" || l == "xquery1.0") return Dialect::XQuery10;
  if (l == "mongopipeline" || l == "mongo" || l == "mongodb") return Dialect::MongoPipeline;
  if (l == "couchmangoview" || l == "couch" || l == "couchdb") return Dialect::CouchMangoView;
  if (l == "n1ql" || l == "couchbase") return Dialect::N1QL;
  throw ConfigError("unknown dialect '" + std::string(s) + "'");
}

// Extension used when writing query texts to files.
inline std::string_view file_extension(Dialect d) {
  switch (d) {
    case Dialect::XQuery31:
    case Dialect::XQuery10: return "xq";
    case Dialect::MongoPipeline: return "js";
    case Dialect::CouchMangoView: return "http";
    case Dialect::N1QL: return "n1ql";
  }
  return "txt";
}

struct TranslateOptions {
  std::string collection = "dblp";
  MatchOptions match;
};

struct TranslatedQuery {
  Dialect dialect = Dialect::XQuery31;
  std::string main_text;
  std::vector<std::string> setup_texts;
  friend bool operator==(const TranslatedQuery&, const TranslatedQuery&) = default;
};

namespace detail {

inline std::string xquery_string(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  out += '"';
  return out;
}

inline std::string json_quote(std::string_view s) {
  std::string out;
  json_string(out, s);
  return out;
}

inline std::string regex_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (std::string_view("\\^$.|?*+()[]{}").find(c) != std::string_view::npos) out += '\\';
    out += c;
  }
  return out;
}

inline std::string n1ql_identifier(std::string_view s) {
  std::string out = "`";
  for (char c : s) {
    if (c == '`') out += "``";
    else out += c;
  }
  out += '`';
  return out;
}

// Term as it appears in generated text: lowercased when matching ignores case
// (the title side is lowercased by the backend).
inline std::string term_text(const TermConstraint& c, const TranslateOptions& o) {
  return o.match.case_sensitive ? c.term.term : lowercase(c.term.term);
}

inline std::string join_constraint(const ConstraintExpr& f, const std::string& and_op, const std::string& or_op,
                                   const std::function<std::string(const TermConstraint&)>& leaf) {
  std::string out;
  const std::string& sep = f.op() == BoolOp::Or ? or_op : and_op;
  for (std::size_t i = 0; i < f.leaves().size(); ++i) {
    if (i) out += sep;
    out += leaf(f.leaves()[i]);
  }
  return out;
}

// ---- XQuery --------------------------------------------------------------

inline std::string xquery_predicate(const ConstraintExpr& f, const TranslateOptions& o, std::string_view title_path) {
  return join_constraint(f, " and ", " or ", [&](const TermConstraint& c) {
    std::string subject = o.match.case_sensitive ? std::string(title_path)
                                                 : "lower-case(" + std::string(title_path) + ")";
    return "contains(" + subject + ", " + xquery_string(term_text(c, o)) + ")";
  });
}

inline std::string xquery_source(const TranslateOptions& o) {
  return "collection(" + xquery_string(o.collection) + ")/dblp/*";
}

inline std::string xquery_selection(const QuerySpec& q, const TranslateOptions& o) {
  std::string s = "for $r in " + xquery_source(o) + "\n";
  s += "where " + xquery_predicate(*q.filter, o, "$r/title") + "\n";
  s += "return $r/title\n";
  return s;
}

inline std::string xquery31_aggregation(const QuerySpec& q, const TranslateOptions& o) {
  const bool by_year = q.aggregation->group_by == GroupBy::AuthorYear;
  std::string s = "for $r in " + xquery_source(o) + "\n";
  if (q.filter) s += "where " + xquery_predicate(*q.filter, o, "$r/title") + "\n";
  s += "for $a in $r/author\n";
  if (by_year) {
    s += "let $author := string($a), $year := xs:integer($r/year)\n";
    s += "group by $author, $year\n";
    s += "order by $author, $year\n";
    s += "return <row><author>{$author}</author><year>{$year}</year><count>{count($a)}</count></row>\n";
  } else {
    s += "let $author := string($a)\n";
    s += "group by $author\n";
    s += "order by $author\n";
    s += "return <row><author>{$author}</author><count>{count($a)}</count></row>\n";
  }
  return s;
}

inline std::string xquery10_aggregation(const QuerySpec& q, const TranslateOptions& o) {
  const bool by_year = q.aggregation->group_by == GroupBy::AuthorYear;
  std::string s = "let $records := " + xquery_source(o);
  if (q.filter) s += "[" + xquery_predicate(*q.filter, o, "title") + "]";
  s += "\n";
  s += "for $author in distinct-values($records/author)\n";
  if (by_year) {
    s += "for $year in distinct-values($records[author = $author]/year)\n";
    s += "let $count := count($records[year = $year]/author[. = $author])\n";
    s += "order by $author, xs:integer($year)\n";
    s += "return <row><author>{$author}</author><year>{$year}</year><count>{$count}</count></row>\n";
  } else {
    s += "let $count := count($records/author[. = $author])\n";
    s += "order by $author\n";
    s += "return <row><author>{$author}</author><count>{$count}</count></row>\n";
  }
  return s;
}

// ---- MongoDB -------------------------------------------------------------

inline std::string mongo_filter(const ConstraintExpr& f, const TranslateOptions& o) {
  auto leaf = [&](const TermConstraint& c) {
    std::string s = "{\"title\": {\"$regex\": " + json_quote(regex_escape(term_text(c, o)));
    if (!o.match.case_sensitive) s += ", \"$options\": \"i\"";
    return s + "}}";
  };
  if (f.is_leaf()) return leaf(f.leaves().front());
  std::string op = f.op() == BoolOp::And ? "$and" : "$or";
  return "{\"" + op + "\": [" + join_constraint(f, ", ", ", ", leaf) + "]}";
}

inline std::string mongo_collection(const TranslateOptions& o) {
  return "db.getCollection(" + json_quote(o.collection) + ")";
}

inline constexpr std::string_view kMongoPrint = ".forEach(function (doc) { print(JSON.stringify(doc)); });\n";

inline std::string mongo_selection(const QuerySpec& q, const TranslateOptions& o) {
  return mongo_collection(o) + ".find(\n  " + mongo_filter(*q.filter, o) + ",\n  {\"_id\": 0, \"title\": 1}\n)" +
         std::string(kMongoPrint);
}

inline std::string mongo_aggregation(const QuerySpec& q, const TranslateOptions& o) {
  const bool by_year = q.aggregation->group_by == GroupBy::AuthorYear;
  std::string s = mongo_collection(o) + ".aggregate([\n";
  if (q.filter) s += "  {\"$match\": " + mongo_filter(*q.filter, o) + "},\n";
  s += "  {\"$unwind\": \"$authors\"},\n";
  if (by_year) {
    s += "  {\"$group\": {\"_id\": {\"author\": \"$authors\", \"year\": \"$year\"}, \"count\": {\"$sum\": 1}}},\n";
    s += "  {\"$sort\": {\"_id.author\": 1, \"_id.year\": 1}}\n";
  } else {
    s += "  {\"$group\": {\"_id\": \"$authors\", \"count\": {\"$sum\": 1}}},\n";
    s += "  {\"$sort\": {\"_id\": 1}}\n";
  }
  s += "], {\"allowDiskUse\": true})" + std::string(kMongoPrint);
  return s;
}

// ---- CouchDB -------------------------------------------------------------

inline std::string url_path_segment(std::string_view s) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_' ||
        c == '.' || c == '~') {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += kHex[c >> 4];
      out += kHex[c & 0xF];
    }
  }
  return out;
}

inline std::string mango_selector(const ConstraintExpr& f, const TranslateOptions& o) {
  auto leaf = [&](const TermConstraint& c) {
    std::string re = (o.match.case_sensitive ? "" : "(?i)") + regex_escape(term_text(c, o));
    return "{\"title\": {\"$regex\": " + json_quote(re) + "}}";
  };
  if (f.is_leaf()) return leaf(f.leaves().front());
  std::string op = f.op() == BoolOp::And ? "$and" : "$or";
  return "{\"" + op + "\": [" + join_constraint(f, ", ", ", ", leaf) + "]}";
}

// Largest result window requested from _find; Mango otherwise caps at 25.
inline constexpr std::uint64_t kMangoLimit = 1000000000;

inline std::string couch_selection(const QuerySpec& q, const TranslateOptions& o) {
  std::string s = "POST /" + url_path_segment(o.collection) + "/_find\n";
  s += "Content-Type: application/json\n\n";
  s += "{\"selector\": " + mango_selector(*q.filter, o) + ", \"fields\": [\"title\"], \"limit\": " +
       std::to_string(kMangoLimit) + "}\n";
  return s;
}

inline std::string couch_map_function(const QuerySpec& q, const TranslateOptions& o) {
  const bool by_year = q.aggregation->group_by == GroupBy::AuthorYear;
  std::string key = by_year ? "[doc.authors[i], doc.year]" : "doc.authors[i]";
  std::string emit_loop = "for (var i = 0; i < doc.authors.length; i++) { emit(" + key + ", 1); }";
  std::string f = "function (doc) { if (!Array.isArray(doc.authors) || typeof doc.title !== 'string') { return; } ";
  if (q.filter) {
    std::string subject = o.match.case_sensitive ? "doc.title" : "title";
    if (!o.match.case_sensitive) f += "var title = doc.title.toLowerCase(); ";
    std::string cond = join_constraint(*q.filter, " && ", " || ", [&](const TermConstraint& c) {
      return subject + ".indexOf(" + json_quote(term_text(c, o)) + ") !== -1";
    });
    f += "if (" + cond + ") { " + emit_loop + " } }";
  } else {
    f += emit_loop + " }";
  }
  return f;
}

// Stable per (query, terms, matching mode, collection): reinstalling the same
// query targets the same design document.
inline std::string couch_design_name(const QuerySpec& q, const TranslateOptions& o) {
  std::string key = to_text(q);
  for (const auto& t : q.terms()) key += "|" + t.term;
  key += o.match.case_sensitive ? "|cs" : "|ci";
  key += "|" + o.collection;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(key)));
  return std::string("dodbench_") + buf;
}

inline TranslatedQuery couch_aggregation(const QuerySpec& q, const TranslateOptions& o) {
  std::string db = url_path_segment(o.collection);
  std::string design = couch_design_name(q, o);
  TranslatedQuery tq;
  tq.dialect = Dialect::CouchMangoView;
  std::string doc = "{\"_id\": " + json_quote("_design/" + design) +
                    ", \"language\": \"javascript\", \"views\": {\"q\": {\"map\": " +
                    json_quote(couch_map_function(q, o)) + ", \"reduce\": \"_count\"}}}";
  tq.setup_texts.push_back("PUT /" + db + "/_design/" + design + "\nContent-Type: application/json\n\n" + doc + "\n");
  tq.main_text = "GET /" + db + "/_design/" + design + "/_view/q?group=true\n";
  return tq;
}

// ---- Couchbase N1QL ------------------------------------------------------

inline std::string n1ql_predicate(const ConstraintExpr& f, const TranslateOptions& o) {
  return join_constraint(f, " AND ", " OR ", [&](const TermConstraint& c) {
    std::string subject = o.match.case_sensitive ? "d.title" : "LOWER(d.title)";
    return "CONTAINS(" + subject + ", " + json_quote(term_text(c, o)) + ")";
  });
}

inline std::string n1ql_selection(const QuerySpec& q, const TranslateOptions& o) {
  return "SELECT d.title FROM " + n1ql_identifier(o.collection) + " AS d WHERE " + n1ql_predicate(*q.filter, o) +
         ";\n";
}

inline std::string n1ql_aggregation(const QuerySpec& q, const TranslateOptions& o) {
  const bool by_year = q.aggregation->group_by == GroupBy::AuthorYear;
  std::string s = by_year ? "SELECT a AS author, d.year AS year, COUNT(META(d).id) AS `count`"
                          : "SELECT a AS author, COUNT(META(d).id) AS `count`";
  s += " FROM " + n1ql_identifier(o.collection) + " AS d UNNEST d.authors AS a";
  if (q.filter) s += " WHERE " + n1ql_predicate(*q.filter, o);
  s += by_year ? " GROUP BY a, d.year ORDER BY a, d.year;\n" : " GROUP BY a ORDER BY a;\n";
  return s;
}

}  // namespace detail

inline TranslatedQuery translate(const QuerySpec& q, Dialect d, const TranslateOptions& o = {}) {
  if (q.is_selection() && !q.filter) throw UnsupportedCombination("selection query without a filter");
  TranslatedQuery tq;
  tq.dialect = d;
  switch (d) {
    case Dialect::XQuery31:
      tq.main_text = q.is_selection() ? detail::xquery_selection(q, o) : detail::xquery31_aggregation(q, o);
      break;
    case Dialect::XQuery10:
      tq.main_text = q.is_selection() ? detail::xquery_selection(q, o) : detail::xquery10_aggregation(q, o);
      break;
    case Dialect::MongoPipeline:
      tq.main_text = q.is_selection() ? detail::mongo_selection(q, o) : detail::mongo_aggregation(q, o);
      break;
    case Dialect::CouchMangoView:
      if (!q.is_selection()) return detail::couch_aggregation(q, o);
      tq.main_text = detail::couch_selection(q, o);
      break;
    case Dialect::N1QL:
      tq.main_text = q.is_selection() ? detail::n1ql_selection(q, o) : detail::n1ql_aggregation(q, o);
      break;
  }
  return tq;
}

// Human-readable notes on the strategy translate() applies.
inline std::string explain(const QuerySpec& q, Dialect d, const TranslateOptions& o = {}) {
  std::string s = to_text(q) + " -> " + std::string(to_string(d)) + "\n";
  if (q.filter) {
    if (q.filter->is_leaf()) {
      s += "- single constraint: one substring predicate on the title\n";
    } else {
      bool conj = q.filter->op() == BoolOp::And;
      s += std::string("- constraint folding: ") + std::to_string(q.filter->leaves().size()) + " term predicates " +
           (conj ? "and-folded into one conditional expression (intersection of the single-term results)"
                 : "or-folded into one conditional expression (union of the single-term results)") +
           "\n";
    }
    s += std::string("- substring matching is ") + (o.match.case_sensitive ? "case-sensitive" : "case-insensitive") +
         "\n";
  } else {
    s += "- no filter: every record participates\n";
  }
  if (q.is_selection()) {
    s += "- selection query: projects titles, no grouping needed\n";
    switch (d) {
      case Dialect::XQuery31:
      case Dialect::XQuery10: s += "- FLWOR with contains() in the where clause\n"; break;
      case Dialect::MongoPipeline: s += "- find() with $regex conditions\n"; break;
      case Dialect::CouchMangoView: s += "- Mango _find selector with $regex conditions\n"; break;
      case Dialect::N1QL: s += "- SELECT with CONTAINS() in the WHERE clause\n"; break;
    }
    return s;
  }
  const bool by_year = q.aggregation->group_by == GroupBy::AuthorYear;
  s += std::string("- aggregation: count per ") + (by_year ? "(author, year)" : "author") +
       ", one pair per author occurrence, ordered by group key\n";
  switch (d) {
    case Dialect::XQuery31: s += "- FOR ... WHERE ... GROUP BY ... ORDER BY over each author element\n"; break;
    case Dialect::XQuery10:
      s += "- FOR ... LET ... ORDER BY over distinct-values of author names (no group by clause)\n";
      break;
    case Dialect::MongoPipeline:
      s += "- aggregation pipeline: $match, $unwind over authors, $group with $sum, $sort\n";
      break;
    case Dialect::CouchMangoView:
      s += "- materialized view: map-side filtering and author flattening, reduce-side count (_count); "
           "view installed as setup before timing\n";
      break;
    case Dialect::N1QL: s += "- UNNEST over authors, GROUP BY, ORDER BY\n"; break;
  }
  return s;
}

}  // namespace dodbench

#pragma once

// Backend-neutral model of the nine benchmark queries plus the two text
// primitives every evaluator shares: title tokenization and substring match.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "dodbench/core_model.hpp"
#include "dodbench/error.hpp"

namespace dodbench {

// ASCII-only case folding; bytes >= 0x80 pass through untouched.
inline char fold_ascii(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

inline std::string lowercase(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = fold_ascii(c);
  return out;
}

// Lowercased tokens separated by any byte that is not an ASCII letter or
// digit. Multi-byte UTF-8 sequences count as word characters.
inline std::vector<std::string> tokenize(std::string_view title) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : title) {
    unsigned char u = static_cast<unsigned char>(c);
    bool word = u >= 0x80 || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
    if (word) {
      cur.push_back(fold_ascii(c));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

struct MatchOptions {
  bool case_sensitive = false;
};

// True iff `term` occurs as a contiguous substring of `title`.
inline bool contains(std::string_view title, std::string_view term, MatchOptions opts = {}) {
  if (term.empty()) return true;
  if (opts.case_sensitive) return title.find(term) != std::string_view::npos;
  auto it = std::search(title.begin(), title.end(), term.begin(), term.end(),
                        [](char a, char b) { return fold_ascii(a) == fold_ascii(b); });
  return it != title.end();
}

enum class QueryId { Q1 = 1, Q2, Q3, Q4, Q5, Q6, Q7, Q8, Q9 };

inline int number(QueryId id) { return static_cast<int>(id); }

inline bool is_selection(QueryId id) { return number(id) <= 5; }

// Number of term parameters each query shape takes.
inline std::size_t arity(QueryId id) {
  switch (id) {
    case QueryId::Q1: return 1;
    case QueryId::Q2:
    case QueryId::Q3: return 2;
    case QueryId::Q6:
    case QueryId::Q7: return 0;
    default: return 3;
  }
}

struct TermConstraint {
  TermParam term;
  friend bool operator==(const TermConstraint&, const TermConstraint&) = default;
};

enum class BoolOp { And, Or };

// Either a single leaf or one And/Or node over >= 2 leaves. The nine query
// shapes never nest connectives, so a flat node is the whole tree.
class ConstraintExpr {
 public:
  static ConstraintExpr leaf(TermParam t) { return ConstraintExpr(std::nullopt, {TermConstraint{std::move(t)}}); }

  static ConstraintExpr all_of(std::vector<TermParam> terms, bool allow_repeated = false) {
    return node(BoolOp::And, std::move(terms), allow_repeated);
  }
  static ConstraintExpr any_of(std::vector<TermParam> terms, bool allow_repeated = false) {
    return node(BoolOp::Or, std::move(terms), allow_repeated);
  }

  bool is_leaf() const noexcept { return !op_; }
  std::optional<BoolOp> op() const noexcept { return op_; }
  const std::vector<TermConstraint>& leaves() const noexcept { return leaves_; }

  template <typename Pred>
  bool evaluate(Pred&& leaf_matches) const {
    if (!op_) return leaf_matches(leaves_.front());
    if (*op_ == BoolOp::And) {
      for (const auto& l : leaves_)
        if (!leaf_matches(l)) return false;
      return true;
    }
    for (const auto& l : leaves_)
      if (leaf_matches(l)) return true;
    return false;
  }

  bool matches(std::string_view title, MatchOptions opts = {}) const {
    return evaluate([&](const TermConstraint& c) { return contains(title, c.term.term, opts); });
  }

  friend bool operator==(const ConstraintExpr&, const ConstraintExpr&) = default;

 private:
  ConstraintExpr(std::optional<BoolOp> op, std::vector<TermConstraint> leaves)
      : op_(op), leaves_(std::move(leaves)) {}

  static ConstraintExpr node(BoolOp op, std::vector<TermParam> terms, bool allow_repeated) {
    if (terms.size() < 2) throw InvalidQuery("And/Or needs at least two terms");
    std::stable_sort(terms.begin(), terms.end(),
                     [](const TermParam& a, const TermParam& b) { return a.index < b.index; });
    if (!allow_repeated)
      for (std::size_t i = 1; i < terms.size(); ++i)
        if (terms[i].index == terms[i - 1].index)
          throw InvalidQuery("term index " + std::to_string(terms[i].index) + " repeated in one constraint");
    std::vector<TermConstraint> leaves;
    for (auto& t : terms) leaves.push_back({std::move(t)});
    return ConstraintExpr(op, std::move(leaves));
  }

  std::optional<BoolOp> op_;
  std::vector<TermConstraint> leaves_;
};

enum class Projection {
  Title,             // {title}
  AuthorCount,       // {author_name, count}
  AuthorYearCount,   // {author_name, year, count}
};

enum class GroupBy { Author, AuthorYear };

struct AggregationSpec {
  GroupBy group_by = GroupBy::Author;
  friend bool operator==(const AggregationSpec&, const AggregationSpec&) = default;
};

struct QuerySpec {
  QueryId id = QueryId::Q1;
  std::optional<ConstraintExpr> filter;
  Projection projection = Projection::Title;
  std::optional<AggregationSpec> aggregation;

  bool is_selection() const noexcept { return !aggregation.has_value(); }

  // Term parameters referenced by the filter, in index order.
  std::vector<TermParam> terms() const {
    std::vector<TermParam> out;
    if (filter)
      for (const auto& l : filter->leaves()) out.push_back(l.term);
    return out;
  }

  friend bool operator==(const QuerySpec&, const QuerySpec&) = default;
};

struct BuildOptions {
  // Permits Q2(i,i)-style degenerate constraints; intended for tests.
  bool allow_repeated_terms = false;
};

inline QuerySpec build_query(QueryId id, std::vector<TermParam> terms, BuildOptions opts = {}) {
  if (terms.size() != arity(id))
    throw ArityMismatch("Q" + std::to_string(number(id)) + " takes " + std::to_string(arity(id)) +
                        " term(s), got " + std::to_string(terms.size()));
  for (const auto& t : terms)
    if (t.term.empty()) throw InvalidQuery("empty term");
  QuerySpec q;
  q.id = id;
  switch (id) {
    case QueryId::Q1:
      q.filter = ConstraintExpr::leaf(std::move(terms.front()));
      break;
    case QueryId::Q2:
    case QueryId::Q4:
    case QueryId::Q8:
      q.filter = ConstraintExpr::all_of(std::move(terms), opts.allow_repeated_terms);
      break;
    case QueryId::Q3:
    case QueryId::Q5:
    case QueryId::Q9:
      q.filter = ConstraintExpr::any_of(std::move(terms), opts.allow_repeated_terms);
      break;
    case QueryId::Q6:
    case QueryId::Q7:
      break;
  }
  if (id == QueryId::Q6) {
    q.projection = Projection::AuthorCount;
    q.aggregation = AggregationSpec{GroupBy::Author};
  } else if (!is_selection(id)) {
    q.projection = Projection::AuthorYearCount;
    q.aggregation = AggregationSpec{GroupBy::AuthorYear};
  }
  return q;
}

// ---------------------------------------------------------------------------
// Canonical text form: "Q1(i=1)", "Q2(i=1,j=2)", "Q4(i=1,j=2,k=3)", "Q6".
// Index letters are positional (i, j, k); values are term indices 1..3.

inline std::string to_text(const QuerySpec& q) {
  std::string s = "Q" + std::to_string(number(q.id));
  auto terms = q.terms();
  if (terms.empty()) return s;
  static constexpr char kLetters[] = {'i', 'j', 'k'};
  s += '(';
  for (std::size_t n = 0; n < terms.size(); ++n) {
    if (n) s += ',';
    s += kLetters[n < 3 ? n : 2];
    s += '=';
    s += std::to_string(terms[n].index);
  }
  s += ')';
  return s;
}

struct ParsedQueryText {
  QueryId id;
  std::vector<int> indices;
};

inline ParsedQueryText parse_query_text(std::string_view text) {
  auto fail = [&](const std::string& why) -> ParsedQueryText {
    throw InvalidQuery("cannot parse query '" + std::string(text) + "': " + why);
  };
  std::string_view s = text;
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  if (s.size() < 2 || (s[0] != 'Q' && s[0] != 'q')) return fail("expected Q1..Q9");
  if (s[1] < '1' || s[1] > '9') return fail("expected Q1..Q9");
  ParsedQueryText out{static_cast<QueryId>(s[1] - '0'), {}};
  s.remove_prefix(2);
  if (s.empty()) {
    if (arity(out.id) != 0) return fail("missing term indices");
    return out;
  }
  if (s.front() != '(' || s.back() != ')') return fail("expected '(' ... ')'");
  s = s.substr(1, s.size() - 2);
  static constexpr std::string_view kLetters = "ijk";
  std::size_t n = 0;
  while (!s.empty()) {
    auto comma = s.find(',');
    std::string_view part = s.substr(0, comma);
    s = comma == std::string_view::npos ? std::string_view{} : s.substr(comma + 1);
    while (!part.empty() && part.front() == ' ') part.remove_prefix(1);
    while (!part.empty() && part.back() == ' ') part.remove_suffix(1);
    if (part.size() != 3 || part[1] != '=') return fail("bad index '" + std::string(part) + "'");
    if (n >= kLetters.size() || part[0] != kLetters[n]) return fail("indices must be named i, j, k in order");
    if (part[2] < '1' || part[2] > '3') return fail("term index must be 1..3");
    out.indices.push_back(part[2] - '0');
    ++n;
  }
  if (out.indices.size() != arity(out.id))
    throw ArityMismatch("Q" + std::to_string(number(out.id)) + " takes " + std::to_string(arity(out.id)) +
                        " term(s), got " + std::to_string(out.indices.size()));
  return out;
}

// Resolves term indices against the configured term table (t1..t3).
inline QuerySpec parse_query(std::string_view text, const std::vector<TermParam>& table, BuildOptions opts = {}) {
  ParsedQueryText p = parse_query_text(text);
  std::vector<TermParam> terms;
  for (int idx : p.indices) {
    auto it = std::find_if(table.begin(), table.end(), [&](const TermParam& t) { return t.index == idx; });
    if (it == table.end()) throw InvalidQuery("no term configured for index " + std::to_string(idx));
    terms.push_back(*it);
  }
  return build_query(p.id, std::move(terms), opts);
}

// The 15 query instances of the benchmark run: Q1 for each term, Q2/Q3 for
// each term pair, and one instance of each remaining query.
inline std::vector<QuerySpec> standard_workload(const std::vector<TermParam>& table = default_terms()) {
  std::vector<std::string> texts = {"Q1(i=1)",     "Q1(i=2)",     "Q1(i=3)",        "Q2(i=1,j=2)",
                                    "Q2(i=1,j=3)", "Q2(i=2,j=3)", "Q3(i=1,j=2)",    "Q3(i=1,j=3)",
                                    "Q3(i=2,j=3)", "Q4(i=1,j=2,k=3)", "Q5(i=1,j=2,k=3)", "Q6",
                                    "Q7",          "Q8(i=1,j=2,k=3)", "Q9(i=1,j=2,k=3)"};
  std::vector<QuerySpec> out;
  for (const auto& t : texts) out.push_back(parse_query(t, table));
  return out;
}

// Expands a CLI query selector: "Q1..Q9", "Q2..Q5", "Q1,Q6", or explicit
// canonical forms ("Q2(i=1,j=3)"). Bare ids expand to every standard instance.
inline std::vector<QuerySpec> expand_query_selector(std::string_view selector,
                                                    const std::vector<TermParam>& table = default_terms()) {
  auto workload = standard_workload(table);
  std::vector<QuerySpec> out;
  auto add_id = [&](int id) {
    for (const auto& q : workload)
      if (number(q.id) == id) out.push_back(q);
  };
  std::string_view s = selector;
  while (!s.empty()) {
    // Split on commas that are not inside parentheses.
    std::size_t depth = 0, cut = s.size();
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '(') ++depth;
      else if (s[i] == ')' && depth) --depth;
      else if (s[i] == ',' && depth == 0) {
        cut = i;
        break;
      }
    }
    std::string_view part = s.substr(0, cut);
    s = cut == s.size() ? std::string_view{} : s.substr(cut + 1);
    while (!part.empty() && part.front() == ' ') part.remove_prefix(1);
    while (!part.empty() && part.back() == ' ') part.remove_suffix(1);
    if (part.empty()) continue;
    auto bare_id = [&](std::string_view t) -> int {
      if (t.size() == 2 && (t[0] == 'Q' || t[0] == 'q') && t[1] >= '1' && t[1] <= '9') return t[1] - '0';
      return 0;
    };
    if (auto dots = part.find(".."); dots != std::string_view::npos) {
      int lo = bare_id(part.substr(0, dots));
      int hi = bare_id(part.substr(dots + 2));
      if (!lo || !hi || lo > hi) throw InvalidQuery("bad query range '" + std::string(part) + "'");
      for (int id = lo; id <= hi; ++id) add_id(id);
    } else if (int id = bare_id(part)) {
      add_id(id);
    } else {
      out.push_back(parse_query(part, table));
    }
  }
  return out;
}

}  // namespace dodbench

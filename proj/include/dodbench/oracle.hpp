#pragma once

// In-process reference evaluator. Its answers define correctness for every
// backend translation, so it favors obviously-correct scans; the trigram
// index only narrows candidates and every candidate is re-checked.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dodbench/core_model.hpp"
#include "dodbench/error.hpp"
#include "dodbench/query_model.hpp"

namespace dodbench {

struct DatasetOptions {
  bool build_text_index = true;
};

// Trigram postings over ASCII-lowercased titles.
class TitleIndex {
 public:
  TitleIndex() = default;

  explicit TitleIndex(const std::vector<CanonicalRecord>& records) {
    for (std::size_t i = 0; i < records.size(); ++i) {
      std::string t = lowercase(records[i].title);
      std::vector<std::uint32_t> grams;
      for (std::size_t p = 0; p + 3 <= t.size(); ++p) grams.push_back(gram(t, p));
      std::sort(grams.begin(), grams.end());
      grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
      for (auto g : grams) postings_[g].push_back(static_cast<std::uint32_t>(i));
    }
  }

  // Record indices that may contain `term` (case-insensitively), sorted.
  // nullopt means "no pruning possible": the term is shorter than a trigram.
  std::optional<std::vector<std::uint32_t>> candidates(std::string_view term) const {
    std::string t = lowercase(term);
    if (t.size() < 3) return std::nullopt;
    std::vector<const std::vector<std::uint32_t>*> lists;
    for (std::size_t p = 0; p + 3 <= t.size(); ++p) {
      auto it = postings_.find(gram(t, p));
      if (it == postings_.end()) return std::vector<std::uint32_t>{};
      lists.push_back(&it->second);
    }
    std::sort(lists.begin(), lists.end(), [](auto* a, auto* b) { return a->size() < b->size(); });
    std::vector<std::uint32_t> acc = *lists.front();
    std::vector<std::uint32_t> tmp;
    for (std::size_t l = 1; l < lists.size() && !acc.empty(); ++l) {
      tmp.clear();
      std::set_intersection(acc.begin(), acc.end(), lists[l]->begin(), lists[l]->end(), std::back_inserter(tmp));
      acc.swap(tmp);
    }
    return acc;
  }

 private:
  static std::uint32_t gram(const std::string& s, std::size_t p) {
    return (static_cast<std::uint32_t>(static_cast<unsigned char>(s[p])) << 16) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(s[p + 1])) << 8) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(s[p + 2]));
  }

  std::unordered_map<std::uint32_t, std::vector<std::uint32_t>> postings_;
};

class Dataset {
 public:
  Dataset() = default;

  explicit Dataset(std::vector<CanonicalRecord> records, DatasetOptions opts = {}) : records_(std::move(records)) {
    std::unordered_set<std::string_view> ids;
    ids.reserve(records_.size());
    for (std::size_t i = 0; i < records_.size(); ++i) {
      const auto& r = records_[i];
      if (auto v = validate_record(r); !v.empty()) throw CorruptRecord(i + 1, v.front());
      if (!ids.insert(r.record_id).second) throw CorruptRecord(i + 1, "duplicate record_id '" + r.record_id + "'");
      pair_count_ += r.authors.size();
      for (auto& tok : tokenize(r.title)) vocabulary_.insert(std::move(tok));
    }
    if (opts.build_text_index) index_.emplace(records_);
  }

  const std::vector<CanonicalRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  std::uint64_t pair_count() const noexcept { return pair_count_; }
  const std::set<std::string>& vocabulary() const noexcept { return vocabulary_; }
  const TitleIndex* index() const noexcept { return index_ ? &*index_ : nullptr; }

 private:
  std::vector<CanonicalRecord> records_;
  std::uint64_t pair_count_ = 0;
  std::set<std::string> vocabulary_;
  std::optional<TitleIndex> index_;
};

// Reads a canonical file. Duplicate ids surface as CorruptRecord with the
// line number of the second occurrence.
inline Dataset load_dataset(std::istream& in, DatasetOptions opts = {}) {
  std::vector<CanonicalRecord> records;
  std::vector<std::size_t> lines;
  std::unordered_set<std::string> ids;
  std::size_t lineno = 0;
  std::string line;
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
    if (!ids.insert(r.record_id).second) throw CorruptRecord(lineno, "duplicate record_id '" + r.record_id + "'");
    records.push_back(std::move(r));
  }
  if (in.bad()) throw IoFailure("read error in canonical stream");
  return Dataset(std::move(records), opts);
}

inline Dataset load_dataset(const std::string& path, DatasetOptions opts = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path);
  return load_dataset(in, opts);
}

struct SelectionRow {
  std::size_t record_index = 0;
  std::string title;
  friend bool operator==(const SelectionRow&, const SelectionRow&) = default;
};

struct GroupRow {
  std::string author;
  std::optional<int> year;  // set for {author, year} groupings
  std::uint64_t count = 0;
  friend bool operator==(const GroupRow&, const GroupRow&) = default;
};

// Selection rows keep record order; group rows are sorted by (author, year).
struct ResultSet {
  bool aggregation = false;
  std::vector<SelectionRow> rows;
  std::vector<GroupRow> groups;

  std::size_t row_count() const noexcept { return aggregation ? groups.size() : rows.size(); }
  friend bool operator==(const ResultSet&, const ResultSet&) = default;
};

struct EvalOptions {
  MatchOptions match;
  bool use_index = true;
};

namespace detail {

// Sorted record indices whose titles satisfy `filter` (all records when the
// query has no filter).
inline std::vector<std::uint32_t> matching_records(const Dataset& ds, const std::optional<ConstraintExpr>& filter,
                                                   const EvalOptions& opts) {
  const auto& recs = ds.records();
  std::vector<std::uint32_t> out;
  if (!filter) {
    out.resize(recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) out[i] = static_cast<std::uint32_t>(i);
    return out;
  }
  std::optional<std::vector<std::uint32_t>> cand;
  if (opts.use_index && ds.index()) {
    // Case-sensitive matches are a subset of case-insensitive ones, so the
    // folded index prunes soundly in both modes.
    const auto& leaves = filter->leaves();
    if (filter->is_leaf() || *filter->op() == BoolOp::And) {
      for (const auto& l : leaves) {
        auto c = ds.index()->candidates(l.term.term);
        if (c && (!cand || c->size() < cand->size())) cand = std::move(c);
      }
    } else {
      std::vector<std::uint32_t> acc, tmp;
      bool prunable = true;
      for (const auto& l : leaves) {
        auto c = ds.index()->candidates(l.term.term);
        if (!c) {
          prunable = false;
          break;
        }
        tmp.clear();
        std::set_union(acc.begin(), acc.end(), c->begin(), c->end(), std::back_inserter(tmp));
        acc.swap(tmp);
      }
      if (prunable) cand = std::move(acc);
    }
  }
  auto check = [&](std::uint32_t i) {
    if (filter->matches(recs[i].title, opts.match)) out.push_back(i);
  };
  if (cand) {
    for (auto i : *cand) check(i);
  } else {
    for (std::size_t i = 0; i < recs.size(); ++i) check(static_cast<std::uint32_t>(i));
  }
  return out;
}

}  // namespace detail

inline ResultSet evaluate(const Dataset& ds, const QuerySpec& q, EvalOptions opts = {}) {
  ResultSet rs;
  auto matched = detail::matching_records(ds, q.filter, opts);
  const auto& recs = ds.records();
  if (q.is_selection()) {
    rs.rows.reserve(matched.size());
    for (auto i : matched) rs.rows.push_back({i, recs[i].title});
    return rs;
  }
  rs.aggregation = true;
  const bool by_year = q.aggregation->group_by == GroupBy::AuthorYear;
  // Unwind: one (author, record) pair per author occurrence.
  std::map<std::pair<std::string_view, int>, std::uint64_t> counts;
  for (auto i : matched) {
    const auto& r = recs[i];
    for (const auto& a : r.authors) ++counts[{a, by_year ? r.year : 0}];
  }
  rs.groups.reserve(counts.size());
  for (const auto& [key, n] : counts) {
    GroupRow g;
    g.author = std::string(key.first);
    if (by_year) g.year = key.second;
    g.count = n;
    rs.groups.push_back(std::move(g));
  }
  return rs;
}

struct SelectivityReport {
  std::uint64_t n = 0;       // returned rows
  std::uint64_t N = 0;       // population
  double s = 0.0;            // 1 - n / N
};

// Population is the record count for selection queries and the number of
// (author, record) pairs for aggregation queries.
inline SelectivityReport selectivity(const Dataset& ds, const QuerySpec& q, const ResultSet& rs) {
  SelectivityReport rep;
  rep.n = rs.row_count();
  rep.N = q.is_selection() ? ds.size() : ds.pair_count();
  if (rep.N == 0) throw EmptyPopulation();
  rep.s = 1.0 - static_cast<double>(rep.n) / static_cast<double>(rep.N);
  return rep;
}

}  // namespace dodbench

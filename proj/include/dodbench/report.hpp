#pragma once

// Per-query timing statistics, figure-input CSVs and SVG bar charts.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "dodbench/bench_runner.hpp"
#include "dodbench/core_model.hpp"
#include "dodbench/csv.hpp"
#include "dodbench/error.hpp"
#include "dodbench/query_model.hpp"
#include "dodbench/xml_text.hpp"

namespace dodbench {

struct QueryStats {
  std::string backend;
  std::string query;
  std::string sf;
  std::optional<double> mean_ms;  // absent when no warm run succeeded
  double std_dev_ms = 0.0;
  std::size_t run_count = 0;    // warm successes
  std::size_t error_count = 0;  // warm errors and timeouts
  bool low_confidence = false;
};

// Sort key for query labels: by query number, then term indices.
inline std::tuple<int, std::vector<int>, std::string> query_order_key(const std::string& q) {
  try {
    auto p = parse_query_text(q);
    return {number(p.id), p.indices, q};
  } catch (const Error&) {
    return {100, {}, q};
  }
}

inline int sf_order(const std::string& sf) {
  try {
    return ScaleFactor::parse(sf).position();
  } catch (const Error&) {
    return 100;
  }
}

// Groups warm runs by (backend, query, sf). Cold runs never contribute.
inline std::vector<QueryStats> summarize(const std::vector<RunRecord>& runs) {
  struct Acc {
    std::vector<double> ms;
    std::size_t errors = 0;
  };
  std::map<std::tuple<std::string, std::string, std::string>, Acc> groups;
  for (const auto& r : runs) {
    if (r.phase != Phase::Warm) continue;
    auto& a = groups[{r.backend, r.query, r.sf}];
    if (r.outcome.ok()) a.ms.push_back(static_cast<double>(r.elapsed.count()) / 1e6);
    else ++a.errors;
  }
  std::vector<QueryStats> out;
  for (auto& [key, a] : groups) {
    QueryStats s;
    std::tie(s.backend, s.query, s.sf) = key;
    // Sorting first makes the floating-point sums independent of input order.
    std::sort(a.ms.begin(), a.ms.end());
    s.run_count = a.ms.size();
    s.error_count = a.errors;
    if (!a.ms.empty()) {
      long double sum = 0;
      for (double v : a.ms) sum += v;
      long double mean = sum / static_cast<long double>(a.ms.size());
      s.mean_ms = static_cast<double>(mean);
      if (a.ms.size() > 1) {
        long double ss = 0;
        for (double v : a.ms) ss += (v - mean) * (v - mean);
        s.std_dev_ms = static_cast<double>(std::sqrt(ss / static_cast<long double>(a.ms.size() - 1)));
      }
    }
    s.low_confidence = s.run_count < 2 || s.error_count > 0;
    out.push_back(std::move(s));
  }
  std::sort(out.begin(), out.end(), [](const QueryStats& a, const QueryStats& b) {
    return std::make_tuple(a.backend, query_order_key(a.query), sf_order(a.sf), a.sf) <
           std::make_tuple(b.backend, query_order_key(b.query), sf_order(b.sf), b.sf);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Selectivity rows as written by `oracle --emit selectivity`.

struct SelectivityRow {
  std::string query;
  std::string sf;
  std::uint64_t n = 0;
  std::uint64_t N = 0;
  double s = 0.0;
};

inline const csv::Row& selectivity_csv_header() {
  static const csv::Row h = {"query", "sf", "n", "N", "s"};
  return h;
}

inline std::string format_double(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string format_exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_selectivity_csv(std::ostream& out, const std::vector<SelectivityRow>& rows, bool header = true) {
  if (header) csv::write_row(out, selectivity_csv_header());
  for (const auto& r : rows)
    csv::write_row(out, {r.query, r.sf, std::to_string(r.n), std::to_string(r.N), format_exact(r.s)});
}

inline std::vector<SelectivityRow> read_selectivity_csv(std::istream& in) {
  auto rows = csv::read_all(in);
  std::vector<SelectivityRow> out;
  if (rows.empty()) return out;
  if (rows.front() != selectivity_csv_header()) throw Error("selectivity CSV header does not match");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 5) throw Error("selectivity CSV row " + std::to_string(i + 1) + " has wrong field count");
    out.push_back({r[0], r[1], std::stoull(r[2]), std::stoull(r[3]), std::stod(r[4])});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Figure CSVs

// File stem used for a query's figure data, e.g. Q2(i=1,j=3) -> q2_kw1a3.
inline std::string figure_name(const std::string& query) {
  ParsedQueryText p = parse_query_text(query);
  auto kws = [&](char sep) {
    std::string s = "kw";
    for (std::size_t i = 0; i < p.indices.size(); ++i) {
      if (i) s += sep;
      s += std::to_string(p.indices[i]);
    }
    return s;
  };
  switch (p.id) {
    case QueryId::Q1: return "q1_" + kws('a');
    case QueryId::Q2: return "q2_" + kws('a');
    case QueryId::Q3: return "q2_" + kws('o');
    case QueryId::Q4: return "q3_" + kws('a');
    case QueryId::Q5: return "q3_" + kws('o');
    case QueryId::Q6: return "count_docs_authors";
    case QueryId::Q7: return "count_docs_authors_year";
    case QueryId::Q8: return "count_all_authors_year_" + kws('a');
    case QueryId::Q9: return "count_all_authors_year_" + kws('o');
  }
  return "query";
}

// Column prefix for a backend, e.g. eXist-db -> EXISTDB.
inline std::string backend_column(std::string_view name) {
  std::string s;
  for (char c : name) {
    unsigned char u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) s += static_cast<char>(std::toupper(u));
  }
  return s.empty() ? "BACKEND" : s;
}

// Column id in the selectivity tables: Q1_1, Q2_12, Q3_23, Q4, ..., Q9.
inline std::string selectivity_column(const std::string& query) {
  ParsedQueryText p = parse_query_text(query);
  std::string s = "Q" + std::to_string(number(p.id));
  if (p.id == QueryId::Q1 || p.id == QueryId::Q2 || p.id == QueryId::Q3) {
    s += '_';
    for (int i : p.indices) s += std::to_string(i);
  }
  return s;
}

inline const std::vector<std::string>& filter_selectivity_columns() {
  static const std::vector<std::string> c = {"Q1_1",  "Q1_2",  "Q1_3",  "Q2_12", "Q2_13", "Q2_23",
                                             "Q3_12", "Q3_13", "Q3_23", "Q4",    "Q5"};
  return c;
}

inline const std::vector<std::string>& aggregation_selectivity_columns() {
  static const std::vector<std::string> c = {"Q6", "Q7", "Q8", "Q9"};
  return c;
}

struct FigureTable {
  std::vector<std::string> backends;  // column prefixes
  struct Row {
    int no_docs = 0;
    std::vector<std::optional<double>> avg;
    std::vector<std::optional<double>> std_dev;
  };
  std::vector<Row> rows;
};

inline void write_figure_table(std::ostream& out, const FigureTable& t) {
  csv::Row header = {"NO_DOCS"};
  for (const auto& b : t.backends) {
    header.push_back(b + "_AVG");
    header.push_back(b + "_STD");
  }
  csv::write_row(out, header);
  for (const auto& r : t.rows) {
    csv::Row row = {std::to_string(r.no_docs)};
    for (std::size_t i = 0; i < t.backends.size(); ++i) {
      row.push_back(r.avg[i] ? format_double(*r.avg[i], 3) : "");
      row.push_back(r.std_dev[i] ? format_double(*r.std_dev[i], 3) : "");
    }
    csv::write_row(out, row);
  }
}

inline FigureTable read_figure_table(std::istream& in) {
  auto rows = csv::read_all(in);
  FigureTable t;
  if (rows.empty()) return t;
  const auto& h = rows.front();
  if (h.empty() || h[0] != "NO_DOCS" || h.size() % 2 != 1) throw Error("figure CSV header must be NO_DOCS then pairs");
  for (std::size_t i = 1; i < h.size(); i += 2) {
    const auto& a = h[i];
    if (a.size() < 5 || a.substr(a.size() - 4) != "_AVG") throw Error("expected <NAME>_AVG column, got " + a);
    std::string name = a.substr(0, a.size() - 4);
    if (h[i + 1] != name + "_STD") throw Error("expected " + name + "_STD column");
    t.backends.push_back(name);
  }
  auto cell = [](const std::string& s) -> std::optional<double> {
    if (s.empty()) return std::nullopt;
    return std::stod(s);
  };
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != h.size()) throw Error("figure CSV row " + std::to_string(i + 1) + " has wrong field count");
    FigureTable::Row row;
    row.no_docs = std::stoi(r[0]);
    for (std::size_t c = 1; c < r.size(); c += 2) {
      row.avg.push_back(cell(r[c]));
      row.std_dev.push_back(cell(r[c + 1]));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoFailure("cannot write " + p.string());
  return out;
}

inline void check_written(std::ofstream& out, const std::filesystem::path& p) {
  out.flush();
  if (!out) throw IoFailure("failed writing " + p.string());
}

}  // namespace detail

// Writes one <figure_name>.csv per query plus stats.csv and the two
// selectivity tables. Returns the figure CSV paths.
inline std::vector<std::filesystem::path> emit_figure_csv(const std::vector<QueryStats>& stats,
                                                          const std::vector<SelectivityRow>& selectivity,
                                                          const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoFailure("cannot create " + out_dir.string() + ": " + ec.message());

  std::set<std::string> backend_set;
  std::set<int> positions;
  std::vector<std::string> queries;
  for (const auto& s : stats) {
    backend_set.insert(s.backend);
    positions.insert(sf_order(s.sf));
    if (std::find(queries.begin(), queries.end(), s.query) == queries.end()) queries.push_back(s.query);
  }
  std::sort(queries.begin(), queries.end(),
            [](const auto& a, const auto& b) { return query_order_key(a) < query_order_key(b); });
  std::vector<std::string> backends(backend_set.begin(), backend_set.end());

  std::vector<std::filesystem::path> written;
  for (const auto& q : queries) {
    FigureTable t;
    for (const auto& b : backends) t.backends.push_back(backend_column(b));
    for (int pos : positions) {
      FigureTable::Row row;
      row.no_docs = pos;
      row.avg.resize(backends.size());
      row.std_dev.resize(backends.size());
      for (const auto& s : stats) {
        if (s.query != q || sf_order(s.sf) != pos || !s.mean_ms) continue;
        auto bi = static_cast<std::size_t>(std::find(backends.begin(), backends.end(), s.backend) - backends.begin());
        row.avg[bi] = *s.mean_ms;
        row.std_dev[bi] = s.std_dev_ms;
      }
      t.rows.push_back(std::move(row));
    }
    std::string stem;
    try {
      stem = figure_name(q);
    } catch (const Error&) {
      continue;
    }
    auto path = out_dir / (stem + ".csv");
    auto out = detail::open_out(path);
    write_figure_table(out, t);
    detail::check_written(out, path);
    written.push_back(path);
  }

  // stats.csv: every statistic, with oracle selectivity merged in.
  {
    auto path = out_dir / "stats.csv";
    auto out = detail::open_out(path);
    csv::write_row(out, {"backend", "query", "sf", "mean_ms", "std_ms", "run_count", "error_count", "low_confidence",
                         "selectivity"});
    for (const auto& s : stats) {
      std::string sel;
      for (const auto& r : selectivity)
        if (r.query == s.query && sf_order(r.sf) == sf_order(s.sf)) sel = format_exact(r.s);
      csv::write_row(out, {s.backend, s.query, s.sf, s.mean_ms ? format_double(*s.mean_ms, 3) : "",
                           format_double(s.std_dev_ms, 3), std::to_string(s.run_count), std::to_string(s.error_count),
                           s.low_confidence ? "true" : "false", sel});
    }
    detail::check_written(out, path);
  }

  auto table = [&](const std::vector<std::string>& columns, const char* file) {
    std::map<int, std::pair<std::string, std::map<std::string, double>>> by_sf;
    for (const auto& r : selectivity) {
      std::string col;
      try {
        col = selectivity_column(r.query);
      } catch (const Error&) {
        continue;
      }
      if (std::find(columns.begin(), columns.end(), col) == columns.end()) continue;
      auto& entry = by_sf[sf_order(r.sf)];
      entry.first = r.sf;
      entry.second[col] = r.s;
    }
    auto path = out_dir / file;
    auto out = detail::open_out(path);
    csv::Row header = {"SF"};
    header.insert(header.end(), columns.begin(), columns.end());
    csv::write_row(out, header);
    for (const auto& [pos, entry] : by_sf) {
      csv::Row row = {entry.first};
      for (const auto& c : columns) {
        auto it = entry.second.find(c);
        row.push_back(it == entry.second.end() ? "" : format_double(it->second, 3));
      }
      csv::write_row(out, row);
    }
    detail::check_written(out, path);
  };
  table(filter_selectivity_columns(), "selectivity_filter.csv");
  table(aggregation_selectivity_columns(), "selectivity_aggregation.csv");
  return written;
}

// ---------------------------------------------------------------------------
// SVG plots: grouped bars (one group per SF position, one bar per backend)
// with standard-deviation error bars.

namespace detail {

inline constexpr const char* kPalette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2",
                                           "#59a14f", "#edc948", "#b07aa1", "#9c755f"};

inline std::string fmt2(double v) { return format_double(v, 2); }

// Rounds up to 1, 2 or 5 times a power of ten.
inline double nice_ceiling(double v) {
  if (v <= 0) return 1.0;
  double p = std::pow(10.0, std::floor(std::log10(v)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * p >= v) return m * p;
  return 10 * p;
}

}  // namespace detail

inline std::string render_plot_svg(const FigureTable& t, const std::string& title) {
  constexpr double W = 640, H = 400, L = 70, R = 150, T = 40, B = 50;
  const double pw = W - L - R, ph = H - T - B;
  double ymax = 0;
  for (const auto& r : t.rows)
    for (std::size_t i = 0; i < r.avg.size(); ++i)
      if (r.avg[i]) ymax = std::max(ymax, *r.avg[i] + r.std_dev[i].value_or(0.0));
  ymax = detail::nice_ceiling(ymax);
  auto y = [&](double v) { return T + ph - (v / ymax) * ph; };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  s << "<text x=\"" << detail::fmt2(L + pw / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
    << xml::escape_text(title) << "</text>\n";
  for (int k = 0; k <= 5; ++k) {
    double v = ymax * k / 5;
    s << "<line x1=\"" << L << "\" x2=\"" << L + pw << "\" y1=\"" << detail::fmt2(y(v)) << "\" y2=\""
      << detail::fmt2(y(v)) << "\" stroke=\"#dddddd\"/>\n";
    s << "<text x=\"" << L - 6 << "\" y=\"" << detail::fmt2(y(v) + 4) << "\" text-anchor=\"end\">"
      << detail::fmt2(v) << "</text>\n";
  }
  s << "<line x1=\"" << L << "\" x2=\"" << L << "\" y1=\"" << T << "\" y2=\"" << T + ph
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << L << "\" x2=\"" << L + pw << "\" y1=\"" << T + ph << "\" y2=\"" << T + ph
    << "\" stroke=\"black\"/>\n";
  s << "<text transform=\"translate(16," << detail::fmt2(T + ph / 2)
    << ") rotate(-90)\" text-anchor=\"middle\">response time (ms)</text>\n";
  s << "<text x=\"" << detail::fmt2(L + pw / 2) << "\" y=\"" << H - 10
    << "\" text-anchor=\"middle\">scale factor position (NO_DOCS)</text>\n";

  const std::size_t groups = t.rows.size();
  const std::size_t nb = t.backends.size();
  if (groups > 0 && nb > 0) {
    const double gw = pw / static_cast<double>(groups);
    const double bw = gw * 0.8 / static_cast<double>(nb);
    for (std::size_t g = 0; g < groups; ++g) {
      const auto& r = t.rows[g];
      const double gx = L + gw * static_cast<double>(g) + gw * 0.1;
      s << "<text x=\"" << detail::fmt2(L + gw * (static_cast<double>(g) + 0.5)) << "\" y=\"" << T + ph + 16
        << "\" text-anchor=\"middle\">" << r.no_docs << "</text>\n";
      for (std::size_t b = 0; b < nb; ++b) {
        if (!r.avg[b]) continue;
        const double x = gx + bw * static_cast<double>(b);
        const double v = *r.avg[b];
        s << "<rect class=\"bar\" x=\"" << detail::fmt2(x) << "\" y=\"" << detail::fmt2(y(v)) << "\" width=\""
          << detail::fmt2(bw) << "\" height=\"" << detail::fmt2(T + ph - y(v)) << "\" fill=\""
          << detail::kPalette[b % std::size(detail::kPalette)] << "\"/>\n";
        double sd = r.std_dev[b].value_or(0.0);
        if (sd > 0) {
          const double cx = x + bw / 2;
          s << "<line class=\"err\" x1=\"" << detail::fmt2(cx) << "\" x2=\"" << detail::fmt2(cx) << "\" y1=\""
            << detail::fmt2(y(std::max(0.0, v - sd))) << "\" y2=\"" << detail::fmt2(y(v + sd))
            << "\" stroke=\"black\"/>\n";
        }
      }
    }
  }
  for (std::size_t b = 0; b < nb; ++b) {
    const double ly = T + 10 + 18 * static_cast<double>(b);
    s << "<rect x=\"" << L + pw + 14 << "\" y=\"" << detail::fmt2(ly - 9) << "\" width=\"10\" height=\"10\" fill=\""
      << detail::kPalette[b % std::size(detail::kPalette)] << "\"/>\n";
    s << "<text x=\"" << L + pw + 30 << "\" y=\"" << detail::fmt2(ly) << "\">" << xml::escape_text(t.backends[b])
      << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

// Renders <stem>.svg next to each figure CSV, into out_dir.
inline std::vector<std::filesystem::path> emit_plots(const std::vector<std::filesystem::path>& csv_files,
                                                     const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoFailure("cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> out;
  for (const auto& f : csv_files) {
    std::ifstream in(f, std::ios::binary);
    if (!in) throw IoFailure("cannot open " + f.string());
    FigureTable t = read_figure_table(in);
    auto path = out_dir / (f.stem().string() + ".svg");
    auto o = detail::open_out(path);
    o << render_plot_svg(t, f.stem().string());
    detail::check_written(o, path);
    out.push_back(path);
  }
  return out;
}

}  // namespace dodbench

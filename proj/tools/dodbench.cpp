// Command-line entry point: dodbench <ingest|datagen|oracle|translate|bench|report|mock-server>.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dodbench/dodbench.hpp"

namespace fs = std::filesystem;
using namespace dodbench;

namespace {

std::vector<TermParam> parse_terms(const std::string& csv_terms) {
  std::vector<TermParam> out;
  std::size_t start = 0;
  int idx = 1;
  while (start <= csv_terms.size()) {
    auto comma = csv_terms.find(',', start);
    if (comma == std::string::npos) comma = csv_terms.size();
    if (idx > 3) throw InvalidQuery("at most three terms may be configured");
    out.emplace_back(idx++, csv_terms.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

std::vector<QuerySpec> select_queries(const std::string& selector, const std::vector<TermParam>& terms) {
  if (selector == "all") return standard_workload(terms);
  auto qs = expand_query_selector(selector, terms);
  if (qs.empty()) throw InvalidQuery("query selector '" + selector + "' matched nothing");
  return qs;
}

// Output stream that is either a file or stdout. Files are written under a
// temporary name and renamed by finish(), so a failed command leaves no
// partial output behind.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      final_ = path;
      temp_ = path + ".partial";
      file_.open(temp_, std::ios::binary | std::ios::trunc);
      if (!file_) throw IoFailure("cannot open " + path + " for writing");
    }
  }
  Output(const Output&) = delete;
  Output& operator=(const Output&) = delete;
  ~Output() {
    if (!temp_.empty()) {
      file_.close();
      std::error_code ec;
      fs::remove(temp_, ec);
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }
  void finish(const std::string& path) {
    stream().flush();
    if (!stream()) throw IoFailure("failed writing " + (path.empty() ? std::string("stdout") : path));
    if (temp_.empty()) return;
    file_.close();
    std::error_code ec;
    fs::rename(temp_, final_, ec);
    if (ec) throw IoFailure("cannot rename " + temp_ + " to " + final_ + ": " + ec.message());
    temp_.clear();
  }

 private:
  std::ofstream file_;
  std::string final_, temp_;
};

std::string infer_sf_label(const std::string& path) {
  static const std::regex re(R"(sf(0\.125|0\.25|0\.5|1(\.0)?)\b)");
  std::smatch m;
  std::string name = fs::path(path).filename().string();
  if (std::regex_search(name, m, re)) return ScaleFactor::parse(m[1].str()).label();
  return "1";
}

// High-water resident set of this process image, from /proc (Linux only).
std::optional<long> peak_resident_kib() {
  std::ifstream in("/proc/self/status");
  std::string line;
  while (std::getline(in, line))
    if (line.rfind("VmHWM:", 0) == 0) return std::stol(line.substr(6));
  return std::nullopt;
}

// ---- ingest ---------------------------------------------------------------

struct IngestArgs {
  std::string in, out;
  std::size_t max_element_bytes = IngestOptions{}.max_element_bytes;
};

int run_ingest(const IngestArgs& a) {
  std::ifstream in(a.in, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + a.in);
  Output out(a.out);
  CanonicalWriter writer(out.stream());
  IngestOptions opts;
  opts.max_element_bytes = a.max_element_bytes;
  IngestStats stats = ingest_stream(in, [&](CanonicalRecord&& r) { writer.write(r); }, opts);
  out.finish(a.out);
  std::cerr << format_stats(stats);
  if (auto kib = peak_resident_kib()) std::cerr << "peak_rss_kib: " << *kib << "\n";
  return 0;
}

// ---- datagen --------------------------------------------------------------

struct DatagenArgs {
  std::string in, sf, format = "both", out;
  std::uint64_t seed = 0;
};

int run_datagen_cmd(const DatagenArgs& a) {
  ScaleFactor sf = ScaleFactor::parse(a.sf);
  DatagenOutputs o = run_datagen(a.in, sf, a.seed, parse_emit_format(a.format), a.out);
  std::cerr << "sf: " << sf.label() << "\nseed: " << a.seed << "\nrecords: " << o.records
            << "\ncanonical: " << o.canonical << "\n";
  if (!o.xml.empty()) std::cerr << "xml: " << o.xml << "\n";
  if (!o.json.empty()) std::cerr << "json: " << o.json << "\n";
  return 0;
}

// ---- oracle ---------------------------------------------------------------

struct OracleArgs {
  std::string data, query = "all", terms = "database,text,mining", emit = "rows", sf, out;
  bool case_sensitive = false;
  bool no_index = false;
};

int run_oracle(const OracleArgs& a) {
  auto terms = parse_terms(a.terms);
  auto queries = select_queries(a.query, terms);
  DatasetOptions dopts;
  dopts.build_text_index = !a.no_index;
  Dataset ds = load_dataset(a.data, dopts);
  EvalOptions eopts;
  eopts.match.case_sensitive = a.case_sensitive;
  eopts.use_index = !a.no_index;
  const std::string sf = a.sf.empty() ? infer_sf_label(a.data) : ScaleFactor::parse(a.sf).label();

  Output out(a.out);
  auto& os = out.stream();
  if (a.emit == "rows") {
    csv::write_row(os, {"query", "record_id", "title", "author", "year", "count"});
    for (const auto& q : queries) {
      ResultSet rs = evaluate(ds, q, eopts);
      const std::string label = to_text(q);
      for (const auto& r : rs.rows)
        csv::write_row(os, {label, ds.records()[r.record_index].record_id, r.title, "", "", ""});
      for (const auto& g : rs.groups)
        csv::write_row(os, {label, "", "", g.author, g.year ? std::to_string(*g.year) : "", std::to_string(g.count)});
    }
  } else if (a.emit == "count") {
    csv::write_row(os, {"query", "count"});
    for (const auto& q : queries)
      csv::write_row(os, {to_text(q), std::to_string(evaluate(ds, q, eopts).row_count())});
  } else if (a.emit == "selectivity") {
    std::vector<SelectivityRow> rows;
    for (const auto& q : queries) {
      ResultSet rs = evaluate(ds, q, eopts);
      SelectivityReport rep = selectivity(ds, q, rs);
      rows.push_back({to_text(q), sf, rep.n, rep.N, rep.s});
    }
    write_selectivity_csv(os, rows);
  } else {
    throw ConfigError("--emit must be rows, count or selectivity");
  }
  out.finish(a.out);
  return 0;
}

// ---- translate ------------------------------------------------------------

struct TranslateArgs {
  std::string query, dialect, out, terms = "database,text,mining", collection = "dblp";
  bool case_sensitive = false;
  bool explain_only = false;
};

std::string file_stem(const QuerySpec& q) { return figure_name(to_text(q)); }

int run_translate(const TranslateArgs& a) {
  auto terms = parse_terms(a.terms);
  auto queries = select_queries(a.query, terms);
  std::vector<Dialect> dialects;
  if (a.dialect == "all") dialects.assign(std::begin(kAllDialects), std::end(kAllDialects));
  else dialects.push_back(parse_dialect(a.dialect));
  TranslateOptions topts;
  topts.collection = a.collection;
  topts.match.case_sensitive = a.case_sensitive;

  for (Dialect d : dialects) {
    fs::path dir = a.out;
    if (!a.out.empty() && dialects.size() > 1) dir /= std::string(to_string(d));
    if (!a.out.empty()) fs::create_directories(dir);
    for (const auto& q : queries) {
      if (a.explain_only) {
        std::cout << explain(q, d, topts) << "\n";
        continue;
      }
      TranslatedQuery tq = translate(q, d, topts);
      const std::string ext(file_extension(d));
      if (a.out.empty()) {
        std::cout << "-- " << to_text(q) << " [" << to_string(d) << "]\n";
        for (std::size_t i = 0; i < tq.setup_texts.size(); ++i)
          std::cout << "-- setup " << i + 1 << "\n" << tq.setup_texts[i];
        std::cout << "-- main\n" << tq.main_text << "\n";
        continue;
      }
      auto write = [&](const fs::path& p, const std::string& text) {
        std::ofstream f(p, std::ios::binary | std::ios::trunc);
        if (!(f << text)) throw IoFailure("cannot write " + p.string());
        std::cerr << p.string() << "\n";
      };
      const std::string stem = file_stem(q);
      for (std::size_t i = 0; i < tq.setup_texts.size(); ++i)
        write(dir / (stem + ".setup" + std::to_string(i + 1) + "." + ext), tq.setup_texts[i]);
      write(dir / (stem + "." + ext), tq.main_text);
    }
  }
  return 0;
}

// ---- bench ----------------------------------------------------------------

struct BenchArgs {
  std::string config, backend, sf, queries = "Q1..Q9", out = "runs.csv", cold = "per-query";
  std::size_t runs = 10;
  std::vector<std::string> load_files;
  std::optional<std::uint64_t> expect_count;
};

int run_bench(const BenchArgs& a) {
  BenchConfig cfg = load_bench_config(a.config);
  const BackendConfig& backend = cfg.backend(a.backend);
  const std::string sf = ScaleFactor::parse(a.sf).label();
  auto queries = select_queries(a.queries, cfg.terms);
  ColdMode cold = parse_cold_mode(a.cold);
  TranslateOptions topts;
  topts.collection = backend.collection;
  topts.match.case_sensitive = cfg.case_sensitive;

  BenchRunner runner(backend, make_adapter(backend));
  runner.ping();
  nlohmann::json meta = {{"backend", backend.name},
                         {"adapter", backend.adapter_kind == AdapterKind::CommandRunner ? "command" : "http"},
                         {"dialect", std::string(to_string(backend.dialect))},
                         {"sf", sf},
                         {"runs", a.runs},
                         {"cold_mode", std::string(to_string(cold))},
                         {"case_sensitive", cfg.case_sensitive}};
  if (!a.load_files.empty()) {
    if (!a.expect_count) throw ConfigError("--load requires --expect-count");
    std::vector<fs::path> files(a.load_files.begin(), a.load_files.end());
    LoadResult lr = runner.load_dataset(files, *a.expect_count);
    meta["load_ms"] = format_ms(lr.elapsed);
    meta["loaded_records"] = lr.records;
    std::cerr << "loaded " << lr.records << " records in " << format_ms(lr.elapsed) << " ms\n";
  }
  auto records = run_suite(runner, queries, sf, a.runs, cold, topts);
  Output out(a.out);
  write_runs_csv(out.stream(), records);
  out.finish(a.out);
  if (!a.out.empty() && a.out != "-") {
    std::ofstream m(a.out + ".meta.json", std::ios::binary | std::ios::trunc);
    m << meta.dump(2) << "\n";
  }
  std::size_t failures = 0;
  for (const auto& r : records)
    if (!r.outcome.ok()) ++failures;
  std::cerr << "runs: " << records.size() << "\nfailed: " << failures << "\n";
  return 0;
}

// ---- report ---------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> runs;
  std::vector<std::string> selectivity;
  std::string out;
  bool plots = false;
};

int run_report(const ReportArgs& a) {
  std::vector<RunRecord> runs;
  for (const auto& p : a.runs) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoFailure("cannot open " + p);
    auto part = read_runs_csv(in);
    runs.insert(runs.end(), part.begin(), part.end());
  }
  std::vector<SelectivityRow> sel;
  for (const auto& p : a.selectivity) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoFailure("cannot open " + p);
    auto part = read_selectivity_csv(in);
    sel.insert(sel.end(), part.begin(), part.end());
  }
  auto stats = summarize(runs);
  auto files = emit_figure_csv(stats, sel, a.out);
  for (const auto& f : files) std::cerr << f.string() << "\n";
  if (a.plots)
    for (const auto& f : emit_plots(files, a.out)) std::cerr << f.string() << "\n";
  return 0;
}

// ---- mock-server ----------------------------------------------------------

struct MockArgs {
  std::string host = "127.0.0.1";
  int port = 5984;
  long long delay_ms = 0;
};

MockBackend* g_mock = nullptr;

int run_mock(const MockArgs& a) {
  MockBackend mock;
  mock.set_delay(std::chrono::milliseconds(a.delay_ms));
  g_mock = &mock;
  std::signal(SIGINT, [](int) {
    if (g_mock) g_mock->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_mock) g_mock->stop();
  });
  std::cerr << "mock backend listening on http://" << a.host << ":" << a.port << "\n";
  mock.serve(a.host, a.port);
  g_mock = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Document-database benchmark toolkit"};
  app.require_subcommand(1);

  IngestArgs ia;
  auto* ingest = app.add_subcommand("ingest", "Convert DBLP XML into canonical records (JSON lines)");
  ingest->add_option("--in", ia.in, "DBLP XML file")->required();
  ingest->add_option("--out", ia.out, "Canonical output file ('-' for stdout)")->required();
  ingest->add_option("--max-element-bytes", ia.max_element_bytes, "Largest accepted publication element");

  DatagenArgs da;
  auto* datagen = app.add_subcommand("datagen", "Build a scale-factor subset and emit XML/JSON documents");
  datagen->add_option("--in", da.in, "Canonical input file")->required();
  datagen->add_option("--sf", da.sf, "Scale factor: 0.125, 0.25, 0.5 or 1.0")->required();
  datagen->add_option("--seed", da.seed, "Permutation seed");
  datagen->add_option("--format", da.format, "xml, json or both");
  datagen->add_option("--out", da.out, "Output directory")->required();

  OracleArgs oa;
  auto* oracle = app.add_subcommand("oracle", "Evaluate queries in process");
  oracle->add_option("--data", oa.data, "Canonical dataset")->required();
  oracle->add_option("--query", oa.query, "Query selector, e.g. Q2(i=1,j=2), Q1..Q9 or all");
  oracle->add_option("--terms", oa.terms, "Comma-separated terms t1,t2,t3");
  oracle->add_option("--emit", oa.emit, "rows, count or selectivity");
  oracle->add_option("--sf", oa.sf, "Scale factor label for selectivity rows");
  oracle->add_option("--out", oa.out, "Output file (default stdout)");
  oracle->add_flag("--case-sensitive", oa.case_sensitive, "Match terms case-sensitively");
  oracle->add_flag("--no-index", oa.no_index, "Scan every title instead of using the trigram index");

  TranslateArgs ta;
  auto* tr = app.add_subcommand("translate", "Render queries in a backend dialect");
  tr->add_option("--query", ta.query, "Query selector")->required();
  tr->add_option("--dialect", ta.dialect, "xquery31, xquery10, mongo, couch, n1ql or all")->required();
  tr->add_option("--out", ta.out, "Output directory (default stdout)");
  tr->add_option("--terms", ta.terms, "Comma-separated terms t1,t2,t3");
  tr->add_option("--collection", ta.collection, "Collection / database name");
  tr->add_flag("--case-sensitive", ta.case_sensitive, "Match terms case-sensitively");
  tr->add_flag("--explain", ta.explain_only, "Describe the translation strategy instead");

  BenchArgs ba;
  std::uint64_t expect = 0;
  auto* bench = app.add_subcommand("bench", "Time queries against a live backend");
  bench->add_option("--config", ba.config, "Backend configuration (JSON)")->required();
  bench->add_option("--backend", ba.backend, "Backend name from the config")->required();
  bench->add_option("--sf", ba.sf, "Scale factor of the loaded data")->required();
  bench->add_option("--queries", ba.queries, "Query selector");
  bench->add_option("--runs", ba.runs, "Warm runs per query");
  bench->add_option("--out", ba.out, "runs.csv path");
  bench->add_option("--cold", ba.cold, "Cold prefill: per-query, per-family or none");
  bench->add_option("--load", ba.load_files, "Emitted documents to load before timing");
  auto* expect_opt = bench->add_option("--expect-count", expect, "Record count the backend must report after load");

  ReportArgs ra;
  auto* report = app.add_subcommand("report", "Summarize runs into figure CSVs and plots");
  report->add_option("--runs", ra.runs, "runs.csv file(s)")->required();
  report->add_option("--selectivity", ra.selectivity, "Selectivity CSV(s) from the oracle");
  report->add_option("--out", ra.out, "Output directory")->required();
  report->add_flag("--plots", ra.plots, "Also render SVG plots");

  MockArgs ma;
  auto* mock = app.add_subcommand("mock-server", "Serve the bundled mock HTTP backend");
  mock->add_option("--host", ma.host, "Bind address");
  mock->add_option("--port", ma.port, "Port");
  mock->add_option("--delay-ms", ma.delay_ms, "Delay added to every response");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return run_ingest(ia);
    if (*datagen) return run_datagen_cmd(da);
    if (*oracle) return run_oracle(oa);
    if (*tr) return run_translate(ta);
    if (*bench) {
      if (*expect_opt) ba.expect_count = expect;
      return run_bench(ba);
    }
    if (*report) return run_report(ra);
    if (*mock) return run_mock(ma);
  } catch (const MalformedXml& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

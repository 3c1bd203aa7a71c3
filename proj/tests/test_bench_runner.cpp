#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "dodbench/bench_runner.hpp"
#include "dodbench/datagen.hpp"
#include "dodbench/mock_backend.hpp"
#include "support/fixtures.hpp"

using namespace dodbench;
using namespace std::chrono_literals;
namespace fs = std::filesystem;

namespace {

// Adapter that replays scripted responses and advances a fake clock by each
// response's latency.
class ScriptedAdapter : public BackendAdapter {
 public:
  struct Step {
    nanoseconds latency{0};
    Outcome outcome;
    std::string body;
    bool throws = false;
  };

  explicit ScriptedAdapter(std::shared_ptr<std::int64_t> now) : now_(std::move(now)) {}

  std::deque<Step> steps;
  Step fallback{1ms, Outcome::success(), "[]"};
  bool reachable = true;
  bool reject_install = false;
  std::vector<std::string> seen;
  int in_flight = 0;
  int max_in_flight = 0;

  bool ping() override { return reachable; }

  AdapterResponse run(std::string_view text, milliseconds) override {
    seen.emplace_back(text);
    ++in_flight;
    max_in_flight = std::max(max_in_flight, in_flight);
    Step s = fallback;
    if (!steps.empty()) {
      s = steps.front();
      steps.pop_front();
    }
    *now_ += s.latency.count();
    --in_flight;
    if (s.throws) throw AdapterFailure("adapter crashed");
    return {s.outcome, s.body, 200};
  }

  AdapterResponse install(std::string_view text, milliseconds t) override {
    if (reject_install) return {Outcome::error("design document rejected: invalid map"), "", 400};
    installs.emplace_back(text);
    (void)t;
    return {};
  }
  std::vector<std::string> installs;

  AdapterResponse load(const fs::path&, milliseconds) override { return {}; }

 private:
  std::shared_ptr<std::int64_t> now_;
};

struct Harness {
  std::shared_ptr<std::int64_t> now = std::make_shared<std::int64_t>(1000);
  ScriptedAdapter* adapter = nullptr;
  std::unique_ptr<BenchRunner> runner;

  Harness() {
    auto a = std::make_unique<ScriptedAdapter>(now);
    adapter = a.get();
    BackendConfig cfg;
    cfg.name = "scripted";
    cfg.dialect = Dialect::N1QL;
    auto clock = [n = now] { return nanoseconds(*n); };
    runner = std::make_unique<BenchRunner>(cfg, std::move(a), clock);
  }
};

TranslatedQuery tq_for(const std::string& text, Dialect d = Dialect::N1QL) {
  return translate(parse_query(text, default_terms()), d);
}

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("dodbench_runner_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Runner, ProtocolProducesOneColdThenWarmRuns) {
  Harness h;
  auto runs = h.runner->execute(tq_for("Q1(i=1)"), "Q1(i=1)", "0.5", {10, true});
  ASSERT_EQ(runs.size(), 11u);
  EXPECT_EQ(runs[0].phase, Phase::Cold);
  EXPECT_EQ(runs[0].run_index, 0u);
  for (std::size_t i = 1; i < runs.size(); ++i) {
    EXPECT_EQ(runs[i].phase, Phase::Warm);
    EXPECT_EQ(runs[i].run_index, i);
    EXPECT_EQ(runs[i].sf, "0.5");
  }
}

TEST(Runner, ZeroRunsLeavesOnlyCold) {
  Harness h;
  auto runs = h.runner->execute(tq_for("Q6"), "Q6", "1", {0, true});
  ASSERT_EQ(runs.size(), 1u);
  EXPECT_EQ(runs[0].phase, Phase::Cold);
  EXPECT_TRUE(h.runner->execute(tq_for("Q6"), "Q6", "1", {0, false}).empty());
}

TEST(Runner, ElapsedComesFromClockAndRunsNeverOverlap) {
  Harness h;
  for (int ms : {9, 2, 4, 4, 4, 5, 5, 7, 9})
    h.adapter->steps.push_back({milliseconds(ms), Outcome::success(), "{\"results\":[1,2,3]}"});
  auto runs = h.runner->execute(tq_for("Q1(i=1)"), "Q1(i=1)", "1", {8, true});
  ASSERT_EQ(runs.size(), 9u);
  EXPECT_EQ(runs[0].elapsed, 9ms);
  EXPECT_EQ(runs[1].elapsed, 2ms);
  EXPECT_EQ(runs[8].elapsed, 9ms);
  for (std::size_t i = 1; i < runs.size(); ++i) EXPECT_GE(runs[i].started, runs[i - 1].finished);
  EXPECT_EQ(h.adapter->max_in_flight, 1);
  EXPECT_EQ(runs[3].result_count, 3u);
}

TEST(Runner, FailuresAreRecordedAndDoNotStopTheProtocol) {
  Harness h;
  h.adapter->steps = {{1ms, Outcome::success(), "[]"},
                      {600ms, Outcome::timeout(), ""},
                      {1ms, Outcome::error("Index scan timed out"), ""},
                      {1ms, Outcome::success(), "[]", true},
                      {3ms, Outcome::success(), "[1]"}};
  auto runs = h.runner->execute(tq_for("Q2(i=1,j=2)"), "Q2(i=1,j=2)", "1", {4, true});
  ASSERT_EQ(runs.size(), 5u);
  EXPECT_EQ(runs[1].outcome.kind, OutcomeKind::Timeout);
  EXPECT_EQ(runs[2].outcome, Outcome::error("Index scan timed out"));
  EXPECT_EQ(runs[3].outcome.kind, OutcomeKind::Error);
  EXPECT_NE(runs[3].outcome.message.find("adapter crashed"), std::string::npos);
  EXPECT_TRUE(runs[4].outcome.ok());
  EXPECT_EQ(runs[4].result_count, 1u);
  EXPECT_FALSE(runs[1].result_count);
}

TEST(Runner, UnreachableBackend) {
  Harness h;
  h.adapter->reachable = false;
  EXPECT_THROW(h.runner->execute(tq_for("Q6"), "Q6", "1", {}), BackendUnreachable);
  EXPECT_TRUE(h.adapter->seen.empty());
}

TEST(Runner, SetupInstalledBeforeTimedRuns) {
  Harness h;
  auto tq = tq_for("Q7", Dialect::CouchMangoView);
  h.runner->execute(tq, "Q7", "1", {2, true});
  ASSERT_EQ(h.adapter->installs.size(), 1u);
  EXPECT_EQ(h.adapter->installs[0], tq.setup_texts[0]);
  EXPECT_EQ(h.adapter->seen.size(), 3u);
}

TEST(Runner, EmptySetupSucceedsImmediately) {
  Harness h;
  EXPECT_NO_THROW(h.runner->install_setup(tq_for("Q1(i=1)")));
  EXPECT_TRUE(h.adapter->installs.empty());
}

TEST(Runner, RejectedInstallSurfacesBackendText) {
  Harness h;
  h.adapter->reject_install = true;
  try {
    h.runner->install_setup(tq_for("Q6", Dialect::CouchMangoView));
    FAIL();
  } catch (const AdapterFailure& e) {
    EXPECT_NE(std::string(e.what()).find("invalid map"), std::string::npos);
  }
}

TEST(Runner, SuiteRecordsInstallFailureAndContinues) {
  Harness h;
  h.adapter->reject_install = true;
  std::vector<QuerySpec> qs = {parse_query("Q6", default_terms()), parse_query("Q1(i=1)", default_terms())};
  BackendConfig cfg;
  auto runs = run_suite(*h.runner, qs, "1", 2, ColdMode::PerQuery, {});
  // Q6 in N1QL needs no setup, so both queries run.
  EXPECT_EQ(runs.size(), 6u);
}

TEST(Runner, PerFamilyColdMode) {
  Harness h;
  auto qs = expand_query_selector("Q1..Q2");
  auto runs = run_suite(*h.runner, qs, "1", 1, ColdMode::PerFamily, {});
  std::size_t cold = 0;
  for (const auto& r : runs) cold += r.phase == Phase::Cold;
  EXPECT_EQ(cold, 2u);
  EXPECT_EQ(runs.size(), 6u + 2u);
  auto none = run_suite(*h.runner, qs, "1", 1, ColdMode::None, {});
  EXPECT_EQ(none.size(), 6u);
}

TEST(ResultCount, Modes) {
  EXPECT_EQ(extract_result_count("{\"docs\":[{},{}]}", "auto"), 2u);
  EXPECT_EQ(extract_result_count("{\"rows\":[1,2,3]}", "auto"), 3u);
  EXPECT_EQ(extract_result_count("{\"results\":[]}", "auto"), 0u);
  EXPECT_EQ(extract_result_count("a\n\nb\nc", "auto"), 3u);
  EXPECT_EQ(extract_result_count("[1,2]", "auto"), 2u);
  EXPECT_EQ(extract_result_count("{\"results\":[{\"n\":42}]}", "json:results.0.n"), 42u);
  EXPECT_FALSE(extract_result_count("x", "none"));
  EXPECT_EQ(extract_result_count("{\"a\":1}\n{\"a\":2}\n", "lines"), 2u);
}

TEST(RunsCsv, RoundTrip) {
  std::vector<RunRecord> runs(3);
  runs[0] = {"BaseX", "Q2(i=1,j=2)", "0.25", 0, Phase::Cold, 1234567ns, Outcome::success(), 7u, {}, {}};
  runs[1] = {"BaseX", "Q2(i=1,j=2)", "0.25", 1, Phase::Warm, 2000000ns, Outcome::error("bad, \"quoted\""), {}, {}, {}};
  runs[2] = {"BaseX", "Q2(i=1,j=2)", "0.25", 2, Phase::Warm, 600000000000ns, Outcome::timeout(), {}, {}, {}};
  std::stringstream ss;
  write_runs_csv(ss, runs);
  EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), "backend,query,sf,run_index,phase,elapsed_ms,outcome,result_count");
  auto back = read_runs_csv(ss);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].outcome, runs[i].outcome);
    EXPECT_EQ(back[i].phase, runs[i].phase);
    EXPECT_EQ(back[i].result_count, runs[i].result_count);
    EXPECT_EQ(back[i].query, runs[i].query);
  }
  EXPECT_EQ(back[0].elapsed, 1235000ns);
  EXPECT_EQ(back[2].elapsed, 600000000000ns);
}

TEST(Config, ParsesBackendsAndEnvOverrides) {
  auto j = nlohmann::json::parse(R"({
    "terms": ["graph", "query", "index"],
    "backends": [
      {"name": "couchbase", "adapter": "http", "dialect": "n1ql", "url": "http://h:8093",
       "query_request": {"path": "/query/service", "content_type": "application/json",
                         "body": "{\"statement\": {query_json}}"}},
      {"name": "eXist-db", "adapter": "command", "dialect": "xquery31", "command": "run {query_file}",
       "timeout_s": 5}
    ]})");
  ::setenv("DODBENCH_COUCHBASE_URL", "http://override:1", 1);
  ::setenv("DODBENCH_EXIST_DB_USER", "admin", 1);
  auto cfg = parse_bench_config(j);
  ::unsetenv("DODBENCH_COUCHBASE_URL");
  ::unsetenv("DODBENCH_EXIST_DB_USER");
  EXPECT_EQ(cfg.terms[0].term, "graph");
  EXPECT_EQ(cfg.backend("couchbase").url, "http://override:1");
  EXPECT_EQ(cfg.backend("couchbase").timeout, 600s);
  EXPECT_EQ(cfg.backend("eXist-db").user, "admin");
  EXPECT_EQ(cfg.backend("eXist-db").timeout, 5s);
  EXPECT_EQ(cfg.backend("eXist-db").adapter_kind, AdapterKind::CommandRunner);
  EXPECT_THROW(cfg.backend("nope"), ConfigError);
}

TEST(Config, RejectsNonPositiveTimeout) {
  auto j = nlohmann::json::parse(R"({"name":"x","dialect":"n1ql","url":"http://h","timeout_s":0})");
  EXPECT_THROW(backend_from_json(j), ConfigError);
}

TEST(RequestText, ParsesMethodHeadersAndBody) {
  auto r = parse_request_text("POST /db/_find\nContent-Type: application/json\nX-A: 1\n\n{\"a\":1}\n");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->method, "POST");
  EXPECT_EQ(r->path, "/db/_find");
  EXPECT_EQ(r->headers.size(), 2u);
  EXPECT_EQ(r->body, "{\"a\":1}");
  EXPECT_FALSE(parse_request_text("SELECT 1;"));
}

// ---- CommandRunner --------------------------------------------------------

TEST(CommandRunner, RunsTemplateAndCapturesStdout) {
  BackendConfig cfg;
  cfg.name = "shell";
  cfg.adapter_kind = AdapterKind::CommandRunner;
  cfg.dialect = Dialect::XQuery31;
  cfg.command = "cat {query_file}; echo; printf '%s' {query} | wc -c";
  CommandRunnerAdapter a(cfg);
  auto r = a.run("it's \"x\"", 10s);
  ASSERT_TRUE(r.outcome.ok()) << to_text(r.outcome);
  EXPECT_NE(r.body.find("it's \"x\""), std::string::npos);
  EXPECT_NE(r.body.find("8"), std::string::npos);
}

TEST(CommandRunner, NonZeroExitIsError) {
  BackendConfig cfg;
  cfg.name = "shell";
  cfg.adapter_kind = AdapterKind::CommandRunner;
  cfg.command = "echo boom >&2; exit 4";
  CommandRunnerAdapter a(cfg);
  auto r = a.run("q", 10s);
  EXPECT_EQ(r.outcome.kind, OutcomeKind::Error);
  EXPECT_NE(r.outcome.message.find("boom"), std::string::npos);
  EXPECT_EQ(r.status, 4);
}

TEST(CommandRunner, TimeoutKillsProcessGroup) {
  BackendConfig cfg;
  cfg.name = "shell";
  cfg.adapter_kind = AdapterKind::CommandRunner;
  cfg.command = "sleep 30 & sleep 30; wait";
  CommandRunnerAdapter a(cfg);
  auto start = std::chrono::steady_clock::now();
  auto r = a.run("q", 300ms);
  EXPECT_EQ(r.outcome.kind, OutcomeKind::Timeout);
  EXPECT_LT(std::chrono::steady_clock::now() - start, 5s);
}

TEST(CommandRunner, RealClockLatencyIsMeasured) {
  BackendConfig cfg;
  cfg.name = "shell";
  cfg.adapter_kind = AdapterKind::CommandRunner;
  cfg.command = "sleep 0.05";
  BenchRunner runner(cfg, std::make_unique<CommandRunnerAdapter>(cfg));
  auto runs = runner.execute(tq_for("Q1(i=1)", Dialect::XQuery31), "Q1(i=1)", "1", {3, true});
  for (const auto& r : runs) {
    EXPECT_TRUE(r.outcome.ok());
    EXPECT_GE(r.elapsed, 50ms);
    EXPECT_LT(r.elapsed, 2s);
  }
}

// ---- HttpEndpoint against the bundled mock --------------------------------

class MockHttp : public ::testing::Test {
 protected:
  void SetUp() override {
    mock.start();
    cfg.name = "mock";
    cfg.adapter_kind = AdapterKind::HttpEndpoint;
    cfg.dialect = Dialect::N1QL;
    cfg.url = mock.url();
    cfg.query_request = {"POST", "/query/service", "application/json", "{\"statement\": {query_json}}"};
    cfg.load_path = "/dblp/_load";
    cfg.count_query = "GET /dblp/_count\n";
    cfg.count_field = "count";
    cfg.timeout = 10s;
    dir = temp_dir("http");
  }
  void TearDown() override {
    mock.stop();
    fs::remove_all(dir);
  }

  fs::path write_json(const std::vector<CanonicalRecord>& recs, const std::string& name) {
    auto p = dir / name;
    emit_json_file(recs, p.string());
    return p;
  }

  MockBackend mock;
  BackendConfig cfg;
  fs::path dir;
};

TEST_F(MockHttp, LoadThousandRecordsAndCount) {
  auto recs = testkit::hand_built_fixture();
  BenchRunner runner(cfg, make_adapter(cfg));
  auto lr = runner.load_dataset({write_json(recs, "all.json")}, recs.size());
  EXPECT_EQ(lr.records, 1000u);
  EXPECT_EQ(mock.count("dblp"), 1000u);
}

TEST_F(MockHttp, TruncatedFileIsCountMismatch) {
  auto recs = testkit::hand_built_fixture();
  auto p = write_json(recs, "all.json");
  std::ifstream in(p);
  std::ofstream out(dir / "half.json");
  std::string line;
  for (int i = 0; i < 600 && std::getline(in, line); ++i) out << line << "\n";
  out.close();
  BenchRunner runner(cfg, make_adapter(cfg));
  try {
    runner.load_dataset({dir / "half.json"}, recs.size());
    FAIL();
  } catch (const CountMismatch& e) {
    EXPECT_EQ(e.expected(), 1000u);
    EXPECT_EQ(e.actual(), 600u);
  }
}

TEST_F(MockHttp, CouchBulkLoadFormat) {
  cfg.load_path = "/dblp/_bulk_docs";
  cfg.load_format = "couch_bulk";
  cfg.load_batch = 128;
  auto recs = testkit::hand_built_fixture();
  BenchRunner runner(cfg, make_adapter(cfg));
  EXPECT_EQ(runner.load_dataset({write_json(recs, "all.json")}, 1000).records, 1000u);
}

TEST_F(MockHttp, CouchViewInstallIsIdempotent) {
  cfg.dialect = Dialect::CouchMangoView;
  BenchRunner runner(cfg, make_adapter(cfg));
  auto tq = tq_for("Q7", Dialect::CouchMangoView);
  EXPECT_NO_THROW(runner.install_setup(tq));
  EXPECT_NO_THROW(runner.install_setup(tq));
}

TEST_F(MockHttp, SlowResponseTimesOutWithoutBreakingLaterRuns) {
  cfg.timeout = 300ms;
  mock.insert("dblp", testkit::hand_built_fixture());
  BenchRunner runner(cfg, make_adapter(cfg));
  mock.set_delay(1500ms);
  auto slow = runner.execute(tq_for("Q1(i=1)"), "Q1(i=1)", "1", {1, false});
  ASSERT_EQ(slow.size(), 1u);
  EXPECT_EQ(slow[0].outcome.kind, OutcomeKind::Timeout);
  mock.set_delay(0ms);
  auto fast = runner.execute(tq_for("Q1(i=1)"), "Q1(i=1)", "1", {2, false});
  for (const auto& r : fast) EXPECT_TRUE(r.outcome.ok()) << to_text(r.outcome);
}

TEST_F(MockHttp, UnreachableUrl) {
  cfg.url = "http://127.0.0.1:1";
  BenchRunner runner(cfg, make_adapter(cfg));
  EXPECT_THROW(runner.ping(), BackendUnreachable);
}

TEST_F(MockHttp, BadStatementIsRecordedError) {
  BenchRunner runner(cfg, make_adapter(cfg));
  mock.insert("dblp", {});
  TranslatedQuery tq;
  tq.main_text = "SELECT nonsense";
  auto runs = runner.execute(tq, "Q1(i=1)", "1", {1, false});
  ASSERT_EQ(runs.size(), 1u);
  EXPECT_EQ(runs[0].outcome.kind, OutcomeKind::Error);
  EXPECT_NE(runs[0].outcome.message.find("HTTP 400"), std::string::npos);
}

TEST(Config, ShippedExampleParses) {
  auto cfg = load_bench_config(DODBENCH_TEST_DATA_DIR "/../../tools/config/backends.example.json");
  ASSERT_EQ(cfg.backends.size(), 4u);
  EXPECT_EQ(cfg.backend("couchdb").dialect, Dialect::CouchMangoView);
  EXPECT_EQ(cfg.backend("couchbase").dialect, Dialect::N1QL);
  EXPECT_EQ(cfg.backend("mongodb").adapter_kind, AdapterKind::CommandRunner);
  EXPECT_EQ(cfg.backend("BaseX").dialect, Dialect::XQuery31);
}

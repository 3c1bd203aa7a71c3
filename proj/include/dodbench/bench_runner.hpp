#pragma once

// Timed execution of translated queries against live backends.
//
// Two adapter kinds drive every backend: a command template run through
// /bin/sh (timed from spawn to exit) and an HTTP request template (timed from
// request sent to body drained). Numbers are comparable within one adapter
// kind only.
//
// Protocol: ping, install setup texts, one cold run (recorded, excluded from
// statistics), then N strictly sequential warm runs.

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "dodbench/core_model.hpp"
#include "dodbench/csv.hpp"
#include "dodbench/datagen.hpp"
#include "dodbench/error.hpp"
#include "dodbench/translate.hpp"
#include "dodbench/xml_text.hpp"

extern char** environ;

namespace dodbench {

using std::chrono::milliseconds;
using std::chrono::nanoseconds;

enum class AdapterKind { CommandRunner, HttpEndpoint };

enum class Phase { Cold, Warm };

inline std::string_view to_string(Phase p) { return p == Phase::Cold ? "cold" : "warm"; }

enum class OutcomeKind { Success, Error, Timeout };

struct Outcome {
  OutcomeKind kind = OutcomeKind::Success;
  std::string message;

  static Outcome success() { return {}; }
  static Outcome error(std::string m) { return {OutcomeKind::Error, std::move(m)}; }
  static Outcome timeout() { return {OutcomeKind::Timeout, {}}; }

  bool ok() const noexcept { return kind == OutcomeKind::Success; }
  friend bool operator==(const Outcome&, const Outcome&) = default;
};

inline std::string to_text(const Outcome& o) {
  switch (o.kind) {
    case OutcomeKind::Success: return "success";
    case OutcomeKind::Timeout: return "timeout";
    case OutcomeKind::Error: return "error: " + o.message;
  }
  return "error";
}

inline Outcome parse_outcome(std::string_view s) {
  if (s == "success") return Outcome::success();
  if (s == "timeout") return Outcome::timeout();
  if (s.rfind("error", 0) == 0) {
    s.remove_prefix(5);
    if (!s.empty() && s.front() == ':') s.remove_prefix(1);
    if (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    return Outcome::error(std::string(s));
  }
  throw Error("unknown outcome '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Configuration

struct HttpRequestTemplate {
  std::string method = "POST";
  std::string path = "/";
  std::string content_type = "text/plain";
  // Placeholders: {query} raw text, {query_json} JSON string literal,
  // {query_xml} XML-escaped text, {collection}.
  std::string body = "{query}";
};

struct BackendConfig {
  std::string name;
  AdapterKind adapter_kind = AdapterKind::HttpEndpoint;
  Dialect dialect = Dialect::N1QL;
  std::string collection = "dblp";
  milliseconds timeout{600000};

  // CommandRunner. Placeholders: {query_file}, {query} (shell-quoted),
  // {collection}; {file} in load_command.
  std::string command;
  std::string load_command;
  std::string ping_command;

  // HttpEndpoint.
  std::string url;
  std::string user;
  std::string password;
  std::string ping_path = "/";
  HttpRequestTemplate query_request;
  std::string load_path;              // e.g. /dblp/_load
  std::string load_format = "jsonl";  // jsonl | couch_bulk
  std::size_t load_batch = 10000;

  // Record-count verification after load: a query in this backend's dialect
  // (or an HTTP request form) and how to read its answer.
  std::string count_query;
  std::string count_field;  // JSON path; empty = count result rows

  // How result_count is derived from a query response:
  // auto | lines | none | json:<path>
  std::string result_count = "auto";
};

inline std::string env_key(std::string_view backend, std::string_view field) {
  std::string k = "DODBENCH_";
  for (char c : backend) {
    unsigned char u = static_cast<unsigned char>(c);
    k += std::isalnum(u) ? static_cast<char>(std::toupper(u)) : '_';
  }
  k += '_';
  k += field;
  return k;
}

namespace detail {

inline const char* getenv_nonempty(const std::string& k) {
  const char* v = std::getenv(k.c_str());
  return v && *v ? v : nullptr;
}

template <typename T>
void assign_if(const nlohmann::json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->get<T>();
}

}  // namespace detail

inline BackendConfig backend_from_json(const nlohmann::json& j) {
  BackendConfig c;
  try {
    c.name = j.at("name").get<std::string>();
    std::string adapter = j.value("adapter", std::string("http"));
    if (adapter == "command" || adapter == "CommandRunner") c.adapter_kind = AdapterKind::CommandRunner;
    else if (adapter == "http" || adapter == "HttpEndpoint") c.adapter_kind = AdapterKind::HttpEndpoint;
    else throw ConfigError("backend '" + c.name + "': adapter must be 'command' or 'http'");
    c.dialect = parse_dialect(j.at("dialect").get<std::string>());
    detail::assign_if(j, "collection", c.collection);
    if (auto it = j.find("timeout_s"); it != j.end())
      c.timeout = milliseconds(static_cast<std::int64_t>(it->get<double>() * 1000.0));
    detail::assign_if(j, "command", c.command);
    detail::assign_if(j, "load_command", c.load_command);
    detail::assign_if(j, "ping_command", c.ping_command);
    detail::assign_if(j, "url", c.url);
    detail::assign_if(j, "user", c.user);
    detail::assign_if(j, "password", c.password);
    detail::assign_if(j, "ping_path", c.ping_path);
    if (auto it = j.find("query_request"); it != j.end()) {
      detail::assign_if(*it, "method", c.query_request.method);
      detail::assign_if(*it, "path", c.query_request.path);
      detail::assign_if(*it, "content_type", c.query_request.content_type);
      detail::assign_if(*it, "body", c.query_request.body);
    }
    detail::assign_if(j, "load_path", c.load_path);
    detail::assign_if(j, "load_format", c.load_format);
    detail::assign_if(j, "load_batch", c.load_batch);
    detail::assign_if(j, "count_query", c.count_query);
    detail::assign_if(j, "count_field", c.count_field);
    detail::assign_if(j, "result_count", c.result_count);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid backend entry: ") + e.what());
  }
  if (c.timeout.count() <= 0) throw ConfigError("backend '" + c.name + "': timeout must be > 0");
  if (c.load_format != "jsonl" && c.load_format != "couch_bulk")
    throw ConfigError("backend '" + c.name + "': load_format must be jsonl or couch_bulk");
  return c;
}

// Environment variables DODBENCH_<BACKEND>_{URL,USER,PASSWORD,COMMAND,TIMEOUT_S}
// override the file.
inline void apply_env_overrides(BackendConfig& c) {
  if (auto v = detail::getenv_nonempty(env_key(c.name, "URL"))) c.url = v;
  if (auto v = detail::getenv_nonempty(env_key(c.name, "USER"))) c.user = v;
  if (auto v = detail::getenv_nonempty(env_key(c.name, "PASSWORD"))) c.password = v;
  if (auto v = detail::getenv_nonempty(env_key(c.name, "COMMAND"))) c.command = v;
  if (auto v = detail::getenv_nonempty(env_key(c.name, "TIMEOUT_S"))) {
    double s = std::strtod(v, nullptr);
    if (s <= 0) throw ConfigError(env_key(c.name, "TIMEOUT_S") + " must be > 0");
    c.timeout = milliseconds(static_cast<std::int64_t>(s * 1000.0));
  }
}

struct BenchConfig {
  std::vector<TermParam> terms = default_terms();
  bool case_sensitive = false;
  std::vector<BackendConfig> backends;

  const BackendConfig& backend(std::string_view name) const {
    for (const auto& b : backends)
      if (b.name == name) return b;
    throw ConfigError("no backend named '" + std::string(name) + "' in config");
  }
};

inline BenchConfig parse_bench_config(const nlohmann::json& j) {
  BenchConfig cfg;
  if (auto it = j.find("terms"); it != j.end()) {
    cfg.terms.clear();
    if (!it->is_array() || it->empty() || it->size() > 3) throw ConfigError("'terms' must list 1 to 3 strings");
    int idx = 1;
    for (const auto& t : *it) cfg.terms.emplace_back(idx++, t.get<std::string>());
  }
  detail::assign_if(j, "case_sensitive", cfg.case_sensitive);
  auto b = j.find("backends");
  if (b == j.end() || !b->is_array()) throw ConfigError("config needs a 'backends' array");
  for (const auto& e : *b) {
    cfg.backends.push_back(backend_from_json(e));
    apply_env_overrides(cfg.backends.back());
  }
  return cfg;
}

inline BenchConfig load_bench_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open " + path);
  try {
    return parse_bench_config(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Adapters

struct AdapterResponse {
  Outcome outcome;
  std::string body;
  int status = 0;  // HTTP status or process exit code
};

class BackendAdapter {
 public:
  virtual ~BackendAdapter() = default;
  virtual bool ping() = 0;
  // Sends query text and waits for the complete response.
  virtual AdapterResponse run(std::string_view text, milliseconds timeout) = 0;
  // Applies one setup text. Re-applying an identical setup must succeed.
  virtual AdapterResponse install(std::string_view setup_text, milliseconds timeout) { return run(setup_text, timeout); }
  virtual AdapterResponse load(const std::filesystem::path& file, milliseconds timeout) = 0;
};

namespace detail {

inline std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  std::size_t p = 0;
  while ((p = s.find(from, p)) != std::string::npos) {
    s.replace(p, from.size(), to);
    p += to.size();
  }
  return s;
}

inline bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i]))) return false;
  return true;
}

inline std::string shell_quote(std::string_view s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  out += '\'';
  return out;
}

inline std::string truncate(std::string s, std::size_t n = 2000) {
  if (s.size() > n) {
    s.resize(n);
    s += "...";
  }
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || s.back() == ' ')) s.pop_back();
  return s;
}

class TempFile {
 public:
  explicit TempFile(std::string_view contents, std::string_view suffix = ".txt") {
    auto dir = std::filesystem::temp_directory_path();
    std::string templ = (dir / ("dodbench-XXXXXX" + std::string(suffix))).string();
    std::vector<char> buf(templ.begin(), templ.end());
    buf.push_back('\0');
    int fd = ::mkstemps(buf.data(), static_cast<int>(suffix.size()));
    if (fd < 0) throw IoFailure("cannot create temporary file in " + dir.string());
    path_ = buf.data();
    std::size_t off = 0;
    while (off < contents.size()) {
      auto n = ::write(fd, contents.data() + off, contents.size() - off);
      if (n <= 0) {
        ::close(fd);
        throw IoFailure("cannot write temporary file " + path_);
      }
      off += static_cast<std::size_t>(n);
    }
    ::close(fd);
  }
  TempFile(const TempFile&) = delete;
  TempFile& operator=(const TempFile&) = delete;
  ~TempFile() { std::remove(path_.c_str()); }
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

struct ProcessResult {
  bool timed_out = false;
  int exit_code = -1;
  std::string out;
  std::string err;
};

// Runs `command` via /bin/sh in its own process group; on timeout the whole
// group is killed.
inline ProcessResult run_shell(const std::string& command, milliseconds timeout) {
  int out_pipe[2], err_pipe[2];
  if (::pipe(out_pipe) != 0) throw AdapterFailure("pipe() failed");
  if (::pipe(err_pipe) != 0) {
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    throw AdapterFailure("pipe() failed");
  }
  posix_spawn_file_actions_t fa;
  posix_spawn_file_actions_init(&fa);
  posix_spawn_file_actions_adddup2(&fa, out_pipe[1], 1);
  posix_spawn_file_actions_adddup2(&fa, err_pipe[1], 2);
  posix_spawn_file_actions_addclose(&fa, out_pipe[0]);
  posix_spawn_file_actions_addclose(&fa, err_pipe[0]);
  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
  posix_spawnattr_setpgroup(&attr, 0);
  const char* argv[] = {"/bin/sh", "-c", command.c_str(), nullptr};
  pid_t pid = 0;
  int rc = ::posix_spawn(&pid, "/bin/sh", &fa, &attr, const_cast<char* const*>(argv), environ);
  posix_spawn_file_actions_destroy(&fa);
  posix_spawnattr_destroy(&attr);
  ::close(out_pipe[1]);
  ::close(err_pipe[1]);
  if (rc != 0) {
    ::close(out_pipe[0]);
    ::close(err_pipe[0]);
    throw AdapterFailure("cannot spawn /bin/sh: " + std::string(std::strerror(rc)));
  }
  ProcessResult res;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  pollfd fds[2] = {{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
  int open_fds = 2;
  char buf[65536];
  while (open_fds > 0) {
    auto left = std::chrono::duration_cast<milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      res.timed_out = true;
      break;
    }
    int n = ::poll(fds, 2, static_cast<int>(std::min<std::int64_t>(left.count(), 1000)));
    if (n < 0) {
      if (errno == EINTR) continue;
      break;
    }
    for (int i = 0; i < 2; ++i) {
      if (fds[i].fd < 0 || !(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
      auto got = ::read(fds[i].fd, buf, sizeof buf);
      if (got > 0) {
        (i == 0 ? res.out : res.err).append(buf, static_cast<std::size_t>(got));
      } else {
        ::close(fds[i].fd);
        fds[i].fd = -1;
        --open_fds;
      }
    }
  }
  for (auto& f : fds)
    if (f.fd >= 0) ::close(f.fd);
  if (res.timed_out) ::kill(-pid, SIGKILL);
  int status = 0;
  for (;;) {
    if (!res.timed_out) {
      auto left = std::chrono::duration_cast<milliseconds>(deadline - std::chrono::steady_clock::now());
      pid_t w = ::waitpid(pid, &status, WNOHANG);
      if (w == pid) break;
      if (w < 0 && errno != EINTR) break;
      if (left.count() <= 0) {
        res.timed_out = true;
        ::kill(-pid, SIGKILL);
        continue;
      }
      ::usleep(1000);
      continue;
    }
    if (::waitpid(pid, &status, 0) == pid || errno != EINTR) break;
  }
  if (!res.timed_out) res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  return res;
}

}  // namespace detail

class CommandRunnerAdapter : public BackendAdapter {
 public:
  explicit CommandRunnerAdapter(BackendConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.command.empty()) throw ConfigError("backend '" + cfg_.name + "': command template is empty");
  }

  bool ping() override {
    if (cfg_.ping_command.empty()) return true;
    auto r = detail::run_shell(cfg_.ping_command, milliseconds(30000));
    return !r.timed_out && r.exit_code == 0;
  }

  AdapterResponse run(std::string_view text, milliseconds timeout) override {
    detail::TempFile qf(text, "." + std::string(file_extension(cfg_.dialect)));
    std::string cmd = cfg_.command;
    cmd = detail::replace_all(cmd, "{query_file}", detail::shell_quote(qf.path()));
    cmd = detail::replace_all(cmd, "{query}", detail::shell_quote(text));
    cmd = detail::replace_all(cmd, "{collection}", detail::shell_quote(cfg_.collection));
    return finish(detail::run_shell(cmd, timeout));
  }

  AdapterResponse load(const std::filesystem::path& file, milliseconds timeout) override {
    if (cfg_.load_command.empty()) throw AdapterFailure("backend '" + cfg_.name + "' has no load_command");
    std::string cmd = detail::replace_all(cfg_.load_command, "{file}", detail::shell_quote(file.string()));
    cmd = detail::replace_all(cmd, "{collection}", detail::shell_quote(cfg_.collection));
    return finish(detail::run_shell(cmd, timeout));
  }

 private:
  static AdapterResponse finish(detail::ProcessResult&& r) {
    AdapterResponse resp;
    resp.status = r.exit_code;
    if (r.timed_out) {
      resp.outcome = Outcome::timeout();
    } else if (r.exit_code != 0) {
      resp.outcome = Outcome::error("exit code " + std::to_string(r.exit_code) + ": " +
                                    detail::truncate(r.err.empty() ? r.out : r.err));
    }
    resp.body = std::move(r.out);
    return resp;
  }

  BackendConfig cfg_;
};

// An HTTP request written as text: "METHOD /path" on the first line,
// optional "Header: value" lines, a blank line, then the body.
struct HttpRequestText {
  std::string method;
  std::string path;
  httplib::Headers headers;
  std::string body;
};

inline std::optional<HttpRequestText> parse_request_text(std::string_view text) {
  static constexpr std::string_view kMethods[] = {"GET ", "POST ", "PUT ", "DELETE ", "HEAD "};
  bool is_request = false;
  for (auto m : kMethods)
    if (text.rfind(m, 0) == 0) is_request = true;
  if (!is_request) return std::nullopt;
  HttpRequestText r;
  auto eol = text.find('\n');
  std::string_view first = text.substr(0, eol);
  if (!first.empty() && first.back() == '\r') first.remove_suffix(1);
  auto sp = first.find(' ');
  r.method = std::string(first.substr(0, sp));
  r.path = std::string(first.substr(sp + 1));
  std::string_view rest = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
  while (!rest.empty()) {
    auto e = rest.find('\n');
    std::string_view line = rest.substr(0, e);
    rest = e == std::string_view::npos ? std::string_view{} : rest.substr(e + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) break;
    auto colon = line.find(':');
    if (colon == std::string_view::npos) continue;
    std::string_view value = line.substr(colon + 1);
    while (!value.empty() && value.front() == ' ') value.remove_prefix(1);
    r.headers.emplace(std::string(line.substr(0, colon)), std::string(value));
  }
  r.body = std::string(rest);
  while (!r.body.empty() && (r.body.back() == '\n' || r.body.back() == '\r')) r.body.pop_back();
  return r;
}

class HttpEndpointAdapter : public BackendAdapter {
 public:
  explicit HttpEndpointAdapter(BackendConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.url.empty()) throw ConfigError("backend '" + cfg_.name + "': url is empty");
  }

  bool ping() override {
    auto cli = client(milliseconds(10000));
    auto res = cli.Get(cfg_.ping_path);
    return res && res->status >= 200 && res->status < 300;
  }

  AdapterResponse run(std::string_view text, milliseconds timeout) override {
    return send(to_request(text), timeout, false);
  }

  AdapterResponse install(std::string_view setup_text, milliseconds timeout) override {
    return send(to_request(setup_text), timeout, true);
  }

  AdapterResponse load(const std::filesystem::path& file, milliseconds timeout) override {
    if (cfg_.load_path.empty()) throw AdapterFailure("backend '" + cfg_.name + "' has no load_path");
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoFailure("cannot open " + file.string());
    auto cli = client(timeout);
    AdapterResponse last;
    auto post = [&](const std::string& body, const char* type) {
      auto res = cli.Post(cfg_.load_path, body, type);
      if (!res) {
        last.outcome = Outcome::error("load request failed: " + httplib::to_string(res.error()));
        return false;
      }
      last.status = res->status;
      last.body = res->body;
      if (res->status >= 300) {
        last.outcome = Outcome::error("HTTP " + std::to_string(res->status) + ": " + detail::truncate(res->body));
        return false;
      }
      return true;
    };
    std::string line, batch;
    std::size_t in_batch = 0;
    const bool bulk = cfg_.load_format == "couch_bulk";
    auto flush = [&] {
      if (in_batch == 0) return true;
      bool ok = bulk ? post("{\"docs\":[" + batch + "]}", "application/json") : post(batch, "application/x-ndjson");
      batch.clear();
      in_batch = 0;
      return ok;
    };
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      if (bulk && in_batch) batch += ',';
      batch += line;
      if (!bulk) batch += '\n';
      if (++in_batch >= std::max<std::size_t>(cfg_.load_batch, 1) && !flush()) return last;
    }
    flush();
    return last;
  }

 private:
  httplib::Client client(milliseconds timeout) const {
    httplib::Client cli(cfg_.url);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    cli.set_read_timeout(secs.count(), usecs.count());
    cli.set_write_timeout(secs.count(), usecs.count());
    cli.set_connection_timeout(std::min<std::int64_t>(secs.count(), 10), secs.count() >= 10 ? 0 : usecs.count());
    if (!cfg_.user.empty()) cli.set_basic_auth(cfg_.user, cfg_.password);
    cli.set_keep_alive(false);
    return cli;
  }

  HttpRequestText to_request(std::string_view text) const {
    if (auto r = parse_request_text(text)) return *r;
    HttpRequestText r;
    r.method = cfg_.query_request.method;
    r.path = detail::replace_all(cfg_.query_request.path, "{collection}", cfg_.collection);
    std::string body = cfg_.query_request.body;
    std::string json_lit;
    detail::json_string(json_lit, text);
    body = detail::replace_all(body, "{query_json}", json_lit);
    body = detail::replace_all(body, "{query_xml}", xml::escape_text(text));
    body = detail::replace_all(body, "{collection}", cfg_.collection);
    body = detail::replace_all(body, "{query}", text);
    r.body = std::move(body);
    r.headers.emplace("Content-Type", cfg_.query_request.content_type);
    return r;
  }

  AdapterResponse send(const HttpRequestText& req, milliseconds timeout, bool conflict_ok) {
    auto cli = client(timeout);
    std::string type = "application/json";
    httplib::Headers headers;
    for (const auto& [k, v] : req.headers) {
      if (detail::iequals(k, "Content-Type")) type = v;
      else headers.emplace(k, v);
    }
    const auto start = std::chrono::steady_clock::now();
    httplib::Result res = [&] {
      if (req.method == "GET") return cli.Get(req.path, headers);
      if (req.method == "PUT") return cli.Put(req.path, headers, req.body, type);
      if (req.method == "DELETE") return cli.Delete(req.path, headers, req.body, type);
      if (req.method == "HEAD") return cli.Head(req.path, headers);
      return cli.Post(req.path, headers, req.body, type);
    }();
    AdapterResponse resp;
    if (!res) {
      auto elapsed = std::chrono::steady_clock::now() - start;
      if (elapsed >= timeout * 9 / 10 || res.error() == httplib::Error::ConnectionTimeout)
        resp.outcome = Outcome::timeout();
      else
        resp.outcome = Outcome::error("request failed: " + httplib::to_string(res.error()));
      return resp;
    }
    resp.status = res->status;
    resp.body = std::move(res->body);
    if (res->status >= 300 && !(conflict_ok && res->status == 409))
      resp.outcome = Outcome::error("HTTP " + std::to_string(res->status) + ": " + detail::truncate(resp.body));
    return resp;
  }

  BackendConfig cfg_;
};

inline std::unique_ptr<BackendAdapter> make_adapter(const BackendConfig& cfg) {
  if (cfg.adapter_kind == AdapterKind::CommandRunner) return std::make_unique<CommandRunnerAdapter>(cfg);
  return std::make_unique<HttpEndpointAdapter>(cfg);
}

// ---------------------------------------------------------------------------
// Result counting

namespace detail {

inline const nlohmann::json* json_path(const nlohmann::json& root, std::string_view path) {
  const nlohmann::json* cur = &root;
  while (!path.empty()) {
    auto dot = path.find('.');
    std::string_view part = path.substr(0, dot);
    path = dot == std::string_view::npos ? std::string_view{} : path.substr(dot + 1);
    if (cur->is_array()) {
      std::size_t idx = 0;
      for (char c : part) {
        if (c < '0' || c > '9') return nullptr;
        idx = idx * 10 + static_cast<std::size_t>(c - '0');
      }
      if (idx >= cur->size()) return nullptr;
      cur = &(*cur)[idx];
    } else if (cur->is_object()) {
      auto it = cur->find(std::string(part));
      if (it == cur->end()) return nullptr;
      cur = &*it;
    } else {
      return nullptr;
    }
  }
  return cur;
}

inline std::optional<std::uint64_t> json_count(const nlohmann::json& v) {
  if (v.is_array()) return v.size();
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
  return std::nullopt;
}

inline std::uint64_t count_lines(std::string_view body) {
  std::uint64_t n = 0;
  bool content = false;
  for (char c : body) {
    if (c == '\n') {
      if (content) ++n;
      content = false;
    } else if (c != ' ' && c != '\r' && c != '\t') {
      content = true;
    }
  }
  return n + (content ? 1 : 0);
}

}  // namespace detail

inline std::optional<std::uint64_t> extract_result_count(std::string_view body, std::string_view mode) {
  if (mode == "none") return std::nullopt;
  if (mode == "lines") return detail::count_lines(body);
  if (mode.rfind("json:", 0) == 0) {
    auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded()) return std::nullopt;
    auto* v = detail::json_path(j, mode.substr(5));
    return v ? detail::json_count(*v) : std::nullopt;
  }
  auto j = nlohmann::json::parse(body, nullptr, false);
  if (!j.is_discarded()) {
    if (j.is_array()) return j.size();
    if (j.is_object())
      for (const char* key : {"docs", "rows", "results"})
        if (auto it = j.find(key); it != j.end() && it->is_array()) return it->size();
  }
  return detail::count_lines(body);
}

// ---------------------------------------------------------------------------
// Runner

struct Protocol {
  std::size_t runs = 10;
  bool cold_prefill = true;
};

struct RunRecord {
  std::string backend;
  std::string query;
  std::string sf;
  std::size_t run_index = 0;
  Phase phase = Phase::Warm;
  nanoseconds elapsed{0};
  Outcome outcome;
  std::optional<std::uint64_t> result_count;
  // Clock readings around the timed call; used to check runs never overlap.
  nanoseconds started{0};
  nanoseconds finished{0};
};

using Clock = std::function<nanoseconds()>;

inline Clock steady_clock_source() {
  return [] { return std::chrono::duration_cast<nanoseconds>(std::chrono::steady_clock::now().time_since_epoch()); };
}

struct LoadResult {
  std::uint64_t records = 0;
  nanoseconds elapsed{0};
};

class BenchRunner {
 public:
  BenchRunner(BackendConfig cfg, std::unique_ptr<BackendAdapter> adapter, Clock clock = steady_clock_source())
      : cfg_(std::move(cfg)), adapter_(std::move(adapter)), clock_(std::move(clock)) {}

  const BackendConfig& config() const noexcept { return cfg_; }
  BackendAdapter& adapter() noexcept { return *adapter_; }

  void ping() {
    bool ok = false;
    try {
      ok = adapter_->ping();
    } catch (const std::exception& e) {
      throw BackendUnreachable("backend '" + cfg_.name + "' unreachable: " + e.what());
    }
    if (!ok) throw BackendUnreachable("backend '" + cfg_.name + "' did not answer ping");
  }

  void install_setup(const TranslatedQuery& tq) {
    for (const auto& text : tq.setup_texts) {
      AdapterResponse r = adapter_->install(text, cfg_.timeout);
      if (!r.outcome.ok())
        throw AdapterFailure("backend '" + cfg_.name + "' rejected setup: " + to_text(r.outcome));
    }
  }

  // Pings, installs setup texts, then runs the cold prefill (if enabled)
  // followed by `protocol.runs` warm runs, one at a time.
  std::vector<RunRecord> execute(const TranslatedQuery& tq, const std::string& query_label, const std::string& sf_label,
                                 Protocol protocol) {
    ping();
    install_setup(tq);
    std::vector<RunRecord> out;
    out.reserve(protocol.runs + 1);
    if (protocol.cold_prefill) out.push_back(timed_run(tq, query_label, sf_label, 0, Phase::Cold));
    for (std::size_t i = 0; i < protocol.runs; ++i)
      out.push_back(timed_run(tq, query_label, sf_label, i + 1, Phase::Warm));
    return out;
  }

  // Loads emitted documents, then checks the backend's record count.
  LoadResult load_dataset(const std::vector<std::filesystem::path>& files, std::uint64_t expected_records) {
    ping();
    const auto start = clock_();
    for (const auto& f : files) {
      if (!std::filesystem::exists(f)) throw IoFailure("no such file: " + f.string());
      AdapterResponse r = adapter_->load(f, cfg_.timeout);
      if (!r.outcome.ok()) throw AdapterFailure("backend '" + cfg_.name + "' load failed: " + to_text(r.outcome));
    }
    LoadResult res;
    res.elapsed = clock_() - start;
    res.records = count_records();
    if (res.records != expected_records) throw CountMismatch(expected_records, res.records);
    return res;
  }

  std::uint64_t count_records() {
    if (cfg_.count_query.empty()) throw AdapterFailure("backend '" + cfg_.name + "' has no count_query");
    AdapterResponse r = adapter_->run(cfg_.count_query, cfg_.timeout);
    if (!r.outcome.ok()) throw AdapterFailure("count query failed: " + to_text(r.outcome));
    std::optional<std::uint64_t> n;
    if (!cfg_.count_field.empty()) {
      auto j = nlohmann::json::parse(r.body, nullptr, false);
      if (!j.is_discarded())
        if (auto* v = detail::json_path(j, cfg_.count_field)) n = detail::json_count(*v);
    } else {
      n = extract_result_count(r.body, cfg_.result_count);
    }
    if (!n) throw AdapterFailure("cannot read a record count from: " + detail::truncate(r.body, 200));
    return *n;
  }

 private:
  RunRecord timed_run(const TranslatedQuery& tq, const std::string& query_label, const std::string& sf_label,
                      std::size_t index, Phase phase) {
    RunRecord rec;
    rec.backend = cfg_.name;
    rec.query = query_label;
    rec.sf = sf_label;
    rec.run_index = index;
    rec.phase = phase;
    AdapterResponse resp;
    rec.started = clock_();
    try {
      resp = adapter_->run(tq.main_text, cfg_.timeout);
    } catch (const std::exception& e) {
      resp.outcome = Outcome::error(e.what());
    }
    rec.finished = clock_();
    rec.elapsed = rec.finished - rec.started;
    rec.outcome = resp.outcome;
    if (resp.outcome.ok()) {
      try {
        rec.result_count = extract_result_count(resp.body, cfg_.result_count);
      } catch (const std::exception&) {
        rec.result_count.reset();
      }
    }
    return rec;
  }

  BackendConfig cfg_;
  std::unique_ptr<BackendAdapter> adapter_;
  Clock clock_;
};

// ---------------------------------------------------------------------------
// runs.csv

inline const csv::Row& runs_csv_header() {
  static const csv::Row h = {"backend", "query", "sf", "run_index", "phase", "elapsed_ms", "outcome", "result_count"};
  return h;
}

inline std::string format_ms(nanoseconds d) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", static_cast<double>(d.count()) / 1e6);
  return buf;
}

inline void write_runs_csv(std::ostream& out, const std::vector<RunRecord>& runs, bool header = true) {
  if (header) csv::write_row(out, runs_csv_header());
  for (const auto& r : runs) {
    csv::write_row(out, {r.backend, r.query, r.sf, std::to_string(r.run_index), std::string(to_string(r.phase)),
                         format_ms(r.elapsed), to_text(r.outcome),
                         r.result_count ? std::to_string(*r.result_count) : std::string()});
  }
}

inline std::vector<RunRecord> read_runs_csv(std::istream& in) {
  auto rows = csv::read_all(in);
  if (rows.empty()) return {};
  if (rows.front() != runs_csv_header()) throw Error("runs CSV header does not match the expected columns");
  std::vector<RunRecord> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != 8) throw Error("runs CSV row " + std::to_string(i + 1) + " has " + std::to_string(row.size()) +
                                     " fields");
    RunRecord r;
    r.backend = row[0];
    r.query = row[1];
    r.sf = row[2];
    r.run_index = std::stoul(row[3]);
    if (row[4] == "cold") r.phase = Phase::Cold;
    else if (row[4] == "warm") r.phase = Phase::Warm;
    else throw Error("bad phase '" + row[4] + "'");
    r.elapsed = nanoseconds(static_cast<std::int64_t>(std::llround(std::stod(row[5]) * 1e6)));
    r.outcome = parse_outcome(row[6]);
    if (!row[7].empty()) r.result_count = std::stoull(row[7]);
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Suite driver used by the `bench` command.

enum class ColdMode { PerQuery, PerFamily, None };

inline ColdMode parse_cold_mode(std::string_view s) {
  if (s == "per-query") return ColdMode::PerQuery;
  if (s == "per-family") return ColdMode::PerFamily;
  if (s == "none") return ColdMode::None;
  throw ConfigError("cold mode must be per-query, per-family or none");
}

inline std::string_view to_string(ColdMode m) {
  switch (m) {
    case ColdMode::PerQuery: return "per-query";
    case ColdMode::PerFamily: return "per-family";
    case ColdMode::None: return "none";
  }
  return "?";
}

// Runs each query under the protocol. A failure to install one query's setup
// is recorded as an error row and the suite moves on.
inline std::vector<RunRecord> run_suite(BenchRunner& runner, const std::vector<QuerySpec>& queries,
                                        const std::string& sf_label, std::size_t runs, ColdMode cold,
                                        const TranslateOptions& topts) {
  std::vector<RunRecord> all;
  std::vector<int> families_seen;
  for (const auto& q : queries) {
    Protocol p{runs, cold == ColdMode::PerQuery};
    if (cold == ColdMode::PerFamily &&
        std::find(families_seen.begin(), families_seen.end(), number(q.id)) == families_seen.end()) {
      p.cold_prefill = true;
      families_seen.push_back(number(q.id));
    }
    TranslatedQuery tq = translate(q, runner.config().dialect, topts);
    try {
      auto recs = runner.execute(tq, to_text(q), sf_label, p);
      all.insert(all.end(), recs.begin(), recs.end());
    } catch (const AdapterFailure& e) {
      RunRecord r;
      r.backend = runner.config().name;
      r.query = to_text(q);
      r.sf = sf_label;
      r.phase = Phase::Warm;
      r.outcome = Outcome::error(e.what());
      all.push_back(std::move(r));
    }
  }
  return all;
}

}  // namespace dodbench

#pragma once

// On-disk form of a translated query: numbered setup sections, then the main text.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "dodbench/report.hpp"
#include "dodbench/translate.hpp"

namespace dodbench::testkit {

inline std::string render_golden(const TranslatedQuery& tq) {
  std::string s;
  for (std::size_t i = 0; i < tq.setup_texts.size(); ++i)
    s += "-- setup " + std::to_string(i + 1) + " --\n" + tq.setup_texts[i];
  s += "-- main --\n" + tq.main_text;
  return s;
}

inline std::filesystem::path golden_path(const std::filesystem::path& root, const QuerySpec& q, Dialect d) {
  return root / std::string(to_string(d)) / (figure_name(to_text(q)) + ".txt");
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace dodbench::testkit

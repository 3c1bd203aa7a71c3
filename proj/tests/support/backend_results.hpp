#pragma once

// Converts Couch and N1QL response bodies into the oracle's ResultSet shape.
// Selection rows carry no record index, so callers compare against a
// ResultSet passed through without_indices().

#include <string>

#include <nlohmann/json.hpp>

#include "dodbench/oracle.hpp"
#include "dodbench/translate.hpp"

namespace dodbench::testkit {

inline ResultSet result_from_body(const QuerySpec& q, Dialect d, const std::string& body) {
  using nlohmann::json;
  ResultSet rs;
  rs.aggregation = !q.is_selection();
  json j = json::parse(body);
  if (q.is_selection()) {
    const json& items = d == Dialect::N1QL ? j.at("results") : j.at("docs");
    for (const auto& it : items) rs.rows.push_back({0, it.at("title").get<std::string>()});
    return rs;
  }
  if (d == Dialect::N1QL) {
    for (const auto& it : j.at("results")) {
      GroupRow g{it.at("author").get<std::string>(), std::nullopt, it.at("count").get<std::uint64_t>()};
      if (it.contains("year")) g.year = it.at("year").get<int>();
      rs.groups.push_back(std::move(g));
    }
    return rs;
  }
  for (const auto& row : j.at("rows")) {
    GroupRow g;
    if (row.at("key").is_array()) {
      g.author = row.at("key")[0].get<std::string>();
      g.year = row.at("key")[1].get<int>();
    } else {
      g.author = row.at("key").get<std::string>();
    }
    g.count = row.at("value").get<std::uint64_t>();
    rs.groups.push_back(std::move(g));
  }
  return rs;
}

inline ResultSet without_indices(ResultSet rs) {
  for (auto& r : rs.rows) r.record_index = 0;
  return rs;
}

}  // namespace dodbench::testkit

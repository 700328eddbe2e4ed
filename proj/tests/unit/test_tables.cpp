#include <doctest.h>

#include "fixtures.hpp"
#include "vrh/common.hpp"
#include "vrh/tables.hpp"

using namespace vrh;

namespace {

MetricResult m(const std::string& metric, double v, const std::string& enc, const std::string& cond,
               const std::string& sev) {
  return {metric, v, {{"encoder", enc}, {"condition", cond}, {"severity", sev}}, 8};
}

}  // namespace

TEST_CASE("pivot with gaps and conflicts") {
  std::vector<MetricResult> recs{m("rsi", 0.9, "a", "blur", "1"), m("rsi", 0.8, "a", "blur", "2"),
                                 m("rsi", 0.7, "a", "snow", "1"), m("ccr", 0.1, "a", "snow", "2"),
                                 m("rsi", 0.5, "b", "blur", "1")};
  const auto p = pivot(recs, "rsi", "condition", "severity", {{"encoder", "a"}});
  CHECK(p.rows == std::vector<std::string>{"blur", "snow"});
  CHECK(p.cols == std::vector<std::string>{"1", "2"});
  CHECK(p.at("blur", "2") == 0.8);
  CHECK_FALSE(p.at("snow", "2"));
  CHECK_FALSE(p.complete());
  REQUIRE(p.warnings.size() == 1);
  CHECK(p.warnings[0].find("snow") != std::string::npos);

  const auto t = pivot_to_table(p, "x");
  CHECK(format_csv(t) == "condition,1,2\nblur,0.9,0.8\nsnow,0.7,\n");

  const auto fixed = pivot(recs, "rsi", "condition", "severity", {{"encoder", "a"}}, {"snow", "blur", "fog"}, {"1"});
  CHECK(fixed.rows == std::vector<std::string>{"snow", "blur", "fog"});
  CHECK(fixed.warnings.size() == 1);

  recs.push_back(m("rsi", 0.85, "a", "blur", "1"));
  CHECK_THROWS_AS(pivot(recs, "rsi", "condition", "severity", {{"encoder", "a"}}), DataError);
  recs.back().value = 0.9;
  CHECK_NOTHROW(pivot(recs, "rsi", "condition", "severity", {{"encoder", "a"}}));
}

TEST_CASE("paired cell differences") {
  const std::vector<MetricResult> recs{m("rsi", 0.9, "a", "x", "1"), m("rsi", 0.8, "a", "x", "2"),
                                       m("rsi", 0.6, "a", "y", "1"), m("rsi", 0.7, "a", "y", "2"),
                                       m("rsi", 0.5, "b", "x", "1"), m("rsi", 0.5, "b", "x", "2"),
                                       m("rsi", 0.5, "b", "y", "1")};
  const auto a = pivot(recs, "rsi", "condition", "severity", {{"encoder", "a"}});
  const auto b = pivot(recs, "rsi", "condition", "severity", {{"encoder", "b"}});
  std::vector<std::string> warnings;
  const auto d = paired_cell_diffs(a, b, &warnings);
  REQUIRE(d.size() == 3);
  CHECK(d[0] == doctest::Approx(0.4));
  CHECK(d[1] == doctest::Approx(0.3));
  CHECK(d[2] == doctest::Approx(0.1));
  CHECK(warnings.size() == 1);
}

TEST_CASE("radar normalisation") {
  const auto r = radar_normalize({{"robustness", {{"a", 0.2}, {"b", 0.6}, {"c", 0.4}}}, {"flat", {{"a", 3}, {"b", 3}}}});
  REQUIRE(r.size() == 2);
  const auto& flat = r[0].axis == "flat" ? r[0] : r[1];
  const auto& rob = r[0].axis == "flat" ? r[1] : r[0];
  CHECK(rob.normalized.at("b") == 1.0);
  CHECK(rob.normalized.at("a") == 0.0);
  CHECK(rob.normalized.at("c") == doctest::Approx(0.5));
  for (const auto& [e, v] : flat.normalized) CHECK(v == 1.0);
}

TEST_CASE("csv output") {
  CHECK(csv_escape("plain") == "plain");
  CHECK(csv_escape("a,b") == "\"a,b\"");
  CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
  fixtures::TempDir tmp("tables");
  Table t{"demo", {"k", "v"}, {{"a", "1"}}, {{"metric", "rsi"}}};
  write_table(tmp.path(), t);
  CHECK(read_file(tmp.path() / "demo.csv") == "k,v\na,1\n");
  const auto side = nlohmann::json::parse(read_file(tmp.path() / "demo.json"));
  CHECK(side["metric"] == "rsi");
  CHECK(side["rows"] == 1);
  CHECK(side.contains("harness_version"));
}

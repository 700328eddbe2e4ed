#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vrh/metrics.hpp"

namespace vrh {

struct PivotTable {
  std::string metric;
  std::string row_field;
  std::string col_field;
  std::vector<std::string> rows;
  std::vector<std::string> cols;
  // cells[r][c]; nullopt marks a missing cell.
  std::vector<std::vector<std::optional<double>>> cells;
  std::vector<std::string> warnings;

  std::optional<double> at(std::string_view row, std::string_view col) const;
  bool complete() const;
};

// Pivots `metric` records matching `filter` into row_field x col_field.
// Expected rows/cols (when given) fix the grid and order; otherwise the
// observed keys are used in sorted order. Gaps stay empty and add a warning.
// Two records for one cell with different values are a DataError.
PivotTable pivot(const std::vector<MetricResult>& records, std::string_view metric, std::string_view row_field,
                 std::string_view col_field, const std::map<std::string, std::string>& filter = {},
                 std::vector<std::string> expected_rows = {}, std::vector<std::string> expected_cols = {});

// a - b over cells present in both tables, in row-major order.
std::vector<double> paired_cell_diffs(const PivotTable& a, const PivotTable& b,
                                      std::vector<std::string>* warnings = nullptr);

struct RadarAxis {
  std::string axis;
  double raw_min = 0.0;
  double raw_max = 0.0;
  std::map<std::string, double> raw;
  // Min-max normalised; the maximum maps to 1. A flat axis maps to 1 everywhere.
  std::map<std::string, double> normalized;
};
// axis -> encoder -> raw score
std::vector<RadarAxis> radar_normalize(const std::map<std::string, std::map<std::string, double>>& scores);

struct Table {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  // Merged into the sidecar next to grouping/conventions/harness_version.
  nlohmann::json meta = nlohmann::json::object();
};

std::string csv_escape(std::string_view field);
std::string format_csv(const Table& t);
// <dir>/<name>.csv plus <dir>/<name>.json.
void write_table(const std::filesystem::path& dir, const Table& t);
Table pivot_to_table(const PivotTable& p, std::string name);
std::string cell_text(const std::optional<double>& v);

}  // namespace vrh

#include "vrh/tables.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <set>

#include "vrh/common.hpp"

namespace vrh {

std::optional<double> PivotTable::at(std::string_view row, std::string_view col) const {
  auto r = std::find(rows.begin(), rows.end(), row);
  auto c = std::find(cols.begin(), cols.end(), col);
  if (r == rows.end() || c == cols.end()) return std::nullopt;
  return cells[r - rows.begin()][c - cols.begin()];
}

bool PivotTable::complete() const {
  for (const auto& r : cells) {
    for (const auto& c : r) {
      if (!c) return false;
    }
  }
  return true;
}

PivotTable pivot(const std::vector<MetricResult>& records, std::string_view metric, std::string_view row_field,
                 std::string_view col_field, const std::map<std::string, std::string>& filter,
                 std::vector<std::string> expected_rows, std::vector<std::string> expected_cols) {
  PivotTable p;
  p.metric = metric;
  p.row_field = row_field;
  p.col_field = col_field;
  std::map<std::pair<std::string, std::string>, double> seen;
  std::set<std::string> rows, cols;
  for (const auto& r : records) {
    if (r.metric != metric) continue;
    bool match = true;
    for (const auto& [k, v] : filter) {
      auto it = r.group.find(k);
      if (it == r.group.end() || it->second != v) {
        match = false;
        break;
      }
    }
    if (!match) continue;
    auto ri = r.group.find(std::string(row_field));
    auto ci = r.group.find(std::string(col_field));
    if (ri == r.group.end() || ci == r.group.end()) {
      throw DataError(fmt::format("{} record lacks grouping key {} or {}", metric, row_field, col_field));
    }
    const auto key = std::pair{ri->second, ci->second};
    auto [it, inserted] = seen.emplace(key, r.value);
    if (!inserted && it->second != r.value) {
      throw DataError(fmt::format("conflicting {} values for {}={}, {}={}", metric, row_field, key.first, col_field,
                                  key.second));
    }
    rows.insert(key.first);
    cols.insert(key.second);
  }
  p.rows = expected_rows.empty() ? std::vector<std::string>(rows.begin(), rows.end()) : std::move(expected_rows);
  p.cols = expected_cols.empty() ? std::vector<std::string>(cols.begin(), cols.end()) : std::move(expected_cols);
  p.cells.assign(p.rows.size(), std::vector<std::optional<double>>(p.cols.size()));
  for (std::size_t i = 0; i < p.rows.size(); ++i) {
    for (std::size_t j = 0; j < p.cols.size(); ++j) {
      auto it = seen.find({p.rows[i], p.cols[j]});
      if (it != seen.end()) {
        p.cells[i][j] = it->second;
      } else {
        p.warnings.push_back(fmt::format("missing {} cell {}={}, {}={}", metric, row_field, p.rows[i], col_field,
                                         p.cols[j]));
      }
    }
  }
  return p;
}

std::vector<double> paired_cell_diffs(const PivotTable& a, const PivotTable& b, std::vector<std::string>* warnings) {
  std::vector<double> out;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    for (std::size_t j = 0; j < a.cols.size(); ++j) {
      const auto va = a.cells[i][j];
      const auto vb = b.at(a.rows[i], a.cols[j]);
      if (va && vb) {
        out.push_back(*va - *vb);
      } else if (warnings) {
        warnings->push_back(fmt::format("cell {}/{} missing in one table; excluded from paired differences",
                                        a.rows[i], a.cols[j]));
      }
    }
  }
  return out;
}

std::vector<RadarAxis> radar_normalize(const std::map<std::string, std::map<std::string, double>>& scores) {
  std::vector<RadarAxis> out;
  for (const auto& [axis, vals] : scores) {
    if (vals.empty()) continue;
    RadarAxis a;
    a.axis = axis;
    a.raw = vals;
    auto [lo, hi] = std::minmax_element(vals.begin(), vals.end(),
                                        [](const auto& x, const auto& y) { return x.second < y.second; });
    a.raw_min = lo->second;
    a.raw_max = hi->second;
    for (const auto& [enc, v] : vals) {
      a.normalized[enc] = a.raw_max > a.raw_min ? (v - a.raw_min) / (a.raw_max - a.raw_min) : 1.0;
    }
    out.push_back(std::move(a));
  }
  return out;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string format_csv(const Table& t) {
  std::string out;
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += ',';
      out += csv_escape(fields[i]);
    }
    out += '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
  return out;
}

void write_table(const std::filesystem::path& dir, const Table& t) {
  atomic_write(dir / (t.name + ".csv"), format_csv(t));
  nlohmann::json side = t.meta.is_object() ? t.meta : nlohmann::json::object();
  side["table"] = t.name;
  side["columns"] = t.header;
  side["rows"] = t.rows.size();
  side["harness_version"] = kHarnessVersion;
  if (!side.contains("conventions")) {
    side["conventions"] = {{"missing_cells", "empty field, never zero-filled"},
                           {"numbers", "shortest round-trip decimal"}};
  }
  atomic_write(dir / (t.name + ".json"), side.dump(2) + "\n");
}

std::string cell_text(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

Table pivot_to_table(const PivotTable& p, std::string name) {
  Table t;
  t.name = std::move(name);
  t.header.push_back(p.row_field);
  t.header.insert(t.header.end(), p.cols.begin(), p.cols.end());
  for (std::size_t i = 0; i < p.rows.size(); ++i) {
    std::vector<std::string> r{p.rows[i]};
    for (const auto& c : p.cells[i]) r.push_back(cell_text(c));
    t.rows.push_back(std::move(r));
  }
  t.meta = {{"metric", p.metric},
            {"grouping", {{"rows", p.row_field}, {"columns", p.col_field}}},
            {"warnings", p.warnings}};
  return t;
}

}  // namespace vrh

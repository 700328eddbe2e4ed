#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vrh/dataset.hpp"
#include "vrh/metrics.hpp"
#include "vrh/stats.hpp"

namespace vrh {

struct ResultsSet {
  std::map<std::string, std::vector<MetricResult>> metrics;
  std::map<std::string, std::vector<StatResult>> stats;
  std::map<std::string, nlohmann::json> headers;
  std::vector<std::string> warnings;
};

// Reads every results/<axis>.jsonl under `results_dir` (the directory holding
// the .jsonl files). Truncated tails are tolerated with a warning.
ResultsSet load_results(const std::filesystem::path& results_dir);

struct ReportSummary {
  std::vector<std::string> tables;
  std::vector<std::string> warnings;
};

// Writes the CSV/JSON tables plus plot_data.json into `out_dir`. Axes without
// results produce warnings, not empty tables. `labels` adds class names.
ReportSummary write_report(const std::filesystem::path& results_dir, const std::filesystem::path& out_dir,
                           double alpha = 0.01, const LabelTable* labels = nullptr);

}  // namespace vrh

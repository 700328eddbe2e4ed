#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vrh/metrics.hpp"

namespace vrh {

struct StatResult {
  std::string test;
  // Wilcoxon W, or the regression slope.
  double statistic = 0.0;
  // One-sided p-value, or R^2 for a regression.
  double p_value = 1.0;
  std::size_t n = 0;
  // Zero differences dropped before ranking.
  std::size_t n_dropped = 0;
  double mean_delta = 0.0;
  // "n.s." when no non-zero difference remained; "degenerate" for a constant response.
  std::string flag;
  std::map<std::string, std::string> group;

  nlohmann::json to_json() const;
  static StatResult from_json(const nlohmann::json& j);
};

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t n = 0;
  // Response has zero variance; r2 is reported as 0.
  bool degenerate = false;
};

// Ordinary least squares of value on severity.
SlopeFit degradation_slope(const std::vector<CurvePoint>& curve);
StatResult slope_result(const SlopeFit& fit, std::map<std::string, std::string> group);

// Ranks of |x| (1-based) with ties sharing their average rank.
std::vector<double> average_ranks(const std::vector<double>& x);

// One-sided (alternative "greater") signed-rank test. W is the sum of ranks
// of positive differences. Exact null distribution for N <= 20, normal
// approximation with continuity and tie correction above.
StatResult wilcoxon_one_sided(const std::vector<double>& diffs);

inline constexpr int kWilcoxonExactLimit = 20;

// P(W >= w) under the null for the given ranks, by counting sign patterns.
double wilcoxon_exact_upper(const std::vector<double>& ranks, double w);

}  // namespace vrh

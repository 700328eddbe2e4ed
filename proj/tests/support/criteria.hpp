#pragma once

#include <string>
#include <vector>

namespace criteria {

struct Outcome {
  bool pass = true;
  std::vector<std::string> failures;
  // One-line summary of what was measured.
  std::string detail;

  void fail(std::string msg) {
    pass = false;
    failures.push_back(std::move(msg));
  }
};

Outcome perturbation_suite();
Outcome metric_oracles(int trials = 200);
Outcome wilcoxon_exactness();
Outcome slope_regression();
Outcome attentive_probe();
Outcome knn_probe();
Outcome end_to_end_smoke();
// Reads the config named by VRH_CHECKPOINT_CONFIG.
Outcome checkpoint_anchors(const std::string& config_path);

}  // namespace criteria

#include <fmt/format.h>

#include <chrono>
#include <cstdlib>
#include <exception>
#include <functional>
#include <string>

#include "criteria.hpp"

namespace {

int failed = 0;

void report(int id, const char* name, const std::function<criteria::Outcome()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  criteria::Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o.fail(fmt::format("exception: {}", e.what()));
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  fmt::print("{} criterion {} {}: {} [{:.2f}s]\n", o.pass ? "PASS" : "FAIL", id, name, o.detail, s);
  const std::size_t shown = std::min<std::size_t>(o.failures.size(), 10);
  for (std::size_t i = 0; i < shown; ++i) fmt::print("    {}\n", o.failures[i]);
  if (o.failures.size() > shown) fmt::print("    ... {} more\n", o.failures.size() - shown);
  failed += !o.pass;
}

}  // namespace

int main() {
  report(1, "perturbation suite", [] { return criteria::perturbation_suite(); });
  report(2, "metric oracle equivalence", [] { return criteria::metric_oracles(); });
  report(3, "wilcoxon exactness", [] { return criteria::wilcoxon_exactness(); });
  report(4, "slope regression", [] { return criteria::slope_regression(); });
  report(5, "attentive probe", [] { return criteria::attentive_probe(); });
  report(6, "knn probe", [] { return criteria::knn_probe(); });
  report(7, "end-to-end smoke", [] { return criteria::end_to_end_smoke(); });
  if (const char* cfg = std::getenv("VRH_CHECKPOINT_CONFIG"); cfg && *cfg) {
    report(8, "checkpoint regression anchors", [cfg] { return criteria::checkpoint_anchors(cfg); });
  } else {
    fmt::print("SKIP criterion 8 checkpoint regression anchors: VRH_CHECKPOINT_CONFIG not set\n");
  }
  return failed == 0 ? 0 : 1;
}

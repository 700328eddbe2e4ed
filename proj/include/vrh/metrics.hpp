#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vrh/probes.hpp"
#include "vrh/taxonomy.hpp"

namespace vrh {

struct MetricResult {
  std::string metric;
  double value = 0.0;
  // encoder, axis, condition, severity, class, category ...
  std::map<std::string, std::string> group;
  std::size_t n = 0;

  nlohmann::json to_json() const;
  static MetricResult from_json(const nlohmann::json& j);

  friend bool operator==(const MetricResult&, const MetricResult&) = default;
};

struct EmbeddingPair {
  std::string clip_id;
  std::vector<float> f_clean;
  std::vector<float> f_pert;
  std::string perturbation;
};

// Throws NumericError naming `clip_id` when either vector has zero norm.
double cosine_similarity(std::span<const float> a, std::span<const float> b, std::string_view clip_id = {});

// Mean clean/perturbed cosine.
double rsi(const std::vector<EmbeddingPair>& pairs);
// Fraction of clips whose kNN label is unchanged by the perturbation.
double ccr(const std::vector<EmbeddingPair>& pairs, const KnnProbe& probe);
double ccr_from_labels(const std::vector<int>& clean, const std::vector<int>& perturbed);

struct CurvePoint {
  double severity = 0.0;
  double value = 0.0;
};

// Trapezoidal area over [0, s_max] divided by s_max. A clean point (0, 1) is
// prepended when the curve does not start at severity 0.
double auc_rsi(const std::vector<CurvePoint>& curve);

double topk_accuracy(const std::vector<ProbePrediction>& predictions, const std::vector<int>& labels, int k);
// 100 * perturbed / clean, in percent.
double retention(double perturbed_acc, double clean_acc);

struct FisherResult {
  double ratio = 0.0;
  double trace_between = 0.0;
  double trace_within = 0.0;
  int classes = 0;
  std::size_t n = 0;
};

inline constexpr double kFisherEpsilon = 1e-8;

// tr(S_B) / (tr(S_W) + 1e-8) on features centred on the global mean and
// divided by one global standard deviation.
FisherResult fisher_ratio(const std::vector<std::vector<float>>& features, const std::vector<int>& labels);

struct TierFisher {
  SemanticTier tier{};
  FisherResult pooled;
  // Each class's share: n_c |mu_c - mu|^2 / sum |x - mu_c|^2 within the tier.
  std::map<int, double> per_class;
  double class_mean = 0.0;
  double class_std = 0.0;
};
// Tiers with fewer than two represented classes are skipped.
std::vector<TierFisher> fisher_by_tier(const std::vector<std::vector<float>>& features, const std::vector<int>& labels,
                                       const ClassTaxonomy& taxonomy);

struct FlipRate {
  double rate = 0.0;
  std::size_t changed = 0;
  std::size_t antonymous = 0;
  std::size_t n = 0;
};
// Among clips whose prediction changed, the share whose reversed prediction is
// the antonym of the clean prediction. 0 when nothing changed.
FlipRate semantic_flip_rate(const std::map<std::string, int>& clean, const std::map<std::string, int>& reversed,
                            const std::map<int, int>& antonyms);

double dscs(double r_sem, double cos_rev);

// Mean |CCR(s) - RSI(s)|; the curves must share their severity grid.
double decoupling_index(const std::vector<CurvePoint>& ccr_curve, const std::vector<CurvePoint>& rsi_curve);

double temporal_consistency_bonus(double cos_static_noise, double cos_varying_noise);

// max over anchors of mean cosine(clean_i, static_anchor_i).
double spatial_grounding_index(const std::vector<std::vector<float>>& clean,
                               const std::map<std::string, std::vector<std::vector<float>>>& static_by_anchor);

struct FrameBias {
  std::string argmax;
  double spread = 0.0;
};
// Anchors in order first, middle, last; the earliest wins ties.
FrameBias frame_position_bias(const std::array<double, 3>& accuracy_first_middle_last);

struct TdiResult {
  std::map<std::string, double> per_family;
  double overall = 0.0;
};
// Per family: (clean - mean perturbed) / clean clamped to [0, 1]; overall is
// the unweighted mean over families.
TdiResult temporal_dependency_index(double clean_acc, const std::map<std::string, std::vector<double>>& per_family);

struct MacroMicro {
  double macro = 0.0;
  double micro = 0.0;
};
MacroMicro macro_micro_decomposition(double cos_segment, double cos_random);

inline constexpr double kConfidentThreshold = 0.75;
inline constexpr double kOverconfidentConfidence = 0.70;
inline constexpr double kOverconfidentAccuracy = 0.40;

struct ClassCalibration {
  int class_id = 0;
  std::size_t n = 0;
  double mean_confidence = 0.0;
  double accuracy = 0.0;
  double error_rate = 0.0;
  bool overconfident = false;
};

struct CalibrationReport {
  std::size_t n = 0;
  double accuracy = 0.0;
  // Confident (> 0.75) and wrong, over all predictions.
  double confident_wrong_rate = 0.0;
  // Confident and wrong, over confident predictions only.
  double confident_error_share = 0.0;
  std::size_t confident = 0;
  std::vector<ClassCalibration> per_class;
  // Class ids by descending error rate (ties: ascending id).
  std::vector<int> hardest;
  // Pooled accuracy per detail-sensitivity and object-size group.
  std::map<std::string, double> sensitivity_accuracy;
  std::map<std::string, double> size_accuracy;
};

CalibrationReport calibration_analysis(const std::vector<ProbePrediction>& predictions, const std::vector<int>& labels,
                                       const ClassTaxonomy* taxonomy = nullptr);

struct ClassDelta {
  int class_id = 0;
  std::string size;
  double delta = 0.0;
};
struct DeltaSummary {
  std::vector<ClassDelta> per_class;
  // object size -> (mean delta, classes where a wins)
  std::map<std::string, std::pair<double, int>> by_size;
};
// accuracy(a) - accuracy(b) for classes present in both reports.
DeltaSummary per_class_deltas(const CalibrationReport& a, const CalibrationReport& b, const ClassTaxonomy& taxonomy);

std::vector<MetricResult> calibration_metrics(const CalibrationReport& report,
                                              const std::map<std::string, std::string>& group);

}  // namespace vrh

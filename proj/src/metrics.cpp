#include "vrh/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "vrh/common.hpp"

namespace vrh {

nlohmann::json MetricResult::to_json() const {
  nlohmann::json j = {{"kind", "metric"}, {"metric", metric}, {"n", n}, {"group", group}};
  if (std::isfinite(value)) {
    j["value"] = value;
  } else {
    j["value"] = nullptr;
  }
  return j;
}

MetricResult MetricResult::from_json(const nlohmann::json& j) {
  MetricResult m;
  m.metric = j.at("metric").get<std::string>();
  m.value = j.at("value").is_null() ? std::nan("") : j.at("value").get<double>();
  m.n = j.value("n", std::size_t{0});
  if (j.contains("group")) m.group = j.at("group").get<std::map<std::string, std::string>>();
  return m;
}

double cosine_similarity(std::span<const float> a, std::span<const float> b, std::string_view clip_id) {
  if (a.size() != b.size()) throw DataError(fmt::format("clip {}: vectors differ in dimension", clip_id));
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw NumericError(fmt::format("clip {}: zero-norm embedding", clip_id));
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

double rsi(const std::vector<EmbeddingPair>& pairs) {
  if (pairs.empty()) throw DataError("rsi needs at least one pair");
  CompensatedSum s;
  for (const auto& p : pairs) s.add(cosine_similarity(p.f_clean, p.f_pert, p.clip_id));
  return s.value() / static_cast<double>(pairs.size());
}

double ccr_from_labels(const std::vector<int>& clean, const std::vector<int>& perturbed) {
  if (clean.size() != perturbed.size()) throw DataError("ccr: label lists differ in length");
  if (clean.empty()) throw DataError("ccr needs at least one clip");
  std::size_t same = 0;
  for (std::size_t i = 0; i < clean.size(); ++i) same += clean[i] == perturbed[i];
  return static_cast<double>(same) / static_cast<double>(clean.size());
}

double ccr(const std::vector<EmbeddingPair>& pairs, const KnnProbe& probe) {
  std::vector<int> a, b;
  for (const auto& p : pairs) {
    if (static_cast<int>(p.f_clean.size()) != probe.input_dim() || p.f_pert.size() != p.f_clean.size()) {
      throw DataError(fmt::format("ccr: clip {} does not match the probe dimension {}", p.clip_id, probe.input_dim()));
    }
    a.push_back(probe.classify(p.f_clean));
    b.push_back(probe.classify(p.f_pert));
  }
  return ccr_from_labels(a, b);
}

double auc_rsi(const std::vector<CurvePoint>& curve) {
  std::vector<CurvePoint> c = curve;
  if (c.empty()) throw DataError("auc_rsi needs at least one point");
  for (std::size_t i = 1; i < c.size(); ++i) {
    if (!(c[i].severity > c[i - 1].severity)) throw DataError("auc_rsi: severities must be strictly increasing");
  }
  if (c.front().severity < 0) throw DataError("auc_rsi: negative severity");
  if (c.front().severity > 0) c.insert(c.begin(), CurvePoint{0.0, 1.0});
  if (c.size() < 2) throw DataError("auc_rsi needs a point beyond severity 0");
  const double s_max = c.back().severity;
  // Integrate deviations from the first value so a constant curve returns it exactly.
  const double base = c.front().value;
  CompensatedSum area;
  for (std::size_t i = 1; i < c.size(); ++i) {
    area.add((c[i].severity - c[i - 1].severity) * ((c[i].value - base) + (c[i - 1].value - base)) / 2.0);
  }
  return base + area.value() / s_max;
}

double topk_accuracy(const std::vector<ProbePrediction>& predictions, const std::vector<int>& labels, int k) {
  if (predictions.size() != labels.size()) throw DataError("predictions and labels differ in length");
  if (predictions.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& t = predictions[i].topk;
    const auto end = t.begin() + std::min<std::ptrdiff_t>(k, static_cast<std::ptrdiff_t>(t.size()));
    hit += std::find(t.begin(), end, labels[i]) != end;
  }
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

double retention(double perturbed_acc, double clean_acc) {
  if (!(clean_acc > 0)) throw NumericError("retention undefined for zero clean accuracy");
  return 100.0 * perturbed_acc / clean_acc;
}

namespace {

struct Scatter {
  std::vector<double> mean;
  std::map<int, std::vector<double>> class_mean;
  std::map<int, std::size_t> class_n;
};

// Centres on the global mean and divides by one global standard deviation.
std::vector<std::vector<double>> global_standardize(const std::vector<std::vector<float>>& x) {
  const std::size_t n = x.size();
  const std::size_t d = x.front().size();
  std::vector<double> mu(d);
  for (std::size_t j = 0; j < d; ++j) {
    CompensatedSum s;
    for (const auto& r : x) s.add(r[j]);
    mu[j] = s.value() / n;
  }
  CompensatedSum var;
  for (const auto& r : x) {
    for (std::size_t j = 0; j < d; ++j) var.add((r[j] - mu[j]) * (r[j] - mu[j]));
  }
  double sd = std::sqrt(var.value() / static_cast<double>(n * d));
  if (!(sd > 0)) sd = 1.0;
  std::vector<std::vector<double>> z(n, std::vector<double>(d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) z[i][j] = (x[i][j] - mu[j]) / sd;
  }
  return z;
}

FisherResult fisher_on(const std::vector<std::vector<double>>& z, const std::vector<int>& labels,
                       const std::vector<std::size_t>& rows, std::map<int, double>* per_class) {
  const std::size_t d = z.front().size();
  std::map<int, std::vector<CompensatedSum>> sums;
  std::map<int, std::size_t> counts;
  std::vector<CompensatedSum> total(d);
  for (auto i : rows) {
    auto& s = sums[labels[i]];
    if (s.empty()) s.resize(d);
    ++counts[labels[i]];
    for (std::size_t j = 0; j < d; ++j) {
      s[j].add(z[i][j]);
      total[j].add(z[i][j]);
    }
  }
  if (counts.size() < 2) throw DataError("fisher ratio needs at least two classes");
  for (const auto& [c, n] : counts) {
    if (n < 2) throw DataError(fmt::format("fisher ratio needs two samples of class {}", c));
  }
  std::vector<double> mu(d);
  for (std::size_t j = 0; j < d; ++j) mu[j] = total[j].value() / rows.size();
  std::map<int, std::vector<double>> cm;
  for (auto& [c, s] : sums) {
    auto& m = cm[c];
    m.resize(d);
    for (std::size_t j = 0; j < d; ++j) m[j] = s[j].value() / counts[c];
  }
  CompensatedSum sb, sw;
  std::map<int, CompensatedSum> within;
  std::map<int, double> between;
  for (const auto& [c, m] : cm) {
    double b = 0;
    for (std::size_t j = 0; j < d; ++j) b += (m[j] - mu[j]) * (m[j] - mu[j]);
    between[c] = counts[c] * b;
    sb.add(counts[c] * b);
  }
  for (auto i : rows) {
    const auto& m = cm[labels[i]];
    double w = 0;
    for (std::size_t j = 0; j < d; ++j) w += (z[i][j] - m[j]) * (z[i][j] - m[j]);
    within[labels[i]].add(w);
    sw.add(w);
  }
  if (per_class) {
    for (const auto& [c, b] : between) (*per_class)[c] = b / (within[c].value() + kFisherEpsilon);
  }
  FisherResult r;
  r.trace_between = sb.value();
  r.trace_within = sw.value();
  r.ratio = r.trace_between / (r.trace_within + kFisherEpsilon);
  r.classes = static_cast<int>(counts.size());
  r.n = rows.size();
  return r;
}

void check_features(const std::vector<std::vector<float>>& x, const std::vector<int>& labels) {
  if (x.empty()) throw DataError("fisher ratio needs features");
  if (x.size() != labels.size()) throw DataError("fisher ratio: features and labels differ in length");
  for (const auto& r : x) {
    if (r.size() != x.front().size()) throw DataError("fisher ratio: features differ in dimension");
  }
}

}  // namespace

FisherResult fisher_ratio(const std::vector<std::vector<float>>& features, const std::vector<int>& labels) {
  check_features(features, labels);
  const auto z = global_standardize(features);
  std::vector<std::size_t> rows(z.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return fisher_on(z, labels, rows, nullptr);
}

std::vector<TierFisher> fisher_by_tier(const std::vector<std::vector<float>>& features, const std::vector<int>& labels,
                                       const ClassTaxonomy& taxonomy) {
  check_features(features, labels);
  const auto z = global_standardize(features);
  std::vector<TierFisher> out;
  for (auto tier : {SemanticTier::DifferentVerb, SemanticTier::SameVerb, SemanticTier::PretendVsReal}) {
    const auto cls = taxonomy.classes_in(tier);
    const std::set<int> in(cls.begin(), cls.end());
    std::vector<std::size_t> rows;
    std::map<int, std::size_t> counts;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (in.count(labels[i])) {
        rows.push_back(i);
        ++counts[labels[i]];
      }
    }
    std::size_t usable = 0;
    for (const auto& [c, n] : counts) usable += n >= 2;
    if (usable < 2 || usable != counts.size()) continue;
    TierFisher t;
    t.tier = tier;
    t.pooled = fisher_on(z, labels, rows, &t.per_class);
    std::vector<double> v;
    for (const auto& [c, r] : t.per_class) v.push_back(r);
    t.class_mean = compensated_mean(v);
    CompensatedSum ss;
    for (double x : v) ss.add((x - t.class_mean) * (x - t.class_mean));
    t.class_std = std::sqrt(ss.value() / v.size());
    out.push_back(std::move(t));
  }
  return out;
}

FlipRate semantic_flip_rate(const std::map<std::string, int>& clean, const std::map<std::string, int>& reversed,
                            const std::map<int, int>& antonyms) {
  FlipRate r;
  for (const auto& [clip, c] : clean) {
    auto it = reversed.find(clip);
    if (it == reversed.end()) continue;
    ++r.n;
    if (it->second == c) continue;
    ++r.changed;
    auto a = antonyms.find(c);
    if (a != antonyms.end() && a->second == it->second) ++r.antonymous;
  }
  r.rate = r.changed ? static_cast<double>(r.antonymous) / static_cast<double>(r.changed) : 0.0;
  return r;
}

double dscs(double r_sem, double cos_rev) {
  if (r_sem < 0 || r_sem > 1) throw DataError("dscs: r_sem outside [0, 1]");
  if (cos_rev < -1 || cos_rev > 1) throw DataError("dscs: cos_rev outside [-1, 1]");
  return r_sem * (1.0 - cos_rev);
}

double decoupling_index(const std::vector<CurvePoint>& ccr_curve, const std::vector<CurvePoint>& rsi_curve) {
  if (ccr_curve.size() != rsi_curve.size() || ccr_curve.empty()) {
    throw DataError("decoupling index: curves must share a non-empty severity grid");
  }
  CompensatedSum s;
  for (std::size_t i = 0; i < ccr_curve.size(); ++i) {
    if (ccr_curve[i].severity != rsi_curve[i].severity) {
      throw DataError("decoupling index: severity grids differ");
    }
    s.add(std::abs(ccr_curve[i].value - rsi_curve[i].value));
  }
  return s.value() / static_cast<double>(ccr_curve.size());
}

double temporal_consistency_bonus(double cos_static_noise, double cos_varying_noise) {
  return cos_static_noise - cos_varying_noise;
}

double spatial_grounding_index(const std::vector<std::vector<float>>& clean,
                               const std::map<std::string, std::vector<std::vector<float>>>& static_by_anchor) {
  if (clean.empty() || static_by_anchor.empty()) throw DataError("sgi needs clean and static embeddings");
  double best = -1.0;
  for (const auto& [anchor, emb] : static_by_anchor) {
    if (emb.size() != clean.size()) throw DataError(fmt::format("sgi: anchor {} is not aligned with clean", anchor));
    CompensatedSum s;
    for (std::size_t i = 0; i < clean.size(); ++i) s.add(cosine_similarity(clean[i], emb[i]));
    best = std::max(best, s.value() / static_cast<double>(clean.size()));
  }
  return best;
}

FrameBias frame_position_bias(const std::array<double, 3>& acc) {
  static constexpr std::array<std::string_view, 3> kNames = {"first", "middle", "last"};
  std::size_t best = 0;
  for (std::size_t i = 1; i < 3; ++i) {
    if (acc[i] > acc[best]) best = i;
  }
  const auto [lo, hi] = std::minmax_element(acc.begin(), acc.end());
  return {std::string(kNames[best]), *hi - *lo};
}

TdiResult temporal_dependency_index(double clean_acc, const std::map<std::string, std::vector<double>>& per_family) {
  if (!(clean_acc > 0)) throw NumericError("tdi undefined for zero clean accuracy");
  if (per_family.empty()) throw DataError("tdi needs at least one family");
  TdiResult r;
  std::vector<double> v;
  for (const auto& [fam, accs] : per_family) {
    if (accs.empty()) throw DataError(fmt::format("tdi: family {} has no conditions", fam));
    const double drop = (clean_acc - compensated_mean(accs)) / clean_acc;
    r.per_family[fam] = std::clamp(drop, 0.0, 1.0);
    v.push_back(r.per_family[fam]);
  }
  r.overall = compensated_mean(v);
  return r;
}

MacroMicro macro_micro_decomposition(double cos_segment, double cos_random) {
  return {1.0 - cos_segment, cos_segment - cos_random};
}

CalibrationReport calibration_analysis(const std::vector<ProbePrediction>& predictions, const std::vector<int>& labels,
                                       const ClassTaxonomy* taxonomy) {
  if (predictions.size() != labels.size()) throw DataError("calibration: predictions and labels differ in length");
  CalibrationReport r;
  r.n = labels.size();
  if (r.n == 0) return r;
  std::size_t correct = 0, confident_wrong = 0;
  std::map<int, std::size_t> n, hit;
  std::map<int, CompensatedSum> conf;
  std::map<std::string, std::pair<std::size_t, std::size_t>> sens, size;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& p = predictions[i];
    if (p.confidence < 0 || p.confidence > 1) throw DataError("calibration: confidence outside [0, 1]");
    const bool ok = p.predicted == labels[i];
    correct += ok;
    if (p.confidence > kConfidentThreshold) {
      ++r.confident;
      confident_wrong += !ok;
    }
    ++n[labels[i]];
    hit[labels[i]] += ok;
    conf[labels[i]].add(p.confidence);
    if (taxonomy) {
      if (auto it = taxonomy->detail_sensitivity.find(labels[i]); it != taxonomy->detail_sensitivity.end()) {
        auto& g = sens[std::string(to_string(it->second))];
        ++g.first;
        g.second += ok;
      }
      if (auto it = taxonomy->object_size.find(labels[i]); it != taxonomy->object_size.end()) {
        auto& g = size[std::string(to_string(it->second))];
        ++g.first;
        g.second += ok;
      }
    }
  }
  r.accuracy = static_cast<double>(correct) / r.n;
  r.confident_wrong_rate = static_cast<double>(confident_wrong) / r.n;
  r.confident_error_share = r.confident ? static_cast<double>(confident_wrong) / r.confident : 0.0;
  for (const auto& [c, cnt] : n) {
    ClassCalibration cc;
    cc.class_id = c;
    cc.n = cnt;
    cc.mean_confidence = conf[c].value() / cnt;
    cc.accuracy = static_cast<double>(hit[c]) / cnt;
    cc.error_rate = 1.0 - cc.accuracy;
    cc.overconfident = cc.mean_confidence > kOverconfidentConfidence && cc.accuracy < kOverconfidentAccuracy;
    r.per_class.push_back(cc);
  }
  std::vector<ClassCalibration> order = r.per_class;
  std::stable_sort(order.begin(), order.end(),
                   [](const ClassCalibration& a, const ClassCalibration& b) { return a.error_rate > b.error_rate; });
  for (const auto& c : order) r.hardest.push_back(c.class_id);
  for (const auto& [k, g] : sens) r.sensitivity_accuracy[k] = static_cast<double>(g.second) / g.first;
  for (const auto& [k, g] : size) r.size_accuracy[k] = static_cast<double>(g.second) / g.first;
  return r;
}

DeltaSummary per_class_deltas(const CalibrationReport& a, const CalibrationReport& b, const ClassTaxonomy& taxonomy) {
  std::map<int, double> acc_b;
  for (const auto& c : b.per_class) acc_b[c.class_id] = c.accuracy;
  DeltaSummary s;
  std::map<std::string, std::vector<double>> groups;
  for (const auto& c : a.per_class) {
    auto it = acc_b.find(c.class_id);
    if (it == acc_b.end()) continue;
    ClassDelta d;
    d.class_id = c.class_id;
    auto sz = taxonomy.object_size.find(c.class_id);
    d.size = sz == taxonomy.object_size.end() ? "unknown" : std::string(to_string(sz->second));
    d.delta = c.accuracy - it->second;
    groups[d.size].push_back(d.delta);
    s.per_class.push_back(d);
  }
  for (const auto& [size, v] : groups) {
    const int wins = static_cast<int>(std::count_if(v.begin(), v.end(), [](double x) { return x > 0; }));
    s.by_size[size] = {compensated_mean(v), wins};
  }
  return s;
}

std::vector<MetricResult> calibration_metrics(const CalibrationReport& r,
                                              const std::map<std::string, std::string>& group) {
  std::vector<MetricResult> out;
  auto add = [&](std::string name, double v, std::size_t n, std::map<std::string, std::string> extra = {}) {
    auto g = group;
    g.insert(extra.begin(), extra.end());
    out.push_back({std::move(name), v, std::move(g), n});
  };
  add("top1_accuracy", r.accuracy, r.n);
  add("confident_wrong_rate", r.confident_wrong_rate, r.n);
  add("confident_error_share", r.confident_error_share, r.confident);
  std::size_t flagged = 0;
  for (const auto& c : r.per_class) {
    const std::map<std::string, std::string> cls = {{"class", std::to_string(c.class_id)}};
    add("class_accuracy", c.accuracy, c.n, cls);
    add("class_mean_confidence", c.mean_confidence, c.n, cls);
    add("class_error_rate", c.error_rate, c.n, cls);
    add("overconfident_class", c.overconfident ? 1.0 : 0.0, c.n, cls);
    flagged += c.overconfident;
  }
  add("overconfident_class_count", static_cast<double>(flagged), r.per_class.size());
  for (std::size_t i = 0; i < r.hardest.size(); ++i) {
    add("hardest_rank", static_cast<double>(i + 1), 1, {{"class", std::to_string(r.hardest[i])}});
  }
  for (const auto& [k, v] : r.sensitivity_accuracy) add("sensitivity_accuracy", v, r.n, {{"category", k}});
  for (const auto& [k, v] : r.size_accuracy) add("size_accuracy", v, r.n, {{"category", k}});
  return out;
}

}  // namespace vrh

#include "vrh/stats.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vrh/common.hpp"

namespace vrh {

nlohmann::json StatResult::to_json() const {
  return {{"kind", "stat"},     {"test", test},         {"statistic", statistic}, {"p_value", p_value},
          {"n", n},             {"n_dropped", n_dropped}, {"mean_delta", mean_delta}, {"flag", flag},
          {"group", group}};
}

StatResult StatResult::from_json(const nlohmann::json& j) {
  StatResult s;
  s.test = j.at("test").get<std::string>();
  s.statistic = j.at("statistic").get<double>();
  s.p_value = j.at("p_value").get<double>();
  s.n = j.value("n", std::size_t{0});
  s.n_dropped = j.value("n_dropped", std::size_t{0});
  s.mean_delta = j.value("mean_delta", 0.0);
  s.flag = j.value("flag", "");
  if (j.contains("group")) s.group = j.at("group").get<std::map<std::string, std::string>>();
  return s;
}

SlopeFit degradation_slope(const std::vector<CurvePoint>& curve) {
  if (curve.size() < 2) throw DataError("slope needs at least two points");
  const double n = static_cast<double>(curve.size());
  CompensatedSum sx, sy;
  for (const auto& p : curve) {
    sx.add(p.severity);
    sy.add(p.value);
  }
  const double mx = sx.value() / n;
  const double my = sy.value() / n;
  CompensatedSum sxx, sxy, syy;
  for (const auto& p : curve) {
    const double dx = p.severity - mx;
    const double dy = p.value - my;
    sxx.add(dx * dx);
    sxy.add(dx * dy);
    syy.add(dy * dy);
  }
  if (sxx.value() == 0.0) throw DataError("slope undefined: all severities are equal");
  SlopeFit f;
  f.n = curve.size();
  f.slope = sxy.value() / sxx.value();
  f.intercept = my - f.slope * mx;
  if (syy.value() == 0.0) {
    f.degenerate = true;
    f.r2 = 0.0;
  } else {
    f.r2 = std::clamp(sxy.value() * sxy.value() / (sxx.value() * syy.value()), 0.0, 1.0);
  }
  return f;
}

StatResult slope_result(const SlopeFit& fit, std::map<std::string, std::string> group) {
  StatResult s;
  s.test = "ols_slope";
  s.statistic = fit.slope;
  s.p_value = fit.r2;
  s.n = fit.n;
  s.mean_delta = fit.intercept;
  s.flag = fit.degenerate ? "degenerate" : "";
  s.group = std::move(group);
  return s;
}

std::vector<double> average_ranks(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return std::abs(x[a]) < std::abs(x[b]); });
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(x[idx[j + 1]]) == std::abs(x[idx[i]])) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

double wilcoxon_exact_upper(const std::vector<double>& ranks, double w) {
  // Average ranks are multiples of 1/2, so doubled ranks are integers and the
  // null distribution of 2W is a subset-sum count.
  std::vector<long long> twice;
  long long total = 0;
  for (double r : ranks) {
    twice.push_back(std::llround(2 * r));
    total += twice.back();
  }
  std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
  count[0] = 1.0;
  long long reach = 0;
  for (long long t : twice) {
    for (long long s = reach; s >= 0; --s) {
      if (count[s] != 0.0) count[s + t] += count[s];
    }
    reach += t;
  }
  const long long threshold = std::llround(2 * w);
  double upper = 0.0;
  for (long long s = std::max(0LL, threshold); s <= total; ++s) upper += count[s];
  return upper / std::ldexp(1.0, static_cast<int>(ranks.size()));
}

StatResult wilcoxon_one_sided(const std::vector<double>& diffs) {
  StatResult s;
  s.test = "wilcoxon_signed_rank_greater";
  std::vector<double> nz;
  for (double d : diffs) {
    if (!std::isfinite(d)) throw DataError("wilcoxon: non-finite difference");
    if (d != 0.0) nz.push_back(d);
  }
  s.n = nz.size();
  s.n_dropped = diffs.size() - nz.size();
  s.mean_delta = compensated_mean(diffs);
  if (nz.empty()) {
    s.statistic = 0.0;
    s.p_value = 1.0;
    s.flag = "n.s.";
    return s;
  }
  const auto ranks = average_ranks(nz);
  CompensatedSum w;
  for (std::size_t i = 0; i < nz.size(); ++i) {
    if (nz[i] > 0) w.add(ranks[i]);
  }
  s.statistic = w.value();
  const double n = static_cast<double>(nz.size());
  if (nz.size() <= static_cast<std::size_t>(kWilcoxonExactLimit)) {
    s.p_value = wilcoxon_exact_upper(ranks, s.statistic);
  } else {
    std::map<double, int> ties;
    for (double r : ranks) ++ties[r];
    double tie_term = 0.0;
    for (const auto& [r, t] : ties) tie_term += static_cast<double>(t) * t * t - t;
    const double mean = n * (n + 1) / 4.0;
    const double var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term / 48.0;
    const double z = (s.statistic - mean - 0.5) / std::sqrt(var);
    s.p_value = 0.5 * std::erfc(z / std::sqrt(2.0));
  }
  s.p_value = std::clamp(s.p_value, 0.0, 1.0);
  return s;
}

}  // namespace vrh

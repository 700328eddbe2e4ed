#pragma once

// Straightforward reference implementations used to cross-check the library.
// They favour obviousness over speed and share no code with src/.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

double cosine(const std::vector<float>& a, const std::vector<float>& b);
double mean_cosine(const std::vector<std::pair<std::vector<float>, std::vector<float>>>& pairs);

// Per-dimension population mean/std standardisation fitted on `refs`, cosine
// similarity, full sort (ties by reference index), majority vote over k, then
// nearest member, then lowest class id.
struct KnnModel {
  std::vector<std::vector<float>> refs;
  std::vector<int> labels;
  int k = 5;
  int classes = 0;
};
int knn_classify(const KnnModel& m, const std::vector<float>& q);
std::vector<int> knn_neighbours(const KnnModel& m, const std::vector<float>& q);

double fraction_equal(const std::vector<int>& a, const std::vector<int>& b);

// Trapezoid over [0, s_max] with (0, 1) prepended when the curve starts later,
// divided by s_max.
double auc(std::vector<std::pair<double, double>> curve);

// Among clips whose prediction changed, the share landing on the antonym of
// the clean prediction.
double flip_rate(const std::map<std::string, int>& clean, const std::map<std::string, int>& reversed,
                 const std::map<int, int>& antonym);

double mean_abs_gap(const Vec& a, const Vec& b);

// trace(S_B) / (trace(S_W) + 1e-8) from explicit scatter matrices after
// centring on the global mean and dividing by the pooled standard deviation.
double fisher(const std::vector<std::vector<float>>& x, const std::vector<int>& labels);

// Ranks of |d| by counting: #smaller + (#equal + 1) / 2.
Vec abs_ranks(const Vec& d);
double signed_rank_w(const Vec& d);
// P(W >= w_obs) over all 2^n sign assignments of the nonzero |d| ranks.
double signed_rank_p_enumerated(const Vec& d);

// Plain OLS.
std::pair<double, double> ols_slope_r2(const Vec& x, const Vec& y);

}  // namespace oracle

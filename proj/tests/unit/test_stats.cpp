#include <doctest.h>

#include <cmath>

#include "criteria.hpp"
#include "oracles.hpp"
#include "vrh/common.hpp"
#include "vrh/rng.hpp"
#include "vrh/stats.hpp"

using namespace vrh;

TEST_CASE("wilcoxon exact enumeration over all unit sign patterns") {
  const auto o = criteria::wilcoxon_exactness();
  for (const auto& f : o.failures) INFO(f);
  CHECK(o.pass);
}

TEST_CASE("wilcoxon against brute force on random diffs with ties and zeros") {
  Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(14));
    std::vector<double> d;
    for (int i = 0; i < n; ++i) d.push_back(static_cast<double>(static_cast<int>(rng.below(7)) - 3) * 0.5);
    const auto r = wilcoxon_one_sided(d);
    std::size_t zeros = 0;
    for (double x : d) zeros += x == 0.0;
    CHECK(r.n_dropped == zeros);
    if (zeros == d.size()) {
      CHECK(r.flag == "n.s.");
      CHECK(r.p_value == 1.0);
      continue;
    }
    CHECK(r.statistic == doctest::Approx(oracle::signed_rank_w(d)).epsilon(1e-12));
    CHECK(r.p_value == doctest::Approx(oracle::signed_rank_p_enumerated(d)).epsilon(1e-12));
  }
}

TEST_CASE("average ranks") {
  const auto r = average_ranks({-2.0, 1.0, 2.0, 3.0, -1.0});
  CHECK(r == std::vector<double>{3.5, 1.5, 3.5, 5.0, 1.5});
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> x;
    for (int i = 0; i < 12; ++i) x.push_back(static_cast<double>(rng.below(5)) - 2.0);
    std::vector<double> nz;
    for (double v : x) {
      if (v != 0) nz.push_back(v);
    }
    if (nz.empty()) continue;
    const auto lib = average_ranks(nz);
    const auto ref = oracle::abs_ranks(nz);
    for (std::size_t i = 0; i < nz.size(); ++i) CHECK(lib[i] == ref[i]);
  }
}

TEST_CASE("wilcoxon is invariant under monotone transforms of |d|") {
  Rng rng(5);
  for (int t = 0; t < 30; ++t) {
    std::vector<double> d, e;
    const int n = 5 + static_cast<int>(rng.below(30));
    for (int i = 0; i < n; ++i) {
      const double x = rng.normal();
      d.push_back(x);
      e.push_back(std::copysign(std::exp(std::abs(x)) - 0.5, x));
    }
    const auto a = wilcoxon_one_sided(d);
    const auto b = wilcoxon_one_sided(e);
    CHECK(a.statistic == b.statistic);
    CHECK(a.p_value == b.p_value);
  }
}

TEST_CASE("wilcoxon normal approximation above the exact limit") {
  std::vector<double> d;
  for (int i = 1; i <= 30; ++i) d.push_back(i % 4 == 0 ? -i : i);
  const auto r = wilcoxon_one_sided(d);
  double w = 0;
  for (double x : d) w += x > 0 ? std::abs(x) : 0.0;
  CHECK(r.statistic == w);
  const double n = 30;
  const double mean = n * (n + 1) / 4;
  const double sd = std::sqrt(n * (n + 1) * (2 * n + 1) / 24);
  const double z = (w - mean - 0.5) / sd;
  CHECK(r.p_value == doctest::Approx(0.5 * std::erfc(z / std::sqrt(2.0))).epsilon(1e-9));

  // Exact and approximate agree roughly at the boundary.
  std::vector<double> d20(d.begin(), d.begin() + 20);
  const double exact = wilcoxon_one_sided(d20).p_value;
  std::vector<double> ranks(20);
  for (int i = 0; i < 20; ++i) ranks[i] = i + 1;
  CHECK(wilcoxon_exact_upper(ranks, wilcoxon_one_sided(d20).statistic) == doctest::Approx(exact));
}

TEST_CASE("degradation slopes") {
  const auto o = criteria::slope_regression();
  for (const auto& f : o.failures) INFO(f);
  CHECK(o.pass);

  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    std::vector<CurvePoint> c;
    std::vector<double> xs, ys;
    for (int i = 0; i < 6; ++i) {
      const double x = 0.1 * (i + 1);
      const double y = 1 - 0.7 * x + 0.05 * rng.normal();
      c.push_back({x, y});
      xs.push_back(x);
      ys.push_back(y);
    }
    const auto fit = degradation_slope(c);
    const auto [slope, r2] = oracle::ols_slope_r2(xs, ys);
    CHECK(fit.slope == doctest::Approx(slope).epsilon(1e-9));
    CHECK(fit.r2 == doctest::Approx(r2).epsilon(1e-9));
  }

  const auto flat = degradation_slope({{0.1, 0.5}, {0.2, 0.5}, {0.3, 0.5}});
  CHECK(flat.degenerate);
  CHECK(flat.slope == 0.0);
  CHECK(flat.r2 == 0.0);
  CHECK(slope_result(flat, {}).flag == "degenerate");
  CHECK_THROWS(degradation_slope({{0.1, 0.5}}));
  CHECK_THROWS(degradation_slope({{0.1, 0.5}, {0.1, 0.7}}));
}

TEST_CASE("stat records round trip") {
  auto s = wilcoxon_one_sided({1, 2, -0.5, 3});
  s.group = {{"encoder", "a"}, {"versus", "b"}};
  const auto back = StatResult::from_json(s.to_json());
  CHECK(back.statistic == s.statistic);
  CHECK(back.p_value == s.p_value);
  CHECK(back.group == s.group);
  CHECK(back.test == s.test);
}

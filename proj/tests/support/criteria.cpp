#include "criteria.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "perturb_checks.hpp"
#include "vrh/common.hpp"
#include "vrh/config.hpp"
#include "vrh/metrics.hpp"
#include "vrh/pipeline.hpp"
#include "vrh/probes.hpp"
#include "vrh/report.hpp"
#include "vrh/stats.hpp"
#include "vrh/store.hpp"

namespace criteria {

using namespace vrh;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::vector<float> jitter(Rng& rng, const std::vector<float>& v, double scale) {
  auto out = v;
  for (auto& x : out) x += static_cast<float>(rng.normal() * scale);
  return out;
}

std::vector<EmbeddingPair> random_pairs(Rng& rng, int n, int dim, double noise) {
  std::vector<EmbeddingPair> pairs;
  for (int i = 0; i < n; ++i) {
    EmbeddingPair p;
    p.clip_id = fmt::format("p{}", i);
    p.f_clean = fixtures::random_vector(rng, dim);
    p.f_pert = jitter(rng, p.f_clean, noise);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

std::vector<std::pair<std::vector<float>, std::vector<float>>> as_oracle(const std::vector<EmbeddingPair>& pairs) {
  std::vector<std::pair<std::vector<float>, std::vector<float>>> out;
  for (const auto& p : pairs) out.emplace_back(p.f_clean, p.f_pert);
  return out;
}

std::vector<double> severity_grid(Rng& rng, int n, bool from_zero) {
  std::set<double> s;
  if (from_zero) s.insert(0.0);
  while (static_cast<int>(s.size()) < n) s.insert(0.05 + 0.05 * static_cast<double>(rng.below(40)));
  return {s.begin(), s.end()};
}

ProbeConfig knn_config() {
  ProbeConfig c;
  c.kind = ProbeKind::Knn;
  c.k = 5;
  c.standardize = true;
  return c;
}

oracle::KnnModel knn_model(const fixtures::GapSet& refs, int classes) {
  oracle::KnnModel m;
  for (const auto& r : refs.records) m.refs.push_back(r.gap);
  m.labels = refs.labels;
  m.k = 5;
  m.classes = classes;
  return m;
}

}  // namespace

Outcome perturbation_suite() {
  Outcome o;
  const auto t0 = Clock::now();
  for (int i = 0; i < 20; ++i) {
    const auto clip = fixtures::random_clip(fmt::format("clip{:02d}", i), 1000 + i);
    for (const auto& e : checks::perturbation_invariants(clip)) o.fail(fmt::format("clip {}: {}", i, e));
  }
  const double s = seconds_since(t0);
  if (s >= 60) o.fail(fmt::format("runtime {:.1f}s exceeds 60s", s));
  o.detail = fmt::format("20 clips 16x64x64x3, {} violations, {:.2f}s", o.failures.size(), s);
  return o;
}

Outcome metric_oracles(int trials) {
  Outcome o;
  const auto t0 = Clock::now();
  double worst = 0.0;
  auto check = [&](const char* name, int trial, double lib, double ref, double tol) {
    const double err = std::abs(lib - ref);
    if (tol > 0) worst = std::max(worst, err);
    if (!(tol == 0 ? lib == ref : close(lib, ref, tol))) {
      o.fail(fmt::format("{} trial {}: library {:.17g}, oracle {:.17g}", name, trial, lib, ref));
    }
  };
  for (int t = 0; t < trials; ++t) {
    Rng rng(mix_seed(77, static_cast<std::uint64_t>(t)));
    const int n = 2 + static_cast<int>(rng.below(49));
    const int dim = 2 + static_cast<int>(rng.below(15));

    const auto pairs = random_pairs(rng, n, dim, 0.1 + rng.uniform());
    check("rsi", t, rsi(pairs), oracle::mean_cosine(as_oracle(pairs)), 1e-9);

    const int classes = 2 + static_cast<int>(rng.below(5));
    const auto refs = fixtures::clustered_gaps(rng.next(), 10 + static_cast<int>(rng.below(41)), dim, classes, 0.8);
    const auto knn = fit_knn_probe(refs.records, refs.labels, classes, knn_config());
    const auto model = knn_model(refs, classes);
    std::vector<int> oc, op;
    for (const auto& p : pairs) {
      oc.push_back(oracle::knn_classify(model, p.f_clean));
      op.push_back(oracle::knn_classify(model, p.f_pert));
    }
    check("ccr", t, ccr(pairs, *knn), oracle::fraction_equal(oc, op), 0);

    const int m = 1 + static_cast<int>(rng.below(8));
    const auto sev = severity_grid(rng, m, rng.below(2) == 0);
    std::vector<CurvePoint> curve;
    std::vector<std::pair<double, double>> ocurve;
    for (double s : sev) {
      const double v = rng.uniform();
      curve.push_back({s, v});
      ocurve.emplace_back(s, v);
    }
    if (sev.back() > 0) check("auc", t, auc_rsi(curve), oracle::auc(ocurve), 1e-9);

    std::map<std::string, int> clean, rev;
    std::map<int, int> antonyms;
    for (int c = 0; c + 1 < 8; c += 2) {
      antonyms[c] = c + 1;
      antonyms[c + 1] = c;
    }
    for (int i = 0; i < n; ++i) {
      const auto id = fmt::format("c{}", i);
      clean[id] = static_cast<int>(rng.below(8));
      const auto r = rng.below(3);
      rev[id] = r == 0 ? clean[id] : r == 1 ? antonyms[clean[id]] : static_cast<int>(rng.below(8));
    }
    const auto flip = semantic_flip_rate(clean, rev, antonyms);
    const double oflip = oracle::flip_rate(clean, rev, antonyms);
    check("flip_rate", t, flip.rate, oflip, 0);
    check("dscs", t, dscs(flip.rate, rsi(pairs)), oflip * (1.0 - oracle::mean_cosine(as_oracle(pairs))), 1e-9);

    std::vector<CurvePoint> cc, rc;
    oracle::Vec oa, ob;
    for (double s : sev) {
      const double a = static_cast<double>(rng.below(n + 1)) / n;
      const double b = rng.uniform();
      cc.push_back({s, a});
      rc.push_back({s, b});
      oa.push_back(a);
      ob.push_back(b);
    }
    check("decoupling_index", t, decoupling_index(cc, rc), oracle::mean_abs_gap(oa, ob), 1e-9);

    fixtures::GapSet feats;
    const double spread = 0.3 + rng.uniform();
    for (;;) {
      feats = fixtures::clustered_gaps(rng.next(), std::max(n, 2 * classes), dim, classes, spread);
      std::map<int, int> counts;
      for (int l : feats.labels) ++counts[l];
      if (counts.size() >= 2 && std::all_of(counts.begin(), counts.end(), [](const auto& c) { return c.second >= 2; })) {
        break;
      }
    }
    std::vector<std::vector<float>> x;
    for (const auto& r : feats.records) x.push_back(r.gap);
    check("fisher_ratio", t, fisher_ratio(x, feats.labels).ratio, oracle::fisher(x, feats.labels), 1e-9);

    const auto seg = random_pairs(rng, n, dim, 0.3);
    const auto rnd = random_pairs(rng, n, dim, 1.0);
    const double cseg = oracle::mean_cosine(as_oracle(seg));
    const double crnd = oracle::mean_cosine(as_oracle(rnd));
    const auto mm = macro_micro_decomposition(rsi(seg), rsi(rnd));
    check("macro", t, mm.macro, 1.0 - cseg, 1e-9);
    check("micro", t, mm.micro, cseg - crnd, 1e-9);
  }
  const double s = seconds_since(t0);
  if (s >= 30) o.fail(fmt::format("runtime {:.1f}s exceeds 30s", s));
  o.detail = fmt::format("{} random fixtures, max abs error {:.2e}, {:.2f}s", trials, worst, s);
  return o;
}

Outcome wilcoxon_exactness() {
  Outcome o;
  double worst = 0.0;
  for (int mask = 0; mask < 512; ++mask) {
    oracle::Vec d(9);
    for (int i = 0; i < 9; ++i) d[i] = (mask >> i & 1) ? 1.0 : -1.0;
    const auto r = wilcoxon_one_sided(d);
    const double w = oracle::signed_rank_w(d);
    const double p = oracle::signed_rank_p_enumerated(d);
    worst = std::max(worst, std::abs(r.p_value - p));
    if (r.statistic != w || std::abs(r.p_value - p) > 1e-12) {
      o.fail(fmt::format("pattern {:09b}: W {} p {:.12g}, brute force W {} p {:.12g}", mask, r.statistic, r.p_value, w, p));
    }
  }
  const auto all = wilcoxon_one_sided(oracle::Vec(9, 1.0));
  const auto p3 = fmt::format("{:.2e}", all.p_value);
  if (all.statistic != 45.0) o.fail(fmt::format("all-positive W {} != 45", all.statistic));
  if (all.p_value != 1.953125e-3) o.fail(fmt::format("all-positive p {:.12g} != 1.953125e-3", all.p_value));
  if (p3 != "1.95e-03") o.fail(fmt::format("all-positive p rounds to {} rather than 1.95e-03", p3));
  o.detail = fmt::format("512 patterns, max |dp| {:.1e}; all-positive W={:.1f} p={}", worst, all.statistic, p3);
  return o;
}

Outcome slope_regression() {
  Outcome o;
  Rng rng(2024);
  double worst_slope = 0.0, worst_r2 = 0.0;
  for (int t = 0; t < 200; ++t) {
    const double a = rng.uniform() * 2 - 1;
    const double b = rng.uniform() * 4 - 2;
    const auto sev = severity_grid(rng, 3 + static_cast<int>(rng.below(6)), rng.below(2) == 0);
    std::vector<CurvePoint> curve;
    for (double s : sev) curve.push_back({s, a + b * s});
    const auto fit = degradation_slope(curve);
    worst_slope = std::max(worst_slope, std::abs(fit.slope - b));
    worst_r2 = std::max(worst_r2, std::abs(fit.r2 - 1.0));
    if (std::abs(fit.slope - b) > 1e-12 || std::abs(fit.r2 - 1.0) > 1e-12 || fit.degenerate) {
      o.fail(fmt::format("affine fixture {}: slope {:.17g} vs {:.17g}, r2 {:.17g}", t, fit.slope, b, fit.r2));
    }
  }

  fixtures::TempDir tmp("slope");
  const std::vector<std::string> encoders{"enc_a", "enc_b", "enc_c"};
  const std::vector<std::string> families{"moving_block", "temporal_dropout", "patch_dropout"};
  const std::vector<std::vector<double>> sev{{0.1, 0.2, 0.3, 0.4, 0.5}, {0.125, 0.25, 0.375, 0.5, 0.625},
                                             {0.1, 0.2, 0.3, 0.4, 0.5}};
  std::map<std::pair<std::string, std::string>, double> truth;
  auto log = ResultsLog::create(tmp.path() / "results" / "occlusion.jsonl", {{"axis", "occlusion"}});
  for (const auto& e : encoders) {
    for (std::size_t f = 0; f < families.size(); ++f) {
      const double b = -rng.uniform();
      std::vector<CurvePoint> curve;
      for (double s : sev[f]) curve.push_back({s, 1.0 + b * s});
      truth[{e, families[f]}] = b;
      log.append(slope_result(degradation_slope(curve),
                              {{"encoder", e}, {"axis", "occlusion"}, {"condition", families[f]}, {"metric", "rsi"}})
                     .to_json());
    }
  }
  write_report(tmp.path() / "results", tmp.path() / "report");
  const auto csv = tmp.path() / "report" / "c_slope_table_occlusion.csv";
  if (!std::filesystem::exists(csv)) {
    o.fail("c_slope_table_occlusion.csv not written");
  } else {
    const auto rows = read_csv(csv);
    std::vector<std::string> header{"encoder"};
    for (const auto& f : families) {
      header.push_back(f + "_slope");
      header.push_back(f + "_r2");
    }
    if (rows.empty() || rows[0] != header) o.fail("slope table header differs from encoder + 3 families x (slope, r2)");
    if (rows.size() != encoders.size() + 1) o.fail(fmt::format("slope table has {} model rows", rows.size() - 1));
    for (std::size_t r = 1; r < rows.size() && r <= encoders.size(); ++r) {
      if (rows[r].size() != header.size() || rows[r][0] != encoders[r - 1]) {
        o.fail(fmt::format("slope table row {} malformed", r));
        continue;
      }
      for (std::size_t f = 0; f < families.size(); ++f) {
        const double slope = std::stod(rows[r][1 + 2 * f]);
        const double r2 = std::stod(rows[r][2 + 2 * f]);
        if (!close(slope, truth[{encoders[r - 1], families[f]}], 1e-12) || !close(r2, 1.0, 1e-12)) {
          o.fail(fmt::format("slope table cell {}/{} = {} (r2 {})", encoders[r - 1], families[f], slope, r2));
        }
      }
    }
  }
  o.detail = fmt::format("200 affine fixtures, max |dslope| {:.1e}, max |1-R2| {:.1e}; table 3 families x {} models",
                         worst_slope, worst_r2, encoders.size());
  return o;
}

Outcome attentive_probe() {
  Outcome o;
  // Finite differences on a micro-probe.
  ProbeConfig cfg;
  cfg.kind = ProbeKind::Attentive;
  cfg.depth = 2;
  cfg.heads = 2;
  cfg.mlp_ratio = 2.0;
  cfg.seed = 5;
  AttentiveProbe probe(cfg, 3, 4);
  Rng rng(99);
  for (auto& p : probe.params()) p = rng.normal() * 0.5;
  std::vector<EmbeddingRecord> recs(2);
  for (auto& r : recs) {
    r.clip_id = "g";
    r.encoder_id = "fixture";
    r.perturbation = "clean";
    r.n_tokens = 3;
    r.tokens = fixtures::random_vector(rng, 12);
    pool_tokens(r);
  }
  const std::vector<const EmbeddingRecord*> batch{&recs[0], &recs[1]};
  const std::vector<int> labels{0, 2};
  std::vector<double> grad;
  probe.loss_and_gradient(batch, labels, &grad);
  std::vector<double> fd(grad.size());
  const double h = 1e-6;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    const double keep = probe.params()[i];
    probe.params()[i] = keep + h;
    const double up = probe.loss_and_gradient(batch, labels, nullptr);
    probe.params()[i] = keep - h;
    const double down = probe.loss_and_gradient(batch, labels, nullptr);
    probe.params()[i] = keep;
    fd[i] = (up - down) / (2 * h);
  }
  double diff = 0, norm = 0;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    diff += (grad[i] - fd[i]) * (grad[i] - fd[i]);
    norm += fd[i] * fd[i];
  }
  const double rel = std::sqrt(diff) / std::max(std::sqrt(norm), 1e-300);
  if (!(rel < 1e-4)) o.fail(fmt::format("gradient relative error {:.3e} over {} parameters", rel, fd.size()));

  // Linearly separable tokens.
  const auto data = fixtures::separable_tokens(17, 48, 4, 8, 4, 1.5);
  ProbeConfig tc;
  tc.kind = ProbeKind::Attentive;
  tc.depth = 1;
  tc.heads = 2;
  tc.epochs = 50;
  tc.lr = 3e-3;
  tc.batch = 16;
  const auto trained = train_attentive_probe(data.records, data.labels, 4, tc);
  const auto hash = trained->state_hash();
  const double acc = accuracy(predict(*trained, data.records), data.labels);
  predict(*trained, data.records);
  for (const auto& r : data.records) trained->logits(r);
  if (acc != 1.0) o.fail(fmt::format("separable training accuracy {:.4f} after 50 epochs", acc));
  if (trained->state_hash() != hash) o.fail("state hash changed during evaluation");
  int first = -1;
  for (std::size_t e = 0; e < trained->curve.accuracy.size(); ++e) {
    if (trained->curve.accuracy[e] == 1.0) {
      first = static_cast<int>(e);
      break;
    }
  }
  o.detail = fmt::format("grad rel err {:.2e} ({} params); separable acc {:.3f}, first 100% at epoch {}; hash stable",
                         rel, fd.size(), acc, first);
  return o;
}

Outcome knn_probe() {
  Outcome o;
  const int classes = 6;
  const auto refs = fixtures::clustered_gaps(31, 200, 16, classes, 1.2);
  const auto queries = fixtures::clustered_gaps(32, 200, 16, classes, 1.2);
  const auto probe = fit_knn_probe(refs.records, refs.labels, classes, knn_config());
  const auto model = knn_model(refs, classes);
  int mismatches = 0;
  std::vector<int> base;
  for (const auto& q : queries.records) {
    const int c = probe->classify(q.gap);
    base.push_back(c);
    if (c != oracle::knn_classify(model, q.gap) || probe->neighbours(q.gap) != oracle::knn_neighbours(model, q.gap)) {
      ++mismatches;
    }
  }
  if (mismatches) o.fail(fmt::format("{} of 200 queries differ from the exhaustive scan", mismatches));

  for (double scale : {0.25, 4.0, 3.7, 1e-3, 250.0}) {
    auto sr = refs;
    for (auto& r : sr.records) {
      for (auto& x : r.gap) x = static_cast<float>(x * scale);
    }
    const auto scaled = fit_knn_probe(sr.records, sr.labels, classes, knn_config());
    int changed = 0;
    for (std::size_t i = 0; i < queries.records.size(); ++i) {
      auto q = queries.records[i].gap;
      for (auto& x : q) x = static_cast<float>(x * scale);
      changed += scaled->classify(q) != base[i];
    }
    if (changed) o.fail(fmt::format("rescaling by {} changed {} predictions", scale, changed));
  }
  o.detail = fmt::format("200 refs x 200 queries, k=5 cosine standardised, {} mismatches; 5 rescalings", mismatches);
  return o;
}

Outcome end_to_end_smoke() {
  Outcome o;
  const auto t0 = Clock::now();
  fixtures::TempDir tmp("smoke");
  auto cfg = fixtures::smoke_config(tmp.path());
  cfg.axes.assign(kAxes.begin(), kAxes.end());
  const std::filesystem::path out = cfg.output_dir;

  auto run = [&](std::size_t& encode_calls) {
    RunContext ctx(cfg);
    const auto summary = run_axes(ctx, cfg.axes);
    for (const auto& [axis, err] : summary.failed) o.fail(fmt::format("axis {} failed: {}", axis, err));
    write_report(out / "results", out / "report", cfg.alpha, &ctx.labels());
    encode_calls = ctx.counters().encode_calls;
    return ctx.subset("occlusion").size();
  };

  std::size_t cold_calls = 0, warm_calls = 0;
  const auto clips = run(cold_calls);
  if (clips != 8) o.fail(fmt::format("smoke subset has {} clips, expected 8", clips));

  const std::map<std::string, std::vector<std::string>> families{
      {"discriminability", {"fisher_ratio", "fisher_class_share", "top1_accuracy"}},
      {"corruption", {"rsi", "auc_rsi", "retention", "top1_accuracy"}},
      {"pretend", {"top1_accuracy", "confident_wrong_rate", "class_accuracy"}},
      {"occlusion", {"rsi", "ccr", "auc_rsi", "decoupling_index", "retention", "top1_accuracy"}},
      {"temporal",
       {"dscs", "semantic_flip_rate", "tcb", "sgi", "fpbs_spread", "tdi", "macro_penalty", "micro_penalty"}}};
  const std::map<std::string, std::vector<std::string>> tests{
      {"corruption", {"ols_slope"}}, {"occlusion", {"ols_slope", "wilcoxon_signed_rank_greater"}}};
  const auto rs = load_results(out / "results");
  std::size_t records = 0;
  for (const auto& [axis, names] : families) {
    const auto it = rs.metrics.find(axis);
    if (it == rs.metrics.end() || it->second.empty()) {
      o.fail(fmt::format("no results for axis {}", axis));
      continue;
    }
    std::set<std::string> seen;
    for (const auto& m : it->second) {
      ++records;
      seen.insert(m.metric);
      if (!std::isfinite(m.value)) o.fail(fmt::format("{}: {} is not finite", axis, m.metric));
    }
    for (const auto& n : names) {
      if (!seen.count(n)) o.fail(fmt::format("{}: metric family {} missing", axis, n));
    }
  }
  for (const auto& [axis, names] : tests) {
    std::set<std::string> seen;
    if (rs.stats.count(axis)) {
      for (const auto& s : rs.stats.at(axis)) {
        seen.insert(s.test);
        if (!std::isfinite(s.statistic) || !std::isfinite(s.p_value)) o.fail(fmt::format("{}: {} not finite", axis, s.test));
      }
    }
    for (const auto& n : names) {
      if (!seen.count(n)) o.fail(fmt::format("{}: statistic {} missing", axis, n));
    }
  }
  for (char c = 'a'; c <= 'i'; ++c) {
    bool found = false;
    for (const auto& e : std::filesystem::directory_iterator(out / "report")) {
      const auto name = e.path().filename().string();
      found |= name.size() > 2 && name[0] == c && name[1] == '_' && e.path().extension() == ".csv";
    }
    if (!found) o.fail(fmt::format("report has no table of class ({})", c));
  }

  const auto results_before = fixtures::snapshot(out / "results");
  const auto report_before = fixtures::snapshot(out / "report");
  const double cold = seconds_since(t0);
  run(warm_calls);
  if (warm_calls != 0) o.fail(fmt::format("warm rerun made {} encode calls", warm_calls));
  if (fixtures::snapshot(out / "results") != results_before) o.fail("results/ differs after warm rerun");
  if (fixtures::snapshot(out / "report") != report_before) o.fail("report/ differs after warm rerun");
  const double total = seconds_since(t0);
  if (total >= 300) o.fail(fmt::format("runtime {:.1f}s exceeds 5 minutes", total));
  o.detail = fmt::format("5 axes, {} clips, {} metric records, {} encodes cold / {} warm, {} files identical, {:.1f}s + {:.1f}s",
                         clips, records, cold_calls, warm_calls, results_before.size() + report_before.size(), cold,
                         total - cold);
  return o;
}

Outcome checkpoint_anchors(const std::string& config_path) {
  Outcome o;
  auto cfg = load_config(config_path);
  RunContext ctx(cfg);
  const auto summary = run_axes(ctx, {"corruption", "occlusion"});
  for (const auto& [axis, err] : summary.failed) o.fail(fmt::format("axis {} failed: {}", axis, err));
  const std::filesystem::path out = cfg.output_dir;
  write_report(out / "results", out / "report", cfg.alpha, &ctx.labels());
  const auto csv = out / "report" / "e_worst_case.csv";
  if (!std::filesystem::exists(csv)) {
    o.fail("e_worst_case.csv not written");
    return o;
  }
  const auto rows = read_csv(csv);
  const std::vector<std::string> header{"encoder", "condition", "severity", "top1_accuracy", "retention",
                                        "rsi",     "ccr",       "decoupling_index", "decoupled"};
  if (rows.empty() || rows[0] != header) {
    o.fail("worst-case table header differs");
    return o;
  }
  std::map<std::string, std::set<std::string>> conditions;
  std::vector<std::string> flagged;
  std::map<std::string, double> patch_di;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) continue;
    conditions[row[0]].insert(row[1]);
    if (row[1] == "patch_dropout" && std::abs(std::stod(row[2]) - 0.5) < 1e-9) {
      patch_di[row[0]] = std::stod(row[7]);
      if (row[8] == "yes") flagged.push_back(row[0]);
    }
  }
  for (const auto& e : ctx.encoders()) {
    if (conditions[e.id()] != std::set<std::string>{"moving_block", "temporal_dropout", "patch_dropout"}) {
      o.fail(fmt::format("{}: worst-case rows do not cover the three occlusion families", e.id()));
    }
  }
  if (flagged.empty()) o.fail("no encoder flagged as decoupled at patch_dropout 0.5");
  for (const auto& f : flagged) {
    for (const auto& [e, di] : patch_di) {
      if (di > patch_di[f]) o.fail(fmt::format("flagged encoder {} is not the DI outlier ({} has {:.3f})", f, e, di));
    }
  }
  // Optional reference cells: encoder,condition,severity,top1_accuracy (percent).
  if (const char* ref = std::getenv("VRH_CHECKPOINT_EXPECTED")) {
    const auto expected = read_csv(ref);
    for (std::size_t r = 1; r < expected.size(); ++r) {
      const auto& x = expected[r];
      if (x.size() < 4) continue;
      bool matched = false;
      for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (row[0] != x[0] || row[1] != x[1] || std::abs(std::stod(row[2]) - std::stod(x[2])) > 1e-9) continue;
        matched = true;
        const double got = 100.0 * std::stod(row[3]);
        if (std::abs(got - std::stod(x[3])) > 5.0) {
          o.fail(fmt::format("{} {} {}: top-1 {:.1f}% vs reference {}%", x[0], x[1], x[2], got, x[3]));
        }
      }
      if (!matched) o.fail(fmt::format("reference cell {} {} {} missing", x[0], x[1], x[2]));
    }
  }
  o.detail = fmt::format("{} encoders, decoupled at patch_dropout 0.5: {}", ctx.encoders().size(),
                         flagged.empty() ? std::string("none") : fmt::format("{}", fmt::join(flagged, " ")));
  return o;
}

}  // namespace criteria

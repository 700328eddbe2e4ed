#include "vrh/report.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <optional>
#include <set>

#include "vrh/common.hpp"
#include "vrh/config.hpp"
#include "vrh/store.hpp"
#include "vrh/tables.hpp"

namespace vrh {

using nlohmann::json;

ResultsSet load_results(const std::filesystem::path& results_dir) {
  ResultsSet rs;
  for (auto axis : kAxes) {
    const auto path = results_dir / (std::string(axis) + ".jsonl");
    if (!std::filesystem::exists(path)) continue;
    auto contents = ResultsLog::read(path);
    if (contents.truncated) rs.warnings.push_back(fmt::format("{}: truncated final line ignored", path.string()));
    const std::string a(axis);
    rs.headers[a] = contents.header;
    auto& ms = rs.metrics[a];
    auto& ss = rs.stats[a];
    for (const auto& rec : contents.records) {
      const auto kind = rec.value("kind", "");
      if (kind == "metric") {
        ms.push_back(MetricResult::from_json(rec));
      } else if (kind == "stat") {
        ss.push_back(StatResult::from_json(rec));
      } else {
        throw DataError(fmt::format("{}: record of unknown kind '{}'", path.string(), kind));
      }
    }
  }
  return rs;
}

namespace {

std::string get(const std::map<std::string, std::string>& g, const std::string& k) {
  auto it = g.find(k);
  return it == g.end() ? std::string() : it->second;
}

bool matches(const MetricResult& m, std::string_view metric, const std::map<std::string, std::string>& filter) {
  if (m.metric != metric) return false;
  for (const auto& [k, v] : filter) {
    if (get(m.group, k) != v) return false;
  }
  return true;
}

std::optional<double> find_value(const std::vector<MetricResult>& ms, std::string_view metric,
                                 const std::map<std::string, std::string>& filter) {
  for (const auto& m : ms) {
    if (matches(m, metric, filter)) return m.value;
  }
  return std::nullopt;
}

// Values of `key` in first-seen order.
std::vector<std::string> distinct(const std::vector<MetricResult>& ms, const std::string& key,
                                  std::string_view metric = {}) {
  std::vector<std::string> out;
  for (const auto& m : ms) {
    if (!metric.empty() && m.metric != metric) continue;
    const auto v = get(m.group, key);
    if (!v.empty() && std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  }
  return out;
}

std::vector<std::string> numeric_sorted(std::vector<std::string> v) {
  std::sort(v.begin(), v.end(), [](const std::string& a, const std::string& b) { return std::stod(a) < std::stod(b); });
  return v;
}

std::string num(double v) { return format_number(v); }
std::string num(const std::optional<double>& v) { return cell_text(v); }

class ReportWriter {
 public:
  ReportWriter(std::filesystem::path dir, const ResultsSet& rs, double alpha, const LabelTable* labels)
      : dir_(std::move(dir)), rs_(rs), alpha_(alpha), labels_(labels) {}

  ReportSummary run() {
    for (auto axis : kAxes) {
      if (!rs_.metrics.count(std::string(axis))) {
        summary_.warnings.push_back(fmt::format("no results for axis '{}'; its tables are omitted", axis));
      }
    }
    for (const auto& w : rs_.warnings) summary_.warnings.push_back(w);
    severity_curves();
    retention_heatmaps();
    slope_tables();
    wilcoxon_tables();
    worst_case();
    temporal_tables();
    pretend_tables();
    radar();
    cross_condition();
    discriminability();

    json index = {{"tables", summary_.tables},
                  {"warnings", summary_.warnings},
                  {"alpha", alpha_},
                  {"harness_version", kHarnessVersion}};
    json config_hashes = json::object();
    for (const auto& [axis, h] : rs_.headers) config_hashes[axis] = h.value("config_hash", "");
    index["config_hash"] = config_hashes;
    atomic_write(dir_ / "index.json", index.dump(2) + "\n");
    atomic_write(dir_ / "plot_data.json", plots_.dump(2) + "\n");
    return summary_;
  }

 private:
  const std::vector<MetricResult>* axis(const std::string& a) const {
    auto it = rs_.metrics.find(a);
    return it == rs_.metrics.end() ? nullptr : &it->second;
  }
  const std::vector<StatResult>* axis_stats(const std::string& a) const {
    auto it = rs_.stats.find(a);
    return it == rs_.stats.end() ? nullptr : &it->second;
  }

  void emit(Table t, json meta = json::object()) {
    for (auto it = meta.begin(); it != meta.end(); ++it) t.meta[it.key()] = it.value();
    write_table(dir_, t);
    summary_.tables.push_back(t.name);
  }

  std::string class_name(const std::string& id) const {
    if (!labels_ || id.empty()) return {};
    const int c = std::stoi(id);
    return labels_->contains(c) ? labels_->label(c) : std::string();
  }

  // (a)
  void severity_curves() {
    Table t{"a_severity_curves", {"encoder", "axis", "condition", "severity", "metric", "value", "n"}, {}};
    json charts = json::array();
    for (const std::string a : {"corruption", "occlusion"}) {
      const auto* ms = axis(a);
      if (!ms) continue;
      for (const auto& m : *ms) {
        if (m.metric != "top1_accuracy" && m.metric != "rsi" && m.metric != "ccr" && m.metric != "retention") continue;
        t.rows.push_back({get(m.group, "encoder"), a, get(m.group, "condition"), get(m.group, "severity"), m.metric,
                          num(m.value), std::to_string(m.n)});
      }
      for (const std::string metric : {"top1_accuracy", "rsi"}) {
        json chart = {{"name", fmt::format("a_{}_{}", a, metric)},
                      {"x_label", "severity"},
                      {"y_label", metric},
                      {"series", json::array()}};
        for (const auto& enc : distinct(*ms, "encoder")) {
          for (const auto& cond : distinct(*ms, "condition", metric)) {
            if (cond == "none") continue;
            json pts = json::array();
            for (const auto& m : *ms) {
              if (matches(m, metric, {{"encoder", enc}, {"condition", cond}})) {
                pts.push_back({std::stod(get(m.group, "severity")), m.value});
              }
            }
            chart["series"].push_back({{"label", enc + "/" + cond}, {"points", pts}});
          }
        }
        charts.push_back(chart);
      }
    }
    if (t.rows.empty()) return;
    plots_["line_charts"] = charts;
    emit(std::move(t), {{"grouping", {"encoder", "axis", "condition", "severity", "metric"}}});
  }

  // (b) Conditions sharing one severity set use the severities as columns;
  // otherwise columns are per-condition levels and each row lists its severities.
  void retention_heatmaps() {
    for (const std::string a : {"corruption", "occlusion"}) {
      const auto* ms = axis(a);
      if (!ms) continue;
      std::map<std::string, std::vector<std::string>> by_cond;
      std::vector<MetricResult> rs;
      for (const auto& m : *ms) {
        if (m.metric != "retention") continue;
        rs.push_back(m);
        auto& v = by_cond[get(m.group, "condition")];
        const auto sv = get(m.group, "severity");
        if (std::find(v.begin(), v.end(), sv) == v.end()) v.push_back(sv);
      }
      if (rs.empty()) {
        summary_.warnings.push_back(fmt::format("{}: no retention values (clean accuracy 0?)", a));
        continue;
      }
      std::size_t levels = 0;
      bool shared = true;
      for (auto& [c, v] : by_cond) {
        v = numeric_sorted(v);
        levels = std::max(levels, v.size());
        if (v != by_cond.begin()->second) shared = false;
      }
      std::vector<std::string> cols;
      std::string col_field = "severity";
      if (shared) {
        cols = by_cond.begin()->second;
      } else {
        col_field = "level";
        for (std::size_t i = 1; i <= levels; ++i) cols.push_back(fmt::format("level_{}", i));
        for (auto& m : rs) {
          const auto& v = by_cond[get(m.group, "condition")];
          const auto pos = std::find(v.begin(), v.end(), get(m.group, "severity")) - v.begin();
          m.group["level"] = cols[static_cast<std::size_t>(pos)];
        }
      }
      Table t{"b_retention_heatmap_" + a, {"encoder", "condition"}, {}};
      t.header.insert(t.header.end(), cols.begin(), cols.end());
      if (!shared) t.header.push_back("severities");
      std::vector<std::string> warnings;
      for (const auto& enc : distinct(rs, "encoder")) {
        const auto p = pivot(rs, "retention", "condition", col_field, {{"encoder", enc}}, {}, cols);
        warnings.insert(warnings.end(), p.warnings.begin(), p.warnings.end());
        json values = json::array();
        for (std::size_t i = 0; i < p.rows.size(); ++i) {
          std::vector<std::string> row{enc, p.rows[i]};
          json vrow = json::array();
          for (const auto& c : p.cells[i]) {
            row.push_back(cell_text(c));
            vrow.push_back(c ? json(*c) : json(nullptr));
          }
          if (!shared) row.push_back(fmt::format("{}", fmt::join(by_cond[p.rows[i]], ";")));
          t.rows.push_back(std::move(row));
          values.push_back(vrow);
        }
        plots_["heatmaps"].push_back({{"name", fmt::format("b_retention_{}_{}", a, enc)},
                                      {"rows", p.rows},
                                      {"cols", cols},
                                      {"values", values},
                                      {"unit", "% of clean top-1"}});
      }
      summary_.warnings.insert(summary_.warnings.end(), warnings.begin(), warnings.end());
      emit(std::move(t), {{"grouping", {{"rows", "encoder x condition"}, {"columns", col_field}}},
                          {"metric", "retention"},
                          {"warnings", warnings}});
    }
  }

  // (c)
  void slope_tables() {
    Table all{"c_slopes", {"encoder", "axis", "condition", "metric", "slope", "r2", "intercept", "n", "flag"}, {}};
    for (const auto& [a, ss] : rs_.stats) {
      for (const auto& s : ss) {
        if (s.test != "ols_slope") continue;
        all.rows.push_back({get(s.group, "encoder"), a, get(s.group, "condition"), get(s.group, "metric"),
                            num(s.statistic), num(s.p_value), num(s.mean_delta), std::to_string(s.n), s.flag});
      }
    }
    if (!all.rows.empty()) emit(std::move(all), {{"grouping", {"encoder", "axis", "condition", "metric"}}});

    const auto* ss = axis_stats("occlusion");
    if (!ss) return;
    std::vector<std::string> encoders, families;
    for (const auto& s : *ss) {
      if (s.test != "ols_slope" || get(s.group, "metric") != "rsi") continue;
      const auto e = get(s.group, "encoder"), f = get(s.group, "condition");
      if (std::find(encoders.begin(), encoders.end(), e) == encoders.end()) encoders.push_back(e);
      if (std::find(families.begin(), families.end(), f) == families.end()) families.push_back(f);
    }
    Table t{"c_slope_table_occlusion", {"encoder"}, {}};
    for (const auto& f : families) {
      t.header.push_back(f + "_slope");
      t.header.push_back(f + "_r2");
    }
    for (const auto& e : encoders) {
      std::vector<std::string> row{e};
      for (const auto& f : families) {
        auto it = std::find_if(ss->begin(), ss->end(), [&](const StatResult& s) {
          return s.test == "ols_slope" && get(s.group, "metric") == "rsi" && get(s.group, "encoder") == e &&
                 get(s.group, "condition") == f;
        });
        row.push_back(it == ss->end() ? "" : num(it->statistic));
        row.push_back(it == ss->end() ? "" : num(it->p_value));
      }
      t.rows.push_back(std::move(row));
    }
    emit(std::move(t), {{"grouping", {{"rows", "encoder"}, {"columns", "occlusion family"}}},
                        {"metric", "OLS slope of RSI on native severity, with R^2"}});
  }

  // (d)
  void wilcoxon_tables() {
    const auto* ss = axis_stats("occlusion");
    const auto* ms = axis("occlusion");
    if (!ss || !ms) return;
    Table t{"d_wilcoxon",
            {"encoder", "versus", "metric", "W", "p_value", "n_pairs", "n_dropped", "mean_delta", "significant"},
            {}};
    for (const auto& s : *ss) {
      if (s.test.rfind("wilcoxon", 0) != 0) continue;
      const bool sig = s.n > 0 && s.p_value < alpha_;
      t.rows.push_back({get(s.group, "encoder"), get(s.group, "versus"), get(s.group, "metric"), num(s.statistic),
                        num(s.p_value), std::to_string(s.n), std::to_string(s.n_dropped), num(s.mean_delta),
                        sig ? "yes" : "n.s."});
    }
    const auto encoders = distinct(*ms, "encoder");
    if (encoders.size() < 2) {
      summary_.warnings.push_back("occlusion: fewer than two encoders; no paired comparison");
    }
    emit(std::move(t), {{"alternative", "greater"},
                        {"alpha", alpha_},
                        {"conventions",
                         {{"zeros", "dropped before ranking"},
                          {"ties", "average ranks"},
                          {"exact_up_to", kWilcoxonExactLimit}}}});

    Table d{"d_paired_rsi_diffs", {"encoder", "versus", "condition", "severity", "value", "versus_value", "diff"}, {}};
    std::vector<std::string> warnings;
    for (std::size_t i = 0; i < encoders.size(); ++i) {
      for (std::size_t j = i + 1; j < encoders.size(); ++j) {
        const auto pa = pivot(*ms, "rsi", "condition", "severity", {{"encoder", encoders[i]}});
        const auto pb = pivot(*ms, "rsi", "condition", "severity", {{"encoder", encoders[j]}});
        paired_cell_diffs(pa, pb, &warnings);
        for (std::size_t r = 0; r < pa.rows.size(); ++r) {
          for (std::size_t c = 0; c < pa.cols.size(); ++c) {
            const auto va = pa.cells[r][c];
            const auto vb = pb.at(pa.rows[r], pa.cols[c]);
            if (!va) continue;
            d.rows.push_back({encoders[i], encoders[j], pa.rows[r], pa.cols[c], num(*va), num(vb),
                              vb ? num(*va - *vb) : std::string()});
          }
        }
      }
    }
    if (!d.rows.empty()) emit(std::move(d), {{"metric", "rsi"}, {"warnings", warnings}});
  }

  // (e)
  void worst_case() {
    const auto* ms = axis("occlusion");
    if (!ms) return;
    Table t{"e_worst_case",
            {"encoder", "condition", "severity", "top1_accuracy", "retention", "rsi", "ccr", "decoupling_index",
             "decoupled"},
            {}};
    for (const auto& enc : distinct(*ms, "encoder")) {
      for (const auto& cond : distinct(*ms, "condition", "rsi")) {
        std::vector<std::string> sev;
        for (const auto& m : *ms) {
          if (matches(m, "rsi", {{"encoder", enc}, {"condition", cond}})) sev.push_back(get(m.group, "severity"));
        }
        if (sev.empty()) continue;
        const auto top = numeric_sorted(sev).back();
        const std::map<std::string, std::string> f{{"encoder", enc}, {"condition", cond}, {"severity", top}};
        const auto r = find_value(*ms, "rsi", f);
        const auto c = find_value(*ms, "ccr", f);
        const bool decoupled = r && c && *r > 0.9 && *c < 0.15;
        t.rows.push_back({enc, cond, top, num(find_value(*ms, "top1_accuracy", f)), num(find_value(*ms, "retention", f)),
                          num(r), num(c), num(find_value(*ms, "decoupling_index", {{"encoder", enc}, {"condition", cond}})),
                          decoupled ? "yes" : "no"});
      }
    }
    emit(std::move(t), {{"selection", "highest severity of each occlusion paradigm"},
                        {"decoupled", "rsi > 0.9 and ccr < 0.15"}});
  }

  // (f)
  void temporal_tables() {
    const auto* ms = axis("temporal");
    if (!ms) return;
    Table t{"f_dscs_triplet", {"encoder", "dscs", "semantic_flip_rate", "cos_rev"}, {}};
    Table x{"f_temporal_indices",
            {"encoder", "sgi", "fpbs_anchor", "fpbs_spread", "tcb", "macro_penalty", "micro_penalty", "tdi_overall"},
            {}};
    for (const auto& enc : distinct(*ms, "encoder")) {
      const std::map<std::string, std::string> f{{"encoder", enc}};
      t.rows.push_back({enc, num(find_value(*ms, "dscs", f)), num(find_value(*ms, "semantic_flip_rate", f)),
                        num(find_value(*ms, "cos_rev", f))});
      std::string anchor;
      for (const auto& m : *ms) {
        if (matches(m, "fpbs_spread", f)) anchor = get(m.group, "anchor");
      }
      x.rows.push_back({enc, num(find_value(*ms, "sgi", f)), anchor, num(find_value(*ms, "fpbs_spread", f)),
                        num(find_value(*ms, "tcb", f)), num(find_value(*ms, "macro_penalty", f)),
                        num(find_value(*ms, "micro_penalty", f)),
                        num(find_value(*ms, "tdi", {{"encoder", enc}, {"temporal_family", "overall"}}))});
    }
    emit(std::move(t));
    emit(std::move(x));
    Table tdi{"f_tdi_by_family", {"encoder", "temporal_family", "tdi"}, {}};
    for (const auto& m : *ms) {
      if (m.metric == "tdi") tdi.rows.push_back({get(m.group, "encoder"), get(m.group, "temporal_family"), num(m.value)});
    }
    if (!tdi.rows.empty()) emit(std::move(tdi));
  }

  // (g)
  void pretend_tables() {
    const auto* ms = axis("pretend");
    if (!ms) return;
    Table s{"g_pretend_summary",
            {"encoder", "top1_accuracy", "confident_wrong_rate", "confident_error_share", "overconfident_class_count"},
            {}};
    Table grp{"g_pretend_groups", {"encoder", "grouping", "category", "accuracy"}, {}};
    Table cal{"g_calibration_scatter",
              {"encoder", "class", "label", "n", "mean_confidence", "accuracy", "error_rate", "overconfident",
               "hardest_rank"},
              {}};
    Table del{"g_class_deltas", {"encoder", "versus", "class", "label", "object_size", "delta"}, {}};
    json scatter = json::array();
    for (const auto& enc : distinct(*ms, "encoder")) {
      const std::map<std::string, std::string> f{{"encoder", enc}};
      if (find_value(*ms, "top1_accuracy", f)) {
        s.rows.push_back({enc, num(find_value(*ms, "top1_accuracy", f)), num(find_value(*ms, "confident_wrong_rate", f)),
                          num(find_value(*ms, "confident_error_share", f)),
                          num(find_value(*ms, "overconfident_class_count", f))});
      }
      for (const auto& m : *ms) {
        if (get(m.group, "encoder") != enc || !get(m.group, "versus").empty()) continue;
        if (m.metric == "size_accuracy" || m.metric == "sensitivity_accuracy") {
          grp.rows.push_back({enc, m.metric == "size_accuracy" ? "object_size" : "detail_sensitivity",
                              get(m.group, "category"), num(m.value)});
        }
      }
      json points = json::array();
      for (const auto& cls : distinct(*ms, "class", "class_accuracy")) {
        const std::map<std::string, std::string> fc{{"encoder", enc}, {"class", cls}};
        const auto acc = find_value(*ms, "class_accuracy", fc);
        if (!acc) continue;
        std::size_t n = 0;
        for (const auto& m : *ms) {
          if (matches(m, "class_accuracy", fc)) n = m.n;
        }
        const auto conf = find_value(*ms, "class_mean_confidence", fc);
        cal.rows.push_back({enc, cls, class_name(cls), std::to_string(n), num(conf), num(acc),
                            num(find_value(*ms, "class_error_rate", fc)),
                            find_value(*ms, "overconfident_class", fc).value_or(0) > 0 ? "yes" : "no",
                            num(find_value(*ms, "hardest_rank", fc))});
        points.push_back({conf.value_or(0.0), *acc});
      }
      scatter.push_back({{"label", enc}, {"points", points}});
    }
    for (const auto& m : *ms) {
      if (m.metric != "class_accuracy_delta") continue;
      const auto cls = get(m.group, "class");
      del.rows.push_back({get(m.group, "encoder"), get(m.group, "versus"), cls, class_name(cls),
                          get(m.group, "category"), num(m.value)});
    }
    plots_["scatters"].push_back(
        {{"name", "g_calibration"}, {"x_label", "mean confidence"}, {"y_label", "accuracy"}, {"series", scatter}});
    emit(std::move(s), {{"thresholds", {{"confident", kConfidentThreshold},
                                         {"overconfident_confidence", kOverconfidentConfidence},
                                         {"overconfident_accuracy", kOverconfidentAccuracy}}}});
    emit(std::move(grp));
    emit(std::move(cal));
    if (!del.rows.empty()) emit(std::move(del));
  }

  // (h)
  void radar() {
    std::map<std::string, std::map<std::string, double>> scores;
    std::map<std::string, std::string> definition;
    auto mean_of = [](const std::vector<MetricResult>& ms, std::string_view metric,
                      const std::map<std::string, std::string>& f) -> std::optional<double> {
      CompensatedSum s;
      std::size_t n = 0;
      for (const auto& m : ms) {
        if (matches(m, metric, f)) {
          s.add(m.value);
          ++n;
        }
      }
      if (n == 0) return std::nullopt;
      return s.value() / static_cast<double>(n);
    };
    auto add = [&](const std::string& a, std::string_view metric, std::map<std::string, std::string> f,
                   std::string def, double scale = 1.0) {
      const auto* ms = axis(a);
      if (!ms) return;
      for (const auto& enc : distinct(*ms, "encoder")) {
        f["encoder"] = enc;
        if (auto v = mean_of(*ms, metric, f)) scores[a][enc] = *v * scale;
      }
      definition[a] = std::move(def);
    };
    add("discriminability", "top1_accuracy", {{"probe", "linear"}}, "linear-probe top-1 accuracy");
    add("corruption", "retention", {{"family", "corruption"}}, "mean retention over the grid (fraction)", 0.01);
    add("pretend", "top1_accuracy", {}, "pretend-subset top-1 accuracy");
    add("occlusion", "auc_rsi", {}, "mean AUC(RSI) over paradigms");
    add("temporal", "tdi", {{"temporal_family", "overall"}}, "overall temporal dependency index");
    if (scores.empty()) return;
    Table t{"h_radar", {"axis", "encoder", "raw", "normalized", "raw_min", "raw_max", "definition"}, {}};
    json axes = json::array();
    for (const auto& ax : radar_normalize(scores)) {
      for (const auto& [enc, raw] : ax.raw) {
        t.rows.push_back({ax.axis, enc, num(raw), num(ax.normalized.at(enc)), num(ax.raw_min), num(ax.raw_max),
                          definition[ax.axis]});
      }
      axes.push_back({{"axis", ax.axis}, {"raw_max", ax.raw_max}, {"normalized", ax.normalized}});
    }
    plots_["radar"] = axes;
    emit(std::move(t), {{"normalization", "per-axis min-max; the axis maximum maps to 1 and is annotated with its raw value"}});
  }

  // (i)
  void cross_condition() {
    const auto* ms = axis("temporal");
    if (!ms) return;
    Table t{"i_cross_condition", {"encoder", "condition", "temporal_family", "top1_accuracy", "rsi", "accuracy_drop",
                                  "cosine_drop"},
            {}};
    json scatter = json::array();
    for (const auto& enc : distinct(*ms, "encoder")) {
      json pts = json::array();
      for (const auto& cond : distinct(*ms, "condition", "accuracy_drop")) {
        const std::map<std::string, std::string> f{{"encoder", enc}, {"condition", cond}};
        std::string fam;
        for (const auto& m : *ms) {
          if (matches(m, "accuracy_drop", f)) fam = get(m.group, "temporal_family");
        }
        const auto ad = find_value(*ms, "accuracy_drop", f);
        const auto cd = find_value(*ms, "cosine_drop", f);
        t.rows.push_back({enc, cond, fam, num(find_value(*ms, "top1_accuracy", f)), num(find_value(*ms, "rsi", f)),
                          num(ad), num(cd)});
        if (ad && cd) pts.push_back({*cd, *ad});
      }
      scatter.push_back({{"label", enc}, {"points", pts}});
    }
    const auto p = pivot(*ms, "accuracy_drop", "encoder", "condition", {}, distinct(*ms, "encoder"),
                         distinct(*ms, "condition", "accuracy_drop"));
    json values = json::array();
    for (const auto& row : p.cells) {
      json r = json::array();
      for (const auto& c : row) r.push_back(c ? json(*c) : json(nullptr));
      values.push_back(r);
    }
    plots_["heatmaps"].push_back({{"name", "i_accuracy_drop"}, {"rows", p.rows}, {"cols", p.cols}, {"values", values}});
    plots_["scatters"].push_back(
        {{"name", "i_accuracy_vs_cosine_drop"}, {"x_label", "cosine drop"}, {"y_label", "accuracy drop"}, {"series", scatter}});
    emit(std::move(t));
    emit(pivot_to_table(p, "i_cross_condition_heatmap"));
  }

  void discriminability() {
    const auto* ms = axis("discriminability");
    if (!ms) return;
    Table t{"discriminability_summary", {"encoder", "linear_top1", "knn_top1", "fisher_ratio"}, {}};
    Table tiers{"discriminability_fisher_tiers", {"encoder", "tier", "fisher_ratio", "class_mean", "class_std"}, {}};
    for (const auto& enc : distinct(*ms, "encoder")) {
      t.rows.push_back({enc, num(find_value(*ms, "top1_accuracy", {{"encoder", enc}, {"probe", "linear"}})),
                        num(find_value(*ms, "top1_accuracy", {{"encoder", enc}, {"probe", "knn"}})),
                        num(find_value(*ms, "fisher_ratio", {{"encoder", enc}, {"tier", "all"}}))});
      for (const auto& tier : distinct(*ms, "tier", "fisher_class_mean")) {
        const std::map<std::string, std::string> f{{"encoder", enc}, {"tier", tier}};
        tiers.rows.push_back({enc, tier, num(find_value(*ms, "fisher_ratio", f)),
                              num(find_value(*ms, "fisher_class_mean", f)), num(find_value(*ms, "fisher_class_std", f))});
      }
    }
    emit(std::move(t));
    emit(std::move(tiers));
  }

  std::filesystem::path dir_;
  const ResultsSet& rs_;
  double alpha_;
  const LabelTable* labels_;
  ReportSummary summary_;
  json plots_ = {{"line_charts", json::array()},
                 {"heatmaps", json::array()},
                 {"scatters", json::array()},
                 {"radar", json::array()}};
};

}  // namespace

ReportSummary write_report(const std::filesystem::path& results_dir, const std::filesystem::path& out_dir,
                           double alpha, const LabelTable* labels) {
  const ResultsSet rs = load_results(results_dir);
  if (rs.metrics.empty()) throw DataError(fmt::format("no results files under {}", results_dir.string()));
  std::filesystem::create_directories(out_dir);
  return ReportWriter(out_dir, rs, alpha, labels).run();
}

}  // namespace vrh

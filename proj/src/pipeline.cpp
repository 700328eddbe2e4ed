#include "vrh/pipeline.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <exception>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

#include "vrh/common.hpp"
#include "vrh/hashing.hpp"
#include "vrh/rng.hpp"

namespace vrh {

using nlohmann::json;
using Group = std::map<std::string, std::string>;

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t, int)>& fn) {
  if (n == 0) return;
  const int w = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  if (w == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i, 0);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t failed_at = n;
  std::exception_ptr error;
  auto work = [&](int id) {
    for (std::size_t i = next++; i < n; i = next++) {
      {
        std::lock_guard lock(mu);
        if (failed_at < i) return;
      }
      try {
        fn(i, id);
      } catch (...) {
        std::lock_guard lock(mu);
        if (i < failed_at) {
          failed_at = i;
          error = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < w; ++t) pool.emplace_back(work, t);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::string dataset_hash(const ClipManifest& manifest, const LabelTable& labels, std::string_view decoder, int frames) {
  Sha256 h;
  h.update(format_manifest(manifest));
  for (const auto& [id, label] : labels.entries()) h.update(fmt::format("{}\t{}\n", id, label));
  h.update(fmt::format("decoder={}\nframes={}\n", decoder, frames));
  return h.hex_digest();
}

std::filesystem::path results_path(const std::filesystem::path& output_dir, std::string_view axis) {
  return output_dir / "results" / (std::string(axis) + ".jsonl");
}

// ---------------------------------------------------------------- context

RunContext::RunContext(ExperimentConfig config) : config_(std::move(config)), store_(config_.cache_dir()) {
  for (const auto& p : config_.plugins) EncoderRegistry::instance().load_plugin(p);
  if (config_.dataset.manifest.empty()) throw ConfigError("dataset.manifest is not set");
  if (config_.dataset.labels.empty()) throw ConfigError("dataset.labels is not set");
  labels_ = LabelTable::load(config_.dataset.labels);
  manifest_ = load_manifest(config_.dataset.manifest, labels_);
  if (!config_.dataset.root.empty()) manifest_.root = config_.dataset.root;
  DecoderRegistry::instance().get(config_.dataset.decoder);
  if (config_.dataset.taxonomy_dir.empty()) {
    taxonomy_ = load_default_taxonomy(labels_);
  } else {
    const std::filesystem::path d = config_.dataset.taxonomy_dir;
    taxonomy_ = load_taxonomy(d / "class_tiers.tsv", d / "pretend_categories.tsv", d / "antonyms.tsv", labels_);
  }
  dataset_hash_ = vrh::dataset_hash(manifest_, labels_, config_.dataset.decoder, config_.dataset.frames);

  if (config_.encoders.empty()) throw ConfigError("no encoders configured");
  std::set<std::string> ids;
  for (const auto& e : config_.encoders) {
    EncoderHandle h{e, EncoderRegistry::instance().create(e.type, e.options)};
    if (!ids.insert(h.id()).second) throw ConfigError(fmt::format("duplicate encoder id '{}'", h.id()));
    if (!is_safe_identifier(h.id())) throw ConfigError(fmt::format("encoder id '{}' is not a safe identifier", h.id()));
    encoders_.push_back(std::move(h));
  }
}

VideoClip RunContext::load(const ManifestEntry& e) const {
  return load_clip(e, manifest_.root, config_.dataset.decoder, config_.dataset.frames);
}

namespace {

std::vector<int> resolve_classes(const json& sel, const LabelTable& labels, const ClassTaxonomy& taxonomy,
                                 std::string_view axis) {
  if (sel.is_string()) {
    const auto s = sel.get<std::string>();
    if (s == "all") {
      std::vector<int> out;
      for (const auto& [id, _] : labels.entries()) out.push_back(id);
      return out;
    }
    if (s == "tiers") return taxonomy.tier_classes();
    if (s == "pretend") return taxonomy.pretend_classes();
    throw ConfigError(fmt::format("subsets.{}.classes: unknown keyword '{}'", axis, s));
  }
  std::vector<int> out;
  for (const auto& ref : sel) {
    const std::string r = ref.is_number_integer() ? std::to_string(ref.get<int>()) : ref.get<std::string>();
    auto id = labels.resolve(r);
    if (!id) throw ConfigError(fmt::format("subsets.{}.classes: '{}' matches no label", axis, r));
    out.push_back(*id);
  }
  return out;
}

}  // namespace

ClipManifest RunContext::subset(std::string_view axis, std::vector<std::string>* warnings) const {
  if (!is_axis(axis)) throw ConfigError(fmt::format("unknown axis '{}'", axis));
  auto it = config_.subsets.find(std::string(axis));
  const SubsetConfig sc = it == config_.subsets.end() ? SubsetConfig{} : it->second;
  const Split split = parse_split(sc.split);

  std::set<int> present;
  for (const auto& e : manifest_.entries) {
    if (e.split == split) present.insert(e.class_id);
  }
  std::vector<int> classes;
  std::size_t missing = 0;
  for (int c : resolve_classes(sc.classes, labels_, taxonomy_, axis)) {
    if (present.count(c)) {
      classes.push_back(c);
    } else {
      ++missing;
    }
  }
  if (missing && warnings) {
    warnings->push_back(fmt::format("{}: {} requested classes have no {} clips and were dropped", axis, missing,
                                    to_string(split)));
  }

  ClipManifest out;
  if (sc.per_class > 0 || sc.total) {
    SubsetSpec spec;
    spec.classes = classes;
    spec.per_class = sc.per_class;
    spec.total = sc.total;
    spec.seed = config_.seed;
    spec.split = split;
    out = stratified_subset(manifest_, spec);
  } else {
    const std::set<int> keep(classes.begin(), classes.end());
    out.root = manifest_.root;
    for (const auto& e : manifest_.entries) {
      if (e.split == split && keep.count(e.class_id)) out.entries.push_back(e);
    }
  }
  if (out.entries.empty()) throw DataError(fmt::format("{}: evaluation subset is empty", axis));
  return out;
}

ClipManifest RunContext::training_clips(const ClipManifest& eval, Split split) const {
  std::set<int> classes;
  for (const auto& e : eval.entries) classes.insert(e.class_id);
  ClipManifest out;
  out.root = manifest_.root;
  for (const auto& e : manifest_.entries) {
    if (e.split == split && classes.count(e.class_id)) out.entries.push_back(e);
  }
  return out;
}

std::vector<std::vector<EmbeddingRecord>> RunContext::embed(const EncoderHandle& enc, const ClipManifest& clips,
                                                            const std::vector<PerturbationSpec>& specs) {
  const std::size_t n = clips.entries.size();
  std::vector<std::vector<EmbeddingRecord>> out(specs.size(), std::vector<EmbeddingRecord>(n));
  std::vector<std::string> keys;
  for (const auto& s : specs) keys.push_back(s.key());

  const int workers = std::max(1, std::min<int>(config_.workers, static_cast<int>(n)));
  std::vector<std::shared_ptr<Encoder>> instances(workers, enc.encoder);
  if (!enc.encoder->reentrant()) {
    for (int w = 1; w < workers; ++w) instances[w] = EncoderRegistry::instance().create(enc.entry.type, enc.entry.options);
  }

  parallel_for(n, workers, [&](std::size_t i, int worker) {
    const auto& entry = clips.entries[i];
    const Encoder& model = *instances[worker];
    std::optional<VideoClip> clip;
    auto compute = [&](std::size_t j) {
      if (!clip) clip = load(entry);
      return model.encode(apply_perturbation(*clip, specs[j]), keys[j]);
    };
    for (std::size_t j = 0; j < specs.size(); ++j) {
      const CacheKey key{dataset_hash_, entry.clip_id, enc.id(), keys[j]};
      if (auto hit = store_.get(key)) {
        ++counters_.cache_hits;
        const std::uint64_t h = mix_seed(config_.seed, fnv1a(store_.path_for(key).string()));
        if (config_.audit_fraction > 0 && static_cast<double>(h >> 11) * 0x1.0p-53 < config_.audit_fraction) {
          ++counters_.audited;
          ++counters_.encode_calls;
          if (serialize_embedding(compute(j)) != serialize_embedding(*hit)) {
            throw DataError(fmt::format("cache audit: {} differs from recomputation", store_.path_for(key).string()));
          }
        }
        out[j][i] = std::move(*hit);
        continue;
      }
      ++counters_.encode_calls;
      EmbeddingRecord rec = compute(j);
      store_.put(key, rec);
      out[j][i] = std::move(rec);
    }
  });
  return out;
}

// ---------------------------------------------------------------- grids

namespace {

template <typename T>
std::vector<T> grid_list(const json& g, const char* key, std::string_view axis) {
  if (!g.contains(key)) return {};
  try {
    return g.at(key).get<std::vector<T>>();
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("grids.{}.{}: {}", axis, key, e.what()));
  }
}

}  // namespace

std::vector<PerturbationSpec> axis_grid(const ExperimentConfig& config, std::string_view axis) {
  if (!is_axis(axis)) throw ConfigError(fmt::format("unknown axis '{}'", axis));
  const json g = config.grids.contains(std::string(axis)) ? config.grids.at(std::string(axis)) : json::object();
  std::vector<PerturbationSpec> out;
  const auto seed = config.seed;
  if (axis == "corruption") {
    for (const auto& t : grid_list<std::string>(g, "types", axis)) {
      const auto c = parse_corruption(t);
      for (int s : grid_list<int>(g, "severities", axis)) {
        if (s < 1 || s > 5) throw ConfigError(fmt::format("corruption severity {} outside 1..5", s));
        out.push_back(PerturbationSpec::corruption(c, s, seed));
      }
    }
  } else if (axis == "occlusion") {
    const CuboidSize cub{g.value("tau", 2), g.value("patch", 16)};
    const bool pad = g.value("pad", false);
    for (double a : grid_list<double>(g, "moving_block", axis)) out.push_back(PerturbationSpec::moving_block(a, seed));
    for (double b : grid_list<double>(g, "temporal_dropout", axis)) {
      out.push_back(PerturbationSpec::temporal_dropout(b, seed));
    }
    for (double c : grid_list<double>(g, "patch_dropout", axis)) {
      out.push_back(PerturbationSpec::patch_dropout(c, seed, cub, pad));
    }
  } else if (axis == "temporal") {
    const int segments = g.value("segments", 4);
    const int depth = g.value("interleave_depth", 2);
    for (const auto& name : grid_list<std::string>(g, "conditions", axis)) {
      auto s = PerturbationSpec::temporal(parse_temporal_condition(name), seed);
      if (segments != 4) s.params["segments"] = segments;
      if (depth != 2) s.params["depth"] = depth;
      out.push_back(std::move(s));
    }
  }
  std::set<std::string> seen;
  for (const auto& s : out) {
    if (!seen.insert(s.key()).second) throw ConfigError(fmt::format("{} grid repeats condition {}", axis, s.key()));
  }
  return out;
}

// ---------------------------------------------------------------- probes

std::unique_ptr<Probe> fit_axis_probe(RunContext& ctx, const EncoderHandle& enc, std::string_view axis,
                                      const ClipManifest& eval, ProbeConfig cfg, std::vector<std::string>& warnings) {
  ClipManifest train = ctx.training_clips(eval, Split::Train);
  if (train.entries.empty()) {
    warnings.push_back(fmt::format("{}/{}: no training clips; the {} probe is fitted on the evaluation clips", axis,
                                   enc.id(), to_string(cfg.kind)));
    train = eval;
  }
  const auto clean = std::vector<PerturbationSpec>{PerturbationSpec::clean()};
  auto feats = std::move(ctx.embed(enc, train, clean)[0]);
  std::vector<int> labels;
  for (const auto& e : train.entries) labels.push_back(e.class_id);
  const int classes = ctx.labels().class_count();

  if (cfg.kind == ProbeKind::Knn && cfg.k > static_cast<int>(feats.size())) {
    warnings.push_back(fmt::format("{}/{}: k={} exceeds {} reference clips; using k={}", axis, enc.id(), cfg.k,
                                   feats.size(), feats.size()));
    cfg.k = static_cast<int>(feats.size());
  }

  std::unique_ptr<Probe> probe;
  if (ctx.config().sweep && cfg.kind != ProbeKind::Knn) {
    const ClipManifest val = ctx.training_clips(eval, Split::Val);
    if (val.entries.empty()) {
      warnings.push_back(fmt::format("{}/{}: no validation clips; probe sweep skipped", axis, enc.id()));
    } else {
      auto vfeats = std::move(ctx.embed(enc, val, clean)[0]);
      std::vector<int> vlabels;
      for (const auto& e : val.entries) vlabels.push_back(e.class_id);
      probe = select_probe(feats, labels, vfeats, vlabels, classes, default_sweep_grid(cfg));
    }
  }
  if (!probe) probe = train_probe(feats, labels, classes, cfg);
  save_probe(ctx.output_dir() / "probes" / std::string(axis) / enc.id() / (std::string(to_string(cfg.kind)) + ".probe"),
             *probe);
  return probe;
}

// ---------------------------------------------------------------- axes

namespace {

struct Emitter {
  std::vector<MetricResult>& out;
  Group base;

  void operator()(std::string metric, double value, std::size_t n, const Group& extra = {}) const {
    Group g = base;
    for (const auto& [k, v] : extra) g[k] = v;
    out.push_back({std::move(metric), value, std::move(g), n});
  }
};

Group cell(const PerturbationSpec& s) {
  return {{"family", std::string(to_string(s.family))},
          {"condition", s.condition},
          {"severity", format_number(s.severity)}};
}

std::vector<int> labels_of(const ClipManifest& m) {
  std::vector<int> out;
  for (const auto& e : m.entries) out.push_back(e.class_id);
  return out;
}

std::vector<EmbeddingPair> make_pairs(const std::vector<EmbeddingRecord>& clean,
                                      const std::vector<EmbeddingRecord>& pert, const std::string& key) {
  std::vector<EmbeddingPair> out;
  out.reserve(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) out.push_back({clean[i].clip_id, clean[i].gap, pert[i].gap, key});
  return out;
}

std::vector<std::vector<float>> gaps(const std::vector<EmbeddingRecord>& recs) {
  std::vector<std::vector<float>> out;
  for (const auto& r : recs) out.push_back(r.gap);
  return out;
}

// Clean spec first, then the grid.
std::vector<PerturbationSpec> with_clean(std::vector<PerturbationSpec> grid) {
  grid.insert(grid.begin(), PerturbationSpec::clean());
  return grid;
}

StatResult slope_stat(const std::vector<CurvePoint>& curve, Group g) { return slope_result(degradation_slope(curve), std::move(g)); }

bool distinct_severities(const std::vector<CurvePoint>& c) {
  std::set<double> s;
  for (const auto& p : c) s.insert(p.severity);
  return s.size() >= 2;
}

void run_discriminability(RunContext& ctx, const ClipManifest& eval, AxisResult& r) {
  const auto labels = labels_of(eval);
  for (const auto& enc : ctx.encoders()) {
    Emitter emit{r.metrics, {{"encoder", enc.id()}, {"axis", r.axis}}};
    const auto feats = std::move(ctx.embed(enc, eval, {PerturbationSpec::clean()})[0]);
    for (ProbeKind kind : {ProbeKind::Linear, ProbeKind::Knn}) {
      ProbeConfig cfg = ctx.config().probe;
      cfg.kind = kind;
      const auto probe = fit_axis_probe(ctx, enc, r.axis, eval, cfg, r.warnings);
      const auto preds = predict(*probe, feats);
      const Group g{{"probe", std::string(to_string(kind))}};
      emit("top1_accuracy", topk_accuracy(preds, labels, 1), preds.size(), g);
      emit("top5_accuracy", topk_accuracy(preds, labels, 5), preds.size(), g);
    }
    const auto x = gaps(feats);
    const auto fr = fisher_ratio(x, labels);
    emit("fisher_ratio", fr.ratio, fr.n, {{"tier", "all"}});
    emit("fisher_trace_between", fr.trace_between, fr.n, {{"tier", "all"}});
    emit("fisher_trace_within", fr.trace_within, fr.n, {{"tier", "all"}});
    const auto tiers = fisher_by_tier(x, labels, ctx.taxonomy());
    if (tiers.empty()) r.warnings.push_back(fmt::format("{}: no semantic tier has two classes with two clips", enc.id()));
    for (const auto& t : tiers) {
      const std::string tier(to_string(t.tier));
      emit("fisher_ratio", t.pooled.ratio, t.pooled.n, {{"tier", tier}});
      emit("fisher_class_mean", t.class_mean, t.per_class.size(), {{"tier", tier}});
      emit("fisher_class_std", t.class_std, t.per_class.size(), {{"tier", tier}});
      for (const auto& [cls, share] : t.per_class) {
        emit("fisher_class_share", share, 1, {{"tier", tier}, {"class", std::to_string(cls)}});
      }
    }
  }
}

// Accuracy, retention and cosine per grid cell; shared by corruption and occlusion.
struct CellValues {
  double top1 = 0.0;
  double rsi = 0.0;
  std::optional<double> ccr;
};

std::vector<CellValues> perturbed_cells(RunContext& ctx, const EncoderHandle& enc, const ClipManifest& eval,
                                        const std::vector<PerturbationSpec>& grid, AxisResult& r, bool with_ccr) {
  const auto labels = labels_of(eval);
  Emitter emit{r.metrics, {{"encoder", enc.id()}, {"axis", r.axis}}};
  const auto specs = with_clean(grid);
  const auto emb = ctx.embed(enc, eval, specs);

  const auto probe = fit_axis_probe(ctx, enc, r.axis, eval, ctx.config().probe, r.warnings);
  std::unique_ptr<Probe> knn;
  if (with_ccr) {
    ProbeConfig kc = ctx.config().probe;
    kc.kind = ProbeKind::Knn;
    knn = fit_axis_probe(ctx, enc, r.axis, eval, kc, r.warnings);
  }
  const auto clean_preds = predict(*probe, emb[0]);
  const double clean_acc = topk_accuracy(clean_preds, labels, 1);
  emit("top1_accuracy", clean_acc, labels.size(), cell(specs[0]));
  emit("top5_accuracy", topk_accuracy(clean_preds, labels, 5), labels.size(), cell(specs[0]));
  if (clean_acc == 0.0) r.warnings.push_back(fmt::format("{}/{}: clean accuracy is 0; retention omitted", r.axis, enc.id()));

  std::vector<CellValues> out;
  for (std::size_t j = 1; j < specs.size(); ++j) {
    const Group g = cell(specs[j]);
    const auto preds = predict(*probe, emb[j]);
    CellValues v;
    v.top1 = topk_accuracy(preds, labels, 1);
    emit("top1_accuracy", v.top1, labels.size(), g);
    emit("top5_accuracy", topk_accuracy(preds, labels, 5), labels.size(), g);
    if (clean_acc > 0) emit("retention", retention(v.top1, clean_acc), labels.size(), g);
    const auto pairs = make_pairs(emb[0], emb[j], specs[j].key());
    v.rsi = rsi(pairs);
    emit("rsi", v.rsi, pairs.size(), g);
    if (knn) {
      v.ccr = ccr(pairs, static_cast<const KnnProbe&>(*knn));
      emit("ccr", *v.ccr, pairs.size(), g);
    }
    out.push_back(v);
  }
  return out;
}

// Conditions in grid order with their cell indices.
std::vector<std::pair<std::string, std::vector<std::size_t>>> by_condition(const std::vector<PerturbationSpec>& grid) {
  std::vector<std::pair<std::string, std::vector<std::size_t>>> out;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& p) { return p.first == grid[j].condition; });
    if (it == out.end()) {
      out.push_back({grid[j].condition, {j}});
    } else {
      it->second.push_back(j);
    }
  }
  return out;
}

void run_corruption(RunContext& ctx, const ClipManifest& eval, AxisResult& r) {
  const auto grid = axis_grid(ctx.config(), r.axis);
  for (const auto& enc : ctx.encoders()) {
    Emitter emit{r.metrics, {{"encoder", enc.id()}, {"axis", r.axis}}};
    const auto cells = perturbed_cells(ctx, enc, eval, grid, r, false);
    for (const auto& [cond, idx] : by_condition(grid)) {
      std::vector<CurvePoint> acc, cos;
      for (auto j : idx) {
        acc.push_back({grid[j].severity, cells[j].top1});
        cos.push_back({grid[j].severity, cells[j].rsi});
      }
      std::sort(cos.begin(), cos.end(), [](auto& a, auto& b) { return a.severity < b.severity; });
      std::sort(acc.begin(), acc.end(), [](auto& a, auto& b) { return a.severity < b.severity; });
      const Group g{{"family", "corruption"}, {"condition", cond}};
      emit("auc_rsi", auc_rsi(cos), eval.size(), g);
      if (distinct_severities(acc)) {
        Group sg = emit.base;
        sg.insert(g.begin(), g.end());
        sg["metric"] = "top1_accuracy";
        r.stats.push_back(slope_stat(acc, sg));
        sg["metric"] = "rsi";
        r.stats.push_back(slope_stat(cos, sg));
      }
    }
  }
}

void run_occlusion(RunContext& ctx, const ClipManifest& eval, AxisResult& r) {
  const auto grid = axis_grid(ctx.config(), r.axis);
  std::vector<std::vector<CellValues>> all;
  for (const auto& enc : ctx.encoders()) {
    Emitter emit{r.metrics, {{"encoder", enc.id()}, {"axis", r.axis}}};
    const auto cells = perturbed_cells(ctx, enc, eval, grid, r, true);
    for (const auto& [cond, idx] : by_condition(grid)) {
      std::vector<CurvePoint> cos, cc;
      for (auto j : idx) {
        cos.push_back({grid[j].severity, cells[j].rsi});
        cc.push_back({grid[j].severity, *cells[j].ccr});
      }
      auto by_sev = [](auto& a, auto& b) { return a.severity < b.severity; };
      std::sort(cos.begin(), cos.end(), by_sev);
      std::sort(cc.begin(), cc.end(), by_sev);
      const Group g{{"family", "occlusion"}, {"condition", cond}};
      emit("auc_rsi", auc_rsi(cos), eval.size(), g);
      emit("decoupling_index", decoupling_index(cc, cos), cos.size(), g);
      std::size_t decoupled = 0;
      for (std::size_t i = 0; i < cos.size(); ++i) decoupled += cos[i].value > 0.9 && cc[i].value < 0.15;
      emit("decoupled_cells", static_cast<double>(decoupled), cos.size(), g);
      if (distinct_severities(cos)) {
        Group sg = emit.base;
        sg.insert(g.begin(), g.end());
        sg["metric"] = "rsi";
        r.stats.push_back(slope_stat(cos, sg));
        sg["metric"] = "ccr";
        r.stats.push_back(slope_stat(cc, sg));
      }
    }
    all.push_back(cells);
  }
  const auto& encs = ctx.encoders();
  for (std::size_t a = 0; a < encs.size(); ++a) {
    for (std::size_t b = 0; b < encs.size(); ++b) {
      if (a == b) continue;
      std::vector<double> diffs;
      for (std::size_t j = 0; j < grid.size(); ++j) diffs.push_back(all[a][j].rsi - all[b][j].rsi);
      auto s = wilcoxon_one_sided(diffs);
      s.group = {{"encoder", encs[a].id()}, {"versus", encs[b].id()}, {"axis", r.axis}, {"metric", "rsi"}};
      r.stats.push_back(std::move(s));
    }
  }
}

void run_temporal(RunContext& ctx, const ClipManifest& eval, AxisResult& r) {
  const auto grid = axis_grid(ctx.config(), r.axis);
  const auto labels = labels_of(eval);
  const auto specs = with_clean(grid);
  for (const auto& enc : ctx.encoders()) {
    Emitter emit{r.metrics, {{"encoder", enc.id()}, {"axis", r.axis}}};
    const auto emb = ctx.embed(enc, eval, specs);
    const auto probe = fit_axis_probe(ctx, enc, r.axis, eval, ctx.config().probe, r.warnings);
    const auto clean_preds = predict(*probe, emb[0]);
    const double clean_acc = topk_accuracy(clean_preds, labels, 1);
    emit("top1_accuracy", clean_acc, labels.size(), cell(specs[0]));

    std::map<std::string, double> acc, cos;
    std::map<std::string, std::size_t> index;
    std::map<std::string, std::vector<double>> family_acc;
    for (std::size_t j = 1; j < specs.size(); ++j) {
      const auto& cond = specs[j].condition;
      const std::string fam(temporal_family(parse_temporal_condition(cond)));
      Group g = cell(specs[j]);
      g["temporal_family"] = fam;
      const auto preds = predict(*probe, emb[j]);
      acc[cond] = topk_accuracy(preds, labels, 1);
      cos[cond] = rsi(make_pairs(emb[0], emb[j], specs[j].key()));
      index[cond] = j;
      family_acc[fam].push_back(acc[cond]);
      emit("top1_accuracy", acc[cond], labels.size(), g);
      emit("rsi", cos[cond], labels.size(), g);
      emit("accuracy_drop", clean_acc - acc[cond], labels.size(), g);
      emit("cosine_drop", 1.0 - cos[cond], labels.size(), g);
    }

    if (index.count("reversal")) {
      std::map<std::string, int> before, after;
      const auto rev = predict(*probe, emb[index["reversal"]]);
      for (std::size_t i = 0; i < labels.size(); ++i) {
        before[clean_preds[i].clip_id] = clean_preds[i].predicted;
        after[rev[i].clip_id] = rev[i].predicted;
      }
      const auto fr = semantic_flip_rate(before, after, ctx.taxonomy().antonyms());
      emit("semantic_flip_rate", fr.rate, fr.changed);
      emit("cos_rev", cos["reversal"], labels.size());
      emit("dscs", dscs(fr.rate, cos["reversal"]), labels.size());
    }
    if (cos.count("segment_shuffle") && cos.count("random_shuffle")) {
      const auto mm = macro_micro_decomposition(cos["segment_shuffle"], cos["random_shuffle"]);
      emit("macro_penalty", mm.macro, labels.size());
      emit("micro_penalty", mm.micro, labels.size());
    }
    if (cos.count("static_first") && cos.count("static_middle") && cos.count("static_last")) {
      std::map<std::string, std::vector<std::vector<float>>> anchors;
      for (const char* a : {"first", "middle", "last"}) anchors[a] = gaps(emb[index[std::string("static_") + a]]);
      emit("sgi", spatial_grounding_index(gaps(emb[0]), anchors), labels.size());
      const auto fb =
          frame_position_bias({acc["static_first"], acc["static_middle"], acc["static_last"]});
      emit("fpbs_spread", fb.spread, labels.size(), {{"anchor", fb.argmax}});
    }
    if (cos.count("static_gaussian_noise") && cos.count("gaussian_noise")) {
      emit("tcb", temporal_consistency_bonus(cos["static_gaussian_noise"], cos["gaussian_noise"]), labels.size());
    }
    if (clean_acc > 0 && !family_acc.empty()) {
      const auto tdi = temporal_dependency_index(clean_acc, family_acc);
      for (const auto& [fam, v] : tdi.per_family) emit("tdi", v, labels.size(), {{"temporal_family", fam}});
      emit("tdi", tdi.overall, labels.size(), {{"temporal_family", "overall"}});
    } else if (clean_acc == 0) {
      r.warnings.push_back(fmt::format("temporal/{}: clean accuracy is 0; TDI omitted", enc.id()));
    }
  }
}

void run_pretend(RunContext& ctx, const ClipManifest& eval, AxisResult& r) {
  const auto labels = labels_of(eval);
  std::vector<CalibrationReport> reports;
  for (const auto& enc : ctx.encoders()) {
    const auto feats = std::move(ctx.embed(enc, eval, {PerturbationSpec::clean()})[0]);
    const auto probe = fit_axis_probe(ctx, enc, r.axis, eval, ctx.config().probe, r.warnings);
    const auto preds = predict(*probe, feats);
    auto report = calibration_analysis(preds, labels, &ctx.taxonomy());
    auto ms = calibration_metrics(report, {{"encoder", enc.id()}, {"axis", r.axis}});
    r.metrics.insert(r.metrics.end(), ms.begin(), ms.end());
    reports.push_back(std::move(report));
  }
  const auto& encs = ctx.encoders();
  for (std::size_t a = 0; a < encs.size(); ++a) {
    for (std::size_t b = a + 1; b < encs.size(); ++b) {
      const auto d = per_class_deltas(reports[a], reports[b], ctx.taxonomy());
      Emitter emit{r.metrics, {{"encoder", encs[a].id()}, {"versus", encs[b].id()}, {"axis", r.axis}}};
      for (const auto& c : d.per_class) {
        emit("class_accuracy_delta", c.delta, 1, {{"class", std::to_string(c.class_id)}, {"category", c.size}});
      }
      for (const auto& [size, v] : d.by_size) {
        emit("size_delta_mean", v.first, 0, {{"category", size}});
        emit("size_delta_wins", v.second, 0, {{"category", size}});
      }
    }
  }
}

void write_results(const RunContext& ctx, AxisResult& r, const ClipManifest& eval) {
  json header = {{"harness_version", kHarnessVersion},
                 {"config_hash", ctx.config().hash()},
                 {"axis", r.axis},
                 {"dataset_hash", ctx.dataset_hash()},
                 {"clips", eval.size()},
                 {"warnings", r.warnings}};
  header["encoders"] = json::array();
  for (const auto& e : ctx.encoders()) {
    header["encoders"].push_back({{"id", e.id()}, {"provenance", e.encoder->spec().provenance}});
  }
  if (eval.subset) header["subset"] = {{"seed", eval.subset->seed}, {"classes", eval.subset->per_class_counts.size()}};
  const auto final_path = results_path(ctx.output_dir(), r.axis);
  auto partial = final_path;
  partial += ".partial";
  auto log = ResultsLog::create(partial, header);
  std::vector<json> lines;
  for (const auto& m : r.metrics) lines.push_back(m.to_json());
  for (const auto& s : r.stats) lines.push_back(s.to_json());
  log.append(lines);
  std::filesystem::rename(partial, final_path);
  r.results_file = final_path;
}

}  // namespace

AxisResult run_axis(RunContext& ctx, std::string_view axis) {
  if (!is_axis(axis)) throw ConfigError(fmt::format("unknown axis '{}'", axis));
  AxisResult r;
  r.axis = axis;
  const ClipManifest eval = ctx.subset(axis, &r.warnings);
  r.clips = eval.size();
  if (axis == "discriminability") run_discriminability(ctx, eval, r);
  else if (axis == "corruption") run_corruption(ctx, eval, r);
  else if (axis == "occlusion") run_occlusion(ctx, eval, r);
  else if (axis == "temporal") run_temporal(ctx, eval, r);
  else run_pretend(ctx, eval, r);
  write_results(ctx, r, eval);
  return r;
}

RunSummary run_axes(RunContext& ctx, const std::vector<std::string>& axes) {
  for (const auto& a : axes) {
    if (!is_axis(a)) throw ConfigError(fmt::format("unknown axis '{}'", a));
  }
  RunSummary s;
  for (const auto& a : axes) {
    try {
      s.completed.push_back(run_axis(ctx, a));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      s.failed[a] = e.what();
    }
  }
  return s;
}

}  // namespace vrh

// Command line front end for the evaluation harness.
#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <iostream>

#include "vrh/common.hpp"
#include "vrh/config.hpp"
#include "vrh/pipeline.hpp"
#include "vrh/report.hpp"
#include "vrh/synthetic.hpp"
#include "vrh/tables.hpp"

#ifdef VRH_HAVE_MEDIA
#include "vrh/media.hpp"
#endif

namespace {

using nlohmann::json;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitPartial = 4;

struct Globals {
  std::string config;
  std::vector<std::string> sets;
};

vrh::ExperimentConfig load(const Globals& g) {
  std::optional<std::filesystem::path> file;
  if (!g.config.empty()) file = g.config;
  return vrh::load_config(file, g.sets);
}

void print_warnings(const std::vector<std::string>& ws) {
  for (const auto& w : ws) fmt::print(stderr, "warning: {}\n", w);
}

void write_run_stats(vrh::RunContext& ctx, const vrh::RunSummary* summary) {
  json j = {{"encode_calls", ctx.counters().encode_calls.load()},
            {"cache_hits", ctx.counters().cache_hits.load()},
            {"audited", ctx.counters().audited.load()}};
  if (summary) {
    j["completed"] = json::array();
    for (const auto& r : summary->completed) j["completed"].push_back(r.axis);
    j["failed"] = summary->failed;
  }
  vrh::atomic_write(ctx.output_dir() / "logs" / "run_stats.json", j.dump(2) + "\n");
  fmt::print("encode calls: {}, cache hits: {}, audited: {}\n", j["encode_calls"].get<std::size_t>(),
             j["cache_hits"].get<std::size_t>(), j["audited"].get<std::size_t>());
}

int evaluate(vrh::RunContext& ctx, const std::vector<std::string>& axes) {
  vrh::write_resolved_config(ctx.output_dir(), ctx.config());
  const auto summary = vrh::run_axes(ctx, axes);
  for (const auto& r : summary.completed) {
    print_warnings(r.warnings);
    fmt::print("{}: {} clips, {} metrics, {} stats -> {}\n", r.axis, r.clips, r.metrics.size(), r.stats.size(),
               r.results_file.string());
  }
  for (const auto& [axis, msg] : summary.failed) fmt::print(stderr, "error: axis {} failed: {}\n", axis, msg);
  write_run_stats(ctx, &summary);
  return summary.failed.empty() ? 0 : kExitPartial;
}

int report(const std::filesystem::path& results, const std::filesystem::path& out, double alpha,
           const vrh::LabelTable* labels, bool plots) {
  const auto s = vrh::write_report(results, out, alpha, labels);
  print_warnings(s.warnings);
  fmt::print("report: {} tables in {}\n", s.tables.size(), out.string());
#ifdef VRH_HAVE_MEDIA
  if (plots) fmt::print("plots: {} images\n", vrh::render_plots(out).size());
#else
  if (plots) fmt::print("plots: skipped (built without OpenCV); plot_data.json has the series\n");
#endif
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
#ifdef VRH_HAVE_MEDIA
  vrh::register_media_decoders();
#endif
  CLI::App app{"Robustness evaluation harness for frozen video encoders"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("-c,--config", g.config, "JSON experiment config");
  app.add_option("--set", g.sets, "Override a config key: a.b=value (repeatable)");

  auto* ingest = app.add_subcommand("ingest", "Validate the manifest and labels; record the dataset hash");

  std::string axis;
  std::string out;
  auto* subset = app.add_subcommand("subset", "Materialise an axis subset as a manifest");
  subset->add_option("--axis", axis, "Axis name")->required();
  subset->add_option("-o,--out", out, "Output manifest (default <output_dir>/subsets/<axis>.tsv)");

  std::string clip_id, pert_key;
  auto* preview = app.add_subcommand("perturb-preview", "Apply one perturbation to one clip and save it");
  preview->add_option("--clip", clip_id, "Clip id")->required();
  preview->add_option("--perturbation", pert_key, "Perturbation key family:condition:severity:seed")->required();
  preview->add_option("-o,--out", out, "Output directory (default <output_dir>/preview)");

  std::vector<std::string> axes;
  auto* extract = app.add_subcommand("extract", "Encode axis subsets and grids into the cache");
  extract->add_option("--axis", axes, "Axes (default: config axes)");

  std::string kind;
  auto* train = app.add_subcommand("train-probe", "Train the probe of an axis on clean training clips");
  train->add_option("--axis", axis, "Axis name")->required();
  train->add_option("--kind", kind, "attentive, linear or knn (default: config)");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Run axes and write results/<axis>.jsonl");
  evaluate_cmd->add_option("--axis", axes, "Axes (default: config axes)");

  std::string metric = "rsi", enc_a, enc_b, results_dir;
  auto* analyze = app.add_subcommand("analyze", "One-sided Wilcoxon test between two encoders over result cells");
  analyze->add_option("--axis", axis, "Axis")->default_val("occlusion");
  analyze->add_option("--metric", metric, "Metric")->default_val("rsi");
  analyze->add_option("--encoder", enc_a, "Encoder expected to score higher")->required();
  analyze->add_option("--versus", enc_b, "Comparison encoder")->required();
  analyze->add_option("--results", results_dir, "Results directory (default <output_dir>/results)");

  bool no_plots = false;
  auto* report_cmd = app.add_subcommand("report", "Emit tables and plot data from results");
  report_cmd->add_option("--results", results_dir, "Results directory (default <output_dir>/results)");
  report_cmd->add_option("-o,--out", out, "Report directory (default <output_dir>/report)");
  report_cmd->add_flag("--no-plots", no_plots, "Skip PNG rendering");

  auto* encoders = app.add_subcommand("encoders", "Encoder registry");
  auto* enc_list = encoders->add_subcommand("list", "List registered encoder adapters");
  encoders->require_subcommand(1);

  vrh::SyntheticOptions so;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Write a synthetic moving-square dataset");
  synth->add_option("-o,--out", synth_out, "Output directory")->required();
  synth->add_option("--classes", so.classes, "Class labels or ids");
  synth->add_option("--test-per-class", so.test_per_class);
  synth->add_option("--train-per-class", so.train_per_class);
  synth->add_option("--val-per-class", so.val_per_class);
  synth->add_option("--frames", so.frames);
  synth->add_option("--height", so.height);
  synth->add_option("--width", so.width);
  synth->add_option("--seed", so.seed);

  auto* run = app.add_subcommand("run", "evaluate every config axis, then report");
  run->add_flag("--no-plots", no_plots, "Skip PNG rendering");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*enc_list) {
      if (!g.config.empty() || !g.sets.empty()) {
        for (const auto& p : load(g).plugins) vrh::EncoderRegistry::instance().load_plugin(p);
      }
      for (const auto& [name, desc] : vrh::EncoderRegistry::instance().list()) fmt::print("{}\t{}\n", name, desc);
      return 0;
    }
    if (*synth) {
      const auto ds = vrh::write_synthetic_dataset(synth_out, so);
      fmt::print("wrote {} clips; manifest {}, labels {}\n", ds.manifest.size(), ds.manifest_path.string(),
                 ds.labels_path.string());
      return 0;
    }

    const auto config = load(g);
    if (*analyze) {
      const std::filesystem::path dir =
          results_dir.empty() ? std::filesystem::path(config.output_dir) / "results" : std::filesystem::path(results_dir);
      const auto rs = vrh::load_results(dir);
      auto it = rs.metrics.find(axis);
      if (it == rs.metrics.end()) throw vrh::DataError(fmt::format("no results for axis '{}' in {}", axis, dir.string()));
      const auto pa = vrh::pivot(it->second, metric, "condition", "severity", {{"encoder", enc_a}});
      const auto pb = vrh::pivot(it->second, metric, "condition", "severity", {{"encoder", enc_b}});
      std::vector<std::string> warnings;
      const auto diffs = vrh::paired_cell_diffs(pa, pb, &warnings);
      print_warnings(warnings);
      if (diffs.empty()) throw vrh::DataError("no matched cells between the two encoders");
      auto s = vrh::wilcoxon_one_sided(diffs);
      s.group = {{"encoder", enc_a}, {"versus", enc_b}, {"axis", axis}, {"metric", metric}};
      auto j = s.to_json();
      j["significant"] = s.n > 0 && s.p_value < config.alpha;
      j["alpha"] = config.alpha;
      fmt::print("{}\n", j.dump(2));
      return 0;
    }
    if (*report_cmd) {
      const std::filesystem::path dir =
          results_dir.empty() ? std::filesystem::path(config.output_dir) / "results" : std::filesystem::path(results_dir);
      const std::filesystem::path o = out.empty() ? std::filesystem::path(config.output_dir) / "report" : std::filesystem::path(out);
      std::optional<vrh::LabelTable> labels;
      if (!config.dataset.labels.empty()) labels = vrh::LabelTable::load(config.dataset.labels);
      return report(dir, o, config.alpha, labels ? &*labels : nullptr, !no_plots);
    }

    vrh::RunContext ctx(config);
    if (*ingest) {
      const auto& m = ctx.manifest();
      json j = {{"dataset_hash", ctx.dataset_hash()},
                {"clips", m.size()},
                {"classes", m.classes().size()},
                {"labels", ctx.labels().size()},
                {"splits", json::object()}};
      for (auto s : {vrh::Split::Train, vrh::Split::Val, vrh::Split::Test}) {
        j["splits"][std::string(vrh::to_string(s))] = m.filter_split(s).size();
      }
      print_warnings(ctx.taxonomy().warnings);
      vrh::atomic_write(ctx.output_dir() / "dataset.json", j.dump(2) + "\n");
      fmt::print("{}\n", j.dump(2));
      return 0;
    }
    if (*subset) {
      std::vector<std::string> warnings;
      const auto m = ctx.subset(axis, &warnings);
      print_warnings(warnings);
      const std::filesystem::path o =
          out.empty() ? ctx.output_dir() / "subsets" / (axis + ".tsv") : std::filesystem::path(out);
      vrh::atomic_write(o, vrh::format_manifest(m));
      fmt::print("{}: {} clips over {} classes -> {}\n", axis, m.size(), m.classes().size(), o.string());
      return 0;
    }
    if (*preview) {
      const auto& entries = ctx.manifest().entries;
      auto e = std::find_if(entries.begin(), entries.end(), [&](const auto& x) { return x.clip_id == clip_id; });
      if (e == entries.end()) throw vrh::DataError(fmt::format("clip '{}' is not in the manifest", clip_id));
      const auto spec = vrh::PerturbationSpec::parse_key(pert_key);
      const auto clip = vrh::apply_perturbation(ctx.load(*e), spec);
      const std::filesystem::path o = out.empty() ? ctx.output_dir() / "preview" : std::filesystem::path(out);
      const auto stem = vrh::encode_path_component(clip_id) + "__" + vrh::encode_path_component(spec.key());
      std::filesystem::create_directories(o);
      vrh::write_raw_clip(o / (stem + ".vrhclip"), clip);
#ifdef VRH_HAVE_MEDIA
      for (int t = 0; t < clip.frames; ++t) vrh::write_frame_png(o / stem / fmt::format("{:03d}.png", t), clip, t);
#endif
      fmt::print("wrote {}\n", (o / stem).string());
      return 0;
    }
    if (*extract) {
      if (axes.empty()) axes = config.axes;
      for (const auto& a : axes) {
        std::vector<std::string> warnings;
        const auto m = ctx.subset(a, &warnings);
        print_warnings(warnings);
        auto specs = vrh::axis_grid(config, a);
        specs.insert(specs.begin(), vrh::PerturbationSpec::clean());
        for (const auto& enc : ctx.encoders()) {
          ctx.embed(enc, m, specs);
          const auto train_clips = ctx.training_clips(m, vrh::Split::Train);
          ctx.embed(enc, train_clips, {vrh::PerturbationSpec::clean()});
        }
        fmt::print("{}: {} clips x {} conditions x {} encoders\n", a, m.size(), specs.size(), ctx.encoders().size());
      }
      write_run_stats(ctx, nullptr);
      return 0;
    }
    if (*train) {
      std::vector<std::string> warnings;
      const auto m = ctx.subset(axis, &warnings);
      auto cfg = config.probe;
      if (!kind.empty()) cfg.kind = vrh::parse_probe_kind(kind);
      for (const auto& enc : ctx.encoders()) {
        const auto probe = vrh::fit_axis_probe(ctx, enc, axis, m, cfg, warnings);
        const auto& c = probe->curve;
        fmt::print("{} {} probe: state {} final train loss {} accuracy {}\n", enc.id(), vrh::to_string(cfg.kind),
                   probe->state_hash(), c.loss.empty() ? "n/a" : vrh::format_number(c.loss.back()),
                   c.accuracy.empty() ? "n/a" : vrh::format_number(c.accuracy.back()));
      }
      print_warnings(warnings);
      return 0;
    }
    if (*evaluate_cmd) return evaluate(ctx, axes.empty() ? config.axes : axes);
    if (*run) {
      const int code = evaluate(ctx, config.axes);
      const auto dir = ctx.output_dir();
      try {
        report(dir / "results", dir / "report", config.alpha, &ctx.labels(), !no_plots);
      } catch (const vrh::DataError& e) {
        fmt::print(stderr, "error: report: {}\n", e.what());
        return code == 0 ? kExitData : code;
      }
      return code;
    }
  } catch (const vrh::ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kExitConfig;
  } catch (const vrh::Error& e) {
    fmt::print(stderr, "data error: {}\n", e.what());
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    fmt::print(stderr, "data error: {}\n", e.what());
    return kExitData;
  }
  return 0;
}

#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "vrh/config.hpp"
#include "vrh/dataset.hpp"
#include "vrh/encoders.hpp"
#include "vrh/metrics.hpp"
#include "vrh/perturb.hpp"
#include "vrh/probes.hpp"
#include "vrh/stats.hpp"
#include "vrh/store.hpp"
#include "vrh/taxonomy.hpp"

namespace vrh {

// Runs fn(i, worker) for i in [0, n). Every index is processed exactly once;
// callers write into slot i so the result does not depend on scheduling. The
// exception from the lowest failing index is rethrown after all workers stop.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t, int)>& fn);

std::string dataset_hash(const ClipManifest& manifest, const LabelTable& labels, std::string_view decoder, int frames);

struct EncoderHandle {
  EncoderEntry entry;
  std::shared_ptr<Encoder> encoder;
  const std::string& id() const { return encoder->spec().encoder_id; }
};

struct RunCounters {
  std::atomic<std::size_t> encode_calls{0};
  std::atomic<std::size_t> cache_hits{0};
  std::atomic<std::size_t> audited{0};
};

// Loaded dataset, taxonomy, encoders and cache for one configuration.
class RunContext {
 public:
  explicit RunContext(ExperimentConfig config);

  const ExperimentConfig& config() const { return config_; }
  const LabelTable& labels() const { return labels_; }
  const ClipManifest& manifest() const { return manifest_; }
  const ClassTaxonomy& taxonomy() const { return taxonomy_; }
  const std::string& dataset_hash() const { return dataset_hash_; }
  const std::vector<EncoderHandle>& encoders() const { return encoders_; }
  const EmbeddingStore& store() const { return store_; }
  std::filesystem::path output_dir() const { return config_.output_dir; }
  RunCounters& counters() { return counters_; }

  // Clips an axis evaluates on. Requested classes absent from the manifest
  // are dropped with a warning.
  ClipManifest subset(std::string_view axis, std::vector<std::string>* warnings = nullptr) const;
  // Training clips for a probe over the given classes.
  ClipManifest training_clips(const ClipManifest& eval, Split split) const;

  // Embeddings for every (spec, clip), cache first. result[j][i] belongs to
  // specs[j] and clips.entries[i].
  std::vector<std::vector<EmbeddingRecord>> embed(const EncoderHandle& enc, const ClipManifest& clips,
                                                  const std::vector<PerturbationSpec>& specs);

  VideoClip load(const ManifestEntry& e) const;

 private:
  ExperimentConfig config_;
  LabelTable labels_;
  ClipManifest manifest_;
  ClassTaxonomy taxonomy_;
  std::string dataset_hash_;
  std::vector<EncoderHandle> encoders_;
  EmbeddingStore store_;
  RunCounters counters_;
};

// Perturbation grid of an axis, with config overrides applied. Discriminability
// and pretend use clean clips only and return an empty grid.
std::vector<PerturbationSpec> axis_grid(const ExperimentConfig& config, std::string_view axis);

struct AxisResult {
  std::string axis;
  std::vector<MetricResult> metrics;
  std::vector<StatResult> stats;
  std::vector<std::string> warnings;
  std::filesystem::path results_file;
  std::size_t clips = 0;
};

// The probe an axis uses for accuracy, trained on clean training clips.
std::unique_ptr<Probe> fit_axis_probe(RunContext& ctx, const EncoderHandle& enc, std::string_view axis,
                                      const ClipManifest& eval, ProbeConfig cfg, std::vector<std::string>& warnings);

// subset -> perturbations -> encode -> probes -> metrics -> stats; writes
// <output_dir>/results/<axis>.jsonl. Unknown axis names are ConfigErrors.
AxisResult run_axis(RunContext& ctx, std::string_view axis);

struct RunSummary {
  std::vector<AxisResult> completed;
  // axis -> error message
  std::map<std::string, std::string> failed;
};
RunSummary run_axes(RunContext& ctx, const std::vector<std::string>& axes);

std::filesystem::path results_path(const std::filesystem::path& output_dir, std::string_view axis);

}  // namespace vrh

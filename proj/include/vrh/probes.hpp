#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "vrh/encoders.hpp"

namespace vrh {

enum class ProbeKind { Attentive, Linear, Knn };

std::string_view to_string(ProbeKind k);
ProbeKind parse_probe_kind(std::string_view s);

struct ProbeConfig {
  ProbeKind kind = ProbeKind::Attentive;
  int depth = 2;
  int heads = 8;
  double mlp_ratio = 2.0;
  int k = 5;
  std::string distance = "cosine";
  bool standardize = true;
  double lr = 1e-3;
  int epochs = 20;
  // <= 0 means full batch.
  int batch = 64;
  double weight_decay = 0.01;
  std::uint64_t seed = 42;

  nlohmann::json to_json() const;
  // Missing keys keep their defaults; unknown keys are a ConfigError.
  static ProbeConfig from_json(const nlohmann::json& j, ProbeConfig base);
  static ProbeConfig from_json(const nlohmann::json& j);
  // Throws ConfigError on out-of-range values.
  void validate() const;

  friend bool operator==(const ProbeConfig&, const ProbeConfig&) = default;
};

struct ProbePrediction {
  std::string clip_id;
  std::vector<double> logits;
  int predicted = -1;
  // Max softmax probability at temperature 1.
  double confidence = 0.0;
  std::vector<int> topk;
};

// Builds a prediction from logits: argmax (lowest index on ties), softmax
// confidence, and the `topk` highest classes.
ProbePrediction make_prediction(std::string clip_id, std::vector<double> logits, int topk = 5);
std::vector<double> softmax(const std::vector<double>& logits);

// Index 0 holds the value before the first update; entry e the value after epoch e.
struct TrainingCurve {
  std::vector<double> loss;
  std::vector<double> accuracy;
};

class Probe {
 public:
  Probe(ProbeConfig config, int num_classes, int input_dim);
  virtual ~Probe() = default;

  virtual ProbeKind kind() const = 0;
  virtual std::vector<double> logits(const EmbeddingRecord& rec) const = 0;
  // Complete learned state; hashing it identifies the probe.
  virtual std::string state_bytes() const = 0;
  virtual void load_state(std::string_view bytes) = 0;

  int num_classes() const { return classes_; }
  int input_dim() const { return dim_; }
  std::string state_hash() const;

  ProbeConfig config;
  TrainingCurve curve;
  nlohmann::json selection = nlohmann::json::object();

 protected:
  void check_input(const EmbeddingRecord& rec) const;

  int classes_;
  int dim_;
};

// Per-dimension standardisation fitted on a reference set.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const std::vector<const std::vector<float>*>& rows, bool enabled);
  std::vector<double> apply(const std::vector<float>& x) const;
};

class LinearProbe final : public Probe {
 public:
  LinearProbe(ProbeConfig config, int num_classes, int input_dim);

  ProbeKind kind() const override { return ProbeKind::Linear; }
  std::vector<double> logits(const EmbeddingRecord& rec) const override;
  std::string state_bytes() const override;
  void load_state(std::string_view bytes) override;

  Standardizer standardizer;
  // num_classes x input_dim weights followed by num_classes biases.
  std::vector<double> params;
};

class KnnProbe final : public Probe {
 public:
  KnnProbe(ProbeConfig config, int num_classes, int input_dim);

  ProbeKind kind() const override { return ProbeKind::Knn; }
  // log((votes + tie_bonus) / k) with a tiny floor; argmax follows the vote
  // and tie-break rule.
  std::vector<double> logits(const EmbeddingRecord& rec) const override;
  std::string state_bytes() const override;
  void load_state(std::string_view bytes) override;

  // Predicted class under majority vote; ties go to the class whose nearest
  // member among the k neighbours is closest, then to the lowest class id.
  int classify(const std::vector<float>& gap) const;
  // Reference indices of the k nearest neighbours, nearest first. Equal
  // similarities are ordered by reference index.
  std::vector<int> neighbours(const std::vector<float>& gap) const;

  Standardizer standardizer;
  // Standardised, unit-normalised reference vectors, row-major.
  std::vector<double> refs;
  std::vector<int> labels;

 private:
  std::vector<double> class_scores(const std::vector<float>& gap) const;
};

// Learned query cross-attending over token features:
//   depth-1 pre-norm self-attention blocks over the tokens, then
//   q <- q + MHA(q, LN(x)); q <- q + MLP(LN(q)); logits = q Wc + bc.
class AttentiveProbe final : public Probe {
 public:
  AttentiveProbe(ProbeConfig config, int num_classes, int input_dim);

  ProbeKind kind() const override { return ProbeKind::Attentive; }
  std::vector<double> logits(const EmbeddingRecord& rec) const override;
  std::string state_bytes() const override;
  void load_state(std::string_view bytes) override;

  // Mean cross-entropy over the batch; when `grad` is non-null it receives
  // d(loss)/d(params), sized like params().
  double loss_and_gradient(const std::vector<const EmbeddingRecord*>& batch, const std::vector<int>& labels,
                           std::vector<double>* grad) const;

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  // 1 for matrices that receive weight decay, 0 for biases, norms and the query.
  const std::vector<char>& decay_mask() const { return decay_mask_; }

  // Fitted over all training tokens.
  Standardizer standardizer;

  struct Impl;
  friend std::unique_ptr<AttentiveProbe> train_attentive_probe(const std::vector<EmbeddingRecord>&,
                                                               const std::vector<int>&, int, const ProbeConfig&);

 private:
  std::shared_ptr<const Impl> impl_;
  std::vector<double> params_;
  std::vector<char> decay_mask_;
};

std::unique_ptr<AttentiveProbe> train_attentive_probe(const std::vector<EmbeddingRecord>& features,
                                                      const std::vector<int>& labels, int num_classes,
                                                      const ProbeConfig& config);
std::unique_ptr<LinearProbe> train_linear_probe(const std::vector<EmbeddingRecord>& features,
                                                const std::vector<int>& labels, int num_classes,
                                                const ProbeConfig& config);
std::unique_ptr<KnnProbe> fit_knn_probe(const std::vector<EmbeddingRecord>& features, const std::vector<int>& labels,
                                        int num_classes, const ProbeConfig& config);
std::unique_ptr<Probe> train_probe(const std::vector<EmbeddingRecord>& features, const std::vector<int>& labels,
                                   int num_classes, const ProbeConfig& config);

std::vector<ProbePrediction> predict(const Probe& probe, const std::vector<EmbeddingRecord>& features, int topk = 5);
double accuracy(const std::vector<ProbePrediction>& predictions, const std::vector<int>& labels);

// {depth 1,2} x {heads 4,8} x {mlp 2,4} x {lr 1e-3,3e-4} around `base`.
std::vector<ProbeConfig> default_sweep_grid(const ProbeConfig& base);

// Trains every candidate and keeps the one with the best validation accuracy
// (first in grid order on ties). The winner's `selection` lists all candidates.
std::unique_ptr<Probe> select_probe(const std::vector<EmbeddingRecord>& train, const std::vector<int>& train_labels,
                                    const std::vector<EmbeddingRecord>& val, const std::vector<int>& val_labels,
                                    int num_classes, const std::vector<ProbeConfig>& grid);

// Binary blob at `path` plus `path`.json sidecar.
void save_probe(const std::filesystem::path& path, const Probe& probe);
std::unique_ptr<Probe> load_probe(const std::filesystem::path& path);

}  // namespace vrh

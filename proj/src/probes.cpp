#include "vrh/probes.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "train_loop.hpp"
#include "vrh/common.hpp"
#include "vrh/hashing.hpp"
#include "vrh/rng.hpp"

namespace vrh {

std::string_view to_string(ProbeKind k) {
  switch (k) {
    case ProbeKind::Attentive: return "attentive";
    case ProbeKind::Linear: return "linear";
    case ProbeKind::Knn: return "knn";
  }
  return "";
}

ProbeKind parse_probe_kind(std::string_view s) {
  if (s == "attentive") return ProbeKind::Attentive;
  if (s == "linear") return ProbeKind::Linear;
  if (s == "knn") return ProbeKind::Knn;
  throw ConfigError(fmt::format("unknown probe kind '{}' (attentive, linear, knn)", s));
}

nlohmann::json ProbeConfig::to_json() const {
  return {{"kind", to_string(kind)},
          {"depth", depth},
          {"heads", heads},
          {"mlp_ratio", mlp_ratio},
          {"k", k},
          {"distance", distance},
          {"standardize", standardize},
          {"lr", lr},
          {"epochs", epochs},
          {"batch", batch},
          {"weight_decay", weight_decay},
          {"seed", seed}};
}

ProbeConfig ProbeConfig::from_json(const nlohmann::json& j, ProbeConfig c) {
  if (j.is_null()) return c;
  if (!j.is_object()) throw ConfigError("probe config must be an object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "kind") c.kind = parse_probe_kind(v.get<std::string>());
      else if (key == "depth") c.depth = v.get<int>();
      else if (key == "heads") c.heads = v.get<int>();
      else if (key == "mlp_ratio") c.mlp_ratio = v.get<double>();
      else if (key == "k") c.k = v.get<int>();
      else if (key == "distance") c.distance = v.get<std::string>();
      else if (key == "standardize") c.standardize = v.get<bool>();
      else if (key == "lr") c.lr = v.get<double>();
      else if (key == "epochs") c.epochs = v.get<int>();
      else if (key == "batch") c.batch = v.get<int>();
      else if (key == "weight_decay") c.weight_decay = v.get<double>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else throw ConfigError(fmt::format("unknown probe config key '{}'", key));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("probe config: {}", e.what()));
  }
  c.validate();
  return c;
}

ProbeConfig ProbeConfig::from_json(const nlohmann::json& j) { return from_json(j, ProbeConfig{}); }

void ProbeConfig::validate() const {
  if (depth < 1) throw ConfigError("probe depth must be >= 1");
  if (heads < 1) throw ConfigError("probe heads must be >= 1");
  if (!(mlp_ratio > 0)) throw ConfigError("probe mlp_ratio must be > 0");
  if (k < 1) throw ConfigError("knn k must be >= 1");
  if (distance != "cosine") throw ConfigError(fmt::format("unsupported knn distance '{}'", distance));
  if (!(lr > 0) || epochs < 0 || weight_decay < 0) throw ConfigError("probe optimizer settings out of range");
}

std::vector<double> softmax(const std::vector<double>& logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) s += p[i] = std::exp(logits[i] - m);
  for (auto& v : p) v /= s;
  return p;
}

ProbePrediction make_prediction(std::string clip_id, std::vector<double> logits, int topk) {
  ProbePrediction p;
  p.clip_id = std::move(clip_id);
  std::vector<int> order(logits.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return logits[a] > logits[b]; });
  p.predicted = order.empty() ? -1 : order.front();
  const auto probs = softmax(logits);
  p.confidence = p.predicted >= 0 ? probs[p.predicted] : 0.0;
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(std::max(topk, 1))));
  p.topk = std::move(order);
  p.logits = std::move(logits);
  return p;
}

Probe::Probe(ProbeConfig cfg, int num_classes, int input_dim)
    : config(std::move(cfg)), classes_(num_classes), dim_(input_dim) {
  if (num_classes < 1 || input_dim < 1) throw ConfigError("probe needs at least one class and one input dimension");
}

std::string Probe::state_hash() const { return sha256_hex(state_bytes()); }

void Probe::check_input(const EmbeddingRecord& rec) const {
  if (rec.dim() != dim_) {
    throw DataError(fmt::format("{} probe expects dim {}, clip {} has {}", to_string(kind()), dim_, rec.clip_id,
                                rec.dim()));
  }
}

Standardizer Standardizer::fit(const std::vector<const std::vector<float>*>& rows, bool enabled) {
  Standardizer s;
  const std::size_t d = rows.empty() ? 0 : rows.front()->size();
  s.mean.assign(d, 0.0);
  s.scale.assign(d, 1.0);
  if (!enabled || rows.empty()) return s;
  for (std::size_t j = 0; j < d; ++j) {
    CompensatedSum m;
    for (const auto* r : rows) m.add((*r)[j]);
    s.mean[j] = m.value() / static_cast<double>(rows.size());
    CompensatedSum v;
    for (const auto* r : rows) {
      const double c = (*r)[j] - s.mean[j];
      v.add(c * c);
    }
    const double sd = std::sqrt(v.value() / static_cast<double>(rows.size()));
    s.scale[j] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

std::vector<double> Standardizer::apply(const std::vector<float>& x) const {
  std::vector<double> z(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) z[j] = (x[j] - mean[j]) / scale[j];
  return z;
}

namespace detail {

std::string doubles_to_bytes(const std::vector<double>& v) {
  std::string s(v.size() * sizeof(double), '\0');
  if (!v.empty()) std::memcpy(s.data(), v.data(), s.size());
  return s;
}

std::vector<double> bytes_to_doubles(std::string_view bytes) {
  if (bytes.size() % sizeof(double) != 0) throw DataError("probe state has a partial value");
  std::vector<double> v(bytes.size() / sizeof(double));
  if (!v.empty()) std::memcpy(v.data(), bytes.data(), bytes.size());
  return v;
}

void check_training_inputs(const std::vector<EmbeddingRecord>& features, const std::vector<int>& labels,
                           int num_classes) {
  if (features.empty()) throw DataError("cannot train a probe on zero clips");
  if (features.size() != labels.size()) {
    throw DataError(fmt::format("{} feature records but {} labels", features.size(), labels.size()));
  }
  const std::string& enc = features.front().encoder_id;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw DataError(fmt::format("label {} of clip {} outside the {} probe classes", labels[i],
                                  features[i].clip_id, num_classes));
    }
    if (features[i].encoder_id != enc) {
      throw DataError(fmt::format("probe training mixes encoders {} and {}", enc, features[i].encoder_id));
    }
    if (features[i].dim() != features.front().dim()) throw DataError("probe training features differ in dimension");
  }
}

TrainingCurve run_rmsprop(std::vector<double>& params, const std::vector<char>& decay, std::size_t n,
                          const ProbeConfig& cfg, const BatchFn& batch_fn, const EvalFn& eval_fn) {
  constexpr double kAlpha = 0.99;
  constexpr double kEps = 1e-8;
  TrainingCurve curve;
  auto record = [&](int epoch) {
    const auto [loss, acc] = eval_fn();
    if (!std::isfinite(loss)) {
      throw NumericError(fmt::format("non-finite training loss after epoch {} (lr {}, batch {})", epoch,
                                     format_number(cfg.lr), cfg.batch));
    }
    curve.loss.push_back(loss);
    curve.accuracy.push_back(acc);
  };
  record(0);
  const std::size_t bs = cfg.batch <= 0 ? n : std::min<std::size_t>(n, static_cast<std::size_t>(cfg.batch));
  const std::size_t per_epoch = (n + bs - 1) / bs;
  const double total = static_cast<double>(per_epoch) * cfg.epochs;
  std::vector<double> sq(params.size(), 0.0);
  std::vector<double> grad(params.size());
  std::size_t step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (bs < n) Rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch))).shuffle(order);
    for (std::size_t b = 0; b < per_epoch; ++b) {
      const std::vector<std::size_t> batch(order.begin() + b * bs, order.begin() + std::min(n, (b + 1) * bs));
      std::fill(grad.begin(), grad.end(), 0.0);
      const double loss = batch_fn(batch, grad);
      if (!std::isfinite(loss)) {
        throw NumericError(fmt::format("non-finite loss at epoch {}, batch {} (lr {}, batch size {})", epoch, b,
                                       format_number(cfg.lr), bs));
      }
      const double lr = cfg.lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * static_cast<double>(step) / total));
      for (std::size_t i = 0; i < params.size(); ++i) {
        sq[i] = kAlpha * sq[i] + (1 - kAlpha) * grad[i] * grad[i];
        if (decay[i]) params[i] -= lr * cfg.weight_decay * params[i];
        params[i] -= lr * grad[i] / (std::sqrt(sq[i]) + kEps);
      }
      ++step;
    }
    record(epoch);
  }
  return curve;
}

}  // namespace detail

// ---------------------------------------------------------------- linear

LinearProbe::LinearProbe(ProbeConfig cfg, int num_classes, int input_dim)
    : Probe(std::move(cfg), num_classes, input_dim),
      params(static_cast<std::size_t>(num_classes) * (input_dim + 1), 0.0) {
  standardizer.mean.assign(input_dim, 0.0);
  standardizer.scale.assign(input_dim, 1.0);
}

namespace {

void linear_logits(const std::vector<double>& params, const std::vector<double>& z, int classes,
                   std::vector<double>& out) {
  const std::size_t d = z.size();
  out.assign(classes, 0.0);
  for (int c = 0; c < classes; ++c) {
    const double* w = params.data() + c * d;
    double s = params[classes * d + c];
    for (std::size_t j = 0; j < d; ++j) s += w[j] * z[j];
    out[c] = s;
  }
}

double cross_entropy(const std::vector<double>& logits, int label, std::vector<double>* dlogits) {
  const auto p = softmax(logits);
  if (dlogits) {
    *dlogits = p;
    (*dlogits)[label] -= 1.0;
  }
  return -std::log(std::max(p[label], 1e-300));
}

}  // namespace

std::vector<double> LinearProbe::logits(const EmbeddingRecord& rec) const {
  check_input(rec);
  std::vector<double> out;
  linear_logits(params, standardizer.apply(rec.gap), classes_, out);
  return out;
}

std::string LinearProbe::state_bytes() const {
  return detail::doubles_to_bytes(standardizer.mean) + detail::doubles_to_bytes(standardizer.scale) +
         detail::doubles_to_bytes(params);
}

void LinearProbe::load_state(std::string_view bytes) {
  auto v = detail::bytes_to_doubles(bytes);
  const std::size_t d = dim_;
  if (v.size() != 2 * d + params.size()) throw DataError("linear probe state has the wrong size");
  standardizer.mean.assign(v.begin(), v.begin() + d);
  standardizer.scale.assign(v.begin() + d, v.begin() + 2 * d);
  params.assign(v.begin() + 2 * d, v.end());
}

std::unique_ptr<LinearProbe> train_linear_probe(const std::vector<EmbeddingRecord>& features,
                                                const std::vector<int>& labels, int num_classes,
                                                const ProbeConfig& config) {
  config.validate();
  detail::check_training_inputs(features, labels, num_classes);
  const int d = features.front().dim();
  auto probe = std::make_unique<LinearProbe>(config, num_classes, d);
  probe->config.kind = ProbeKind::Linear;
  std::vector<const std::vector<float>*> rows;
  for (const auto& f : features) rows.push_back(&f.gap);
  probe->standardizer = Standardizer::fit(rows, config.standardize);
  std::vector<std::vector<double>> z;
  for (const auto& f : features) z.push_back(probe->standardizer.apply(f.gap));

  Rng rng(mix_seed(config.seed, fnv1a("linear-init")));
  for (std::size_t i = 0; i < static_cast<std::size_t>(num_classes) * d; ++i) probe->params[i] = rng.normal() * 0.02;
  std::vector<char> decay(probe->params.size(), 0);
  std::fill(decay.begin(), decay.begin() + static_cast<std::ptrdiff_t>(num_classes) * d, 1);

  auto& params = probe->params;
  auto batch_fn = [&](const std::vector<std::size_t>& batch, std::vector<double>& grad) {
    CompensatedSum loss;
    std::vector<double> lg, dl;
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (auto i : batch) {
      linear_logits(params, z[i], num_classes, lg);
      loss.add(cross_entropy(lg, labels[i], &dl));
      for (int c = 0; c < num_classes; ++c) {
        const double g = dl[c] * inv;
        if (g == 0.0) continue;
        double* gw = grad.data() + static_cast<std::size_t>(c) * d;
        for (int j = 0; j < d; ++j) gw[j] += g * z[i][j];
        grad[static_cast<std::size_t>(num_classes) * d + c] += g;
      }
    }
    return loss.value() * inv;
  };
  auto eval_fn = [&]() {
    CompensatedSum loss;
    std::size_t correct = 0;
    std::vector<double> lg;
    for (std::size_t i = 0; i < z.size(); ++i) {
      linear_logits(params, z[i], num_classes, lg);
      loss.add(cross_entropy(lg, labels[i], nullptr));
      if (make_prediction("", lg, 1).predicted == labels[i]) ++correct;
    }
    return std::pair{loss.value() / z.size(), static_cast<double>(correct) / z.size()};
  };
  probe->curve = detail::run_rmsprop(params, decay, z.size(), config, batch_fn, eval_fn);
  return probe;
}

// ---------------------------------------------------------------- kNN

KnnProbe::KnnProbe(ProbeConfig cfg, int num_classes, int input_dim) : Probe(std::move(cfg), num_classes, input_dim) {
  standardizer.mean.assign(input_dim, 0.0);
  standardizer.scale.assign(input_dim, 1.0);
}

namespace {

struct Neighbour {
  int index;
  double sim;
};

}  // namespace

static std::vector<Neighbour> nearest(const KnnProbe& p, const std::vector<float>& gap) {
  const std::size_t d = p.input_dim();
  const std::size_t n = p.labels.size();
  const auto z = p.standardizer.apply(gap);
  double norm = 0;
  for (double v : z) norm += v * v;
  norm = std::sqrt(norm);
  std::vector<Neighbour> all(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    if (norm > 1e-12) {
      const double* r = p.refs.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) s += r[j] * z[j];
      s /= norm;
    }
    all[i] = {static_cast<int>(i), s};
  }
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(p.config.k), n);
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(),
                    [](const Neighbour& a, const Neighbour& b) { return a.sim != b.sim ? a.sim > b.sim : a.index < b.index; });
  all.resize(k);
  return all;
}

std::vector<int> KnnProbe::neighbours(const std::vector<float>& gap) const {
  std::vector<int> out;
  for (const auto& nb : nearest(*this, gap)) out.push_back(nb.index);
  return out;
}

std::vector<double> KnnProbe::class_scores(const std::vector<float>& gap) const {
  const auto nb = nearest(*this, gap);
  std::vector<int> votes(classes_, 0);
  std::vector<double> best_sim(classes_, -2.0);
  for (const auto& n : nb) {
    const int c = labels[n.index];
    ++votes[c];
    best_sim[c] = std::max(best_sim[c], n.sim);
  }
  std::vector<int> voted;
  for (int c = 0; c < classes_; ++c) {
    if (votes[c] > 0) voted.push_back(c);
  }
  // Already in class-id order, so the stable sort leaves the lowest id first on full ties.
  std::stable_sort(voted.begin(), voted.end(), [&](int a, int b) {
    if (votes[a] != votes[b]) return votes[a] > votes[b];
    return best_sim[a] > best_sim[b];
  });
  std::vector<double> scores(classes_, 0.0);
  const double m = static_cast<double>(voted.size());
  for (std::size_t pos = 0; pos < voted.size(); ++pos) {
    scores[voted[pos]] = votes[voted[pos]] + 1e-6 * (m - static_cast<double>(pos)) / (m + 1.0);
  }
  return scores;
}

std::vector<double> KnnProbe::logits(const EmbeddingRecord& rec) const {
  check_input(rec);
  const auto scores = class_scores(rec.gap);
  const double k = static_cast<double>(std::min<std::size_t>(config.k, labels.size()));
  std::vector<double> out(scores.size());
  for (std::size_t c = 0; c < scores.size(); ++c) out[c] = std::log(std::max(scores[c], 1e-9) / k);
  return out;
}

int KnnProbe::classify(const std::vector<float>& gap) const {
  const auto s = class_scores(gap);
  return static_cast<int>(std::max_element(s.begin(), s.end()) - s.begin());
}

std::string KnnProbe::state_bytes() const {
  std::vector<double> lab(labels.begin(), labels.end());
  return detail::doubles_to_bytes(standardizer.mean) + detail::doubles_to_bytes(standardizer.scale) +
         detail::doubles_to_bytes(lab) + detail::doubles_to_bytes(refs);
}

void KnnProbe::load_state(std::string_view bytes) {
  auto v = detail::bytes_to_doubles(bytes);
  const std::size_t d = dim_;
  if (v.size() < 2 * d || (v.size() - 2 * d) % (d + 1) != 0) throw DataError("knn probe state has the wrong size");
  const std::size_t n = (v.size() - 2 * d) / (d + 1);
  standardizer.mean.assign(v.begin(), v.begin() + d);
  standardizer.scale.assign(v.begin() + d, v.begin() + 2 * d);
  labels.assign(v.begin() + 2 * d, v.begin() + 2 * d + n);
  refs.assign(v.begin() + 2 * d + n, v.end());
}

std::unique_ptr<KnnProbe> fit_knn_probe(const std::vector<EmbeddingRecord>& features, const std::vector<int>& labels,
                                        int num_classes, const ProbeConfig& config) {
  config.validate();
  detail::check_training_inputs(features, labels, num_classes);
  if (static_cast<std::size_t>(config.k) > features.size()) {
    throw DataError(fmt::format("knn k={} exceeds the {} reference clips", config.k, features.size()));
  }
  const int d = features.front().dim();
  auto probe = std::make_unique<KnnProbe>(config, num_classes, d);
  probe->config.kind = ProbeKind::Knn;
  std::vector<const std::vector<float>*> rows;
  for (const auto& f : features) rows.push_back(&f.gap);
  probe->standardizer = Standardizer::fit(rows, config.standardize);
  probe->labels = labels;
  probe->refs.reserve(features.size() * d);
  for (const auto& f : features) {
    auto z = probe->standardizer.apply(f.gap);
    double norm = 0;
    for (double v : z) norm += v * v;
    norm = std::sqrt(norm);
    for (double v : z) probe->refs.push_back(norm > 1e-12 ? v / norm : 0.0);
  }
  const auto preds = predict(*probe, features, 1);
  const double acc = accuracy(preds, labels);
  probe->curve.accuracy = {acc};
  return probe;
}

// ---------------------------------------------------------------- shared

std::unique_ptr<Probe> train_probe(const std::vector<EmbeddingRecord>& features, const std::vector<int>& labels,
                                   int num_classes, const ProbeConfig& config) {
  switch (config.kind) {
    case ProbeKind::Attentive: return train_attentive_probe(features, labels, num_classes, config);
    case ProbeKind::Linear: return train_linear_probe(features, labels, num_classes, config);
    case ProbeKind::Knn: return fit_knn_probe(features, labels, num_classes, config);
  }
  throw ConfigError("unknown probe kind");
}

std::vector<ProbePrediction> predict(const Probe& probe, const std::vector<EmbeddingRecord>& features, int topk) {
  std::vector<ProbePrediction> out;
  out.reserve(features.size());
  for (const auto& f : features) out.push_back(make_prediction(f.clip_id, probe.logits(f), topk));
  return out;
}

double accuracy(const std::vector<ProbePrediction>& predictions, const std::vector<int>& labels) {
  if (predictions.size() != labels.size()) throw DataError("predictions and labels differ in length");
  if (predictions.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predictions[i].predicted == labels[i];
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

std::vector<ProbeConfig> default_sweep_grid(const ProbeConfig& base) {
  std::vector<ProbeConfig> grid;
  for (int depth : {1, 2}) {
    for (int heads : {4, 8}) {
      for (double mlp : {2.0, 4.0}) {
        for (double lr : {1e-3, 3e-4}) {
          ProbeConfig c = base;
          c.depth = depth;
          c.heads = heads;
          c.mlp_ratio = mlp;
          c.lr = lr;
          grid.push_back(c);
        }
      }
    }
  }
  return grid;
}

std::unique_ptr<Probe> select_probe(const std::vector<EmbeddingRecord>& train, const std::vector<int>& train_labels,
                                    const std::vector<EmbeddingRecord>& val, const std::vector<int>& val_labels,
                                    int num_classes, const std::vector<ProbeConfig>& grid) {
  if (grid.empty()) throw ConfigError("probe sweep grid is empty");
  std::unique_ptr<Probe> best;
  double best_acc = -1;
  std::size_t best_index = 0;
  nlohmann::json candidates = nlohmann::json::array();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    auto p = train_probe(train, train_labels, num_classes, grid[i]);
    const double acc = accuracy(predict(*p, val, 1), val_labels);
    candidates.push_back({{"config", grid[i].to_json()}, {"val_accuracy", acc}});
    if (acc > best_acc) {
      best_acc = acc;
      best_index = i;
      best = std::move(p);
    }
  }
  best->selection = {{"criterion", "clean validation accuracy"},
                     {"selected", best_index},
                     {"val_accuracy", best_acc},
                     {"candidates", candidates}};
  return best;
}

// ---------------------------------------------------------------- checkpoints

namespace {

constexpr std::string_view kProbeMagic = "VRHPROBE";

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".json";
  return p;
}

std::unique_ptr<Probe> make_empty_probe(ProbeKind kind, const ProbeConfig& cfg, int classes, int dim) {
  switch (kind) {
    case ProbeKind::Attentive: return std::make_unique<AttentiveProbe>(cfg, classes, dim);
    case ProbeKind::Linear: return std::make_unique<LinearProbe>(cfg, classes, dim);
    case ProbeKind::Knn: return std::make_unique<KnnProbe>(cfg, classes, dim);
  }
  throw DataError("unknown probe kind");
}

}  // namespace

void save_probe(const std::filesystem::path& path, const Probe& probe) {
  const std::string state = probe.state_bytes();
  const std::string hash = sha256_hex(state);
  nlohmann::json header = {{"kind", to_string(probe.kind())},
                           {"num_classes", probe.num_classes()},
                           {"input_dim", probe.input_dim()},
                           {"config", probe.config.to_json()},
                           {"state_bytes", state.size()},
                           {"state_sha256", hash}};
  atomic_write(path, std::string(kProbeMagic) + "\n" + header.dump() + "\n" + state);
  nlohmann::json side = {{"kind", to_string(probe.kind())},
                         {"harness_version", kHarnessVersion},
                         {"config", probe.config.to_json()},
                         {"seed", probe.config.seed},
                         {"num_classes", probe.num_classes()},
                         {"input_dim", probe.input_dim()},
                         {"training_curve", {{"loss", probe.curve.loss}, {"accuracy", probe.curve.accuracy}}},
                         {"selection", probe.selection},
                         {"state_sha256", hash}};
  atomic_write(sidecar_path(path), side.dump(2) + "\n");
}

std::unique_ptr<Probe> load_probe(const std::filesystem::path& path) {
  const std::string blob = read_file(path);
  const auto nl1 = blob.find('\n');
  if (nl1 == std::string::npos || std::string_view(blob).substr(0, nl1) != kProbeMagic) {
    throw DataError(fmt::format("{} is not a probe checkpoint", path.string()));
  }
  const auto nl2 = blob.find('\n', nl1 + 1);
  if (nl2 == std::string::npos) throw DataError(fmt::format("{}: truncated probe header", path.string()));
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(blob.substr(nl1 + 1, nl2 - nl1 - 1));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("{}: bad probe header: {}", path.string(), e.what()));
  }
  const std::string_view state = std::string_view(blob).substr(nl2 + 1);
  if (state.size() != header.value("state_bytes", std::size_t{0}) ||
      sha256_hex(state) != header.value("state_sha256", "")) {
    throw DataError(fmt::format("{}: probe state checksum mismatch", path.string()));
  }
  const auto cfg = ProbeConfig::from_json(header.at("config"));
  auto probe = make_empty_probe(parse_probe_kind(header.value("kind", "")), cfg, header.value("num_classes", 0),
                                header.value("input_dim", 0));
  probe->load_state(state);
  const auto side = sidecar_path(path);
  if (std::filesystem::exists(side)) {
    const auto j = nlohmann::json::parse(read_file(side));
    probe->curve.loss = j["training_curve"].value("loss", std::vector<double>{});
    probe->curve.accuracy = j["training_curve"].value("accuracy", std::vector<double>{});
    probe->selection = j.value("selection", nlohmann::json::object());
  }
  return probe;
}

}  // namespace vrh

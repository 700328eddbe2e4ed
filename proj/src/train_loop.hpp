#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "vrh/probes.hpp"

namespace vrh::detail {

// Mean loss of the batch; writes the mean gradient into `grad` (pre-sized, zeroed).
using BatchFn = std::function<double(const std::vector<std::size_t>& batch, std::vector<double>& grad)>;
// Full training-set (loss, accuracy).
using EvalFn = std::function<std::pair<double, double>()>;

// RMSProp (alpha 0.99, eps 1e-8, no momentum) with a cosine-decayed step
// size and decoupled weight decay on entries where `decay` is non-zero.
TrainingCurve run_rmsprop(std::vector<double>& params, const std::vector<char>& decay, std::size_t n,
                          const ProbeConfig& cfg, const BatchFn& batch_fn, const EvalFn& eval_fn);

void check_training_inputs(const std::vector<EmbeddingRecord>& features, const std::vector<int>& labels,
                           int num_classes);

std::string doubles_to_bytes(const std::vector<double>& v);
std::vector<double> bytes_to_doubles(std::string_view bytes);

}  // namespace vrh::detail

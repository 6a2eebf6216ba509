// Copyright 2026 The tomd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include <json.hpp>

#include "tomd/error.hpp"
#include "tomd/metrics.hpp"
#include "tomd/nn/network.hpp"
#include "tomd/nn/normalization.hpp"
#include "tomd/random.hpp"

namespace tomd::nn {

struct TrainConfig {
  double learning_rate = 0.001;
  double momentum = 0.9;
  int batch_size = 40;
  int max_steps = 1000;
  std::uint64_t seed = 42;
  double threshold = 0.5;
  int eval_every = 10;  // validation cadence in steps
  int workers = 1;
  bool standardize_inputs = true;  // fit per-channel stats on the train split

  void validate() const {
    require(learning_rate >= 0.0, ErrorCode::kInvalidArgument,
            "learning_rate must be >= 0");
    require(momentum >= 0.0 && momentum < 1.0, ErrorCode::kInvalidArgument,
            "momentum must lie in [0, 1)");
    require(batch_size >= 1 && max_steps >= 0 && eval_every >= 1,
            ErrorCode::kInvalidArgument, "batch_size / eval_every must be >= 1");
    require(threshold > 0.0 && threshold < 1.0, ErrorCode::kInvalidArgument,
            "threshold must lie in (0, 1)");
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, learning_rate,
                                                momentum, batch_size, max_steps,
                                                seed, threshold, eval_every,
                                                workers, standardize_inputs)

/// v <- mu v - lr g ; w <- w + v
template <typename T>
void sgdm_step(Parameters<T>& weights, Parameters<T>& velocity,
               const Parameters<T>& grads, T learning_rate, T momentum) {
  require(weights.same_layout(velocity) && weights.same_layout(grads),
          ErrorCode::kShapeMismatch, "optimizer state layout mismatch");
  for (std::size_t i = 0; i < weights.count(); ++i) {
    auto& w = weights.tensors()[i].data;
    auto& v = velocity.tensors()[i].data;
    const auto& g = grads.tensors()[i].data;
    for (std::size_t j = 0; j < w.size(); ++j) {
      v[j] = momentum * v[j] - learning_rate * g[j];
      w[j] += v[j];
    }
  }
}

/// Micro-averaged confusion counts of thresholded predictions.
template <typename T>
ConfusionCounts evaluate_counts(const Parameters<T>& w, const DcmConfig& cfg,
                                std::span<const LabeledSample> samples,
                                double threshold) {
  ConfusionCounts total;
  for (const auto& s : samples) {
    const Mask pred = predict_mask(network_forward(s.input, w, cfg), threshold);
    total += confusion(pred, s.mask);
  }
  return total;
}

struct TrainLogRow {
  int step = 0;
  std::optional<double> loss;  // none for the evaluation before step 1
  std::optional<double> val_iou;
};

template <typename T>
struct TrainResult {
  Parameters<T> weights;  // best validation IoU (last step without val data)
  InputNormalization normalization;  // empty unless standardize_inputs
  std::vector<TrainLogRow> log;
  double best_val_iou = -1.0;
  int best_step = 0;
};

inline void write_train_log_csv(std::ostream& out, std::span<const TrainLogRow> log) {
  out << "step,loss,val_iou\n";
  for (const auto& row : log) {
    out << row.step << ',';
    if (row.loss) out << *row.loss;
    out << ',';
    if (row.val_iou) out << *row.val_iou;
    out << '\n';
  }
}

/// Mini-batch SGD with momentum. Batches are drawn from a seeded
/// permutation that is re-drawn every epoch; the result is a function of
/// the inputs and `tc.seed` only. Samples are given unnormalised; the
/// returned normalisation must be applied to inputs at inference time.
template <typename T>
TrainResult<T> train(std::span<const LabeledSample> raw_train,
                     std::span<const LabeledSample> raw_val,
                     const TrainConfig& tc, const DcmConfig& cfg,
                     const FusionSpec& spec,
                     const std::function<void(const TrainLogRow&)>& on_log = {}) {
  tc.validate();
  cfg.validate();
  require(!raw_train.empty(), ErrorCode::kEmptyDataset, "no training samples");

  TrainResult<T> result;
  if (tc.standardize_inputs) result.normalization = fit_normalization(raw_train);
  const auto train_store = normalized(raw_train, result.normalization);
  const auto val_store = normalized(raw_val, result.normalization);
  const std::span<const LabeledSample> train_set(train_store);
  const std::span<const LabeledSample> val_set(val_store);
  Parameters<T> w = init_network<T>(cfg, spec, tc.seed);
  Parameters<T> velocity = w.zeros_like();
  std::mt19937_64 rng(tc.seed ^ 0x9e3779b97f4a7c15ULL);

  auto validate_now = [&](int step, std::optional<double> loss) {
    TrainLogRow row{step, loss, std::nullopt};
    if (!val_set.empty()) {
      const double iou =
          compute_metrics(evaluate_counts(w, cfg, val_set, tc.threshold)).iou;
      row.val_iou = iou;
      if (iou > result.best_val_iou) {
        result.best_val_iou = iou;
        result.best_step = step;
        result.weights = w;
      }
    }
    result.log.push_back(row);
    if (on_log) on_log(row);
  };

  validate_now(0, std::nullopt);
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  std::vector<const LabeledSample*> batch;
  for (int step = 1; step <= tc.max_steps; ++step) {
    batch.clear();
    while (static_cast<int>(batch.size()) < tc.batch_size) {
      if (cursor == order.size()) {
        order = random_permutation(train_set.size(), rng);
        cursor = 0;
      }
      batch.push_back(&train_set[order[cursor++]]);
      if (static_cast<int>(batch.size()) == static_cast<int>(train_set.size()) &&
          tc.batch_size > static_cast<int>(train_set.size())) {
        break;  // batch larger than the corpus: use each sample once
      }
    }
    const auto lg = loss_and_gradients<T>(
        std::span<const LabeledSample* const>(batch), w, cfg, tc.workers);
    sgdm_step(w, velocity, lg.grads, static_cast<T>(tc.learning_rate),
              static_cast<T>(tc.momentum));
    if (step % tc.eval_every == 0 || step == tc.max_steps) {
      validate_now(step, static_cast<double>(lg.loss));
    } else {
      TrainLogRow row{step, static_cast<double>(lg.loss), std::nullopt};
      result.log.push_back(row);
      if (on_log) on_log(row);
    }
  }
  if (val_set.empty()) {
    result.weights = w;
    result.best_step = tc.max_steps;
  }
  return result;
}

}  // namespace tomd::nn

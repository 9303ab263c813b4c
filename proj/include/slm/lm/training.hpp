#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "slm/embedding_io.hpp"
#include "slm/error.hpp"
#include "slm/lm/model.hpp"
#include "slm/random.hpp"

namespace slm::lm {

struct TrainResult {
  ModelParams params;
  std::vector<double> loss_trace;  // mean batch objective per epoch
  std::size_t epochs_completed = 0;
};

// Called after every epoch with (0-based global epoch, mean loss).
using EpochCallback = std::function<void(std::size_t, double)>;

/// Mini-batch gradient descent with teacher forcing on gold-ordered stories.
/// `first_epoch` continues the schedule and batch order of an earlier run.
/// The batch order of epoch e depends only on (tcfg.seed, e).
inline TrainResult train(ModelParams params, const std::vector<embedding::EmbeddedStory>& corpus,
                         const TrainingConfig& tcfg, std::size_t first_epoch = 0,
                         const EpochCallback& on_epoch = {}) {
  validate(tcfg);
  if (corpus.empty()) throw ValidationError("train: no stories");
  std::vector<Matrix> inputs;
  inputs.reserve(corpus.size());
  for (const auto& s : corpus) {
    if (s.size() < 2) {
      throw ValidationError("train: story '" + s.story_id + "' has fewer than two sentences");
    }
    inputs.push_back(prepare_inputs(s.embeddings, params.config.dim));
  }

  TrainResult result{std::move(params), {}, first_epoch};
  std::vector<std::size_t> order(inputs.size());
  std::vector<Matrix> batch;
  for (std::size_t epoch = first_epoch; epoch < first_epoch + tcfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(combine_seed(tcfg.seed, epoch));
    rng.shuffle(order);
    const double rate = tcfg.schedule.rate(tcfg.learning_rate, epoch);

    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += tcfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + tcfg.batch_size);
      batch.clear();
      for (std::size_t k = start; k < stop; ++k) batch.push_back(inputs[order[k]]);
      auto value = objective(result.params, batch, tcfg.l2);
      if (!std::isfinite(value.loss)) {
        char lr[32];
        std::snprintf(lr, sizeof lr, "%g", rate);
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch + 1) +
                              ", batch " + std::to_string(batches + 1) + " (learning rate " +
                              lr + ")");
      }
      for (auto& [name, t] : result.params.tensors) t.value -= rate * value.gradients.at(name);
      epoch_loss += value.loss;
      ++batches;
    }
    epoch_loss /= static_cast<double>(batches);
    if (!all_finite(result.params)) {
      throw DivergenceError("non-finite parameters after epoch " + std::to_string(epoch + 1));
    }
    result.loss_trace.push_back(epoch_loss);
    result.epochs_completed = epoch + 1;
    if (on_epoch) on_epoch(epoch, epoch_loss);
  }
  return result;
}

/// Mean data loss (no L2 term) over gold-ordered stories.
inline double mean_story_loss(const ModelParams& p,
                              const std::vector<embedding::EmbeddedStory>& corpus) {
  if (corpus.empty()) throw ValidationError("mean_story_loss: no stories");
  double total = 0.0;
  for (const auto& s : corpus) {
    total += loss(candidate_next(p, s), s.embeddings, p, 0.0);
  }
  return total / static_cast<double>(corpus.size());
}

}  // namespace slm::lm

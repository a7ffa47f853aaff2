#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "pstn/data/dataset.hpp"
#include "pstn/eval/metrics.hpp"
#include "pstn/model/model.hpp"

namespace pstn::model {

struct TrainOptions {
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double lr_classifier = 1e-3;
  double lr_localizer = 1e-3;
  double weight_decay = 0.01;
  bool decoupled_weight_decay = true;
  double sigma_da = 0.0;       // fixed-prior augmentation before the model
  std::size_t da_samples = 1;  // warped copies per example
  std::uint64_t seed = 0;
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double class_loss = 0.0;
  double kl = 0.0;
  double val_acc = 0.0;   // NaN without a validation set
  double val_nll = 0.0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Adam on every parameter, mini-batch by mini-batch. Deterministic for a
// fixed model seed and options. Non-finite losses or gradients raise
// NumericError naming the epoch and step.
std::vector<EpochLog> train(Model& model, const data::Dataset& train_set,
                            const data::Dataset* validation, const TrainOptions& options,
                            const EpochCallback& on_epoch = {});

struct Evaluation {
  nn::Tensor probabilities;  // [n, classes]
  std::vector<eval::PredictionRecord> records;
  eval::Summary summary;
};

struct EvalOptions {
  std::optional<std::size_t> samples;  // default s_test
  double sigma_scale = 1.0;
  std::uint64_t seed = 0;
  std::size_t batch_size = 250;
  std::size_t bins = eval::kDefaultBins;
};

Evaluation evaluate(const Model& model, const data::Dataset& dataset, const EvalOptions& options = {});

}  // namespace pstn::model

#include "pstn/model/trainer.hpp"

#include <cmath>
#include <limits>

#include "pstn/common/error.hpp"
#include "pstn/data/augment.hpp"
#include "pstn/nn/adam.hpp"

namespace pstn::model {

std::vector<EpochLog> train(Model& model, const data::Dataset& train_set,
                            const data::Dataset* validation, const TrainOptions& options,
                            const EpochCallback& on_epoch) {
  train_set.validate();
  if (train_set.item_shape() != model.spec().input_shape) {
    throw ConfigError("training data shape " + nn::to_string(train_set.item_shape()) +
                      " does not match the model input " + nn::to_string(model.spec().input_shape));
  }
  if (options.batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (options.sigma_da > 0.0 && !model.transform()) {
    throw ConfigError("sigma_da > 0 needs a transform family");
  }

  nn::AdamOptions adam{};
  adam.weight_decay = options.weight_decay;
  adam.decoupled_weight_decay = options.decoupled_weight_decay;
  adam.learning_rate = options.lr_classifier;
  nn::Adam classifier_opt(model.classifier_parameters(), adam);
  adam.learning_rate = options.lr_localizer;
  nn::Adam localizer_opt(model.localizer_parameters(), adam);

  Rng master(options.seed);
  Rng shuffle = master.split();
  Rng sampling = master.split();
  Rng augmenting = master.split();
  const data::DaSpec da{options.sigma_da, options.da_samples};

  std::vector<EpochLog> logs;
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    EpochLog log;
    log.epoch = epoch;
    double seen = 0.0;
    const auto batches = data::make_batches(train_set.size(), options.batch_size, shuffle);
    for (std::size_t step = 0; step < batches.size(); ++step) {
      data::Batch batch = train_set.gather(batches[step]);
      if (options.sigma_da > 0.0) batch = data::traditional_da(batch, *model.transform(), da, augmenting);
      model.zero_grad();
      ElboTerms terms;
      try {
        terms = model.loss_and_backward(batch.inputs, batch.labels, sampling);
        classifier_opt.step();
        if (model.has_localizer()) localizer_opt.step();
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + ", step " + std::to_string(step + 1) +
                           ": " + e.what());
      }
      const double w = static_cast<double>(batch.labels.size());
      log.class_loss += w * terms.class_loss;
      log.kl += w * terms.kl;
      seen += w;
    }
    log.class_loss /= seen;
    log.kl /= seen;
    if (validation) {
      EvalOptions eo;
      eo.seed = options.seed ^ (0x9e3779b97f4a7c15ULL * epoch);
      const Evaluation ev = evaluate(model, *validation, eo);
      log.val_acc = ev.summary.accuracy;
      log.val_nll = ev.summary.nll;
    } else {
      log.val_acc = log.val_nll = std::numeric_limits<double>::quiet_NaN();
    }
    logs.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return logs;
}

Evaluation evaluate(const Model& model, const data::Dataset& dataset, const EvalOptions& options) {
  dataset.validate();
  if (dataset.item_shape() != model.spec().input_shape) {
    throw DataError("data shape " + nn::to_string(dataset.item_shape()) +
                    " does not match the model input " + nn::to_string(model.spec().input_shape));
  }
  if (dataset.num_classes > model.spec().classes) {
    throw DataError("dataset has more classes than the model");
  }
  if (options.batch_size == 0) throw ConfigError("batch_size must be >= 1");
  const std::size_t n = dataset.size();
  const std::size_t c = model.spec().classes;
  Evaluation ev;
  ev.probabilities = nn::Tensor({n, c});
  Rng rng(options.seed);
  for (std::size_t start = 0; start < n; start += options.batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(n, start + options.batch_size); ++i) idx.push_back(i);
    const data::Batch b = dataset.gather(idx);
    const nn::Tensor p = model.predict(b.inputs, rng, options.samples, options.sigma_scale);
    std::copy(p.values().begin(), p.values().end(), ev.probabilities.values().begin() + start * c);
  }
  ev.records = eval::make_records(ev.probabilities, dataset.labels);
  ev.summary = eval::summarize(ev.records, options.bins);
  return ev;
}

}  // namespace pstn::model

#include "pstn/eval/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "pstn/common/error.hpp"

namespace pstn::eval {

PredictionRecord PredictionRecord::make(std::vector<double> probabilities, int label) {
  if (probabilities.empty()) throw DataError("prediction record needs at least one class");
  double total = 0.0;
  for (double p : probabilities) {
    if (!(p >= 0.0)) throw DataError("prediction record has a negative or NaN probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw DataError("prediction probabilities sum to " + std::to_string(total));
  }
  if (label < 0 || static_cast<std::size_t>(label) >= probabilities.size()) {
    throw DataError("label " + std::to_string(label) + " outside the class range");
  }
  PredictionRecord r;
  const auto best = std::max_element(probabilities.begin(), probabilities.end());
  r.predicted = static_cast<int>(best - probabilities.begin());
  r.confidence = *best;
  r.label = label;
  r.probabilities = std::move(probabilities);
  return r;
}

std::vector<PredictionRecord> make_records(const nn::Tensor& probabilities,
                                           std::span<const int> labels) {
  if (probabilities.rank() != 2 || probabilities.dim(0) != labels.size()) {
    throw DataError("probabilities " + nn::to_string(probabilities.shape()) + " do not match " +
                    std::to_string(labels.size()) + " labels");
  }
  std::vector<PredictionRecord> out;
  out.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::span<const Scalar> row = probabilities.slice(i);
    out.push_back(PredictionRecord::make(std::vector<double>(row.begin(), row.end()), labels[i]));
  }
  return out;
}

namespace {

void require_records(std::span<const PredictionRecord> records, const char* metric) {
  if (records.empty()) throw DataError(std::string(metric) + ": no records");
}

}  // namespace

double accuracy(std::span<const PredictionRecord> records) {
  require_records(records, "accuracy");
  std::size_t correct = 0;
  for (const auto& r : records) correct += r.predicted == r.label;
  return static_cast<double>(correct) / static_cast<double>(records.size());
}

double nll(std::span<const PredictionRecord> records) {
  require_records(records, "nll");
  double total = 0.0;
  for (const auto& r : records) {
    total -= std::log(std::max(r.probabilities[static_cast<std::size_t>(r.label)], kProbabilityFloor));
  }
  return total / static_cast<double>(records.size());
}

double mean_entropy(std::span<const PredictionRecord> records) {
  require_records(records, "mean_entropy");
  double total = 0.0;
  for (const auto& r : records) {
    for (double p : r.probabilities) {
      if (p > 0.0) total -= p * std::log(p);
    }
  }
  return total / static_cast<double>(records.size());
}

Reliability reliability(std::span<const PredictionRecord> records, std::size_t bins) {
  if (bins == 0) throw ConfigError("reliability needs at least one bin");
  Reliability out;
  out.bins.resize(bins);
  std::vector<double> conf_sum(bins, 0.0);
  std::vector<std::size_t> correct(bins, 0);
  for (std::size_t b = 0; b < bins; ++b) {
    out.bins[b].lower = static_cast<double>(b) / static_cast<double>(bins);
    out.bins[b].upper = static_cast<double>(b + 1) / static_cast<double>(bins);
  }
  for (const auto& r : records) {
    const double scaled = std::floor(r.confidence * static_cast<double>(bins));
    const std::size_t b = std::min(static_cast<std::size_t>(std::max(scaled, 0.0)), bins - 1);
    ++out.bins[b].count;
    conf_sum[b] += r.confidence;
    correct[b] += r.predicted == r.label;
  }
  const double n = static_cast<double>(records.size());
  for (std::size_t b = 0; b < bins; ++b) {
    ReliabilityBin& bin = out.bins[b];
    if (bin.count == 0) continue;
    const double count = static_cast<double>(bin.count);
    bin.mean_confidence = conf_sum[b] / count;
    bin.accuracy = static_cast<double>(correct[b]) / count;
    out.ece += count / n * std::abs(bin.accuracy - bin.mean_confidence);
  }
  return out;
}

Summary summarize(std::span<const PredictionRecord> records, std::size_t bins) {
  Summary s;
  s.accuracy = accuracy(records);
  s.nll = nll(records);
  s.mean_entropy = mean_entropy(records);
  s.reliability = reliability(records, bins);
  s.ece = s.reliability.ece;
  return s;
}

}  // namespace pstn::eval

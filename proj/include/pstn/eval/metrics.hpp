#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pstn/nn/tensor.hpp"

namespace pstn::eval {

// One classified example. Confidence is the largest class probability;
// argmax ties go to the lowest class index.
struct PredictionRecord {
  std::vector<double> probabilities;
  int predicted = 0;
  int label = 0;
  double confidence = 0.0;

  // Validates that probabilities sum to 1 within 1e-9.
  static PredictionRecord make(std::vector<double> probabilities, int label);
};

// Builds one record per row of a [n, classes] probability tensor.
std::vector<PredictionRecord> make_records(const nn::Tensor& probabilities,
                                           std::span<const int> labels);

double accuracy(std::span<const PredictionRecord> records);

inline constexpr double kProbabilityFloor = 1e-12;

// Mean -ln p(label), probabilities clamped below at 1e-12.
double nll(std::span<const PredictionRecord> records);

double mean_entropy(std::span<const PredictionRecord> records);

struct ReliabilityBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  double mean_confidence = 0.0;  // 0 for empty bins
  double accuracy = 0.0;         // 0 for empty bins
};

struct Reliability {
  std::vector<ReliabilityBin> bins;
  double ece = 0.0;
};

inline constexpr std::size_t kDefaultBins = 10;

// Equal-width confidence bins on [0, 1]; confidence c falls in bin
// min(floor(c * B), B - 1). ECE = sum_b (n_b / n) |acc_b - conf_b|.
Reliability reliability(std::span<const PredictionRecord> records, std::size_t bins = kDefaultBins);

struct Summary {
  double accuracy = 0.0;
  double nll = 0.0;
  double ece = 0.0;
  double mean_entropy = 0.0;
  Reliability reliability;
};

Summary summarize(std::span<const PredictionRecord> records, std::size_t bins = kDefaultBins);

}  // namespace pstn::eval

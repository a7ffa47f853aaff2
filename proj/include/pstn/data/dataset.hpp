#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pstn/common/rng.hpp"
#include "pstn/nn/tensor.hpp"

namespace pstn::data {

struct NormalizationStats {
  std::vector<double> mean;  // per channel
  std::vector<double> std;
};

struct Batch {
  nn::Tensor inputs;
  std::vector<int> labels;
};

// Inputs are [n, channels, spatial...]; labels are contiguous class indices.
struct Dataset {
  nn::Tensor inputs;
  std::vector<int> labels;
  std::size_t num_classes = 0;
  std::vector<std::string> class_names;  // original label text per class index
  std::optional<NormalizationStats> stats;

  std::size_t size() const { return labels.size(); }
  nn::Shape item_shape() const { return inputs.item_shape(); }
  std::size_t channels() const { return inputs.dim(1); }

  // Throws DataError when sizes or label ranges are inconsistent.
  void validate() const;

  Dataset select(std::span<const std::size_t> indices) const;
  Batch gather(std::span<const std::size_t> indices) const;
};

struct SubsetSpec {
  std::size_t size = 0;
  std::uint64_t seed = 0;
  bool balanced = true;
};

// Deterministic index set for a subset. Balanced subsets hold floor(k/C) or
// ceil(k/C) examples of every class; the result order is shuffled.
std::vector<std::size_t> subsample_indices(const Dataset& dataset, const SubsetSpec& spec);
Dataset subsample(const Dataset& dataset, const SubsetSpec& spec);

// Indices of [0, n) not in `taken`, ascending.
std::vector<std::size_t> complement(std::size_t n, std::span<const std::size_t> taken);

struct Split {
  Dataset train;
  Dataset validation;
};

// Seeded split; `train_fraction` of the examples (rounded) go to train.
Split split(const Dataset& dataset, double train_fraction, std::uint64_t seed);

NormalizationStats compute_stats(const Dataset& dataset);

// (x - mean) / std per channel. Without `stats` they are computed from
// `dataset` itself (use that for the training split and pass the result on
// for the test split). A zero std is replaced by 1 with a warning.
Dataset normalize(const Dataset& dataset, std::optional<NormalizationStats> stats = std::nullopt);

// Shuffled mini-batches of indices covering [0, n).
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, Rng& rng);

// Fisher-Yates permutation of [0, n).
std::vector<std::size_t> permutation(std::size_t n, Rng& rng);

}  // namespace pstn::data

#include "pstn/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "pstn/common/error.hpp"

namespace pstn::data {

void Dataset::validate() const {
  if (inputs.rank() < 3) {
    throw DataError("dataset inputs must be [n, channels, spatial...], got " +
                    nn::to_string(inputs.shape()));
  }
  if (inputs.dim(0) != labels.size()) {
    throw DataError("dataset has " + std::to_string(inputs.dim(0)) + " inputs but " +
                    std::to_string(labels.size()) + " labels");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw DataError("label " + std::to_string(y) + " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
}

Dataset Dataset::select(std::span<const std::size_t> indices) const {
  Dataset out;
  Batch b = gather(indices);
  out.inputs = std::move(b.inputs);
  out.labels = std::move(b.labels);
  out.num_classes = num_classes;
  out.class_names = class_names;
  out.stats = stats;
  return out;
}

Batch Dataset::gather(std::span<const std::size_t> indices) const {
  nn::Shape shape = inputs.shape();
  shape[0] = indices.size();
  Batch b{nn::Tensor(shape), {}};
  b.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= size()) throw ConfigError("dataset index out of range");
    std::span<const Scalar> src = inputs.slice(indices[i]);
    std::copy(src.begin(), src.end(), b.inputs.slice(i).begin());
    b.labels.push_back(labels[indices[i]]);
  }
  return b;
}

std::vector<std::size_t> permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.index(i)]);
  return p;
}

std::vector<std::size_t> subsample_indices(const Dataset& dataset, const SubsetSpec& spec) {
  const std::size_t n = dataset.size(), classes = dataset.num_classes;
  if (spec.size == 0 || spec.size > n) {
    throw ConfigError("subset size " + std::to_string(spec.size) + " must be in [1, " +
                      std::to_string(n) + "]");
  }
  Rng rng(spec.seed);
  if (!spec.balanced) {
    std::vector<std::size_t> p = permutation(n, rng);
    p.resize(spec.size);
    return p;
  }
  if (spec.size < classes) {
    throw ConfigError("balanced subset of " + std::to_string(spec.size) + " cannot cover " +
                      std::to_string(classes) + " classes");
  }
  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t i : permutation(n, rng)) by_class[static_cast<std::size_t>(dataset.labels[i])].push_back(i);

  // Classes receiving the extra example when k is not a multiple of C.
  const std::vector<std::size_t> class_order = permutation(classes, rng);
  const std::size_t base = spec.size / classes, extra = spec.size % classes;
  std::vector<std::size_t> chosen;
  chosen.reserve(spec.size);
  for (std::size_t r = 0; r < classes; ++r) {
    const std::size_t c = class_order[r];
    const std::size_t want = base + (r < extra ? 1 : 0);
    if (by_class[c].size() < want) {
      throw ConfigError("class " + std::to_string(c) + " has only " +
                        std::to_string(by_class[c].size()) + " examples; balanced subset needs " +
                        std::to_string(want));
    }
    chosen.insert(chosen.end(), by_class[c].begin(), by_class[c].begin() + static_cast<std::ptrdiff_t>(want));
  }
  const std::vector<std::size_t> order = permutation(chosen.size(), rng);
  std::vector<std::size_t> out;
  out.reserve(chosen.size());
  for (std::size_t i : order) out.push_back(chosen[i]);
  return out;
}

Dataset subsample(const Dataset& dataset, const SubsetSpec& spec) {
  return dataset.select(subsample_indices(dataset, spec));
}

std::vector<std::size_t> complement(std::size_t n, std::span<const std::size_t> taken) {
  std::vector<bool> used(n, false);
  for (std::size_t i : taken) used.at(i) = true;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!used[i]) out.push_back(i);
  }
  return out;
}

Split split(const Dataset& dataset, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train fraction must be in (0, 1)");
  }
  Rng rng(seed);
  std::vector<std::size_t> p = permutation(dataset.size(), rng);
  const auto cut = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(p.size())));
  if (cut == 0 || cut == p.size()) throw ConfigError("split leaves an empty side");
  std::vector<std::size_t> a(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(cut));
  std::vector<std::size_t> b(p.begin() + static_cast<std::ptrdiff_t>(cut), p.end());
  return {dataset.select(a), dataset.select(b)};
}

NormalizationStats compute_stats(const Dataset& dataset) {
  const std::size_t n = dataset.size(), channels = dataset.channels();
  const std::size_t plane = dataset.inputs.size() / (n * channels);
  NormalizationStats stats{std::vector<double>(channels, 0.0), std::vector<double>(channels, 0.0)};
  const double count = static_cast<double>(n * plane);
  for (std::size_t c = 0; c < channels; ++c) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Scalar* x = dataset.inputs.data() + (i * channels + c) * plane;
      for (std::size_t k = 0; k < plane; ++k) sum += x[k];
    }
    const double mean = sum / count;
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Scalar* x = dataset.inputs.data() + (i * channels + c) * plane;
      for (std::size_t k = 0; k < plane; ++k) sq += (x[k] - mean) * (x[k] - mean);
    }
    stats.mean[c] = mean;
    stats.std[c] = std::sqrt(sq / count);
  }
  return stats;
}

Dataset normalize(const Dataset& dataset, std::optional<NormalizationStats> stats) {
  NormalizationStats s = stats ? *stats : compute_stats(dataset);
  const std::size_t channels = dataset.channels();
  if (s.mean.size() != channels || s.std.size() != channels) {
    throw ConfigError("normalisation stats have the wrong channel count");
  }
  for (std::size_t c = 0; c < channels; ++c) {
    if (!(s.std[c] > 0.0)) {
      std::cerr << "warning: channel " << c << " has zero variance; using std = 1\n";
      s.std[c] = 1.0;
    }
  }
  Dataset out = dataset;
  const std::size_t n = dataset.size();
  const std::size_t plane = n ? dataset.inputs.size() / (n * channels) : 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      Scalar* x = out.inputs.data() + (i * channels + c) * plane;
      for (std::size_t k = 0; k < plane; ++k) {
        x[k] = static_cast<Scalar>((x[k] - s.mean[c]) / s.std[c]);
      }
    }
  }
  out.stats = s;
  return out;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, Rng& rng) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  const std::vector<std::size_t> p = permutation(n, rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    out.emplace_back(p.begin() + static_cast<std::ptrdiff_t>(start), p.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

}  // namespace pstn::data

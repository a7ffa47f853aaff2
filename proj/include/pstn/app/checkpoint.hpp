#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pstn/app/config.hpp"
#include "pstn/data/dataset.hpp"
#include "pstn/model/model.hpp"

namespace pstn::app {

// Payload element type. f64 round-trips double-precision parameters bit for
// bit; f32 halves the file for single-precision builds.
enum class Dtype { f32, f64 };
Dtype native_dtype();

// File layout: "PSTNCKPT", u32 little-endian manifest length, JSON manifest,
// then the payload (little-endian, tensors concatenated in manifest order).
// The manifest records shapes, byte offsets and an FNV-1a hash of the
// payload that load() verifies.
struct Checkpoint {
  ExperimentConfig config;
  model::ModelSpec spec;
  std::vector<std::string> class_names;
  std::optional<data::NormalizationStats> stats;
  std::unique_ptr<model::Model> model;
};

inline constexpr int kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(model::Model& model, const ExperimentConfig& config,
                                               const std::vector<std::string>& class_names,
                                               const std::optional<data::NormalizationStats>& stats,
                                               Dtype dtype = native_dtype());
// Throws DataError for corrupt or inconsistent files.
Checkpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, model::Model& model,
                     const ExperimentConfig& config, const std::vector<std::string>& class_names,
                     const std::optional<data::NormalizationStats>& stats,
                     Dtype dtype = native_dtype());
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace pstn::app

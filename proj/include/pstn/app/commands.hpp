#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pstn/app/checkpoint.hpp"
#include "pstn/app/config.hpp"
#include "pstn/data/dataset.hpp"
#include "pstn/model/trainer.hpp"

namespace pstn::app {

// Training/validation/test splits after subsetting and normalisation.
struct PreparedData {
  data::Dataset train;
  std::optional<data::Dataset> validation;
  std::optional<data::Dataset> test;
  std::optional<data::NormalizationStats> stats;
};

PreparedData prepare_data(const ExperimentConfig& config);

// "16" -> {16}, "2x2" -> {2, 2}; empty -> {}.
std::vector<std::size_t> parse_tessellation(const std::string& text);

model::ModelSpec model_spec(const ExperimentConfig& config, const data::Dataset& train);
model::TrainOptions train_options(const ExperimentConfig& config, std::size_t train_size);

struct RunResult {
  std::vector<model::EpochLog> log;
  std::optional<model::Evaluation> test;
  std::unique_ptr<model::Model> model;
  PreparedData data;
};

// Trains per the config and evaluates on the test split when one exists.
// Writes the training log CSV to `log_csv` when given.
RunResult run_experiment(const ExperimentConfig& config, std::ostream* log_csv = nullptr);

void write_train_log_header(std::ostream& out, const std::string& config_hash);
void write_train_log_row(std::ostream& out, const model::EpochLog& log);

// Verbs. Each writes into files and returns normally or throws a pstn error.
void cmd_train(const ExperimentConfig& config, std::ostream& console);

struct EvalRequest {
  std::filesystem::path checkpoint;
  std::string images, labels, series;  // empty: the checkpoint config's test split
  std::optional<std::size_t> samples;
  double sigma_scale = 1.0;
  std::uint64_t seed = 0;
  std::filesystem::path metrics = "metrics.csv";
};
eval::Summary cmd_eval(const EvalRequest& request, std::ostream& console);

struct AugmentRequest {
  std::filesystem::path checkpoint;
  std::filesystem::path input;  // IDX image file or delimited series text
  std::size_t n = 3;
  std::filesystem::path out_dir = "augmented";
  std::uint64_t seed = 0;
  double sigma_scale = 1.0;
};
// Returns the sampled thetas, one row per output.
std::vector<std::vector<double>> cmd_augment(const AugmentRequest& request, std::ostream& console);

struct SweepRequest {
  ExperimentConfig base;
  std::string param;                // any config key, e.g. sigma_p or subset
  std::vector<std::string> values;  // one aggregate row per value
  std::size_t repeats = 5;          // seeds base.seed, base.seed + 1, ...
};
void cmd_sweep(const SweepRequest& request, std::ostream& console);

// Writes the synthetic train/test split of the config to its out directory
// (IDX for images, delimited text for series).
void cmd_synth(const ExperimentConfig& config, std::ostream& console);

// Full command line entry point; returns the process exit code
// (0 ok, 2 usage/config, 3 data, 4 numeric).
int run_cli(int argc, const char* const* argv);

}  // namespace pstn::app

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace pstn::app {

// Flat run configuration. Every field has a key (same spelling on the
// command line as --key) and a canonical text form; a run is a pure function
// of the config and the dataset bytes.
struct ExperimentConfig {
  // model
  std::string variant = "pstn";   // cnn | stn | pstn
  std::string family = "affine";  // none | affine | diffeo
  double sigma_p = 0.05;
  double sigma_da = 0.0;
  double sigma_noise = 0.0;
  std::size_t s_train = 1;
  std::size_t s_test = 10;
  double kl_weight = 1.0;
  std::string tessellation;  // "16" or "2x2"; empty picks per input rank
  std::size_t integration_steps = 100;
  // data
  std::string data = "idx";  // idx | ucr | synth
  std::string train_images, train_labels, test_images, test_labels;
  std::string train_series, test_series;
  std::string synth_kind = "warped_shapes_2d";
  std::size_t synth_train = 50;
  std::size_t synth_test = 500;
  std::size_t synth_classes = 10;
  double synth_warp_scale = 0.1;
  double synth_noise = 0.0;
  std::uint64_t synth_seed = 0;
  std::size_t subset = 0;  // 0: whole training set
  bool subset_balanced = true;
  double validation_fraction = 0.0;
  std::string normalize = "auto";  // auto | true | false
  // optimisation
  std::uint64_t seed = 0;
  std::size_t epochs = 0;  // 0: 100 for subsets below 1000 examples, else 20
  std::size_t batch_size = 64;
  double lr_classifier = 1e-3;
  double lr_localizer = 1e-3;
  double weight_decay = 0.01;
  bool decoupled_weight_decay = true;
  // evaluation and output
  std::size_t bins = 10;
  std::size_t eval_batch = 250;
  std::string out = "run";
};

// Key names in canonical order.
const std::vector<std::string>& config_keys();

// Throws ConfigError naming the key for unknown keys or malformed values.
void set_field(ExperimentConfig& config, const std::string& key, const std::string& value);
std::string get_field(const ExperimentConfig& config, const std::string& key);

// "key = value" lines ('#' comments) or a flat JSON object.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

std::map<std::string, std::string> to_map(const ExperimentConfig& config);
std::string to_text(const ExperimentConfig& config);  // key = value lines

// FNV-1a over the canonical text of every key except "out", as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

std::size_t resolved_epochs(const ExperimentConfig& config, std::size_t train_size);

}  // namespace pstn::app

#include "pstn/app/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "json.hpp"

#include "pstn/common/error.hpp"
#include "pstn/eval/report.hpp"

namespace pstn::app {
namespace {

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;
using Getter = std::function<std::string(const ExperimentConfig&)>;

struct Field {
  std::string key;
  Setter set;
  Getter get;
};

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t\r\n") - first + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError("config field '" + key + "': expected " + expected + ", got '" + value + "'");
}

template <class T>
T parse_unsigned(const std::string& key, const std::string& value) {
  T out{};
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (value.empty() || res.ec != std::errc() || res.ptr != value.data() + value.size()) {
    bad_value(key, value, "a non-negative integer");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (value.empty() || res.ec != std::errc() || res.ptr != value.data() + value.size() ||
      !std::isfinite(out)) {
    bad_value(key, value, "a finite number");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value, "true or false");
}

template <class M>
Field size_field(std::string key, M ExperimentConfig::*member) {
  return {key,
          [key, member](ExperimentConfig& c, const std::string& v) {
            c.*member = parse_unsigned<M>(key, v);
          },
          [member](const ExperimentConfig& c) { return std::to_string(c.*member); }};
}

Field double_field(std::string key, double ExperimentConfig::*member) {
  return {key,
          [key, member](ExperimentConfig& c, const std::string& v) { c.*member = parse_double(key, v); },
          [member](const ExperimentConfig& c) { return eval::format_number(c.*member); }};
}

Field bool_field(std::string key, bool ExperimentConfig::*member) {
  return {key,
          [key, member](ExperimentConfig& c, const std::string& v) { c.*member = parse_bool(key, v); },
          [member](const ExperimentConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

Field string_field(std::string key, std::string ExperimentConfig::*member,
                   std::vector<std::string> allowed = {}) {
  return {key,
          [key, member, allowed](ExperimentConfig& c, const std::string& v) {
            if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
              std::string list;
              for (const auto& a : allowed) list += (list.empty() ? "" : " | ") + a;
              bad_value(key, v, list.c_str());
            }
            c.*member = v;
          },
          [member](const ExperimentConfig& c) { return c.*member; }};
}

const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  static const std::vector<Field> table = {
      string_field("variant", &C::variant, {"cnn", "stn", "pstn"}),
      string_field("family", &C::family, {"none", "affine", "diffeo"}),
      double_field("sigma_p", &C::sigma_p),
      double_field("sigma_da", &C::sigma_da),
      double_field("sigma_noise", &C::sigma_noise),
      size_field("s_train", &C::s_train),
      size_field("s_test", &C::s_test),
      double_field("kl_weight", &C::kl_weight),
      string_field("tessellation", &C::tessellation),
      size_field("integration_steps", &C::integration_steps),
      string_field("data", &C::data, {"idx", "ucr", "synth"}),
      string_field("train_images", &C::train_images),
      string_field("train_labels", &C::train_labels),
      string_field("test_images", &C::test_images),
      string_field("test_labels", &C::test_labels),
      string_field("train_series", &C::train_series),
      string_field("test_series", &C::test_series),
      string_field("synth_kind", &C::synth_kind, {"warped_shapes_2d", "warped_series_1d"}),
      size_field("synth_train", &C::synth_train),
      size_field("synth_test", &C::synth_test),
      size_field("synth_classes", &C::synth_classes),
      double_field("synth_warp_scale", &C::synth_warp_scale),
      double_field("synth_noise", &C::synth_noise),
      size_field("synth_seed", &C::synth_seed),
      size_field("subset", &C::subset),
      bool_field("subset_balanced", &C::subset_balanced),
      double_field("validation_fraction", &C::validation_fraction),
      string_field("normalize", &C::normalize, {"auto", "true", "false"}),
      size_field("seed", &C::seed),
      size_field("epochs", &C::epochs),
      size_field("batch_size", &C::batch_size),
      double_field("lr_classifier", &C::lr_classifier),
      double_field("lr_localizer", &C::lr_localizer),
      double_field("weight_decay", &C::weight_decay),
      bool_field("decoupled_weight_decay", &C::decoupled_weight_decay),
      size_field("bins", &C::bins),
      size_field("eval_batch", &C::eval_batch),
      string_field("out", &C::out),
  };
  return table;
}

const Field& find(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return f;
  }
  throw ConfigError("unknown config field '" + key + "'");
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void set_field(ExperimentConfig& config, const std::string& key, const std::string& value) {
  find(key).set(config, trim(value));
}

std::string get_field(const ExperimentConfig& config, const std::string& key) {
  return find(key).get(config);
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig config;
  const std::string body = trim(text);
  if (!body.empty() && body.front() == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("config JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config JSON must be an object");
    for (const auto& [key, value] : j.items()) {
      if (value.is_string()) {
        set_field(config, key, value.get<std::string>());
      } else if (value.is_number_unsigned() || value.is_number_integer()) {
        set_field(config, key, value.dump());
      } else if (value.is_number_float()) {
        set_field(config, key, eval::format_number(value.get<double>()));
      } else if (value.is_boolean()) {
        set_field(config, key, value.get<bool>() ? "true" : "false");
      } else {
        throw ConfigError("config field '" + key + "' must be a scalar");
      }
    }
    return config;
  }
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    set_field(config, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::map<std::string, std::string> to_map(const ExperimentConfig& config) {
  std::map<std::string, std::string> m;
  for (const auto& f : fields()) m[f.key] = f.get(config);
  return m;
}

std::string to_text(const ExperimentConfig& config) {
  std::string s;
  for (const auto& f : fields()) s += f.key + " = " + f.get(config) + "\n";
  return s;
}

std::string config_hash(const ExperimentConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& f : fields()) {
    if (f.key == "out") continue;
    for (unsigned char ch : f.key + "=" + f.get(config) + "\n") {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::size_t resolved_epochs(const ExperimentConfig& config, std::size_t train_size) {
  if (config.epochs) return config.epochs;
  return train_size >= 1000 ? 20 : 100;
}

}  // namespace pstn::app

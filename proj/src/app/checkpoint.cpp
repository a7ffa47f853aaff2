#include "pstn/app/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"
#include "pstn/common/error.hpp"

namespace pstn::app {
namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'P', 'S', 'T', 'N', 'C', 'K', 'P', 'T'};

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

template <class U>
void put_le(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t b = 0; b < sizeof(U); ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

template <class U>
U get_le(const std::uint8_t* p) {
  U v = 0;
  for (std::size_t b = 0; b < sizeof(U); ++b) v |= static_cast<U>(p[b]) << (8 * b);
  return v;
}

json net_json(const model::NetSpec& n) {
  return {{"conv_channels", n.conv_channels}, {"kernel", n.kernel}, {"pool", n.pool}, {"hidden", n.hidden}};
}

model::NetSpec net_from(const json& j) {
  model::NetSpec n;
  n.conv_channels = j.at("conv_channels").get<std::vector<std::size_t>>();
  n.kernel = j.at("kernel").get<std::size_t>();
  n.pool = j.at("pool").get<std::size_t>();
  n.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  return n;
}

json spec_json(const model::ModelSpec& s) {
  return {{"input_shape", s.input_shape},
          {"classes", s.classes},
          {"variant", model::to_string(s.variant)},
          {"family", model::to_string(s.family)},
          {"sigma_p", s.sigma_p},
          {"sigma_noise", s.sigma_noise},
          {"s_train", s.s_train},
          {"s_test", s.s_test},
          {"kl_weight", s.kl_weight},
          {"tessellation", {{"cells", s.tessellation.cells},
                            {"boundary", cpab::to_string(s.tessellation.boundary)}}},
          {"integration_steps", s.integration_steps},
          {"classifier", net_json(s.classifier)},
          {"localizer", net_json(s.localizer)},
          {"seed", s.seed}};
}

model::ModelSpec spec_from(const json& j) {
  model::ModelSpec s;
  s.input_shape = j.at("input_shape").get<nn::Shape>();
  s.classes = j.at("classes").get<std::size_t>();
  s.variant = model::parse_variant(j.at("variant").get<std::string>());
  s.family = model::parse_family(j.at("family").get<std::string>());
  s.sigma_p = j.at("sigma_p").get<double>();
  s.sigma_noise = j.at("sigma_noise").get<double>();
  s.s_train = j.at("s_train").get<std::size_t>();
  s.s_test = j.at("s_test").get<std::size_t>();
  s.kl_weight = j.at("kl_weight").get<double>();
  s.tessellation.cells = j.at("tessellation").at("cells").get<std::vector<std::size_t>>();
  s.tessellation.boundary = cpab::parse_boundary(j.at("tessellation").at("boundary").get<std::string>());
  s.integration_steps = j.at("integration_steps").get<std::size_t>();
  s.classifier = net_from(j.at("classifier"));
  s.localizer = net_from(j.at("localizer"));
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

}  // namespace

Dtype native_dtype() { return sizeof(Scalar) == 8 ? Dtype::f64 : Dtype::f32; }

std::vector<std::uint8_t> serialize_checkpoint(model::Model& model, const ExperimentConfig& config,
                                               const std::vector<std::string>& class_names,
                                               const std::optional<data::NormalizationStats>& stats,
                                               Dtype dtype) {
  const std::size_t width = dtype == Dtype::f64 ? 8 : 4;
  std::vector<std::uint8_t> payload;
  json tensors = json::array();
  for (const auto& p : model.parameters()) {
    tensors.push_back({{"name", p.name},
                       {"shape", p.tensor->shape()},
                       {"offset", payload.size()},
                       {"bytes", p.tensor->size() * width}});
    for (Scalar v : p.tensor->values()) {
      if (dtype == Dtype::f64) {
        put_le(payload, std::bit_cast<std::uint64_t>(static_cast<double>(v)));
      } else {
        put_le(payload, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      }
    }
  }
  json manifest = {{"format_version", kCheckpointVersion},
                   {"config", to_map(config)},
                   {"config_hash", config_hash(config)},
                   {"model", spec_json(model.spec())},
                   {"class_names", class_names},
                   {"normalization", stats ? json{{"mean", stats->mean}, {"std", stats->std}} : json(nullptr)},
                   {"dtype", dtype == Dtype::f64 ? "f64" : "f32"},
                   {"tensors", tensors},
                   {"payload_bytes", payload.size()},
                   {"payload_fnv1a", hex(fnv1a(payload.data(), payload.size()))}};
  const std::string text = manifest.dump();
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_le(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

Checkpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw DataError("checkpoint: bad magic");
  }
  const std::size_t manifest_len = get_le<std::uint32_t>(bytes.data() + 8);
  if (bytes.size() < 12 + manifest_len) throw DataError("checkpoint: truncated manifest");
  Checkpoint ck;
  try {
    const json m = json::parse(bytes.begin() + 12, bytes.begin() + 12 + static_cast<std::ptrdiff_t>(manifest_len));
    if (m.at("format_version").get<int>() != kCheckpointVersion) {
      throw DataError("checkpoint: unsupported format version");
    }
    const std::uint8_t* payload = bytes.data() + 12 + manifest_len;
    const std::size_t payload_size = bytes.size() - 12 - manifest_len;
    if (payload_size != m.at("payload_bytes").get<std::size_t>()) {
      throw DataError("checkpoint: payload size does not match the manifest");
    }
    if (hex(fnv1a(payload, payload_size)) != m.at("payload_fnv1a").get<std::string>()) {
      throw DataError("checkpoint: payload hash mismatch");
    }
    const std::string dtype = m.at("dtype").get<std::string>();
    if (dtype != "f64" && dtype != "f32") throw DataError("checkpoint: unknown dtype " + dtype);
    const std::size_t width = dtype == "f64" ? 8 : 4;

    for (const auto& [key, value] : m.at("config").items()) set_field(ck.config, key, value.get<std::string>());
    ck.spec = spec_from(m.at("model"));
    ck.class_names = m.at("class_names").get<std::vector<std::string>>();
    if (!m.at("normalization").is_null()) {
      ck.stats = data::NormalizationStats{m.at("normalization").at("mean").get<std::vector<double>>(),
                                          m.at("normalization").at("std").get<std::vector<double>>()};
    }
    ck.model = std::make_unique<model::Model>(ck.spec);
    const auto params = ck.model->parameters();
    const json& tensors = m.at("tensors");
    if (tensors.size() != params.size()) throw DataError("checkpoint: tensor count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
      const json& t = tensors[i];
      nn::Tensor& dst = *params[i].tensor;
      if (t.at("name").get<std::string>() != params[i].name || t.at("shape").get<nn::Shape>() != dst.shape()) {
        throw DataError("checkpoint: tensor " + params[i].name + " does not match the model");
      }
      const std::size_t offset = t.at("offset").get<std::size_t>();
      if (offset + dst.size() * width > payload_size) throw DataError("checkpoint: tensor past payload end");
      for (std::size_t k = 0; k < dst.size(); ++k) {
        const std::uint8_t* p = payload + offset + k * width;
        dst[k] = width == 8 ? static_cast<Scalar>(std::bit_cast<double>(get_le<std::uint64_t>(p)))
                            : static_cast<Scalar>(std::bit_cast<float>(get_le<std::uint32_t>(p)));
      }
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: malformed manifest: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, model::Model& model,
                     const ExperimentConfig& config, const std::vector<std::string>& class_names,
                     const std::optional<data::NormalizationStats>& stats, Dtype dtype) {
  const auto bytes = serialize_checkpoint(model, config, class_names, stats, dtype);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return parse_checkpoint(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace pstn::app

#include "pstn/data/idx.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>

#include "pstn/common/error.hpp"

namespace pstn::data {

IdxFile parse_idx(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw ParseError("idx: truncated header", bytes.size());
  if (bytes[0] != 0 || bytes[1] != 0) throw ParseError("idx: bad magic number", 0);
  IdxFile file;
  file.type_code = bytes[2];
  if (file.type_code != kIdxUnsignedByte) {
    throw ParseError("idx: unsupported type code " + std::to_string(file.type_code), 2);
  }
  const std::size_t rank = bytes[3];
  if (rank == 0) throw ParseError("idx: rank must be at least 1", 3);

  std::size_t offset = 4;
  std::uint64_t count = 1;
  for (std::size_t r = 0; r < rank; ++r) {
    if (bytes.size() < offset + 4) throw ParseError("idx: truncated dimension list", bytes.size());
    const std::uint32_t d = (std::uint32_t(bytes[offset]) << 24) | (std::uint32_t(bytes[offset + 1]) << 16) |
                            (std::uint32_t(bytes[offset + 2]) << 8) | std::uint32_t(bytes[offset + 3]);
    file.dims.push_back(d);
    count *= d;
    if (count > std::numeric_limits<std::uint32_t>::max() * std::uint64_t{16}) {
      throw ParseError("idx: implausible payload size", offset);
    }
    offset += 4;
  }
  if (bytes.size() < offset + count) {
    throw ParseError("idx: truncated payload (expected " + std::to_string(count) + " bytes)",
                     bytes.size());
  }
  if (bytes.size() > offset + count) {
    throw ParseError("idx: trailing bytes after payload", offset + count);
  }
  file.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset), bytes.end());
  return file;
}

IdxFile read_idx(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return parse_idx(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what() + " at offset " + std::to_string(e.offset()),
                     e.offset());
  }
}

std::vector<std::uint8_t> serialize_idx(const IdxFile& file) {
  std::vector<std::uint8_t> out{0, 0, file.type_code, static_cast<std::uint8_t>(file.dims.size())};
  for (std::uint32_t d : file.dims) {
    out.push_back(static_cast<std::uint8_t>(d >> 24));
    out.push_back(static_cast<std::uint8_t>(d >> 16));
    out.push_back(static_cast<std::uint8_t>(d >> 8));
    out.push_back(static_cast<std::uint8_t>(d));
  }
  out.insert(out.end(), file.payload.begin(), file.payload.end());
  return out;
}

void write_idx(const std::filesystem::path& path, const IdxFile& file) {
  const std::vector<std::uint8_t> bytes = serialize_idx(file);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

nn::Tensor idx_to_tensor(const IdxFile& file, bool scale) {
  nn::Shape shape(file.dims.begin(), file.dims.end());
  nn::Tensor t(shape);
  for (std::size_t i = 0; i < file.payload.size(); ++i) {
    t[i] = scale ? static_cast<Scalar>(file.payload[i] / 255.0) : static_cast<Scalar>(file.payload[i]);
  }
  return t;
}

std::vector<int> idx_to_labels(const IdxFile& file) {
  if (file.dims.size() != 1) throw DataError("label file must have rank 1");
  return std::vector<int>(file.payload.begin(), file.payload.end());
}

IdxFile tensor_to_idx(const nn::Tensor& values) {
  IdxFile file;
  for (std::size_t d : values.shape()) file.dims.push_back(static_cast<std::uint32_t>(d));
  file.payload.reserve(values.size());
  for (Scalar v : values.values()) {
    const double q = std::clamp(double(v), 0.0, 1.0) * 255.0;
    file.payload.push_back(static_cast<std::uint8_t>(std::lround(q)));
  }
  return file;
}

IdxFile labels_to_idx(std::span<const int> labels) {
  IdxFile file;
  file.dims = {static_cast<std::uint32_t>(labels.size())};
  for (int y : labels) {
    if (y < 0 || y > 255) throw DataError("label " + std::to_string(y) + " does not fit in a byte");
    file.payload.push_back(static_cast<std::uint8_t>(y));
  }
  return file;
}

Dataset load_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const IdxFile image_file = read_idx(images);
  const IdxFile label_file = read_idx(labels);
  Dataset ds;
  ds.inputs = idx_to_tensor(image_file, true);
  if (ds.inputs.rank() == 3) {
    ds.inputs.reshape({ds.inputs.dim(0), 1, ds.inputs.dim(1), ds.inputs.dim(2)});
  } else if (ds.inputs.rank() != 4) {
    throw DataError(images.string() + ": expected [n, H, W] or [n, C, H, W] images");
  }
  ds.labels = idx_to_labels(label_file);
  const int max_label = ds.labels.empty() ? -1 : *std::max_element(ds.labels.begin(), ds.labels.end());
  ds.num_classes = static_cast<std::size_t>(max_label + 1);
  for (std::size_t c = 0; c < ds.num_classes; ++c) ds.class_names.push_back(std::to_string(c));
  ds.validate();
  return ds;
}

}  // namespace pstn::data

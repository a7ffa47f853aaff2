#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pstn/data/dataset.hpp"
#include "pstn/nn/tensor.hpp"

namespace pstn::data {

inline constexpr std::uint8_t kIdxUnsignedByte = 0x08;

// Raw IDX container: 00 00 <type> <rank>, rank big-endian u32 dims, then the
// row-major payload. Only unsigned-byte payloads are supported.
struct IdxFile {
  std::uint8_t type_code = kIdxUnsignedByte;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> payload;
};

// Throws ParseError carrying the byte offset of the problem.
IdxFile parse_idx(std::span<const std::uint8_t> bytes);
IdxFile read_idx(const std::filesystem::path& path);

std::vector<std::uint8_t> serialize_idx(const IdxFile& file);
void write_idx(const std::filesystem::path& path, const IdxFile& file);

// Payload as a tensor of shape `dims`; bytes divided by 255 when `scale`.
nn::Tensor idx_to_tensor(const IdxFile& file, bool scale = true);
std::vector<int> idx_to_labels(const IdxFile& file);

// Quantises values in [0, 1] (clamped) to bytes.
IdxFile tensor_to_idx(const nn::Tensor& values);
IdxFile labels_to_idx(std::span<const int> labels);

// Images [n, H, W] (or [n, C, H, W]) plus a rank-1 label file. Inputs get a
// channel axis when the image file has none.
Dataset load_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& labels);

}  // namespace pstn::data

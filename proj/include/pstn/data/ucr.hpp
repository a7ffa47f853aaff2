#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "pstn/data/dataset.hpp"

namespace pstn::data {

// UCR-style text: one series per line, class label in the first field,
// separated by tabs or commas (detected from the first data line). Labels are
// remapped to 0..C-1 in order of first appearance unless `classes` names an
// existing mapping (e.g. the training split's), in which case unseen labels
// are an error. Series come back as [n, 1, length].
Dataset parse_ucr(std::istream& in, const std::vector<std::string>* classes = nullptr);
Dataset read_ucr(const std::filesystem::path& path, const std::vector<std::string>* classes = nullptr);

// Inverse of parse_ucr for one delimiter (used for exported series).
void write_ucr(std::ostream& out, const Dataset& dataset, char delimiter = ',');

}  // namespace pstn::data

#include "pstn/data/ucr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "pstn/common/error.hpp"
#include "pstn/eval/report.hpp"

namespace pstn::data {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line, char delimiter) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delimiter, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_number(std::string_view field, std::size_t line_no) {
  double v = 0.0;
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw ParseError("ucr: non-numeric field '" + std::string(field) + "' on line " +
                     std::to_string(line_no), line_no);
  }
  if (!std::isfinite(v)) {
    throw ParseError("ucr: non-finite value on line " + std::to_string(line_no), line_no);
  }
  return v;
}

}  // namespace

Dataset parse_ucr(std::istream& in, const std::vector<std::string>* classes) {
  std::vector<std::string> names = classes ? *classes : std::vector<std::string>{};
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t length = 0;
  char delimiter = 0;
  std::string line;
  std::size_t line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = trim(line);
    if (text.empty()) continue;
    if (!delimiter) delimiter = text.find('\t') != std::string_view::npos ? '\t' : ',';
    const std::vector<std::string_view> fields = split_fields(text, delimiter);
    if (fields.size() < 2) {
      throw ParseError("ucr: line " + std::to_string(line_no) + " has no series values", line_no);
    }
    if (length == 0) {
      length = fields.size() - 1;
    } else if (fields.size() - 1 != length) {
      throw ParseError("ucr: line " + std::to_string(line_no) + " has " +
                       std::to_string(fields.size() - 1) + " values, expected " + std::to_string(length),
                       line_no);
    }
    const std::string label = eval::format_number(parse_number(fields[0], line_no));
    auto it = std::find(names.begin(), names.end(), label);
    if (it == names.end()) {
      if (classes) {
        throw ParseError("ucr: label " + label + " on line " + std::to_string(line_no) +
                         " is not a known class", line_no);
      }
      names.push_back(label);
      it = names.end() - 1;
    }
    labels.push_back(static_cast<int>(it - names.begin()));
    for (std::size_t k = 1; k < fields.size(); ++k) values.push_back(parse_number(fields[k], line_no));
  }
  if (labels.empty()) throw ParseError("ucr: no series found", line_no);

  Dataset ds;
  ds.inputs = nn::Tensor({labels.size(), 1, length},
                         std::vector<Scalar>(values.begin(), values.end()));
  ds.labels = std::move(labels);
  ds.num_classes = names.size();
  ds.class_names = std::move(names);
  ds.validate();
  return ds;
}

Dataset read_ucr(const std::filesystem::path& path, const std::vector<std::string>* classes) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return parse_ucr(in, classes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.offset());
  }
}

void write_ucr(std::ostream& out, const Dataset& dataset, char delimiter) {
  const std::size_t n = dataset.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<std::size_t>(dataset.labels[i]);
    out << (y < dataset.class_names.size() ? dataset.class_names[y] : std::to_string(y));
    for (Scalar v : dataset.inputs.slice(i)) out << delimiter << eval::format_number(v);
    out << '\n';
  }
}

}  // namespace pstn::data

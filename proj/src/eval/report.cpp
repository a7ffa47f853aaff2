#include "pstn/eval/report.hpp"

#include <charconv>

#include "pstn/common/error.hpp"

namespace pstn::eval {

std::string format_number(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(std::ostream& out, std::string_view config_hash,
                     std::vector<std::string> header)
    : out_(out), columns_(header.size()) {
  out_ << "# config_hash=" << config_hash << '\n';
  row(header);
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  if (fields.size() != columns_) throw ConfigError("csv row has the wrong number of fields");
  for (std::size_t i = 0; i < fields.size(); ++i) out_ << (i ? "," : "") << fields[i];
  out_ << '\n';
}

void write_metrics_csv(std::ostream& out, const Summary& summary, std::string_view config_hash) {
  CsvWriter csv(out, config_hash,
                {"row", "bin", "lower", "upper", "count", "mean_confidence", "accuracy", "nll",
                 "ece", "mean_entropy"});
  std::size_t total = 0;
  double conf_total = 0.0;
  const auto& bins = summary.reliability.bins;
  for (std::size_t b = 0; b < bins.size(); ++b) {
    const ReliabilityBin& bin = bins[b];
    total += bin.count;
    conf_total += bin.mean_confidence * static_cast<double>(bin.count);
    csv.row({"bin", std::to_string(b), format_number(bin.lower), format_number(bin.upper),
             std::to_string(bin.count), format_number(bin.mean_confidence),
             format_number(bin.accuracy), "", "", ""});
  }
  const double mean_conf = total ? conf_total / static_cast<double>(total) : 0.0;
  csv.row({"summary", "", "0", "1", std::to_string(total), format_number(mean_conf),
           format_number(summary.accuracy), format_number(summary.nll), format_number(summary.ece),
           format_number(summary.mean_entropy)});
}

}  // namespace pstn::eval

#pragma once

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "pstn/eval/metrics.hpp"

namespace pstn::eval {

// Shortest round-trippable text for a double.
std::string format_number(double value);

// CSV with a leading "# config_hash=<hash>" comment and a header row.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::string_view config_hash, std::vector<std::string> header);
  void row(const std::vector<std::string>& fields);

 private:
  std::ostream& out_;
  std::size_t columns_;
};

// Metrics schema: one "bin" row per reliability bin followed by one
// "summary" row.
//   row,bin,lower,upper,count,mean_confidence,accuracy,nll,ece,mean_entropy
void write_metrics_csv(std::ostream& out, const Summary& summary, std::string_view config_hash);

}  // namespace pstn::eval

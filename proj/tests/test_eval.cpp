#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "pstn/common/error.hpp"
#include "pstn/common/rng.hpp"
#include "pstn/eval/metrics.hpp"
#include "pstn/eval/report.hpp"

using namespace pstn;
using namespace pstn::eval;

namespace {

PredictionRecord one_hot(std::size_t classes, int predicted, int label) {
  std::vector<double> p(classes, 0.0);
  p[predicted] = 1.0;
  return PredictionRecord::make(p, label);
}

PredictionRecord uniform(std::size_t classes, int label) {
  return PredictionRecord::make(std::vector<double>(classes, 1.0 / classes), label);
}

// Binary record with confidence c on class 0.
PredictionRecord binary(double c, bool correct) { return PredictionRecord::make({c, 1.0 - c}, correct ? 0 : 1); }

std::vector<PredictionRecord> random_records(Rng& rng, std::size_t n, std::size_t classes) {
  std::vector<PredictionRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> p(classes);
    double total = 0.0;
    for (double& x : p) total += (x = std::exp(3.0 * rng.normal()));
    for (double& x : p) x /= total;
    out.push_back(PredictionRecord::make(p, static_cast<int>(rng.index(classes))));
  }
  return out;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

}  // namespace

TEST_CASE("prediction records") {
  const PredictionRecord r = PredictionRecord::make({0.2, 0.5, 0.3}, 2);
  CHECK(r.predicted == 1);
  CHECK(r.confidence == 0.5);
  CHECK(PredictionRecord::make({0.4, 0.4, 0.2}, 0).predicted == 0);  // lowest index wins ties
  CHECK_THROWS_AS(PredictionRecord::make({0.5, 0.6}, 0), DataError);
  CHECK_THROWS_AS(PredictionRecord::make({0.5, 0.5}, 2), DataError);
  CHECK_THROWS_AS(PredictionRecord::make({}, 0), DataError);
}

TEST_CASE("accuracy examples") {
  std::vector<PredictionRecord> all{one_hot(3, 0, 0), one_hot(3, 2, 2)};
  CHECK(accuracy(all) == 1.0);
  std::vector<PredictionRecord> three{one_hot(3, 0, 0), one_hot(3, 1, 1), one_hot(3, 2, 2), one_hot(3, 0, 1)};
  CHECK(accuracy(three) == 0.75);
  CHECK_THROWS_AS(accuracy({}), DataError);
}

TEST_CASE("nll examples") {
  std::vector<PredictionRecord> perfect{one_hot(4, 1, 1), one_hot(4, 3, 3)};
  CHECK(nll(perfect) <= 1e-12 * 2);
  std::vector<PredictionRecord> flat(5, uniform(10, 3));
  CHECK(nll(flat) == doctest::Approx(std::log(10.0)).epsilon(1e-14));
  std::vector<PredictionRecord> wrong{one_hot(2, 0, 1)};
  CHECK(nll(wrong) == doctest::Approx(-std::log(1e-12)).epsilon(1e-14));
  CHECK_THROWS_AS(nll({}), DataError);
}

TEST_CASE("entropy examples") {
  std::vector<PredictionRecord> hot{one_hot(10, 4, 4)};
  CHECK(mean_entropy(hot) == 0.0);
  std::vector<PredictionRecord> flat{uniform(7, 0)};
  CHECK(mean_entropy(flat) == doctest::Approx(std::log(7.0)).epsilon(1e-14));
  std::vector<PredictionRecord> mix{one_hot(10, 0, 0), uniform(10, 0)};
  CHECK(mean_entropy(mix) == doctest::Approx(std::log(10.0) / 2).epsilon(1e-14));
}

TEST_CASE("ECE examples") {
  SUBCASE("confident and correct") {
    std::vector<PredictionRecord> r{one_hot(3, 0, 0), one_hot(3, 2, 2), one_hot(3, 1, 1)};
    CHECK(reliability(r).ece == 0.0);
  }
  SUBCASE("two records at 0.8, one correct") {
    std::vector<PredictionRecord> r{binary(0.8, true), binary(0.8, false)};
    const Reliability rel = reliability(r);
    CHECK(rel.ece == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(rel.bins[8].count == 2);
    CHECK(rel.bins[8].accuracy == 0.5);
    CHECK(rel.bins[8].mean_confidence == doctest::Approx(0.8));
  }
  SUBCASE("hand-computed two-bin case") {
    // bin 6: {0.6 right, 0.65 wrong}, gap |0.5 - 0.625|; bin 9: {0.95 right}, gap 0.05
    std::vector<PredictionRecord> r{binary(0.6, true), binary(0.65, false), binary(0.95, true)};
    CHECK(reliability(r).ece == doctest::Approx((2.0 / 3) * 0.125 + (1.0 / 3) * 0.05).epsilon(1e-12));
  }
  SUBCASE("confidence 1 lands in the last bin") {
    std::vector<PredictionRecord> r{one_hot(2, 0, 0)};
    CHECK(reliability(r, 4).bins[3].count == 1);
  }
  CHECK_THROWS_AS(reliability({}, 0), ConfigError);
}

TEST_CASE("calibrated simulation drives ECE towards zero") {
  Rng rng(11);
  double previous = 1.0;
  for (std::size_t n : {1000, 100000}) {
    std::vector<PredictionRecord> r;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = rng.uniform(0.5, 1.0);
      r.push_back(binary(c, rng.uniform() < c));
    }
    const double ece = reliability(r).ece;
    CHECK(ece < previous);
    previous = ece;
  }
  CHECK(previous < 0.01);
}

TEST_CASE("reliability invariants on random records") {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    auto records = random_records(rng, 1 + rng.index(300), 2 + rng.index(9));
    const std::size_t bins = 1 + rng.index(20);
    const Reliability rel = reliability(records, bins);
    std::size_t total = 0;
    REQUIRE(rel.bins.size() == bins);
    CHECK(rel.bins.front().lower == 0.0);
    CHECK(rel.bins.back().upper == 1.0);
    for (std::size_t b = 0; b < bins; ++b) {
      total += rel.bins[b].count;
      if (b > 0) CHECK(rel.bins[b].lower == rel.bins[b - 1].upper);
    }
    CHECK(total == records.size());
    CHECK(rel.ece >= 0.0);
    CHECK(rel.ece <= 1.0);

    std::vector<PredictionRecord> shuffled(records.rbegin(), records.rend());
    std::swap(shuffled.front(), shuffled[shuffled.size() / 2]);
    CHECK(reliability(shuffled, bins).ece == doctest::Approx(rel.ece).epsilon(1e-12));

    double conf = 0.0;
    for (const auto& r : records) conf += r.confidence;
    conf /= records.size();
    CHECK(reliability(records, 1).ece == doctest::Approx(std::abs(accuracy(records) - conf)).epsilon(1e-12));
  }
}

TEST_CASE("merged record sets give count-weighted accuracy and NLL") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_records(rng, 1 + rng.index(50), 5);
    const auto b = random_records(rng, 1 + rng.index(50), 5);
    std::vector<PredictionRecord> all(a);
    all.insert(all.end(), b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    CHECK(accuracy(all) == doctest::Approx((na * accuracy(a) + nb * accuracy(b)) / (na + nb)).epsilon(1e-12));
    CHECK(nll(all) == doctest::Approx((na * nll(a) + nb * nll(b)) / (na + nb)).epsilon(1e-12));
  }
}

TEST_CASE("records from a probability tensor") {
  const nn::Tensor p({2, 3}, {0.1, 0.7, 0.2, 0.5, 0.25, 0.25});
  const std::vector<int> labels{1, 2};
  const auto r = make_records(p, labels);
  REQUIRE(r.size() == 2);
  CHECK(r[0].predicted == 1);
  CHECK(r[1].predicted == 0);
  const std::vector<int> short_labels{1};
  CHECK_THROWS_AS(make_records(p, short_labels), DataError);
}

TEST_CASE("metrics CSV schema: bins + 1 rows after the header") {
  Rng rng(14);
  const auto records = random_records(rng, 40, 4);
  for (std::size_t bins : {1, 10, 15}) {
    std::ostringstream out;
    write_metrics_csv(out, summarize(records, bins), "00ff");
    const auto lines = lines_of(out.str());
    REQUIRE(lines.size() == bins + 3);
    CHECK(lines[0] == "# config_hash=00ff");
    CHECK(lines[1] == "row,bin,lower,upper,count,mean_confidence,accuracy,nll,ece,mean_entropy");
    for (std::size_t i = 2; i < lines.size(); ++i) {
      CHECK(std::count(lines[i].begin(), lines[i].end(), ',') == 9);
      CHECK(lines[i].rfind(i + 1 < lines.size() ? "bin," : "summary,", 0) == 0);
    }
  }
}

TEST_CASE("number formatting round-trips") {
  Rng rng(15);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.normal() * std::pow(10.0, rng.uniform(-20, 20));
    CHECK(std::stod(format_number(v)) == v);
  }
  CHECK(format_number(0.5) == "0.5");
  CHECK(format_number(3.0) == "3");
}

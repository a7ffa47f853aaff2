#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "pstn/common/error.hpp"
#include "pstn/common/rng.hpp"
#include "pstn/cpab/cpab_transform.hpp"
#include "pstn/data/augment.hpp"
#include "pstn/data/dataset.hpp"
#include "pstn/data/idx.hpp"
#include "pstn/data/synth.hpp"
#include "pstn/data/ucr.hpp"
#include "pstn/warp/transform.hpp"

using namespace pstn;
using namespace pstn::data;

namespace {

std::vector<std::uint8_t> idx_bytes(std::uint8_t rank, std::vector<std::uint32_t> dims, std::size_t payload) {
  std::vector<std::uint8_t> b{0, 0, 0x08, rank};
  for (std::uint32_t d : dims) {
    b.push_back(static_cast<std::uint8_t>(d >> 24));
    b.push_back(static_cast<std::uint8_t>(d >> 16));
    b.push_back(static_cast<std::uint8_t>(d >> 8));
    b.push_back(static_cast<std::uint8_t>(d));
  }
  for (std::size_t i = 0; i < payload; ++i) b.push_back(static_cast<std::uint8_t>(i * 7));
  return b;
}

std::size_t parse_error_offset(std::span<const std::uint8_t> bytes) {
  try {
    parse_idx(bytes);
  } catch (const ParseError& e) {
    return e.offset();
  }
  FAIL("expected a parse error");
  return 0;
}

Dataset labelled(std::vector<int> labels, std::size_t classes, std::size_t channels = 1, std::size_t width = 3) {
  Dataset d;
  d.inputs = nn::Tensor({labels.size(), channels, width});
  for (std::size_t i = 0; i < d.inputs.size(); ++i) d.inputs[i] = static_cast<Scalar>(i % 17) * 0.25;
  d.labels = std::move(labels);
  d.num_classes = classes;
  return d;
}

std::vector<std::size_t> class_counts(const Dataset& d) {
  std::vector<std::size_t> counts(d.num_classes, 0);
  for (int y : d.labels) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

Dataset parse_text(const std::string& text, const std::vector<std::string>* classes = nullptr) {
  std::istringstream in(text);
  return parse_ucr(in, classes);
}

std::size_t ucr_error_line(const std::string& text) {
  try {
    parse_text(text);
  } catch (const ParseError& e) {
    return e.offset();
  }
  FAIL("expected a parse error");
  return 0;
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("pstn_test_data_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::vector<Scalar> vec(const nn::Tensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

TEST_CASE("IDX examples") {
  SUBCASE("image block") {
    const auto bytes = idx_bytes(3, {2, 28, 28}, 1568);
    const IdxFile f = parse_idx(bytes);
    const nn::Tensor t = idx_to_tensor(f);
    CHECK(t.shape() == nn::Shape{2, 28, 28});
    CHECK(t[1] == doctest::Approx(7.0 / 255.0));
    CHECK(idx_to_tensor(f, false)[1] == 7.0);
  }
  SUBCASE("label vector") {
    const auto bytes = idx_bytes(1, {5}, 5);
    const auto labels = idx_to_labels(parse_idx(bytes));
    CHECK(labels == std::vector<int>{0, 7, 14, 21, 28});
  }
  SUBCASE("empty file fails at offset 0") {
    CHECK(parse_error_offset({}) == 0);
  }
}

TEST_CASE("IDX errors name the offending offset") {
  auto bad_magic = idx_bytes(1, {3}, 3);
  bad_magic[1] = 1;
  CHECK(parse_error_offset(bad_magic) == 0);
  auto bad_type = idx_bytes(1, {3}, 3);
  bad_type[2] = 0x0d;
  CHECK(parse_error_offset(bad_type) == 2);
  auto truncated_dims = idx_bytes(2, {3, 4}, 12);
  truncated_dims.resize(9);
  CHECK(parse_error_offset(truncated_dims) == 9);
  auto short_payload = idx_bytes(2, {3, 4}, 10);
  CHECK(parse_error_offset(short_payload) == short_payload.size());
  auto trailing = idx_bytes(1, {3}, 4);
  CHECK(parse_error_offset(trailing) == 4 + 4 + 3);
}

TEST_CASE("IDX round-trip is byte exact") {
  for (const auto& bytes : {idx_bytes(1, {5}, 5), idx_bytes(3, {2, 28, 28}, 1568), idx_bytes(4, {2, 3, 4, 5}, 120)}) {
    CHECK(serialize_idx(parse_idx(bytes)) == bytes);
  }
  const auto dir = scratch_dir("idx");
  const auto bytes = idx_bytes(3, {4, 5, 6}, 120);
  write_idx(dir / "a.idx", parse_idx(bytes));
  write_idx(dir / "b.idx", read_idx(dir / "a.idx"));
  CHECK(serialize_idx(read_idx(dir / "b.idx")) == bytes);
  CHECK_THROWS_AS(read_idx(dir / "missing.idx"), DataError);
}

TEST_CASE("IDX tensors and labels survive conversion") {
  nn::Tensor values({2, 2, 2});
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<Scalar>(i * 30) / 255.0;
  CHECK(vec(idx_to_tensor(tensor_to_idx(values))) == vec(values));
  const std::vector<int> labels{3, 0, 255};
  CHECK(idx_to_labels(labels_to_idx(labels)) == labels);
  const std::vector<int> too_big{256};
  CHECK_THROWS_AS(labels_to_idx(too_big), DataError);
}

TEST_CASE("IDX dataset loading") {
  const auto dir = scratch_dir("idxset");
  write_idx(dir / "img", parse_idx(idx_bytes(3, {3, 4, 4}, 48)));
  write_idx(dir / "lab", labels_to_idx(std::vector<int>{0, 2, 1}));
  const Dataset d = load_idx_dataset(dir / "img", dir / "lab");
  CHECK(d.inputs.shape() == nn::Shape{3, 1, 4, 4});
  CHECK(d.num_classes == 3);
  write_idx(dir / "lab2", labels_to_idx(std::vector<int>{0, 1}));
  CHECK_THROWS_AS(load_idx_dataset(dir / "img", dir / "lab2"), DataError);
}

TEST_CASE("IDX reader is total on arbitrary bytes") {
  Rng rng(1);
  const auto valid = idx_bytes(3, {2, 3, 4}, 24);
  std::size_t parsed = 0, rejected = 0;
  for (int trial = 0; trial < 20000; ++trial) {
    std::vector<std::uint8_t> bytes;
    if (trial % 2 == 0) {
      bytes.resize(rng.index(40));
      for (auto& b : bytes) b = static_cast<std::uint8_t>(rng.index(trial % 4 == 0 ? 4 : 256));
    } else {
      bytes = valid;
      const std::size_t flips = 1 + rng.index(3);
      for (std::size_t k = 0; k < flips; ++k) bytes[rng.index(bytes.size())] = static_cast<std::uint8_t>(rng.index(256));
      if (rng.index(4) == 0) bytes.resize(rng.index(bytes.size() + 1));
    }
    try {
      const IdxFile f = parse_idx(bytes);
      CHECK(serialize_idx(f) == bytes);
      ++parsed;
    } catch (const ParseError& e) {
      CHECK(e.offset() <= bytes.size());
      ++rejected;
    }
  }
  CHECK(parsed > 0);
  CHECK(rejected > 0);
}

TEST_CASE("UCR examples") {
  SUBCASE("two comma-separated series") {
    const Dataset d = parse_text("1,0.0,1.0\n2,1.0,0.0\n");
    CHECK(d.inputs.shape() == nn::Shape{2, 1, 2});
    CHECK(d.labels == std::vector<int>{0, 1});
    CHECK(vec(d.inputs) == std::vector<Scalar>{0.0, 1.0, 1.0, 0.0});
  }
  SUBCASE("labels remap by first appearance") {
    const Dataset d = parse_text("-1,1,2\n1,3,4\n-1,5,6\n");
    CHECK(d.labels == std::vector<int>{0, 1, 0});
    CHECK(d.class_names == std::vector<std::string>{"-1", "1"});
    const Dataset e = parse_text("1,1,2\n-1,3,4\n");
    CHECK(e.labels == std::vector<int>{0, 1});
  }
  SUBCASE("tabs are detected") {
    const Dataset d = parse_text("3\t0.5\t-1\n3\t2\t2e-1\n");
    CHECK(d.inputs.shape() == nn::Shape{2, 1, 2});
    CHECK(d.num_classes == 1);
  }
  SUBCASE("ragged line is located") {
    CHECK(ucr_error_line("1,1,2,3\n2,1,2\n") == 2);
    CHECK(ucr_error_line("1,1,2\n1,1,x\n2,1,1\n") == 2);
  }
  SUBCASE("existing mapping is reused and unseen labels rejected") {
    const std::vector<std::string> classes{"2", "1"};
    CHECK(parse_text("1,0,0\n2,0,0\n", &classes).labels == std::vector<int>{1, 0});
    CHECK_THROWS_AS(parse_text("3,0,0\n", &classes), ParseError);
  }
}

TEST_CASE("UCR write then parse round-trips") {
  Rng rng(2);
  Dataset d = labelled({0, 1, 2, 1}, 3, 1, 5);
  d.class_names = {"1.5", "7", "-2"};
  for (Scalar& v : d.inputs.values()) v = rng.normal();
  for (char delim : {',', '\t'}) {
    std::ostringstream out;
    write_ucr(out, d, delim);
    const Dataset back = parse_text(out.str());
    CHECK(back.labels == d.labels);
    CHECK(vec(back.inputs) == vec(d.inputs));
  }
}

TEST_CASE("balanced subsets") {
  std::vector<int> labels;
  for (int i = 0; i < 200; ++i) labels.push_back(i % 10);
  const Dataset d = labelled(labels, 10);
  SUBCASE("one per class") {
    const Dataset s = subsample(d, {10, 3, true});
    CHECK(class_counts(s) == std::vector<std::size_t>(10, 1));
  }
  SUBCASE("floor or ceil per class") {
    for (std::size_t k : {11, 25, 57, 199}) {
      for (std::size_t c : class_counts(subsample(d, {k, k, true}))) {
        CHECK(c >= k / 10);
        CHECK(c <= (k + 9) / 10);
      }
    }
  }
  SUBCASE("deterministic") {
    CHECK(subsample_indices(d, {30, 5, true}) == subsample_indices(d, {30, 5, true}));
    CHECK(subsample_indices(d, {30, 5, true}) != subsample_indices(d, {30, 6, true}));
    CHECK(subsample_indices(d, {30, 5, false}) == subsample_indices(d, {30, 5, false}));
  }
  SUBCASE("whole dataset is a permutation") {
    auto idx = subsample_indices(d, {200, 1, true});
    CHECK(idx != subsample_indices(d, {200, 1, false}));
    std::sort(idx.begin(), idx.end());
    for (std::size_t i = 0; i < idx.size(); ++i) CHECK(idx[i] == i);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(subsample(d, {9, 0, true}), ConfigError);
    CHECK_THROWS_AS(subsample(d, {201, 0, false}), ConfigError);
    CHECK_THROWS_AS(subsample(d, {0, 0, false}), ConfigError);
    CHECK(subsample(d, {9, 0, false}).size() == 9);
  }
}

TEST_CASE("splits and complements") {
  const Dataset d = labelled({0, 1, 0, 1, 0, 1, 0, 1}, 2);
  const Split s = split(d, 0.75, 4);
  CHECK(s.train.size() == 6);
  CHECK(s.validation.size() == 2);
  const std::vector<std::size_t> taken{1, 4};
  CHECK(complement(6, taken) == std::vector<std::size_t>{0, 2, 3, 5});
  CHECK_THROWS_AS(split(d, 1.0, 0), ConfigError);
}

TEST_CASE("normalization") {
  Rng rng(3);
  Dataset train = labelled({0, 1, 0, 1, 0}, 2, 3, 7);
  for (Scalar& v : train.inputs.values()) v = 3.0 + 2.0 * rng.normal();
  const Dataset n = normalize(train);
  REQUIRE(n.stats.has_value());
  const NormalizationStats after = compute_stats(n);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(std::abs(after.mean[c]) < 1e-10);
    CHECK(std::abs(after.std[c] - 1.0) < 1e-10);
  }
  SUBCASE("test split uses training statistics") {
    Dataset test = labelled({1, 0}, 2, 3, 7);
    for (Scalar& v : test.inputs.values()) v = -5.0 + rng.normal();
    const Dataset t = normalize(test, n.stats);
    const auto& s = *n.stats;
    CHECK(t.inputs[0] == doctest::Approx((test.inputs[0] - s.mean[0]) / s.std[0]));
    CHECK(std::abs(compute_stats(t).mean[0]) > 1.0);
  }
  SUBCASE("constant-zero channel passes through") {
    Dataset z = labelled({0, 1}, 2, 1, 4);
    for (Scalar& v : z.inputs.values()) v = 0.0;
    CHECK(vec(normalize(z).inputs) == vec(z.inputs));
  }
}

TEST_CASE("mini-batches cover every index once") {
  Rng rng(4);
  const auto batches = make_batches(103, 10, rng);
  CHECK(batches.size() == 11);
  std::multiset<std::size_t> seen;
  for (const auto& b : batches) seen.insert(b.begin(), b.end());
  CHECK(seen.size() == 103);
  CHECK(std::set<std::size_t>(seen.begin(), seen.end()).size() == 103);
}

TEST_CASE("prior theta draws have mean 0 and std sigma") {
  const warp::AffineTransform t({8, 8});
  Rng rng(5);
  const double sigma = 0.05;
  const std::size_t n = 100000;
  std::vector<double> sum(4, 0.0), sq(4, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto th = draw_prior_theta(t, sigma, rng);
    for (std::size_t k = 0; k < 4; ++k) {
      sum[k] += th[k];
      sq[k] += th[k] * th[k];
    }
  }
  for (std::size_t k = 0; k < 4; ++k) {
    const double mean = sum[k] / n;
    const double sd = std::sqrt(sq[k] / n - mean * mean);
    CHECK(std::abs(mean) < 5.0 * sigma / std::sqrt(double(n)));
    // std of the sample std is about sigma / sqrt(2n)
    CHECK(std::abs(sd - sigma) < 5.0 * sigma / std::sqrt(2.0 * n));
  }
}

TEST_CASE("traditional DA") {
  Rng rng(6);
  Batch b;
  b.inputs = nn::Tensor({3, 1, 8, 8});
  for (Scalar& v : b.inputs.values()) v = rng.uniform();
  b.labels = {2, 0, 1};
  const warp::AffineTransform t({8, 8});
  SUBCASE("sigma 0 is the identity") {
    const Batch out = traditional_da(b, t, {0.0, 1}, rng);
    CHECK(vec(out.inputs) == vec(b.inputs));
    CHECK(out.labels == b.labels);
  }
  SUBCASE("M adjacent copies with labels kept") {
    const Batch out = traditional_da(b, t, {0.1, 3}, rng);
    CHECK(out.inputs.shape() == nn::Shape{9, 1, 8, 8});
    CHECK(out.labels == std::vector<int>{2, 2, 2, 0, 0, 0, 1, 1, 1});
    CHECK(vec(out.inputs) != vec(traditional_da(b, t, {0.0, 3}, rng).inputs));
  }
  SUBCASE("stream covers the data every epoch") {
    Dataset d = labelled({0, 1, 2, 0, 1, 2, 0}, 3, 1, 16);
    const cpab::CpabTransform ct({16}, {{8}, cpab::Boundary::zero_velocity});
    AugmentedBatchStream stream(d, &ct, {0.2, 2}, 3, 9);
    for (int epoch = 0; epoch < 2; ++epoch) {
      stream.next_epoch();
      std::size_t total = 0;
      Batch out;
      while (stream.next(out)) total += out.labels.size();
      CHECK(total == 14);
    }
  }
}

TEST_CASE("synthetic datasets") {
  for (SynthKind kind : {SynthKind::warped_shapes_2d, SynthKind::warped_series_1d}) {
    CAPTURE(to_string(kind));
    SynthSpec spec;
    spec.kind = kind;
    spec.classes = synth_max_classes(kind);
    spec.n = 5 * spec.classes;
    spec.seed = 11;
    SUBCASE("same seed gives the same dataset") {
      const Dataset a = synth_dataset(spec), b = synth_dataset(spec);
      CHECK(vec(a.inputs) == vec(b.inputs));
      CHECK(a.labels == b.labels);
      spec.seed = 12;
      CHECK(vec(synth_dataset(spec).inputs) != vec(a.inputs));
    }
    SUBCASE("zero warp: classes collapse to their template") {
      spec.warp_scale = 0.0;
      const Dataset d = synth_dataset(spec);
      const Dataset templates = synth_templates(spec);
      const std::size_t item = d.inputs.size() / d.size();
      for (std::size_t i = 0; i < d.size(); ++i) {
        const Scalar* x = d.inputs.data() + i * item;
        const Scalar* own = templates.inputs.data() + d.labels[i] * item;
        CHECK(std::equal(x, x + item, own));
        // nearest-centroid oracle on the templates
        std::size_t best = 0;
        double best_dist = INFINITY;
        for (std::size_t c = 0; c < templates.size(); ++c) {
          const Scalar* t = templates.inputs.data() + c * item;
          double dist = 0.0;
          for (std::size_t k = 0; k < item; ++k) dist += (x[k] - t[k]) * (x[k] - t[k]);
          if (dist < best_dist) best_dist = dist, best = c;
        }
        CHECK(best == static_cast<std::size_t>(d.labels[i]));
      }
    }
    SUBCASE("templates are distinct") {
      const Dataset t = synth_templates(spec);
      const std::size_t item = t.inputs.size() / t.size();
      for (std::size_t a = 0; a < t.size(); ++a)
        for (std::size_t b = a + 1; b < t.size(); ++b)
          CHECK(!std::equal(t.inputs.data() + a * item, t.inputs.data() + (a + 1) * item, t.inputs.data() + b * item));
    }
    SUBCASE("class balance and errors") {
      const Dataset d = synth_dataset(spec);
      CHECK(class_counts(d) == std::vector<std::size_t>(spec.classes, 5));
      spec.n = 2 * spec.classes - 1;
      CHECK_THROWS_AS(synth_dataset(spec), ConfigError);
      spec.n = 100;
      spec.classes = synth_max_classes(kind) + 1;
      CHECK_THROWS_AS(synth_dataset(spec), ConfigError);
    }
  }
  CHECK(synth_dataset({SynthKind::warped_shapes_2d, 20, 10}).inputs.shape() == nn::Shape{20, 1, 16, 16});
  CHECK(synth_dataset({SynthKind::warped_series_1d, 16, 8}).inputs.shape() == nn::Shape{16, 1, 64});
}

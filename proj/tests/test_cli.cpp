#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "pstn/app/checkpoint.hpp"
#include "pstn/app/commands.hpp"
#include "pstn/app/config.hpp"
#include "pstn/common/error.hpp"
#include "pstn/common/rng.hpp"
#include "pstn/data/idx.hpp"
#include "pstn/data/ucr.hpp"
#include "pstn/model/trainer.hpp"

namespace fs = std::filesystem;
using namespace pstn;
using namespace pstn::app;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("pstn_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> lines_of(const fs::path& path) {
  std::vector<std::string> lines;
  std::ifstream in(path);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

// Small synthetic run that trains in well under a second.
ExperimentConfig tiny_config(const fs::path& out) {
  ExperimentConfig c;
  c.data = "synth";
  c.synth_train = 20;
  c.synth_test = 40;
  c.epochs = 2;
  c.batch_size = 10;
  c.bins = 5;
  c.out = out.string();
  return c;
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "pstn");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::vector<double> flat_parameters(model::Model& m) {
  std::vector<double> out;
  for (auto& p : m.parameters()) out.insert(out.end(), p.tensor->values().begin(), p.tensor->values().end());
  return out;
}

}  // namespace

TEST_CASE("key = value config") {
  const ExperimentConfig c = parse_config(
      "# comment\n"
      "variant = stn\n"
      "sigma_p=0.1   # trailing\n"
      "\n"
      "  subset = 30\n"
      "decoupled_weight_decay = false\n");
  CHECK(c.variant == "stn");
  CHECK(c.sigma_p == 0.1);
  CHECK(c.subset == 30);
  CHECK_FALSE(c.decoupled_weight_decay);
  CHECK(c.s_test == 10);
}

TEST_CASE("JSON config") {
  const ExperimentConfig c = parse_config(R"({"variant": "cnn", "epochs": 7, "sigma_da": 0.05, "subset_balanced": false,
                                              "tessellation": "3x3"})");
  CHECK(c.variant == "cnn");
  CHECK(c.epochs == 7);
  CHECK(c.sigma_da == 0.05);
  CHECK_FALSE(c.subset_balanced);
  CHECK(c.tessellation == "3x3");
  CHECK_THROWS_AS(parse_config(R"({"epochs": {"nested": 1}})"), ConfigError);
  CHECK_THROWS_AS(parse_config("{ not json"), ConfigError);
}

TEST_CASE("config errors name the field") {
  try {
    parse_config("sigma_q = 1\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("sigma_q") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config("epochs = ten\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("epochs = -1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("sigma_p\n"), ConfigError);
  ExperimentConfig c;
  CHECK_THROWS_AS(set_field(c, "variant", "bayes"), ConfigError);
  CHECK_THROWS_AS(set_field(c, "normalize", "maybe"), ConfigError);
  CHECK_THROWS_AS(get_field(c, "nope"), ConfigError);
}

TEST_CASE("canonical text round-trips and the hash ignores out") {
  ExperimentConfig c;
  c.variant = "cnn";
  c.sigma_p = 0.1 + 1e-17;
  c.synth_seed = 123456789012345ULL;
  const ExperimentConfig back = parse_config(to_text(c));
  CHECK(to_map(back) == to_map(c));
  CHECK(config_hash(back) == config_hash(c));
  CHECK(config_hash(c).size() == 16);
  ExperimentConfig other = c;
  other.out = "elsewhere";
  CHECK(config_hash(other) == config_hash(c));
  other.sigma_p = 0.2;
  CHECK(config_hash(other) != config_hash(c));
  for (const auto& key : config_keys()) CHECK(to_map(c).count(key) == 1);
}

TEST_CASE("derived settings") {
  ExperimentConfig c;
  CHECK(resolved_epochs(c, 100) == 100);
  CHECK(resolved_epochs(c, 999) == 100);
  CHECK(resolved_epochs(c, 1000) == 20);
  c.epochs = 3;
  CHECK(resolved_epochs(c, 5000) == 3);
  CHECK(parse_tessellation("16") == std::vector<std::size_t>{16});
  CHECK(parse_tessellation("2x3") == std::vector<std::size_t>{2, 3});
  CHECK(parse_tessellation("").empty());
  CHECK_THROWS_AS(parse_tessellation("2x"), ConfigError);
  CHECK_THROWS_AS(parse_tessellation("0"), ConfigError);
}

TEST_CASE("checkpoint round-trip is bit exact") {
  for (const std::string variant : {"cnn", "stn", "pstn"}) {
    CAPTURE(variant);
    ExperimentConfig c = tiny_config(scratch("ckpt"));
    c.variant = variant;
    c.epochs = 1;
    RunResult r = run_experiment(c);
    const auto bytes = serialize_checkpoint(*r.model, c, r.data.train.class_names, r.data.stats);
    Checkpoint back = parse_checkpoint(bytes);
    CHECK(flat_parameters(*back.model) == flat_parameters(*r.model));
    CHECK(back.class_names == r.data.train.class_names);
    CHECK(to_map(back.config) == to_map(c));
    CHECK(back.stats.has_value() == r.data.stats.has_value());
    CHECK(serialize_checkpoint(*back.model, back.config, back.class_names, back.stats) == bytes);

    const fs::path file = fs::path(c.out) / "m.pstn";
    save_checkpoint(file, *r.model, c, r.data.train.class_names, r.data.stats);
    CHECK(flat_parameters(*load_checkpoint(file).model) == flat_parameters(*r.model));

    const auto f32 = serialize_checkpoint(*r.model, c, r.data.train.class_names, r.data.stats, Dtype::f32);
    CHECK(f32.size() < bytes.size());
    const auto narrow = flat_parameters(*parse_checkpoint(f32).model);
    const auto wide = flat_parameters(*r.model);
    for (std::size_t i = 0; i < wide.size(); ++i) CHECK(narrow[i] == static_cast<double>(static_cast<float>(wide[i])));
  }
}

TEST_CASE("corrupt checkpoints are data errors") {
  ExperimentConfig c = tiny_config(scratch("corrupt"));
  c.epochs = 1;
  RunResult r = run_experiment(c);
  const auto good = serialize_checkpoint(*r.model, c, r.data.train.class_names, r.data.stats);
  auto flipped = good;
  flipped.back() ^= 0x01;
  CHECK_THROWS_AS(parse_checkpoint(flipped), DataError);
  auto magic = good;
  magic[0] = 'X';
  CHECK_THROWS_AS(parse_checkpoint(magic), DataError);
  auto truncated = good;
  truncated.resize(good.size() - 9);
  CHECK_THROWS_AS(parse_checkpoint(truncated), DataError);
  CHECK_THROWS_AS(parse_checkpoint({}), DataError);
  auto manifest = good;
  manifest[14] ^= 0x20;  // inside the JSON manifest
  CHECK_THROWS_AS(parse_checkpoint(manifest), DataError);
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    auto bytes = good;
    bytes[rng.index(bytes.size())] ^= static_cast<std::uint8_t>(1 + rng.index(255));
    try {
      parse_checkpoint(bytes);
    } catch (const DataError&) {
    }
  }
  CHECK_THROWS_AS(load_checkpoint(scratch("missing") / "none.pstn"), DataError);
}

TEST_CASE("cnn memorises a zero-warp synthetic set") {
  ExperimentConfig c = tiny_config(scratch("memorise"));
  c.variant = "cnn";
  c.synth_warp_scale = 0.0;
  c.epochs = 50;
  RunResult r = run_experiment(c);
  const model::Evaluation train_eval = model::evaluate(*r.model, r.data.train);
  CHECK(train_eval.summary.accuracy == 1.0);
}

TEST_CASE("train writes its artifacts and is deterministic") {
  const fs::path a = scratch("train_a"), b = scratch("train_b");
  std::ostringstream console;
  cmd_train(tiny_config(a), console);
  cmd_train(tiny_config(b), console);
  for (const char* f : {"config.txt", "train_log.csv", "checkpoint.pstn", "test_metrics.csv"}) {
    CAPTURE(f);
    CHECK(fs::exists(a / f));
  }
  CHECK(slurp(a / "train_log.csv") == slurp(b / "train_log.csv"));
  CHECK(slurp(a / "test_metrics.csv") == slurp(b / "test_metrics.csv"));
  const auto log = lines_of(a / "train_log.csv");
  REQUIRE(log.size() == 4);
  CHECK(log[0] == "# config_hash=" + config_hash(tiny_config(a)));
  CHECK(log[1] == "epoch,class_loss,kl,val_acc,val_nll");
  CHECK(log[2].rfind("1,", 0) == 0);
  CHECK(load_config(a / "config.txt").out == a.string());
}

TEST_CASE("eval emits bins + 1 metric rows") {
  const fs::path dir = scratch("eval");
  std::ostringstream console;
  ExperimentConfig c = tiny_config(dir);
  cmd_train(c, console);
  EvalRequest req;
  req.checkpoint = dir / "checkpoint.pstn";
  req.metrics = dir / "metrics.csv";
  const eval::Summary s = cmd_eval(req, console);
  const auto lines = lines_of(req.metrics);
  CHECK(lines.size() == 2 + c.bins + 1);
  CHECK(lines[0].rfind("# config_hash=", 0) == 0);
  CHECK(s.accuracy >= 0.0);
  // metrics equal the ones written at training time
  CHECK(slurp(req.metrics) == slurp(dir / "test_metrics.csv"));

  SUBCASE("explicit IDX files and shape mismatch") {
    cmd_synth(c, console);
    req.images = (dir / "test-images-idx3-ubyte").string();
    req.labels = (dir / "test-labels-idx1-ubyte").string();
    CHECK(cmd_eval(req, console).accuracy == doctest::Approx(s.accuracy));
    data::IdxFile wrong;
    wrong.dims = {2, 5, 5};
    wrong.payload.assign(50, 0);
    data::write_idx(dir / "wrong.idx", wrong);
    data::write_idx(dir / "wrong_labels.idx", data::labels_to_idx(std::vector<int>{0, 1}));
    req.images = (dir / "wrong.idx").string();
    req.labels = (dir / "wrong_labels.idx").string();
    CHECK_THROWS_AS(cmd_eval(req, console), DataError);
  }
}

TEST_CASE("augment writes n samples and n theta rows") {
  const fs::path dir = scratch("augment");
  std::ostringstream console;
  ExperimentConfig c = tiny_config(dir);
  cmd_train(c, console);
  cmd_synth(c, console);
  AugmentRequest req;
  req.checkpoint = dir / "checkpoint.pstn";
  req.input = dir / "test-images-idx3-ubyte";
  req.out_dir = dir / "aug";
  const auto thetas = cmd_augment(req, console);
  CHECK(thetas.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(fs::exists(req.out_dir / ("augmented_" + std::to_string(i) + ".idx")));
  CHECK(!fs::exists(req.out_dir / "augmented_3.idx"));
  CHECK(lines_of(req.out_dir / "theta.csv").size() == 2 + 3);

  SUBCASE("zero sigma: every output is the warp at mu") {
    req.sigma_scale = 0.0;
    req.out_dir = dir / "aug0";
    const auto t0 = cmd_augment(req, console);
    CHECK(t0[0] == t0[1]);
    CHECK(t0[1] == t0[2]);
    const std::string first = slurp(req.out_dir / "augmented_0.idx");
    CHECK(slurp(req.out_dir / "augmented_1.idx") == first);
    CHECK(slurp(req.out_dir / "augmented_2.idx") == first);
  }
  SUBCASE("sample std matches the posterior sigma") {
    req.n = 2000;
    req.out_dir = dir / "aug_many";
    const auto many = cmd_augment(req, console);
    Checkpoint ck = load_checkpoint(req.checkpoint);
    data::Dataset one = data::load_idx_dataset(req.input, dir / "test-labels-idx1-ubyte");
    // the checkpoint normalises with its own stats before localizing
    const auto& st = *ck.stats;
    nn::Tensor x({1, 1, 16, 16});
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = (one.inputs[k] - st.mean[0]) / st.std[0];
    const model::GaussianPosterior g = ck.model->localize(x).at(0);
    for (std::size_t j = 0; j < g.dim(); ++j) {
      double m = 0.0, sq = 0.0;
      for (const auto& t : many) m += t[j] / many.size();
      for (const auto& t : many) sq += (t[j] - m) * (t[j] - m);
      const double sd = std::sqrt(sq / (many.size() - 1));
      CHECK(std::abs(sd - g.sigma[j]) < 5.0 * g.sigma[j] / std::sqrt(2.0 * many.size()));
    }
  }
  SUBCASE("n < 1 and cnn checkpoints are usage errors") {
    req.n = 0;
    CHECK_THROWS_AS(cmd_augment(req, console), ConfigError);
    ExperimentConfig cc = tiny_config(dir / "cnn");
    cc.variant = "cnn";
    cmd_train(cc, console);
    req.n = 1;
    req.checkpoint = dir / "cnn" / "checkpoint.pstn";
    CHECK_THROWS_AS(cmd_augment(req, console), ConfigError);
  }
}

TEST_CASE("augment on series writes delimited text") {
  const fs::path dir = scratch("augment_1d");
  std::ostringstream console;
  ExperimentConfig c = tiny_config(dir);
  c.synth_kind = "warped_series_1d";
  c.synth_classes = 4;
  c.family = "diffeo";
  cmd_train(c, console);
  cmd_synth(c, console);
  AugmentRequest req;
  req.checkpoint = dir / "checkpoint.pstn";
  req.input = dir / "test.txt";
  req.out_dir = dir / "aug";
  cmd_augment(req, console);
  for (int i = 0; i < 3; ++i) {
    const data::Dataset d = data::read_ucr(req.out_dir / ("augmented_" + std::to_string(i) + ".txt"));
    CHECK(d.inputs.shape() == nn::Shape{1, 1, 64});
  }
}

TEST_CASE("sweep over k with two repeats") {
  const fs::path dir = scratch("sweep");
  std::ostringstream console;
  SweepRequest req;
  req.base = tiny_config(dir);
  req.base.synth_train = 100;
  req.base.epochs = 1;
  req.param = "subset";
  req.values = {"10", "100"};
  req.repeats = 2;
  cmd_sweep(req, console);
  std::size_t runs = 0;
  for (const char* v : {"subset=10", "subset=100"})
    for (const char* s : {"seed0", "seed1"}) runs += fs::exists(dir / v / s / "train_log.csv");
  CHECK(runs == 4);
  const auto agg = lines_of(dir / "sweep.csv");
  REQUIRE(agg.size() == 2 + 2);
  CHECK(agg[2].rfind("subset,10,2,", 0) == 0);
  CHECK(agg[3].rfind("subset,100,2,", 0) == 0);
  CHECK(lines_of(dir / "runs.csv").size() == 2 + 4);
  CHECK(lines_of(dir / "reliability.csv").size() == 2 + 2 * req.base.bins);

  // accuracy_std is the sample (n - 1) standard deviation of the run rows
  const auto run_lines = lines_of(dir / "runs.csv");
  const auto field = [](const std::string& line, std::size_t k) {
    std::stringstream ss(line);
    std::string f;
    for (std::size_t i = 0; i <= k; ++i) std::getline(ss, f, ',');
    return std::stod(f);
  };
  const double a0 = field(run_lines[2], 4), a1 = field(run_lines[3], 4);
  const double m = (a0 + a1) / 2;
  const double expected = std::sqrt(((a0 - m) * (a0 - m) + (a1 - m) * (a1 - m)) / 1.0);
  CHECK(field(agg[2], 3) == doctest::Approx(m));
  CHECK(field(agg[2], 4) == doctest::Approx(expected));

  req.values = {};
  CHECK_THROWS_AS(cmd_sweep(req, console), ConfigError);
  req.values = {"1"};
  req.param = "seed";
  CHECK_THROWS_AS(cmd_sweep(req, console), ConfigError);
}

TEST_CASE("command line exit codes") {
  const fs::path dir = scratch("exit");
  CHECK(cli({}) == 2);
  CHECK(cli({"bogus"}) == 2);
  CHECK(cli({"train", "--no_such_flag", "1"}) == 2);
  CHECK(cli({"train", "--variant", "bayes", "--out", dir.string()}) == 2);
  CHECK(cli({"eval", "--checkpoint", (dir / "missing.pstn").string()}) == 3);
  CHECK(cli({"train", "--data", "idx", "--train_images", (dir / "none").string(), "--train_labels",
             (dir / "none").string(), "--out", dir.string()}) == 3);
  CHECK(cli({"train", "--data", "synth", "--synth_train", "20", "--synth_test", "20", "--epochs", "1", "--lr_classifier",
             "1e308", "--weight_decay", "0", "--out", (dir / "nan").string()}) == 4);
  CHECK(cli({"train", "--data", "synth", "--synth_train", "20", "--synth_test", "20", "--epochs", "1", "--out",
             (dir / "ok").string()}) == 0);
  CHECK(fs::exists(dir / "ok" / "checkpoint.pstn"));
  CHECK(cli({"eval", "--checkpoint", (dir / "ok" / "checkpoint.pstn").string(), "--metrics",
             (dir / "m.csv").string()}) == 0);
  CHECK(cli({"augment", "--checkpoint", (dir / "ok" / "checkpoint.pstn").string(), "--input",
             (dir / "none").string(), "--out", (dir / "aug").string()}) == 3);
  CHECK(cli({"augment", "--checkpoint", (dir / "ok" / "checkpoint.pstn").string(), "--input",
             (dir / "none").string(), "-n", "0"}) == 2);

  std::ofstream(dir / "run.cfg") << "data = synth\nsynth_train = 20\nsynth_test = 20\nepochs = 1\nvariant = cnn\n";
  CHECK(cli({"train", "--config", (dir / "run.cfg").string(), "--out", (dir / "cfg").string()}) == 0);
  CHECK(load_config(dir / "cfg" / "config.txt").variant == "cnn");
}

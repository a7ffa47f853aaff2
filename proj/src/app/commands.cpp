#include "pstn/app/commands.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "CLI11.hpp"
#include "pstn/common/error.hpp"
#include "pstn/data/idx.hpp"
#include "pstn/data/synth.hpp"
#include "pstn/data/ucr.hpp"
#include "pstn/eval/report.hpp"

namespace pstn::app {
namespace {

namespace fs = std::filesystem;
using eval::format_number;

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

void unify_classes(data::Dataset& a, data::Dataset& b) {
  const std::size_t c = std::max(a.num_classes, b.num_classes);
  for (data::Dataset* d : {&a, &b}) {
    d->num_classes = c;
    while (d->class_names.size() < c) d->class_names.push_back(std::to_string(d->class_names.size()));
  }
}

data::SynthSpec synth_spec(const ExperimentConfig& c, std::size_t n, std::uint64_t seed) {
  data::SynthSpec s;
  s.kind = data::parse_synth_kind(c.synth_kind);
  s.n = n;
  s.classes = c.synth_classes;
  s.warp_scale = c.synth_warp_scale;
  s.noise = c.synth_noise;
  s.seed = seed;
  return s;
}

struct RawData {
  data::Dataset train;
  std::optional<data::Dataset> test;
};

RawData load_raw(const ExperimentConfig& c) {
  RawData raw;
  if (c.data == "idx") {
    if (c.train_images.empty() || c.train_labels.empty()) {
      throw ConfigError("data=idx needs train_images and train_labels");
    }
    raw.train = data::load_idx_dataset(c.train_images, c.train_labels);
    if (!c.test_images.empty() || !c.test_labels.empty()) {
      raw.test = data::load_idx_dataset(c.test_images, c.test_labels);
    }
  } else if (c.data == "ucr") {
    if (c.train_series.empty()) throw ConfigError("data=ucr needs train_series");
    raw.train = data::read_ucr(c.train_series);
    if (!c.test_series.empty()) raw.test = data::read_ucr(c.test_series, &raw.train.class_names);
  } else {
    raw.train = data::synth_dataset(synth_spec(c, c.synth_train, 2 * c.synth_seed));
    if (c.synth_test) raw.test = data::synth_dataset(synth_spec(c, c.synth_test, 2 * c.synth_seed + 1));
  }
  if (raw.test) {
    if (raw.test->item_shape() != raw.train.item_shape()) {
      throw DataError("test items " + nn::to_string(raw.test->item_shape()) + " differ from training items " +
                      nn::to_string(raw.train.item_shape()));
    }
    unify_classes(raw.train, *raw.test);
  }
  return raw;
}

bool wants_normalization(const ExperimentConfig& c, const data::Dataset& train) {
  if (c.normalize == "auto") return train.inputs.rank() == 4;  // images yes, series no
  return c.normalize == "true";
}

nn::Tensor item_tensor(const data::Dataset& ds, std::size_t i) {
  const auto v = ds.inputs.slice(i);
  return nn::Tensor(ds.item_shape(), std::vector<Scalar>(v.begin(), v.end()));
}

data::Dataset apply_stats(const data::Dataset& ds, const std::optional<data::NormalizationStats>& stats) {
  return stats ? data::normalize(ds, *stats) : ds;
}

void write_eval_outputs(const fs::path& metrics, const eval::Summary& s, const std::string& hash) {
  std::ofstream out = open_out(metrics);
  eval::write_metrics_csv(out, s, hash);
}

std::string summary_line(const eval::Summary& s) {
  return "accuracy=" + format_number(s.accuracy) + " nll=" + format_number(s.nll) +
         " ece=" + format_number(s.ece) + " mean_entropy=" + format_number(s.mean_entropy);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double sample_std(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

std::vector<std::size_t> parse_tessellation(const std::string& text) {
  std::vector<std::size_t> cells;
  if (text.empty()) return cells;
  std::stringstream ss(text);
  std::string part;
  if (text.back() == 'x') throw ConfigError("config field 'tessellation': expected N or NxM, got '" + text + "'");
  while (std::getline(ss, part, 'x')) {
    std::size_t v = 0;
    const auto res = std::from_chars(part.data(), part.data() + part.size(), v);
    if (part.empty() || res.ec != std::errc() || res.ptr != part.data() + part.size() || v == 0) {
      throw ConfigError("config field 'tessellation': expected N or NxM, got '" + text + "'");
    }
    cells.push_back(v);
  }
  if (cells.size() > 2) throw ConfigError("config field 'tessellation': at most 2 dimensions");
  return cells;
}

PreparedData prepare_data(const ExperimentConfig& c) {
  RawData raw = load_raw(c);
  PreparedData p;
  data::Dataset train = std::move(raw.train);
  if (c.subset) train = data::subsample(train, {c.subset, c.seed, c.subset_balanced});
  if (c.validation_fraction < 0.0 || c.validation_fraction >= 1.0) {
    throw ConfigError("config field 'validation_fraction': must be in [0, 1)");
  }
  if (c.validation_fraction > 0.0) {
    data::Split s = data::split(train, 1.0 - c.validation_fraction, c.seed);
    train = std::move(s.train);
    p.validation = std::move(s.validation);
  }
  if (wants_normalization(c, train)) {
    p.stats = data::compute_stats(train);
    p.train = data::normalize(train, p.stats);
    if (p.validation) p.validation = data::normalize(*p.validation, p.stats);
    if (raw.test) p.test = data::normalize(*raw.test, p.stats);
  } else {
    p.train = std::move(train);
    p.test = std::move(raw.test);
  }
  return p;
}

model::ModelSpec model_spec(const ExperimentConfig& c, const data::Dataset& train) {
  model::ModelSpec s;
  s.input_shape = train.item_shape();
  s.classes = train.num_classes;
  s.variant = model::parse_variant(c.variant);
  s.family = model::parse_family(c.family);
  s.sigma_p = c.sigma_p;
  s.sigma_noise = c.sigma_noise;
  s.s_train = c.s_train;
  s.s_test = c.s_test;
  s.kl_weight = c.kl_weight;
  s.tessellation.cells = parse_tessellation(c.tessellation);
  s.integration_steps = c.integration_steps;
  s.seed = c.seed;
  return model::resolve(s);
}

model::TrainOptions train_options(const ExperimentConfig& c, std::size_t train_size) {
  model::TrainOptions o;
  o.epochs = resolved_epochs(c, train_size);
  o.batch_size = c.batch_size;
  o.lr_classifier = c.lr_classifier;
  o.lr_localizer = c.lr_localizer;
  o.weight_decay = c.weight_decay;
  o.decoupled_weight_decay = c.decoupled_weight_decay;
  o.sigma_da = c.sigma_da;
  o.seed = c.seed;
  return o;
}

void write_train_log_header(std::ostream& out, const std::string& config_hash) {
  out << "# config_hash=" << config_hash << "\nepoch,class_loss,kl,val_acc,val_nll\n";
}

void write_train_log_row(std::ostream& out, const model::EpochLog& log) {
  out << log.epoch << ',' << format_number(log.class_loss) << ',' << format_number(log.kl) << ','
      << format_number(log.val_acc) << ',' << format_number(log.val_nll) << '\n';
  out.flush();
}

RunResult run_experiment(const ExperimentConfig& config, std::ostream* log_csv) {
  RunResult r;
  r.data = prepare_data(config);
  r.model = std::make_unique<model::Model>(model_spec(config, r.data.train));
  if (log_csv) write_train_log_header(*log_csv, config_hash(config));
  const auto opts = train_options(config, r.data.train.size());
  r.log = model::train(*r.model, r.data.train, r.data.validation ? &*r.data.validation : nullptr, opts,
                       [&](const model::EpochLog& e) {
                         if (log_csv) write_train_log_row(*log_csv, e);
                       });
  if (r.data.test) {
    model::EvalOptions eo;
    eo.seed = config.seed;
    eo.batch_size = config.eval_batch;
    eo.bins = config.bins;
    r.test = model::evaluate(*r.model, *r.data.test, eo);
  }
  return r;
}

void cmd_train(const ExperimentConfig& config, std::ostream& console) {
  const fs::path dir = config.out;
  fs::create_directories(dir);
  {
    std::ofstream cfg = open_out(dir / "config.txt");
    cfg << to_text(config);
  }
  std::ofstream log = open_out(dir / "train_log.csv");
  RunResult r = run_experiment(config, &log);
  save_checkpoint(dir / "checkpoint.pstn", *r.model, config, r.data.train.class_names, r.data.stats);
  console << "trained " << model::to_string(r.model->variant()) << " (" << r.model->parameter_count()
          << " parameters) on " << r.data.train.size() << " examples for " << r.log.size() << " epochs\n";
  if (r.test) {
    write_eval_outputs(dir / "test_metrics.csv", r.test->summary, config_hash(config));
    console << "test " << summary_line(r.test->summary) << '\n';
  }
  console << "wrote " << (dir / "checkpoint.pstn").string() << '\n';
}

eval::Summary cmd_eval(const EvalRequest& req, std::ostream& console) {
  Checkpoint ck = load_checkpoint(req.checkpoint);
  data::Dataset ds;
  if (!req.images.empty() || !req.labels.empty()) {
    ds = data::load_idx_dataset(req.images, req.labels);
  } else if (!req.series.empty()) {
    ds = data::read_ucr(req.series, &ck.class_names);
  } else {
    ExperimentConfig c = ck.config;
    c.subset = 0;
    c.validation_fraction = 0.0;
    std::optional<data::Dataset> test = load_raw(c).test;
    if (!test) throw ConfigError("no evaluation data: pass --images/--labels or --series");
    ds = std::move(*test);
  }
  if (ds.item_shape() != ck.spec.input_shape) {
    throw DataError("data items " + nn::to_string(ds.item_shape()) + " do not match the checkpoint input " +
                    nn::to_string(ck.spec.input_shape));
  }
  if (ds.num_classes > ck.spec.classes) throw DataError("data has more classes than the checkpoint");
  ds = apply_stats(ds, ck.stats);
  model::EvalOptions eo;
  eo.samples = req.samples;
  eo.sigma_scale = req.sigma_scale;
  eo.seed = req.seed;
  eo.batch_size = ck.config.eval_batch;
  eo.bins = ck.config.bins;
  const model::Evaluation ev = model::evaluate(*ck.model, ds, eo);
  write_eval_outputs(req.metrics, ev.summary, config_hash(ck.config));
  console << summary_line(ev.summary) << "\nwrote " << req.metrics.string() << '\n';
  return ev.summary;
}

std::vector<std::vector<double>> cmd_augment(const AugmentRequest& req, std::ostream& console) {
  if (req.n < 1) throw ConfigError("augment: n must be >= 1");
  Checkpoint ck = load_checkpoint(req.checkpoint);
  const model::Model& m = *ck.model;
  if (!m.has_localizer()) throw ConfigError("augment: the cnn variant has no posterior to sample");

  // One input item, in the checkpoint's normalised space.
  data::Dataset one;
  const bool images = ck.spec.input_shape.size() == 3;
  if (images) {
    nn::Tensor t = data::idx_to_tensor(data::read_idx(req.input));
    const std::size_t item = nn::element_count(ck.spec.input_shape);
    if (t.size() < item || t.size() % item != 0) {
      throw DataError("augment: " + req.input.string() + " does not hold " + nn::to_string(ck.spec.input_shape) +
                      " images");
    }
    nn::Shape shape = ck.spec.input_shape;
    shape.insert(shape.begin(), 1);
    one.inputs = nn::Tensor(shape, std::vector<Scalar>(t.values().begin(), t.values().begin() + item));
    one.labels = {0};
  } else {
    data::Dataset all = data::read_ucr(req.input);
    if (all.item_shape() != ck.spec.input_shape) throw DataError("augment: series length does not match");
    one = all.select(std::vector<std::size_t>{0});
  }
  one.num_classes = std::max<std::size_t>(1, one.num_classes);
  if (one.class_names.empty()) one.class_names = {"0"};
  const data::Dataset norm = apply_stats(one, ck.stats);
  const nn::Tensor source = item_tensor(norm, 0);

  const model::PosteriorBatch post = m.localize(norm.inputs);
  model::GaussianPosterior g = post.at(0);
  for (double& s : g.sigma) s *= req.sigma_scale;
  Rng rng(req.seed);
  fs::create_directories(req.out_dir);
  std::ofstream theta_csv = open_out(req.out_dir / "theta.csv");
  eval::CsvWriter writer(theta_csv, config_hash(ck.config), [&] {
    std::vector<std::string> h{"sample"};
    for (std::size_t j = 0; j < g.dim(); ++j) h.push_back("theta_" + std::to_string(j));
    return h;
  }());

  std::vector<std::vector<double>> thetas;
  for (std::size_t i = 0; i < req.n; ++i) {
    const model::ThetaSample s = model::sample_theta(g, rng);
    nn::Tensor out = model::augment(*m.transform(), source, s.theta, ck.spec.sigma_noise, rng);
    // Back to the input's value range.
    if (ck.stats) {
      const std::size_t per = out.size() / ck.stats->mean.size();
      for (std::size_t k = 0; k < out.size(); ++k) {
        const std::size_t ch = k / per;
        out[k] = static_cast<Scalar>(out[k] * ck.stats->std[ch] + ck.stats->mean[ch]);
      }
    }
    if (images) {
      data::write_idx(req.out_dir / ("augmented_" + std::to_string(i) + ".idx"), data::tensor_to_idx(out));
    } else {
      data::Dataset d;
      d.inputs = out.reshaped({1, 1, out.size()});
      d.labels = {one.labels[0]};
      d.num_classes = one.num_classes;
      d.class_names = one.class_names;
      std::ofstream f = open_out(req.out_dir / ("augmented_" + std::to_string(i) + ".txt"));
      data::write_ucr(f, d);
    }
    std::vector<std::string> row{std::to_string(i)};
    for (double t : s.theta) row.push_back(format_number(t));
    writer.row(row);
    thetas.push_back(s.theta);
  }
  console << "wrote " << req.n << " augmented samples and theta.csv to " << req.out_dir.string() << '\n';
  return thetas;
}

void cmd_sweep(const SweepRequest& req, std::ostream& console) {
  if (req.values.empty()) throw ConfigError("sweep: at least one value is required");
  if (req.repeats < 1) throw ConfigError("sweep: repeats must be >= 1");
  if (req.param == "seed" || req.param == "out") throw ConfigError("sweep: cannot sweep '" + req.param + "'");
  get_field(req.base, req.param);  // validates the key

  const fs::path dir = req.base.out;
  fs::create_directories(dir);
  const std::string hash = config_hash(req.base);
  std::ofstream agg = open_out(dir / "sweep.csv");
  eval::CsvWriter agg_csv(agg, hash,
                          {"param", "value", "runs", "accuracy_mean", "accuracy_std", "nll_mean", "nll_std",
                           "ece_mean", "ece_std", "mean_entropy_mean"});
  std::ofstream runs = open_out(dir / "runs.csv");
  eval::CsvWriter runs_csv(runs, hash,
                           {"param", "value", "seed", "config_hash", "accuracy", "nll", "ece", "mean_entropy"});
  std::ofstream rel = open_out(dir / "reliability.csv");
  eval::CsvWriter rel_csv(rel, hash,
                          {"param", "value", "bin", "lower", "upper", "count", "mean_confidence", "accuracy"});

  for (const std::string& value : req.values) {
    std::vector<double> acc, nll, ece, ent;
    std::vector<eval::PredictionRecord> pooled;
    for (std::size_t r = 0; r < req.repeats; ++r) {
      ExperimentConfig c = req.base;
      set_field(c, req.param, value);
      c.seed = req.base.seed + r;
      c.out = (dir / (req.param + "=" + value) / ("seed" + std::to_string(c.seed))).string();
      fs::create_directories(c.out);
      std::ofstream log = open_out(fs::path(c.out) / "train_log.csv");
      RunResult res = run_experiment(c, &log);
      if (!res.test) throw ConfigError("sweep: the config has no test split");
      const eval::Summary& s = res.test->summary;
      acc.push_back(s.accuracy);
      nll.push_back(s.nll);
      ece.push_back(s.ece);
      ent.push_back(s.mean_entropy);
      pooled.insert(pooled.end(), res.test->records.begin(), res.test->records.end());
      runs_csv.row({req.param, value, std::to_string(c.seed), config_hash(c), format_number(s.accuracy),
                    format_number(s.nll), format_number(s.ece), format_number(s.mean_entropy)});
      console << req.param << '=' << value << " seed=" << c.seed << ' ' << summary_line(s) << '\n';
    }
    const double am = mean_of(acc), nm = mean_of(nll), em = mean_of(ece);
    agg_csv.row({req.param, value, std::to_string(req.repeats), format_number(am), format_number(sample_std(acc, am)),
                 format_number(nm), format_number(sample_std(nll, nm)), format_number(em),
                 format_number(sample_std(ece, em)), format_number(mean_of(ent))});
    // One reliability curve per value, pooled over the repetitions.
    const eval::Reliability curve = eval::reliability(pooled, req.base.bins);
    for (std::size_t b = 0; b < curve.bins.size(); ++b) {
      const auto& bin = curve.bins[b];
      rel_csv.row({req.param, value, std::to_string(b), format_number(bin.lower), format_number(bin.upper),
                   std::to_string(bin.count), format_number(bin.mean_confidence), format_number(bin.accuracy)});
    }
  }
  console << "wrote sweep.csv, runs.csv and reliability.csv to " << dir.string() << '\n';
}

void cmd_synth(const ExperimentConfig& config, std::ostream& console) {
  ExperimentConfig c = config;
  c.data = "synth";
  const RawData raw = load_raw(c);
  const fs::path dir = c.out;
  fs::create_directories(dir);
  const auto write = [&](const data::Dataset& d, const std::string& name) {
    if (d.inputs.rank() == 4) {
      // IDX has no sign: values are clamped to [0, 1] on export.
      const nn::Tensor images = d.inputs.reshaped({d.size(), d.inputs.dim(2), d.inputs.dim(3)});
      data::write_idx(dir / (name + "-images-idx3-ubyte"), data::tensor_to_idx(images));
      data::write_idx(dir / (name + "-labels-idx1-ubyte"), data::labels_to_idx(d.labels));
    } else {
      std::ofstream f = open_out(dir / (name + ".txt"));
      data::write_ucr(f, d);
    }
  };
  write(raw.train, "train");
  if (raw.test) write(*raw.test, "test");
  console << "wrote " << data::to_string(data::parse_synth_kind(c.synth_kind)) << " to " << dir.string() << '\n';
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Probabilistic spatial transformer networks: train, evaluate, augment, sweep"};
  app.require_subcommand(1);

  // Every config key is also a flag on the config-driven verbs.
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;
  const auto add_config_flags = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value or JSON config file");
    for (const std::string& key : config_keys()) {
      sub->add_option_function<std::string>(
          "--" + key, [&overrides, key](const std::string& v) { overrides.emplace_back(key, v); },
          "config field " + key);
    }
  };
  const auto build_config = [&] {
    ExperimentConfig c = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    for (const auto& [k, v] : overrides) set_field(c, k, v);
    return c;
  };

  CLI::App* train = app.add_subcommand("train", "train a model; writes checkpoint and training log");
  add_config_flags(train);

  EvalRequest er;
  CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint; writes the metrics CSV");
  ev->add_option("--checkpoint", er.checkpoint, "checkpoint file")->required();
  ev->add_option("--images", er.images, "IDX image file");
  ev->add_option("--labels", er.labels, "IDX label file");
  ev->add_option("--series", er.series, "delimited series file");
  ev->add_option("--samples", er.samples, "posterior samples S (default s_test)");
  ev->add_option("--sigma-scale", er.sigma_scale, "multiply posterior sigma at prediction time");
  ev->add_option("--seed", er.seed, "sampling seed");
  ev->add_option("--metrics", er.metrics, "output CSV");

  AugmentRequest ar;
  CLI::App* aug = app.add_subcommand("augment", "write posterior-sampled warps of one input");
  aug->add_option("--checkpoint", ar.checkpoint, "checkpoint file")->required();
  aug->add_option("--input", ar.input, "IDX image file or delimited series file")->required();
  aug->add_option("-n,--n", ar.n, "number of samples");
  aug->add_option("--out", ar.out_dir, "output directory");
  aug->add_option("--seed", ar.seed, "sampling seed");
  aug->add_option("--sigma-scale", ar.sigma_scale, "multiply posterior sigma");

  SweepRequest sr;
  std::string values;
  CLI::App* sweep = app.add_subcommand("sweep", "repeat train + test over a list of values of one field");
  add_config_flags(sweep);
  sweep->add_option("--param", sr.param, "config field to sweep (e.g. sigma_p, subset)")->required();
  sweep->add_option("--values", values, "comma-separated values")->required();
  sweep->add_option("--repeats", sr.repeats, "seeded repetitions per value");

  CLI::App* synth = app.add_subcommand("synth", "export the configured synthetic dataset");
  add_config_flags(synth);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (train->parsed()) {
      cmd_train(build_config(), std::cout);
    } else if (ev->parsed()) {
      cmd_eval(er, std::cout);
    } else if (aug->parsed()) {
      cmd_augment(ar, std::cout);
    } else if (sweep->parsed()) {
      sr.base = build_config();
      sr.values = split_list(values);
      cmd_sweep(sr, std::cout);
    } else if (synth->parsed()) {
      cmd_synth(build_config(), std::cout);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace pstn::app

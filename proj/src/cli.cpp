#include "pforest/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pforest/boosting.hpp"
#include "pforest/datasets.hpp"
#include "pforest/forest_json.hpp"
#include "pforest/generate.hpp"
#include "pforest/heatmap.hpp"
#include "pforest/neural.hpp"
#include "pforest/oracle.hpp"
#include "pforest/rng.hpp"
#include "pforest/smoothing.hpp"
#include "pforest/training.hpp"

namespace fs = std::filesystem;

namespace pforest::cli {

namespace {

std::string num(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> parts;
  std::string current;
  for (char c : text) {
    if (c == ',') {
      parts.push_back(current);
      current.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      current.push_back(c);
    }
  }
  parts.push_back(current);
  // A fully empty string means "no entries" rather than one empty entry.
  if (parts.size() == 1 && parts[0].empty()) parts.clear();
  return parts;
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> values;
  for (const std::string& token : split_commas(text)) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(token, &used);
    } catch (const std::exception&) {
      used = std::string::npos;
    }
    if (used != token.size() || token.empty()) {
      throw std::invalid_argument(std::string(what) + ": bad integer '" + token + "'");
    }
    values.push_back(v);
  }
  return values;
}

std::vector<double> parse_double_list(const std::string& text, const char* what) {
  std::vector<double> values;
  for (const std::string& token : split_commas(text)) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      used = std::string::npos;
    }
    if (used != token.size() || token.empty()) {
      throw std::invalid_argument(std::string(what) + ": bad number '" + token + "'");
    }
    values.push_back(v);
  }
  return values;
}

LeafInit leaf_init_from_name(const std::string& name) {
  if (name == "binary01") return LeafInit::binary01;
  if (name == "uniform01") return LeafInit::uniform01;
  if (name == "zero") return LeafInit::zero;
  throw std::invalid_argument("unknown leaf init '" + name +
                              "' (expected binary01, uniform01, or zero)");
}

SigmaSchedule schedule_from_args(const std::string& kind, double sigma, double sigma_end,
                                 double decay) {
  if (kind == "fixed") return SigmaSchedule::fixed_sigma(sigma);
  if (kind == "linear") return SigmaSchedule::linear(sigma, sigma_end);
  if (kind == "exponential") return SigmaSchedule::exponential(sigma, decay);
  throw std::invalid_argument("unknown schedule '" + kind +
                              "' (expected fixed, linear, or exponential)");
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open '" + path + "' for writing");
  file << content;
  if (!file) throw std::runtime_error("write failed for '" + path + "'");
}

std::string path_join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory '" + dir + "': " + ec.message());
}

// Shuffle-split into (rest, valid) with round(n * valid_fraction) validation
// rows; used when the test set comes from a separate file.
std::pair<Dataset, Dataset> carve_validation(const Dataset& data, double valid_fraction,
                                             std::uint64_t seed) {
  if (!(valid_fraction > 0.0 && valid_fraction < 1.0)) {
    throw std::invalid_argument("valid fraction must lie in (0, 1)");
  }
  if (data.rows < 2) throw std::invalid_argument("need at least 2 rows to split");
  std::vector<int> indices(static_cast<std::size_t>(data.rows));
  for (int i = 0; i < data.rows; ++i) indices[static_cast<std::size_t>(i)] = i;
  Rng rng(mix_seed(seed, 0x2B17ull));
  rng.shuffle(indices);
  int n_valid = static_cast<int>(std::lround(valid_fraction * data.rows));
  n_valid = std::clamp(n_valid, 1, data.rows - 1);

  Dataset train;
  Dataset valid;
  train.cols = valid.cols = data.cols;
  train.feature_names = valid.feature_names = data.feature_names;
  for (int k = 0; k < data.rows; ++k) {
    Dataset& dst = (k < data.rows - n_valid) ? train : valid;
    const int i = indices[static_cast<std::size_t>(k)];
    dst.push_row(data.row(i), data.labels[static_cast<std::size_t>(i)]);
  }
  return {std::move(train), std::move(valid)};
}

int fail(std::ostream& err, const std::exception& e) {
  err << "error: " << e.what() << "\n";
  return 1;
}

}  // namespace

std::string format_relative_delta(double initial, double final_value) {
  if (initial == 0.0) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%+.1f%%", 100.0 * (final_value - initial) / initial);
  return buf;
}

int run_gen_data(const GenDataArgs& args, std::ostream& out, std::ostream& err) {
  try {
    if (args.out.empty()) throw std::invalid_argument("gen-data: --out is required");
    SyntheticSpec spec;
    spec.kind = synthetic_from_name(args.kind);
    spec.n = args.n;
    spec.noise = args.noise;
    spec.seed = args.seed;
    spec.num_blobs = args.blobs;
    Dataset data = generate_dataset(spec);
    if (args.embed_dim > 0) {
      data = synthesize_embeddings(data, args.embed_dim, args.embed_scale,
                                   mix_seed(args.seed, 3));
    }
    write_csv(data, args.out);
    out << "wrote " << data.rows << " rows x " << data.cols << " features to " << args.out
        << "\n";
    return 0;
  } catch (const std::exception& e) {
    return fail(err, e);
  }
}

int run_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  try {
    if (args.train_csv.empty()) throw std::invalid_argument("train: --train is required");
    const Dataset full = load_csv(args.train_csv);

    Dataset train;
    Dataset valid;
    Dataset test;
    if (args.test_csv.empty()) {
      const double vf = args.valid_fraction;
      SplitResult split = split_dataset(full, 1.0 - 2.0 * vf, vf, vf, args.seed);
      train = std::move(split.train);
      valid = std::move(split.valid);
      test = std::move(split.test);
    } else {
      test = load_csv(args.test_csv);
      if (test.cols != full.cols) {
        throw std::invalid_argument("train: test file has " + std::to_string(test.cols) +
                                    " features but train file has " +
                                    std::to_string(full.cols));
      }
      auto carved = carve_validation(full, args.valid_fraction, args.seed);
      train = std::move(carved.first);
      valid = std::move(carved.second);
    }

    Model model;
    model.loss = loss_from_name(args.loss);
    model.perturb.sigma = args.sigma;
    const int out_dim = (model.loss == LossKind::softmax_cross_entropy) ? args.classes : 1;
    if (args.layers.empty()) {
      model.embed = make_identity_net(full.cols);
    } else {
      Rng net_rng(mix_seed(args.seed, 1));
      model.embed = make_mlp(full.cols, parse_int_list(args.layers, "train: --layers"),
                             Activation::relu, Activation::sigmoid, net_rng);
    }
    Rng forest_rng(mix_seed(args.seed, 2));
    model.forest =
        generate_random_forest(args.trees, model.embed.output_dim, args.depth,
                               leaf_init_from_name(args.leaf_init), out_dim, forest_rng);

    TrainConfig config;
    config.batch_size = args.batch;
    config.epochs = args.epochs;
    config.patience = args.patience;
    config.schedule = schedule_from_args(args.schedule, args.sigma, args.sigma_end, args.decay);
    config.adam.lr = args.lr;
    config.seed = args.seed;

    out << "rows: train=" << train.rows << " valid=" << valid.rows << " test=" << test.rows
        << "\n";
    TrainHistory history = fit(model, train, valid, config);
    out << "best_epoch " << history.best_epoch << " best_valid_loss "
        << num(history.best_valid_loss, 6) << "\n";
    out << "test_accuracy " << num(accuracy(model, test, /*hard=*/true), 4) << "\n";
    if (model.loss == LossKind::squared_error) {
      out << "test_mse " << num(mean_squared_error(model, test, /*hard=*/true), 6) << "\n";
    }

    ensure_dir(args.out_dir);
    const std::string forest_path = path_join(args.out_dir, "forest.json");
    const std::string embed_path = path_join(args.out_dir, "embedding.json");
    const std::string metrics_path = path_join(args.out_dir, "metrics.ndjson");
    save_forest(model.forest, forest_path);
    save_net(model.embed, embed_path);
    write_metrics(history, metrics_path);
    out << "wrote " << forest_path << " " << embed_path << " " << metrics_path << "\n";
    return 0;
  } catch (const std::exception& e) {
    return fail(err, e);
  }
}

int run_finetune(const FinetuneArgs& args, std::ostream& out, std::ostream& err) {
  try {
    if (args.data_csv.empty()) throw std::invalid_argument("finetune: --data is required");
    const Dataset full = load_csv(args.data_csv);
    SplitResult split = split_dataset(full, 0.8, 0.1, 0.1, args.seed);

    Model model;
    model.loss = loss_from_name(args.bt_loss);
    model.perturb.sigma = args.sigma;
    if (args.forest_path.empty()) {
      BoostConfig boost;
      boost.num_trees = args.bt_rounds;
      boost.max_depth = args.bt_depth;
      boost.learning_rate = args.bt_lr;
      boost.loss = model.loss;
      model.forest = train_boosted_forest(split.train, boost);
      out << "boosted " << model.forest.trees.size() << " trees (incl. prior) on "
          << split.train.rows << " rows\n";
    } else {
      model.forest = load_forest(args.forest_path);
    }
    if (model.forest.input_dim != full.cols) {
      throw std::invalid_argument(
          "finetune: forest expects " + std::to_string(model.forest.input_dim) +
          " inputs but the data has " + std::to_string(full.cols) + " features");
    }

    if (args.train_leaves) {
      err << "warning: --train-leaves is ignored; fine-tuning adapts the embedding "
             "and keeps the forest (leaves included) frozen\n";
    }
    model.leaf_trainable = false;

    // Baseline: the raw embedding straight into the forest.
    model.embed = make_identity_net(full.cols);
    validate_model(model);
    const double initial = accuracy(model, split.test, /*hard=*/true);

    // Trainable adapter: one affine d -> d layer starting at the identity, so
    // fine-tuning starts exactly at the baseline model.
    Layer adapter;
    adapter.in_dim = adapter.out_dim = full.cols;
    adapter.activation = Activation::identity;
    adapter.weights.assign(static_cast<std::size_t>(full.cols) * full.cols, 0.0);
    for (int i = 0; i < full.cols; ++i) {
      adapter.weights[static_cast<std::size_t>(i) * full.cols + i] = 1.0;
    }
    adapter.biases.assign(static_cast<std::size_t>(full.cols), 0.0);
    model.embed.layers = {std::move(adapter)};

    const std::string frozen = export_forest(model.forest);

    TrainConfig config;
    config.batch_size = args.batch;
    config.epochs = args.epochs;
    config.patience = args.patience;
    config.schedule = SigmaSchedule::fixed_sigma(args.sigma);
    config.adam.lr = args.lr;
    config.seed = args.seed;
    TrainHistory history = fit(model, split.train, split.valid, config);

    if (export_forest(model.forest) != frozen) {
      err << "error: internal invariant violated: the forest changed during fine-tuning\n";
      return 3;
    }
    const double fine = accuracy(model, split.test, /*hard=*/true);

    out << "initial_accuracy " << num(initial, 4) << "\n";
    out << "finetuned_accuracy " << num(fine, 4) << "\n";
    out << "delta " << format_relative_delta(initial, fine) << "\n";

    ensure_dir(args.out_dir);
    const std::string adapter_path = path_join(args.out_dir, "adapter.json");
    const std::string forest_path = path_join(args.out_dir, "forest.json");
    const std::string metrics_path = path_join(args.out_dir, "metrics.ndjson");
    save_net(model.embed, adapter_path);
    save_forest(model.forest, forest_path);
    write_metrics(history, metrics_path);
    out << "wrote " << adapter_path << " " << forest_path << " " << metrics_path << "\n";
    return 0;
  } catch (const std::exception& e) {
    return fail(err, e);
  }
}

int run_heatmap(const HeatmapArgs& args, std::ostream& out, std::ostream& err) {
  try {
    if (args.forest_path.empty()) throw std::invalid_argument("heatmap: --forest is required");
    if (args.out_prefix.empty()) throw std::invalid_argument("heatmap: --out is required");
    const Forest forest = load_forest(args.forest_path);
    if (forest.input_dim > 2) {
      throw std::invalid_argument("heatmap: forest has input_dim " +
                                  std::to_string(forest.input_dim) +
                                  "; only 1D profiles and 2D grids can be rendered");
    }

    // sigma = 0 (the exact forest) always leads the sweep.
    std::vector<double> sigmas{0.0};
    for (double s : parse_double_list(args.sigmas, "heatmap: --sigmas")) {
      if (s < 0.0) throw std::invalid_argument("heatmap: sigma must be >= 0, got " + num(s, 6));
      if (std::find(sigmas.begin(), sigmas.end(), s) == sigmas.end()) sigmas.push_back(s);
    }

    GridSpec grid;
    grid.resolution = args.resolution;
    grid.lo = args.lo;
    grid.hi = args.hi;

    const fs::path prefix(args.out_prefix);
    if (prefix.has_parent_path()) ensure_dir(prefix.parent_path().string());
    for (double sigma : sigmas) {
      const std::string tag = "_sigma" + num(sigma, 3);
      if (forest.input_dim == 2) {
        const std::vector<double> values = evaluate_grid(forest, sigma, grid);
        const std::string pgm_path = args.out_prefix + tag + ".pgm";
        const std::string csv_path = args.out_prefix + tag + ".csv";
        write_text(pgm_path, to_pgm(values, grid.resolution));
        write_text(csv_path, grid_to_csv(values, grid.resolution));
        out << "sigma " << num(sigma, 3) << " total_variation "
            << num(total_variation(values, grid.resolution), 6) << " wrote " << pgm_path
            << " " << csv_path << "\n";
      } else {
        const std::vector<double> values = evaluate_profile(forest, sigma, grid);
        const std::string csv_path = args.out_prefix + tag + ".csv";
        write_text(csv_path, profile_to_csv(values, grid));
        out << "sigma " << num(sigma, 3) << " wrote " << csv_path << "\n";
      }
    }
    return 0;
  } catch (const std::exception& e) {
    return fail(err, e);
  }
}

int run_gradcheck(const GradcheckArgs& args, std::ostream& out, std::ostream& err) {
  try {
    if (!(args.tolerance > 0.0)) {
      err << "gradcheck: tolerance must be > 0 (got " << num(args.tolerance, 6)
          << "); a non-positive tolerance can never be met, so the check fails by "
             "construction\n";
      return 2;
    }

    Model model;
    model.perturb.sigma = args.sigma;
    if (args.random_model) {
      Rng rng(mix_seed(args.seed, 0xC0FFEEull));
      model.embed = make_mlp(2, {3, 2}, Activation::tanh, Activation::sigmoid, rng);
      model.forest = generate_random_forest(4, 2, 3, LeafInit::uniform01, 1, rng);
    } else {
      if (args.forest_path.empty()) {
        throw std::invalid_argument("gradcheck: pass --forest (and optionally --embedding) "
                                    "or --random");
      }
      model.forest = load_forest(args.forest_path);
      model.embed = args.embed_path.empty() ? make_identity_net(model.forest.input_dim)
                                            : load_net(args.embed_path);
    }
    validate_model(model);

    GradCheckConfig config;
    config.num_cases = args.cases;
    config.tolerance = args.tolerance;
    config.input_tolerance = args.tolerance / 10.0;
    config.seed = args.seed;
    const GradCheckReport report = gradcheck_model(model, config);

    out << report.summary();
    if (!args.report_path.empty()) {
      write_text(args.report_path, report.to_json().dump(2) + "\n");
      out << "wrote " << args.report_path << "\n";
    }
    return report.passed ? 0 : 1;
  } catch (const std::exception& e) {
    return fail(err, e);
  }
}

int run_eval(const EvalArgs& args, std::ostream& out, std::ostream& err) {
  try {
    if (args.forest_path.empty()) throw std::invalid_argument("eval: --forest is required");
    if (args.data_csv.empty()) throw std::invalid_argument("eval: --data is required");

    Model model;
    model.forest = load_forest(args.forest_path);
    model.embed = args.embed_path.empty() ? make_identity_net(model.forest.input_dim)
                                          : load_net(args.embed_path);
    model.loss = loss_from_name(args.loss);
    model.perturb.sigma = args.sigma;
    validate_model(model);

    const Dataset data = load_csv(args.data_csv);
    const bool hard = !args.smooth;
    if (args.metric == "accuracy") {
      out << "accuracy " << num(accuracy(model, data, hard), 4) << "\n";
    } else if (args.metric == "mse") {
      out << "mse " << num(mean_squared_error(model, data, hard), 6) << "\n";
    } else {
      throw std::invalid_argument("eval: unknown metric '" + args.metric +
                                  "' (expected accuracy or mse)");
    }
    return 0;
  } catch (const std::exception& e) {
    return fail(err, e);
  }
}

}  // namespace pforest::cli

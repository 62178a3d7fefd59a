#pragma once

// Subcommand implementations behind the command-line tool.  Each run_*
// function does the work of one subcommand, writing human-readable results
// to `out` and diagnostics to `err`, and returning a process exit code
// (0 = success).  The binary in tools/ only parses flags into these structs,
// so tests can drive the exact production code paths in-process.

#include <cstdint>
#include <iosfwd>
#include <string>

namespace pforest::cli {

struct GenDataArgs {
  std::string kind = "identity_line";
  int n = 1000;
  double noise = 0.0;
  std::uint64_t seed = 0;
  int blobs = 3;
  int embed_dim = 0;        // > 0: also pass features through synthesize_embeddings
  double embed_scale = 4.0;
  std::string out;
};
int run_gen_data(const GenDataArgs& args, std::ostream& out, std::ostream& err);

struct TrainArgs {
  std::string train_csv;
  std::string test_csv;           // optional; accuracy falls back to the validation split
  double valid_fraction = 0.1;
  int trees = 32;
  int depth = 4;
  std::string leaf_init = "binary01";
  std::string layers;             // comma-separated widths; empty = identity embedding
  std::string loss = "sigmoid";
  int classes = 2;                // softmax only
  double sigma = 0.015;
  std::string schedule = "fixed";  // fixed | linear | exponential
  double sigma_end = 0.015;        // linear
  double decay = 0.9;              // exponential
  int batch = 512;
  int epochs = 200;
  int patience = 20;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
};
int run_train(const TrainArgs& args, std::ostream& out, std::ostream& err);

struct FinetuneArgs {
  std::string data_csv;     // embedding table with labels
  std::string forest_path;  // optional; a boosted forest is trained when empty
  int bt_rounds = 40;
  int bt_depth = 3;
  double bt_lr = 0.3;
  std::string bt_loss = "sigmoid";
  double sigma = 0.05;
  int batch = 64;
  int epochs = 120;
  int patience = 20;
  double lr = 2e-3;
  std::uint64_t seed = 0;
  bool train_leaves = false;  // rejected with a warning: the forest stays frozen
  std::string out_dir = ".";
};
int run_finetune(const FinetuneArgs& args, std::ostream& out, std::ostream& err);

struct HeatmapArgs {
  std::string forest_path;
  std::string sigmas = "0.05,0.1,0.15";  // sigma = 0 is always emitted as well
  int resolution = 200;
  double lo = 0.0;
  double hi = 1.0;
  std::string out_prefix;
};
int run_heatmap(const HeatmapArgs& args, std::ostream& out, std::ostream& err);

struct GradcheckArgs {
  bool random_model = false;
  std::string forest_path;
  std::string embed_path;  // optional; identity embedding when empty
  int cases = 10;
  double tolerance = 1e-4;
  double sigma = 0.05;
  std::uint64_t seed = 0;
  std::string report_path;  // optional JSON report
};
int run_gradcheck(const GradcheckArgs& args, std::ostream& out, std::ostream& err);

struct EvalArgs {
  std::string forest_path;
  std::string embed_path;  // optional; identity embedding when empty
  std::string data_csv;
  bool smooth = false;     // default: hard (deployment) semantics
  double sigma = 0.015;
  std::string loss = "sigmoid";
  std::string metric = "accuracy";  // accuracy | mse
};
int run_eval(const EvalArgs& args, std::ostream& out, std::ostream& err);

// "+5.6%" for (0.8436, 0.8908): signed relative change to one decimal.
std::string format_relative_delta(double initial, double final_value);

}  // namespace pforest::cli

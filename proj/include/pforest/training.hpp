#pragma once

// End-to-end model assembly and the training loop.
//
// A Model composes an embedding network with a smoothed forest head.  fit()
// runs seeded minibatch Adam on the smoothed objective (mean per-example
// loss), early-stops on validation loss, and returns the parameter snapshot
// with the best validation loss.  Batch gradients are computed per example
// (optionally OpenMP-parallel) into per-example slots and reduced in example
// order, so the result is bitwise identical for any thread count.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pforest/datasets.hpp"
#include "pforest/exec.hpp"
#include "pforest/forest.hpp"
#include "pforest/neural.hpp"
#include "pforest/smoothing.hpp"

namespace pforest {

// ------- model -------

struct Model {
  EmbeddingNet embed;
  Forest forest;  // over the embedding space
  PerturbationSpec perturb;
  LossKind loss = LossKind::sigmoid_cross_entropy;
  bool leaf_trainable = true;  // false freezes the forest entirely
};

// Checks both halves and the seam: embed.output_dim == forest.input_dim and
// loss arity vs forest.output_dim (one output for sigmoid/squared, >= 2 for
// softmax).  Throws std::invalid_argument.
void validate_model(const Model& model);

// hard=true routes E(x) through the exact forest (deployment semantics: only
// axis-aligned comparisons); hard=false returns the smoothed value at the
// model's sigma (training semantics).
std::vector<double> predict(const Model& model, std::span<const double> x, bool hard);

// Fraction of rows whose predicted class matches the label.
double accuracy(const Model& model, const Dataset& data, bool hard);
// Mean squared prediction error (scalar-output models).
double mean_squared_error(const Model& model, const Dataset& data, bool hard);
// Mean smoothed per-example loss at the given sigma.
double mean_loss(const Model& model, const Dataset& data, double sigma,
                 Execution exec = Execution::parallel);

// ------- schedule and config -------

struct SigmaSchedule {
  enum class Kind { fixed, linear, exponential };
  Kind kind = Kind::fixed;
  double start = 0.015;
  double end = 0.015;    // linear only
  double decay = 1.0;    // exponential only

  static SigmaSchedule fixed_sigma(double sigma);
  static SigmaSchedule linear(double start, double end);
  static SigmaSchedule exponential(double start, double decay);
};

struct TrainConfig {
  int batch_size = 512;
  int epochs = 200;
  int patience = 20;  // stop after this many consecutive non-improving epochs
  SigmaSchedule schedule;
  AdamConfig adam;
  std::uint64_t seed = 0;
  Execution exec = Execution::parallel;
};

// fixed -> start; linear -> endpoint interpolation over [0, epochs-1];
// exponential -> start * decay^epoch, floored at 1e-6.
double sigma_for_epoch(const TrainConfig& config, int epoch);

// ------- history -------

struct EpochStats {
  int epoch = 0;
  double sigma = 0.0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
  double valid_accuracy = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  int best_epoch = -1;  // -1: no epoch improved on the initial parameters
  double best_valid_loss = 0.0;
};

// One JSON object per line: {epoch, sigma, train_loss, valid_loss, valid_accuracy}.
std::string metrics_to_ndjson(const TrainHistory& history);
void write_metrics(const TrainHistory& history, const std::string& path);

// ------- training -------

// Holds the optimizer state, the structure cache, and the flat parameter
// layout (embedding parameters, then leaf values when trainable) for one
// training run.  The model must outlive the session; its forest structure
// must stay fixed while the session exists.
class TrainSession {
 public:
  TrainSession(Model& model, const AdamConfig& adam,
               Execution exec = Execution::parallel);

  // One Adam update from the mean gradient over the batch rows; returns the
  // mean batch loss at the pre-update parameters.  Throws on non-finite loss
  // (divergence) naming the offending batch row.
  double step(const Dataset& data, std::span<const int> batch, double sigma);

  int param_count() const { return static_cast<int>(params_.size()); }
  std::vector<double> snapshot() const;
  void restore(std::span<const double> values);

 private:
  void batch_loss_and_grad(const Dataset& data, std::span<const int> batch,
                           double sigma, double& loss_out);

  Model* model_;
  SmoothedForest cache_;
  Execution exec_;
  std::vector<double*> params_;
  AdamState adam_;
  std::vector<double> grad_;  // mean gradient, layout matches params_
  std::vector<double> slab_;  // per-example gradient slots
  std::vector<double> loss_slab_;
  std::vector<std::string> error_slab_;
};

// Seeded minibatch training with early stopping; restores the best-validation
// snapshot into the model before returning.
TrainHistory fit(Model& model, const Dataset& train, const Dataset& valid,
                 const TrainConfig& config);

}  // namespace pforest

#pragma once

// Embedding networks, losses, and the Adam optimizer.
//
// An EmbeddingNet is a chain of affine layers with elementwise activations.
// An empty layer list is the identity map (input_dim == output_dim), for
// models that feed raw features straight into the forest.

#include <span>
#include <string>
#include <vector>

#include "nlohmann/json.hpp"
#include "pforest/rng.hpp"

namespace pforest {

// ------- network -------

enum class Activation { identity, relu, sigmoid, tanh };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

double activate(Activation a, double pre);
// Derivative d post / d pre expressed through the activation output.
double activation_grad(Activation a, double post);

struct Layer {
  int in_dim = 0;
  int out_dim = 0;
  std::vector<double> weights;  // out_dim x in_dim, row-major
  std::vector<double> biases;   // out_dim
  Activation activation = Activation::identity;
};

struct EmbeddingNet {
  int input_dim = 0;
  int output_dim = 0;
  std::vector<Layer> layers;  // empty => identity map

  int param_count() const;
};

// Throws std::invalid_argument on dimension-chain breaks, shape mismatches,
// or non-finite parameters.
void validate_net(const EmbeddingNet& net);

EmbeddingNet make_identity_net(int dim);

// Affine chain with the given layer widths (the last width is the embedding
// dimension).  Hidden layers use `hidden`, the final layer `output`.
// Weights are Glorot-uniform (+-sqrt(6/(fan_in+fan_out))), biases zero.
EmbeddingNet make_mlp(int input_dim, const std::vector<int>& widths,
                      Activation hidden, Activation output, Rng& rng);

// ------- forward / backward -------

struct ForwardCache {
  std::vector<double> input;              // network input
  std::vector<std::vector<double>> post;  // per-layer activation outputs
};

// Returns the embedding; fills `cache` (if non-null) for a later backward
// pass.  Throws on dimension mismatch or non-finite activations.
std::vector<double> embed_forward(const EmbeddingNet& net, std::span<const double> x,
                                  ForwardCache* cache = nullptr);

struct NetGrads {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  static NetGrads zeros_like(const EmbeddingNet& net);
  void set_zero();
};

// Reverse-mode pass.  Accumulates parameter gradients into `grads` (+=) so a
// batch can sum contributions; returns the gradient w.r.t. the input.
std::vector<double> embed_backward(const EmbeddingNet& net, const ForwardCache& cache,
                                   std::span<const double> grad_output, NetGrads& grads);

// ------- losses -------

enum class LossKind { sigmoid_cross_entropy, softmax_cross_entropy, squared_error };

const char* loss_name(LossKind kind);
LossKind loss_from_name(const std::string& name);

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d prediction
};

// sigmoid_cross_entropy: prediction is one logit, label in [0, 1]; the loss
// uses the stable max(s,0) - s*y + log1p(exp(-|s|)) form.
// softmax_cross_entropy: prediction holds K >= 2 logits, label an integer
// class index in [0, K); log-sum-exp stabilized.
// squared_error: one prediction, loss 0.5*(p - y)^2.
LossGrad loss_and_grad(LossKind kind, std::span<const double> prediction, double label);

// Class decision matching each loss's convention: sigmoid logit >= 0,
// softmax argmax, squared-error prediction >= 0.5.
int predicted_class(LossKind kind, std::span<const double> prediction);

// ------- optimizer -------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamState {
 public:
  AdamState(std::size_t num_params, const AdamConfig& config);

  // One bias-corrected update over all parameters; params[i] is the location
  // of parameter i and grad[i] its gradient.  Sizes must match num_params.
  void update(std::span<double* const> params, std::span<const double> grad);

  long step_count() const { return step_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  long step_ = 0;
};

// ------- checkpoint io -------

// {"input_dim": m, "output_dim": d, "layers": [{"weights": [[...]],
//  "biases": [...], "activation": "relu"}, ...]}
nlohmann::json net_to_json(const EmbeddingNet& net);
EmbeddingNet net_from_json(const nlohmann::json& doc);
std::string export_net(const EmbeddingNet& net);
EmbeddingNet import_net(const std::string& text);
void save_net(const EmbeddingNet& net, const std::string& path);
EmbeddingNet load_net(const std::string& path);

}  // namespace pforest

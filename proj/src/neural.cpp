#include "pforest/neural.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pforest {

using nlohmann::json;

// ------- activations -------

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
  }
  return "identity";
}

Activation activation_from_name(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "tanh") return Activation::tanh;
  throw std::invalid_argument("unknown activation: '" + name + "'");
}

double activate(Activation a, double pre) {
  switch (a) {
    case Activation::identity: return pre;
    case Activation::relu: return pre > 0.0 ? pre : 0.0;
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-pre));
    case Activation::tanh: return std::tanh(pre);
  }
  return pre;
}

double activation_grad(Activation a, double post) {
  switch (a) {
    case Activation::identity: return 1.0;
    case Activation::relu: return post > 0.0 ? 1.0 : 0.0;
    case Activation::sigmoid: return post * (1.0 - post);
    case Activation::tanh: return 1.0 - post * post;
  }
  return 1.0;
}

// ------- network construction / validation -------

int EmbeddingNet::param_count() const {
  int n = 0;
  for (const Layer& layer : layers) {
    n += static_cast<int>(layer.weights.size() + layer.biases.size());
  }
  return n;
}

void validate_net(const EmbeddingNet& net) {
  if (net.input_dim < 1) throw std::invalid_argument("net: input_dim must be >= 1");
  if (net.output_dim < 1) throw std::invalid_argument("net: output_dim must be >= 1");
  if (net.layers.empty()) {
    if (net.input_dim != net.output_dim) {
      throw std::invalid_argument("net: identity map requires input_dim == output_dim");
    }
    return;
  }
  int dim = net.input_dim;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const Layer& layer = net.layers[i];
    if (layer.in_dim != dim) {
      throw std::invalid_argument("net: layer " + std::to_string(i) + " expects in_dim " +
                                  std::to_string(dim) + " but declares " +
                                  std::to_string(layer.in_dim));
    }
    if (layer.out_dim < 1) {
      throw std::invalid_argument("net: layer " + std::to_string(i) + " has out_dim < 1");
    }
    if (layer.weights.size() !=
        static_cast<std::size_t>(layer.in_dim) * static_cast<std::size_t>(layer.out_dim)) {
      throw std::invalid_argument("net: layer " + std::to_string(i) + " weight shape mismatch");
    }
    if (layer.biases.size() != static_cast<std::size_t>(layer.out_dim)) {
      throw std::invalid_argument("net: layer " + std::to_string(i) + " bias shape mismatch");
    }
    for (double w : layer.weights) {
      if (!std::isfinite(w)) {
        throw std::invalid_argument("net: layer " + std::to_string(i) + " non-finite weight");
      }
    }
    for (double b : layer.biases) {
      if (!std::isfinite(b)) {
        throw std::invalid_argument("net: layer " + std::to_string(i) + " non-finite bias");
      }
    }
    dim = layer.out_dim;
  }
  if (dim != net.output_dim) {
    throw std::invalid_argument("net: last layer out_dim " + std::to_string(dim) +
                                " != output_dim " + std::to_string(net.output_dim));
  }
}

EmbeddingNet make_identity_net(int dim) {
  if (dim < 1) throw std::invalid_argument("net: identity dimension must be >= 1");
  EmbeddingNet net;
  net.input_dim = dim;
  net.output_dim = dim;
  return net;
}

EmbeddingNet make_mlp(int input_dim, const std::vector<int>& widths,
                      Activation hidden, Activation output, Rng& rng) {
  if (input_dim < 1) throw std::invalid_argument("net: input_dim must be >= 1");
  if (widths.empty()) throw std::invalid_argument("net: at least one layer width required");
  EmbeddingNet net;
  net.input_dim = input_dim;
  net.output_dim = widths.back();
  int in_dim = input_dim;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const int out_dim = widths[i];
    if (out_dim < 1) throw std::invalid_argument("net: layer width must be >= 1");
    Layer layer;
    layer.in_dim = in_dim;
    layer.out_dim = out_dim;
    layer.activation = (i + 1 == widths.size()) ? output : hidden;
    const double bound = std::sqrt(6.0 / (in_dim + out_dim));
    layer.weights.resize(static_cast<std::size_t>(in_dim) * out_dim);
    for (double& w : layer.weights) w = rng.uniform(-bound, bound);
    layer.biases.assign(static_cast<std::size_t>(out_dim), 0.0);
    net.layers.push_back(std::move(layer));
    in_dim = out_dim;
  }
  return net;
}

// ------- forward / backward -------

std::vector<double> embed_forward(const EmbeddingNet& net, std::span<const double> x,
                                  ForwardCache* cache) {
  if (static_cast<int>(x.size()) != net.input_dim) {
    throw std::invalid_argument("net: input has " + std::to_string(x.size()) +
                                " entries, expected " + std::to_string(net.input_dim));
  }
  std::vector<double> current(x.begin(), x.end());
  if (cache) {
    cache->input = current;
    cache->post.clear();
    cache->post.reserve(net.layers.size());
  }
  for (const Layer& layer : net.layers) {
    std::vector<double> next(static_cast<std::size_t>(layer.out_dim));
    for (int o = 0; o < layer.out_dim; ++o) {
      double pre = layer.biases[static_cast<std::size_t>(o)];
      const double* row =
          layer.weights.data() + static_cast<std::size_t>(o) * layer.in_dim;
      for (int i = 0; i < layer.in_dim; ++i) pre += row[i] * current[static_cast<std::size_t>(i)];
      const double post = activate(layer.activation, pre);
      if (!std::isfinite(post)) {
        throw std::runtime_error("net: non-finite activation (diverged parameters?)");
      }
      next[static_cast<std::size_t>(o)] = post;
    }
    current = std::move(next);
    if (cache) cache->post.push_back(current);
  }
  return current;
}

NetGrads NetGrads::zeros_like(const EmbeddingNet& net) {
  NetGrads grads;
  grads.weights.reserve(net.layers.size());
  grads.biases.reserve(net.layers.size());
  for (const Layer& layer : net.layers) {
    grads.weights.emplace_back(layer.weights.size(), 0.0);
    grads.biases.emplace_back(layer.biases.size(), 0.0);
  }
  return grads;
}

void NetGrads::set_zero() {
  for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
  for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
}

std::vector<double> embed_backward(const EmbeddingNet& net, const ForwardCache& cache,
                                   std::span<const double> grad_output, NetGrads& grads) {
  if (static_cast<int>(grad_output.size()) != net.output_dim) {
    throw std::invalid_argument("net: grad_output has " + std::to_string(grad_output.size()) +
                                " entries, expected " + std::to_string(net.output_dim));
  }
  if (cache.post.size() != net.layers.size() ||
      grads.weights.size() != net.layers.size()) {
    throw std::invalid_argument("net: cache/grads do not match the network");
  }
  std::vector<double> grad(grad_output.begin(), grad_output.end());
  for (int li = static_cast<int>(net.layers.size()) - 1; li >= 0; --li) {
    const Layer& layer = net.layers[static_cast<std::size_t>(li)];
    const std::vector<double>& post = cache.post[static_cast<std::size_t>(li)];
    const std::vector<double>& input =
        li == 0 ? cache.input : cache.post[static_cast<std::size_t>(li) - 1];
    std::vector<double> grad_in(static_cast<std::size_t>(layer.in_dim), 0.0);
    auto& gw = grads.weights[static_cast<std::size_t>(li)];
    auto& gb = grads.biases[static_cast<std::size_t>(li)];
    for (int o = 0; o < layer.out_dim; ++o) {
      const double g_pre = grad[static_cast<std::size_t>(o)] *
                           activation_grad(layer.activation, post[static_cast<std::size_t>(o)]);
      gb[static_cast<std::size_t>(o)] += g_pre;
      const double* row =
          layer.weights.data() + static_cast<std::size_t>(o) * layer.in_dim;
      double* grow = gw.data() + static_cast<std::size_t>(o) * layer.in_dim;
      for (int i = 0; i < layer.in_dim; ++i) {
        grow[i] += g_pre * input[static_cast<std::size_t>(i)];
        grad_in[static_cast<std::size_t>(i)] += g_pre * row[i];
      }
    }
    grad = std::move(grad_in);
  }
  return grad;
}

// ------- losses -------

const char* loss_name(LossKind kind) {
  switch (kind) {
    case LossKind::sigmoid_cross_entropy: return "sigmoid_cross_entropy";
    case LossKind::softmax_cross_entropy: return "softmax_cross_entropy";
    case LossKind::squared_error: return "squared_error";
  }
  return "sigmoid_cross_entropy";
}

LossKind loss_from_name(const std::string& name) {
  if (name == "sigmoid_cross_entropy" || name == "sigmoid") {
    return LossKind::sigmoid_cross_entropy;
  }
  if (name == "softmax_cross_entropy" || name == "softmax") {
    return LossKind::softmax_cross_entropy;
  }
  if (name == "squared_error" || name == "squared") return LossKind::squared_error;
  throw std::invalid_argument("unknown loss: '" + name + "'");
}

LossGrad loss_and_grad(LossKind kind, std::span<const double> prediction, double label) {
  for (double p : prediction) {
    if (!std::isfinite(p)) throw std::invalid_argument("loss: non-finite prediction");
  }
  LossGrad out;
  switch (kind) {
    case LossKind::sigmoid_cross_entropy: {
      if (prediction.size() != 1) {
        throw std::invalid_argument("loss: sigmoid cross-entropy expects one logit");
      }
      if (!(label >= 0.0 && label <= 1.0)) {
        throw std::invalid_argument("loss: sigmoid cross-entropy label must lie in [0, 1]");
      }
      const double s = prediction[0];
      out.loss = std::max(s, 0.0) - s * label + std::log1p(std::exp(-std::abs(s)));
      const double p = 1.0 / (1.0 + std::exp(-s));
      out.grad = {p - label};
      return out;
    }
    case LossKind::softmax_cross_entropy: {
      const int k = static_cast<int>(prediction.size());
      if (k < 2) throw std::invalid_argument("loss: softmax cross-entropy expects >= 2 logits");
      const int target = static_cast<int>(label);
      if (static_cast<double>(target) != label || target < 0 || target >= k) {
        throw std::invalid_argument("loss: softmax label must be an integer in [0, " +
                                    std::to_string(k) + ")");
      }
      const double max_logit = *std::max_element(prediction.begin(), prediction.end());
      double sum = 0.0;
      for (double s : prediction) sum += std::exp(s - max_logit);
      const double log_sum = max_logit + std::log(sum);
      out.loss = log_sum - prediction[static_cast<std::size_t>(target)];
      out.grad.resize(prediction.size());
      for (int i = 0; i < k; ++i) {
        const double p = std::exp(prediction[static_cast<std::size_t>(i)] - log_sum);
        out.grad[static_cast<std::size_t>(i)] = p - (i == target ? 1.0 : 0.0);
      }
      return out;
    }
    case LossKind::squared_error: {
      if (prediction.size() != 1) {
        throw std::invalid_argument("loss: squared error expects one prediction");
      }
      if (!std::isfinite(label)) throw std::invalid_argument("loss: non-finite label");
      const double diff = prediction[0] - label;
      out.loss = 0.5 * diff * diff;
      out.grad = {diff};
      return out;
    }
  }
  throw std::invalid_argument("loss: unknown kind");
}

int predicted_class(LossKind kind, std::span<const double> prediction) {
  switch (kind) {
    case LossKind::sigmoid_cross_entropy:
      return prediction[0] >= 0.0 ? 1 : 0;
    case LossKind::softmax_cross_entropy:
      return static_cast<int>(
          std::max_element(prediction.begin(), prediction.end()) - prediction.begin());
    case LossKind::squared_error:
      return prediction[0] >= 0.5 ? 1 : 0;
  }
  return 0;
}

// ------- optimizer -------

AdamState::AdamState(std::size_t num_params, const AdamConfig& config)
    : config_(config), m_(num_params, 0.0), v_(num_params, 0.0) {}

void AdamState::update(std::span<double* const> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw std::invalid_argument("adam: parameter/gradient count mismatch");
  }
  ++step_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < m_.size(); ++i) {
    const double g = grad[i];
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g * g;
    const double m_hat = m_[i] / bc1;
    const double v_hat = v_[i] / bc2;
    *params[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
  }
}

// ------- checkpoint io -------

json net_to_json(const EmbeddingNet& net) {
  validate_net(net);
  json layers = json::array();
  for (const Layer& layer : net.layers) {
    json rows = json::array();
    for (int o = 0; o < layer.out_dim; ++o) {
      const double* row = layer.weights.data() + static_cast<std::size_t>(o) * layer.in_dim;
      rows.push_back(std::vector<double>(row, row + layer.in_dim));
    }
    layers.push_back(json{{"weights", std::move(rows)},
                          {"biases", layer.biases},
                          {"activation", activation_name(layer.activation)}});
  }
  return json{{"input_dim", net.input_dim},
              {"output_dim", net.output_dim},
              {"layers", std::move(layers)}};
}

EmbeddingNet net_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("layers") || !doc.at("layers").is_array()) {
    throw std::invalid_argument("net import: missing 'layers' array");
  }
  if (!doc.contains("input_dim") || !doc.contains("output_dim")) {
    throw std::invalid_argument("net import: missing 'input_dim'/'output_dim'");
  }
  EmbeddingNet net;
  net.input_dim = doc.at("input_dim").get<int>();
  net.output_dim = doc.at("output_dim").get<int>();
  const json& layers = doc.at("layers");
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const json& entry = layers[li];
    const std::string where = "net import: layers[" + std::to_string(li) + "]";
    if (!entry.is_object() || !entry.contains("weights") || !entry.contains("biases") ||
        !entry.contains("activation")) {
      throw std::invalid_argument(where + ": need 'weights', 'biases', 'activation'");
    }
    Layer layer;
    layer.activation = activation_from_name(entry.at("activation").get<std::string>());
    const json& rows = entry.at("weights");
    if (!rows.is_array() || rows.empty()) {
      throw std::invalid_argument(where + ": 'weights' must be a non-empty array of rows");
    }
    layer.out_dim = static_cast<int>(rows.size());
    layer.in_dim = static_cast<int>(rows[0].size());
    for (const json& row : rows) {
      if (!row.is_array() || static_cast<int>(row.size()) != layer.in_dim) {
        throw std::invalid_argument(where + ": ragged weight rows");
      }
      for (const json& w : row) layer.weights.push_back(w.get<double>());
    }
    layer.biases = entry.at("biases").get<std::vector<double>>();
    net.layers.push_back(std::move(layer));
  }
  validate_net(net);
  return net;
}

std::string export_net(const EmbeddingNet& net) { return net_to_json(net).dump(2); }

EmbeddingNet import_net(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("net import: invalid JSON: ") + e.what());
  }
  return net_from_json(doc);
}

void save_net(const EmbeddingNet& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << export_net(net) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

EmbeddingNet load_net(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return import_net(buffer.str());
}

}  // namespace pforest

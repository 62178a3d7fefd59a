#include "pforest/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "nlohmann/json.hpp"

namespace pforest {

// ------- model -------

void validate_model(const Model& model) {
  validate_net(model.embed);
  validate_forest(model.forest);
  validate(model.perturb);
  if (model.embed.output_dim != model.forest.input_dim) {
    throw std::invalid_argument("model: embedding output_dim " +
                                std::to_string(model.embed.output_dim) +
                                " != forest input_dim " +
                                std::to_string(model.forest.input_dim));
  }
  const int c = model.forest.output_dim;
  if (model.loss == LossKind::softmax_cross_entropy) {
    if (c < 2) throw std::invalid_argument("model: softmax loss needs output_dim >= 2");
  } else if (c != 1) {
    throw std::invalid_argument("model: sigmoid/squared losses need output_dim == 1");
  }
}

std::vector<double> predict(const Model& model, std::span<const double> x, bool hard) {
  const std::vector<double> mu = embed_forward(model.embed, x);
  if (hard) return evaluate_forest(model.forest, mu);
  return smoothed_evaluate(model.forest, mu, model.perturb).value;
}

double accuracy(const Model& model, const Dataset& data, bool hard) {
  validate_dataset(data);
  if (data.rows == 0) throw std::invalid_argument("accuracy: empty dataset");
  int correct = 0;
  for (int i = 0; i < data.rows; ++i) {
    const std::vector<double> prediction = predict(model, data.row(i), hard);
    if (predicted_class(model.loss, prediction) ==
        static_cast<int>(data.labels[static_cast<std::size_t>(i)])) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / data.rows;
}

double mean_squared_error(const Model& model, const Dataset& data, bool hard) {
  validate_dataset(data);
  if (data.rows == 0) throw std::invalid_argument("mse: empty dataset");
  double total = 0.0;
  for (int i = 0; i < data.rows; ++i) {
    const std::vector<double> prediction = predict(model, data.row(i), hard);
    const double diff = prediction[0] - data.labels[static_cast<std::size_t>(i)];
    total += diff * diff;
  }
  return total / data.rows;
}

double mean_loss(const Model& model, const Dataset& data, double sigma, Execution exec) {
  validate_dataset(data);
  if (data.rows == 0) throw std::invalid_argument("mean_loss: empty dataset");
  const SmoothedForest cache(model.forest);
  std::vector<double> losses(static_cast<std::size_t>(data.rows), 0.0);
  std::vector<int> failed(static_cast<std::size_t>(data.rows), 0);

  const auto body = [&](int i) {
    SmoothWorkspace ws;
    std::vector<double> value(static_cast<std::size_t>(model.forest.output_dim));
    try {
      const std::vector<double> mu = embed_forward(model.embed, data.row(i));
      cache.evaluate(mu.data(), sigma, value.data(), nullptr, nullptr, ws);
      losses[static_cast<std::size_t>(i)] =
          loss_and_grad(model.loss, value, data.labels[static_cast<std::size_t>(i)]).loss;
    } catch (const std::exception&) {
      failed[static_cast<std::size_t>(i)] = 1;
    }
  };
  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < data.rows; ++i) body(i);
  } else {
    for (int i = 0; i < data.rows; ++i) body(i);
  }
  for (int i = 0; i < data.rows; ++i) {
    if (failed[static_cast<std::size_t>(i)]) {
      throw std::runtime_error("mean_loss: evaluation failed at row " + std::to_string(i));
    }
  }
  double total = 0.0;
  for (double l : losses) total += l;  // fixed order: bitwise reproducible
  return total / data.rows;
}

// ------- schedule -------

SigmaSchedule SigmaSchedule::fixed_sigma(double sigma) {
  SigmaSchedule s;
  s.kind = Kind::fixed;
  s.start = s.end = sigma;
  return s;
}

SigmaSchedule SigmaSchedule::linear(double start, double end) {
  SigmaSchedule s;
  s.kind = Kind::linear;
  s.start = start;
  s.end = end;
  return s;
}

SigmaSchedule SigmaSchedule::exponential(double start, double decay) {
  SigmaSchedule s;
  s.kind = Kind::exponential;
  s.start = start;
  s.decay = decay;
  return s;
}

double sigma_for_epoch(const TrainConfig& config, int epoch) {
  const SigmaSchedule& s = config.schedule;
  if (!(s.start > 0.0)) throw std::invalid_argument("schedule: sigma start must be > 0");
  if (epoch < 0 || epoch >= config.epochs) {
    throw std::invalid_argument("schedule: epoch out of range");
  }
  switch (s.kind) {
    case SigmaSchedule::Kind::fixed:
      return s.start;
    case SigmaSchedule::Kind::linear: {
      if (!(s.end > 0.0)) throw std::invalid_argument("schedule: sigma end must be > 0");
      if (config.epochs == 1) return s.start;
      const double t = static_cast<double>(epoch) / (config.epochs - 1);
      return s.start + (s.end - s.start) * t;
    }
    case SigmaSchedule::Kind::exponential: {
      if (!(s.decay > 0.0 && s.decay <= 1.0)) {
        throw std::invalid_argument("schedule: decay must lie in (0, 1]");
      }
      return std::max(s.start * std::pow(s.decay, static_cast<double>(epoch)), 1e-6);
    }
  }
  return s.start;
}

// ------- history -------

std::string metrics_to_ndjson(const TrainHistory& history) {
  std::string out;
  for (const EpochStats& e : history.epochs) {
    const nlohmann::json record{{"epoch", e.epoch},
                                {"sigma", e.sigma},
                                {"train_loss", e.train_loss},
                                {"valid_loss", e.valid_loss},
                                {"valid_accuracy", e.valid_accuracy}};
    out += record.dump();
    out += '\n';
  }
  return out;
}

void write_metrics(const TrainHistory& history, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << metrics_to_ndjson(history);
  if (!out) throw std::runtime_error("write failed: " + path);
}

// ------- training session -------

namespace {

std::vector<double*> collect_params(Model& model) {
  std::vector<double*> params;
  for (Layer& layer : model.embed.layers) {
    for (double& w : layer.weights) params.push_back(&w);
    for (double& b : layer.biases) params.push_back(&b);
  }
  if (model.leaf_trainable) {
    for (Tree& tree : model.forest.trees) {
      for (double& v : tree.leaf_values) params.push_back(&v);
    }
  }
  return params;
}

}  // namespace

TrainSession::TrainSession(Model& model, const AdamConfig& adam, Execution exec)
    : model_(&model),
      cache_(model.forest),
      exec_(exec),
      params_(collect_params(model)),
      adam_(params_.size(), adam) {
  validate_model(model);
}

std::vector<double> TrainSession::snapshot() const {
  std::vector<double> values(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) values[i] = *params_[i];
  return values;
}

void TrainSession::restore(std::span<const double> values) {
  if (values.size() != params_.size()) {
    throw std::invalid_argument("restore: snapshot size mismatch");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) *params_[i] = values[i];
}

void TrainSession::batch_loss_and_grad(const Dataset& data, std::span<const int> batch,
                                       double sigma, double& loss_out) {
  const Model& model = *model_;
  const int d = model.forest.input_dim;
  const int c = model.forest.output_dim;
  const int net_params = model.embed.param_count();
  const std::size_t p = params_.size();
  const int b = static_cast<int>(batch.size());

  slab_.assign(static_cast<std::size_t>(b) * p, 0.0);
  loss_slab_.assign(static_cast<std::size_t>(b), 0.0);
  error_slab_.assign(static_cast<std::size_t>(b), std::string());

  const auto body = [&](int bi) {
    try {
      double* row = slab_.data() + static_cast<std::size_t>(bi) * p;
      const int example = batch[static_cast<std::size_t>(bi)];
      const auto x = data.row(example);
      const double label = data.labels[static_cast<std::size_t>(example)];

      ForwardCache fwd;
      const std::vector<double> mu = embed_forward(model.embed, x, &fwd);

      std::vector<double> value(static_cast<std::size_t>(c));
      std::vector<double> input_grad(static_cast<std::size_t>(c) * d);
      std::vector<double> leaf_mass(static_cast<std::size_t>(cache_.total_leaves()));
      SmoothWorkspace ws;
      cache_.evaluate(mu.data(), sigma, value.data(), input_grad.data(),
                      leaf_mass.data(), ws);

      const LossGrad lg = loss_and_grad(model.loss, value, label);
      if (!std::isfinite(lg.loss)) throw std::runtime_error("non-finite loss");
      loss_slab_[static_cast<std::size_t>(bi)] = lg.loss;

      // Chain into the embedding: d loss / d mu = (d loss / d value) * J.
      std::vector<double> grad_mu(static_cast<std::size_t>(d), 0.0);
      for (int ci = 0; ci < c; ++ci) {
        const double g = lg.grad[static_cast<std::size_t>(ci)];
        if (g == 0.0) continue;
        const double* jac_row = input_grad.data() + static_cast<std::size_t>(ci) * d;
        for (int j = 0; j < d; ++j) grad_mu[static_cast<std::size_t>(j)] += g * jac_row[j];
      }
      if (net_params > 0) {
        NetGrads grads = NetGrads::zeros_like(model.embed);
        embed_backward(model.embed, fwd, grad_mu, grads);
        std::size_t offset = 0;
        for (std::size_t li = 0; li < grads.weights.size(); ++li) {
          for (double g : grads.weights[li]) row[offset++] = g;
          for (double g : grads.biases[li]) row[offset++] = g;
        }
      }
      if (model.leaf_trainable) {
        // d loss / d leaf(slot, ci) = lg.grad[ci] * mass(slot).
        double* leaf_row = row + net_params;
        const std::vector<Tree>& trees = model.forest.trees;
        std::size_t entry = 0;
        for (std::size_t t = 0; t < trees.size(); ++t) {
          const int offset = cache_.leaf_offset(static_cast<int>(t));
          for (int slot = 0; slot < trees[t].num_leaves; ++slot) {
            const double mass = leaf_mass[static_cast<std::size_t>(offset + slot)];
            for (int ci = 0; ci < c; ++ci) {
              leaf_row[entry++] = lg.grad[static_cast<std::size_t>(ci)] * mass;
            }
          }
        }
      }
    } catch (const std::exception& e) {
      error_slab_[static_cast<std::size_t>(bi)] = e.what();
    }
  };

  if (exec_ == Execution::parallel) {
#pragma omp parallel for schedule(static)
    for (int bi = 0; bi < b; ++bi) body(bi);
  } else {
    for (int bi = 0; bi < b; ++bi) body(bi);
  }

  for (int bi = 0; bi < b; ++bi) {
    if (!error_slab_[static_cast<std::size_t>(bi)].empty()) {
      throw std::runtime_error("train_step: batch row " +
                               std::to_string(batch[static_cast<std::size_t>(bi)]) + ": " +
                               error_slab_[static_cast<std::size_t>(bi)]);
    }
  }

  // Fixed-order reduction: example by example, so the sum is bitwise
  // identical no matter how the loop above was scheduled.
  grad_.assign(p, 0.0);
  double loss_total = 0.0;
  for (int bi = 0; bi < b; ++bi) {
    const double* row = slab_.data() + static_cast<std::size_t>(bi) * p;
    for (std::size_t j = 0; j < p; ++j) grad_[j] += row[j];
    loss_total += loss_slab_[static_cast<std::size_t>(bi)];
  }
  const double inv_b = 1.0 / b;
  for (double& g : grad_) g *= inv_b;
  loss_out = loss_total * inv_b;
}

double TrainSession::step(const Dataset& data, std::span<const int> batch, double sigma) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  if (!(sigma > 0.0)) throw std::invalid_argument("train_step: sigma must be > 0");
  double loss = 0.0;
  batch_loss_and_grad(data, batch, sigma, loss);
  if (!std::isfinite(loss)) throw std::runtime_error("train_step: non-finite batch loss");
  adam_.update(params_, grad_);
  return loss;
}

// ------- fit -------

TrainHistory fit(Model& model, const Dataset& train, const Dataset& valid,
                 const TrainConfig& config) {
  validate_model(model);
  validate_dataset(train);
  validate_dataset(valid);
  if (train.rows == 0 || valid.rows == 0) {
    throw std::invalid_argument("fit: train and valid must be non-empty");
  }
  if (config.batch_size < 1) throw std::invalid_argument("fit: batch_size must be >= 1");
  if (config.epochs < 1) throw std::invalid_argument("fit: epochs must be >= 1");
  if (config.patience < 0) throw std::invalid_argument("fit: patience must be >= 0");

  TrainSession session(model, config.adam, config.exec);
  TrainHistory history;
  std::vector<double> best = session.snapshot();
  double best_valid = std::numeric_limits<double>::infinity();
  int bad_epochs = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double sigma = sigma_for_epoch(config, epoch);
    const auto batches = make_batches(train.rows, config.batch_size, config.seed, epoch);
    double loss_sum = 0.0;
    for (const auto& batch : batches) {
      double batch_loss = 0.0;
      try {
        batch_loss = session.step(train, batch, sigma);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("fit: epoch " + std::to_string(epoch) + ": " + e.what());
      }
      loss_sum += batch_loss * static_cast<double>(batch.size());
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.sigma = sigma;
    stats.train_loss = loss_sum / train.rows;
    stats.valid_loss = mean_loss(model, valid, sigma, config.exec);
    stats.valid_accuracy = accuracy(model, valid, /*hard=*/true);
    history.epochs.push_back(stats);

    if (stats.valid_loss < best_valid) {
      best_valid = stats.valid_loss;
      best = session.snapshot();
      history.best_epoch = epoch;
      history.best_valid_loss = best_valid;
      bad_epochs = 0;
    } else {
      ++bad_epochs;
      if (bad_epochs > config.patience) break;
    }
  }

  session.restore(best);
  return history;
}

}  // namespace pforest

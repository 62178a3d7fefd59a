#include "pforest/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pforest/rng.hpp"
#include "pforest/smoothing.hpp"

namespace pforest {

// ------- Monte-Carlo expectation -------

namespace {
constexpr int kMcShards = 256;
}

McEstimate mc_expectation(const Forest& forest, std::span<const double> mu, double sigma,
                          long n_samples, std::uint64_t seed, Execution exec) {
  validate_forest(forest);
  if (static_cast<int>(mu.size()) != forest.input_dim) {
    throw std::invalid_argument("mc_expectation: mu has " + std::to_string(mu.size()) +
                                " entries, expected " + std::to_string(forest.input_dim));
  }
  if (n_samples < 2) throw std::invalid_argument("mc_expectation: need n_samples >= 2");
  if (!(sigma >= 0.0)) throw std::invalid_argument("mc_expectation: sigma must be >= 0");

  const int c = forest.output_dim;
  const int d = forest.input_dim;
  const long base = n_samples / kMcShards;
  const long rem = n_samples % kMcShards;

  // Per-shard sums land in dedicated slots; the merge below runs in shard
  // order, so the estimate is independent of the execution policy.
  std::vector<double> shard_sum(static_cast<std::size_t>(kMcShards) * c, 0.0);
  std::vector<double> shard_sumsq(static_cast<std::size_t>(kMcShards) * c, 0.0);

  const auto body = [&](int s) {
    const long count = base + (s < rem ? 1 : 0);
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(s)));
    std::vector<double> z(static_cast<std::size_t>(d));
    std::vector<double> value(static_cast<std::size_t>(c));
    double* sum = shard_sum.data() + static_cast<std::size_t>(s) * c;
    double* sumsq = shard_sumsq.data() + static_cast<std::size_t>(s) * c;
    for (long k = 0; k < count; ++k) {
      for (int j = 0; j < d; ++j) z[static_cast<std::size_t>(j)] = mu[j] + sigma * rng.normal();
      evaluate_forest_into(forest, z.data(), value.data());
      for (int ci = 0; ci < c; ++ci) {
        sum[ci] += value[static_cast<std::size_t>(ci)];
        sumsq[ci] += value[static_cast<std::size_t>(ci)] * value[static_cast<std::size_t>(ci)];
      }
    }
  };

  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int s = 0; s < kMcShards; ++s) body(s);
  } else {
    for (int s = 0; s < kMcShards; ++s) body(s);
  }

  McEstimate est;
  est.samples = n_samples;
  est.mean.assign(static_cast<std::size_t>(c), 0.0);
  est.stderr_.assign(static_cast<std::size_t>(c), 0.0);
  std::vector<double> total_sq(static_cast<std::size_t>(c), 0.0);
  for (int s = 0; s < kMcShards; ++s) {
    for (int ci = 0; ci < c; ++ci) {
      est.mean[static_cast<std::size_t>(ci)] += shard_sum[static_cast<std::size_t>(s) * c + ci];
      total_sq[static_cast<std::size_t>(ci)] += shard_sumsq[static_cast<std::size_t>(s) * c + ci];
    }
  }
  const double n = static_cast<double>(n_samples);
  for (int ci = 0; ci < c; ++ci) {
    est.mean[static_cast<std::size_t>(ci)] /= n;
    const double mean = est.mean[static_cast<std::size_t>(ci)];
    const double variance =
        std::max(0.0, (total_sq[static_cast<std::size_t>(ci)] - n * mean * mean) / (n - 1.0));
    est.stderr_[static_cast<std::size_t>(ci)] = std::sqrt(variance / n);
  }
  return est;
}

// ------- finite differences -------

std::vector<double> finite_diff_gradient(
    const std::function<std::vector<double>(std::span<const double>)>& f,
    std::span<const double> x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_gradient: h must be > 0");
  const int n = static_cast<int>(x.size());
  const int m = static_cast<int>(f(x).size());
  std::vector<double> matrix(static_cast<std::size_t>(m) * n, 0.0);
  std::vector<double> probe(x.begin(), x.end());
  for (int i = 0; i < n; ++i) {
    const double saved = probe[static_cast<std::size_t>(i)];
    probe[static_cast<std::size_t>(i)] = saved + h;
    const std::vector<double> plus = f(probe);
    probe[static_cast<std::size_t>(i)] = saved - h;
    const std::vector<double> minus = f(probe);
    probe[static_cast<std::size_t>(i)] = saved;
    for (int r = 0; r < m; ++r) {
      matrix[static_cast<std::size_t>(r) * n + i] =
          (plus[static_cast<std::size_t>(r)] - minus[static_cast<std::size_t>(r)]) / (2.0 * h);
    }
  }
  return matrix;
}

// ------- model gradient check -------

namespace {

double rel_err(double analytic, double numeric) {
  const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / denom;
}

}  // namespace

nlohmann::json GradCheckReport::to_json() const {
  nlohmann::json entries_json = nlohmann::json::array();
  for (const GradCheckEntry& e : entries) {
    entries_json.push_back(nlohmann::json{{"name", e.name},
                                          {"analytic", e.analytic},
                                          {"numeric", e.numeric},
                                          {"abs_err", e.abs_err},
                                          {"rel_err", e.rel_err}});
  }
  return nlohmann::json{{"max_rel_err", max_rel_err},
                        {"max_rel_err_input", max_rel_err_input},
                        {"max_mass_err", max_mass_err},
                        {"tolerance", tolerance},
                        {"input_tolerance", input_tolerance},
                        {"passed", passed},
                        {"worst_entry", worst_entry},
                        {"entries", std::move(entries_json)}};
}

std::string GradCheckReport::summary(std::size_t limit) const {
  std::string out = passed ? "PASS" : "FAIL";
  out += ": max_rel_err " + std::to_string(max_rel_err) + " (tolerance " +
         std::to_string(tolerance) + "), input " + std::to_string(max_rel_err_input) +
         " (tolerance " + std::to_string(input_tolerance) + "), mass defect " +
         std::to_string(max_mass_err) + "\n";
  std::vector<GradCheckEntry> worst(entries);
  std::sort(worst.begin(), worst.end(),
            [](const GradCheckEntry& a, const GradCheckEntry& b) {
              return a.rel_err > b.rel_err;
            });
  if (worst.size() > limit) worst.resize(limit);
  for (const GradCheckEntry& e : worst) {
    out += "  " + e.name + ": analytic " + std::to_string(e.analytic) + ", numeric " +
           std::to_string(e.numeric) + ", rel_err " + std::to_string(e.rel_err) + "\n";
  }
  return out;
}

GradCheckReport gradcheck_model(const Model& model_in, const GradCheckConfig& config) {
  validate_model(model_in);
  if (!(config.tolerance > 0.0) || !(config.input_tolerance > 0.0)) {
    throw std::invalid_argument("gradcheck: tolerances must be > 0");
  }
  if (config.num_cases < 1) throw std::invalid_argument("gradcheck: num_cases must be >= 1");

  Model model = model_in;  // perturbed in place during probing
  const double sigma = model.perturb.sigma;
  const SmoothedForest cache(model.forest);
  const int d = model.forest.input_dim;
  const int c = model.forest.output_dim;
  const int total_leaves = cache.total_leaves();
  SmoothWorkspace ws;

  // Scalarized smoothed output: sum of the output components at E(x).
  std::vector<double> value(static_cast<std::size_t>(c));
  const auto scalar_at_mu = [&](const double* mu) {
    cache.evaluate(mu, sigma, value.data(), nullptr, nullptr, ws);
    double s = 0.0;
    for (double v : value) s += v;
    return s;
  };
  const auto scalar_at_x = [&](std::span<const double> x) {
    const std::vector<double> mu = embed_forward(model.embed, x);
    return scalar_at_mu(mu.data());
  };
  const auto step_for = [&](double v) {
    return std::min(config.base_step * std::max(1.0, std::abs(v)),
                    config.sigma_step * sigma);
  };
  const auto corrupted = [&](const std::string& name, double analytic) {
    if (!config.corrupt_name.empty() && name.find(config.corrupt_name) != std::string::npos) {
      return analytic * config.corrupt_scale;
    }
    return analytic;
  };

  GradCheckReport report;
  report.tolerance = config.tolerance;
  report.input_tolerance = config.input_tolerance;

  const auto record = [&](const std::string& name, double analytic, double numeric,
                          bool is_input) {
    GradCheckEntry entry;
    entry.name = name;
    entry.analytic = analytic;
    entry.numeric = numeric;
    entry.abs_err = std::abs(analytic - numeric);
    entry.rel_err = rel_err(analytic, numeric);
    if (entry.rel_err > report.max_rel_err) {
      report.max_rel_err = entry.rel_err;
      report.worst_entry = name;
    }
    if (is_input) report.max_rel_err_input = std::max(report.max_rel_err_input, entry.rel_err);
    report.entries.push_back(std::move(entry));
  };

  for (int case_index = 0; case_index < config.num_cases; ++case_index) {
    Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(case_index)));
    std::vector<double> x(static_cast<std::size_t>(model.embed.input_dim));
    for (double& v : x) v = rng.uniform();
    const std::string prefix = "case" + std::to_string(case_index) + ".";

    ForwardCache fwd;
    std::vector<double> mu = embed_forward(model.embed, x, &fwd);
    std::vector<double> input_grad(static_cast<std::size_t>(c) * d);
    std::vector<double> leaf_mass(static_cast<std::size_t>(total_leaves));
    cache.evaluate(mu.data(), sigma, value.data(), input_grad.data(), leaf_mass.data(), ws);

    // Mass normalization defect per tree.
    for (std::size_t t = 0; t < model.forest.trees.size(); ++t) {
      const int offset = cache.leaf_offset(static_cast<int>(t));
      double mass_sum = 0.0;
      for (int slot = 0; slot < model.forest.trees[t].num_leaves; ++slot) {
        mass_sum += leaf_mass[static_cast<std::size_t>(offset + slot)];
      }
      report.max_mass_err = std::max(report.max_mass_err, std::abs(mass_sum - 1.0));
    }

    // --- forest-input gradient ---
    std::vector<double> grad_mu(static_cast<std::size_t>(d), 0.0);
    for (int ci = 0; ci < c; ++ci) {
      for (int j = 0; j < d; ++j) {
        grad_mu[static_cast<std::size_t>(j)] += input_grad[static_cast<std::size_t>(ci) * d + j];
      }
    }
    for (int j = 0; j < d; ++j) {
      const double h = step_for(mu[static_cast<std::size_t>(j)]);
      const double saved = mu[static_cast<std::size_t>(j)];
      mu[static_cast<std::size_t>(j)] = saved + h;
      const double plus = scalar_at_mu(mu.data());
      mu[static_cast<std::size_t>(j)] = saved - h;
      const double minus = scalar_at_mu(mu.data());
      mu[static_cast<std::size_t>(j)] = saved;
      const std::string name = prefix + "input[" + std::to_string(j) + "]";
      record(name, corrupted(name, grad_mu[static_cast<std::size_t>(j)]),
             (plus - minus) / (2.0 * h), /*is_input=*/true);
    }

    // --- leaf values ---
    for (std::size_t t = 0; t < model.forest.trees.size(); ++t) {
      Tree& tree = model.forest.trees[t];
      const int offset = cache.leaf_offset(static_cast<int>(t));
      for (int slot = 0; slot < tree.num_leaves; ++slot) {
        const double mass = leaf_mass[static_cast<std::size_t>(offset + slot)];
        for (int ci = 0; ci < c; ++ci) {
          double& leaf = tree.leaf_values[static_cast<std::size_t>(slot) * c + ci];
          const double h = step_for(leaf);
          const double saved = leaf;
          leaf = saved + h;
          const double plus = scalar_at_mu(mu.data());
          leaf = saved - h;
          const double minus = scalar_at_mu(mu.data());
          leaf = saved;
          const std::string name = prefix + "tree" + std::to_string(t) + ".leaf" +
                                   std::to_string(slot) + "[" + std::to_string(ci) + "]";
          record(name, corrupted(name, mass), (plus - minus) / (2.0 * h), false);
        }
      }
    }

    // --- embedding parameters ---
    if (!model.embed.layers.empty()) {
      NetGrads grads = NetGrads::zeros_like(model.embed);
      embed_backward(model.embed, fwd, grad_mu, grads);
      for (std::size_t li = 0; li < model.embed.layers.size(); ++li) {
        Layer& layer = model.embed.layers[li];
        const auto probe_param = [&](double& param, double analytic, const std::string& name) {
          const double h = step_for(param);
          const double saved = param;
          param = saved + h;
          const double plus = scalar_at_x(x);
          param = saved - h;
          const double minus = scalar_at_x(x);
          param = saved;
          record(name, corrupted(name, analytic), (plus - minus) / (2.0 * h), false);
        };
        for (std::size_t wi = 0; wi < layer.weights.size(); ++wi) {
          probe_param(layer.weights[wi], grads.weights[li][wi],
                      prefix + "layer" + std::to_string(li) + ".weight[" + std::to_string(wi) + "]");
        }
        for (std::size_t bi = 0; bi < layer.biases.size(); ++bi) {
          probe_param(layer.biases[bi], grads.biases[li][bi],
                      prefix + "layer" + std::to_string(li) + ".bias[" + std::to_string(bi) + "]");
        }
      }
    }
  }

  report.passed = report.max_rel_err_input <= config.input_tolerance;
  for (const GradCheckEntry& e : report.entries) {
    if (e.name.find(".input[") == std::string::npos && e.rel_err > config.tolerance) {
      report.passed = false;
      break;
    }
  }
  return report;
}

GradCheckReport gradcheck_model(const Model& model, int num_cases, double tolerance,
                                std::uint64_t seed) {
  GradCheckConfig config;
  config.num_cases = num_cases;
  config.tolerance = tolerance;
  config.input_tolerance = tolerance / 10.0;
  config.seed = seed;
  return gradcheck_model(model, config);
}

}  // namespace pforest

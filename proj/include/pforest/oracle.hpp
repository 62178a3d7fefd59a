#pragma once

// Independent verification machinery: a Monte-Carlo estimator of the
// smoothed forest's defining expectation, a central finite-difference
// differentiator, and a gradient-check harness over whole models.
//
// These deliberately avoid the analytic smoothing code paths: the MC
// estimator samples the exact forest, and finite differences probe any
// scalar function numerically, so agreement between the two sides is
// meaningful evidence.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nlohmann/json.hpp"
#include "pforest/exec.hpp"
#include "pforest/forest.hpp"
#include "pforest/training.hpp"

namespace pforest {

// ------- Monte-Carlo expectation -------

struct McEstimate {
  std::vector<double> mean;    // output_dim
  std::vector<double> stderr_; // output_dim, standard error of the mean
  long samples = 0;
};

// Mean and standard error of evaluate_forest(mu + sigma * eps) over
// n_samples standard normal draws.  Sampling is sharded over 256 fixed
// streams derived from the seed and merged in shard order, so the result is
// identical for the serial and parallel policies and any thread count.
McEstimate mc_expectation(const Forest& forest, std::span<const double> mu, double sigma,
                          long n_samples, std::uint64_t seed,
                          Execution exec = Execution::parallel);

// ------- finite differences -------

// Central differences of a vector-valued function: column i of the returned
// matrix (row-major, rows = f's output length) is (f(x + h e_i) - f(x - h e_i)) / 2h.
std::vector<double> finite_diff_gradient(
    const std::function<std::vector<double>(std::span<const double>)>& f,
    std::span<const double> x, double h);

// ------- model gradient check -------

struct GradCheckEntry {
  std::string name;  // e.g. "input[2]", "tree3.leaf7[0]", "layer1.weight[4]"
  double analytic = 0.0;
  double numeric = 0.0;
  double abs_err = 0.0;
  double rel_err = 0.0;  // abs_err / max(1, |analytic|, |numeric|)
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;
  double max_rel_err_input = 0.0;
  double max_mass_err = 0.0;  // worst per-tree |sum of masses - 1|
  double tolerance = 0.0;
  double input_tolerance = 0.0;
  bool passed = false;
  std::string worst_entry;

  nlohmann::json to_json() const;
  // Entries sorted by rel_err are summarized; `limit` rows at most.
  std::string summary(std::size_t limit = 10) const;
};

struct GradCheckConfig {
  int num_cases = 10;          // random inputs sampled
  double tolerance = 1e-4;     // leaf values and embedding parameters
  double input_tolerance = 1e-5;
  std::uint64_t seed = 0;
  // Central-difference step: min(base_step * max(1, |value|), sigma_step * sigma).
  // The sigma cap keeps the O(h^2) truncation error well below the
  // tolerances even at the smallest sigma the acceptance range allows.
  double base_step = 1e-4;
  double sigma_step = 1e-3;
  // Fault injection for validating the harness itself (negative control):
  // analytic gradients of entries whose name contains this substring are
  // scaled by corrupt_scale before comparison.  Empty disables.
  std::string corrupt_name;
  double corrupt_scale = 1.0;
};

// Compares analytic gradients of the scalarized smoothed output (summed over
// output components) against central finite differences at `num_cases`
// random inputs: the forest-input gradient, every leaf value, and every
// embedding parameter.  Also records the per-tree mass-sum defect.
GradCheckReport gradcheck_model(const Model& model, const GradCheckConfig& config);
// Spec'd convenience arity: tolerance applies to parameters and leaves;
// the input tolerance is tolerance / 10.
GradCheckReport gradcheck_model(const Model& model, int num_cases, double tolerance,
                                std::uint64_t seed);

}  // namespace pforest

// Smoothed evaluation: Gaussian CDF/PDF, region masses, values, gradients,
// the structure cache, the hard-forest limit, and the Monte Carlo and
// finite-difference oracles.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "pforest/forest.hpp"
#include "pforest/generate.hpp"
#include "pforest/oracle.hpp"
#include "pforest/rng.hpp"
#include "pforest/smoothing.hpp"
#include "pforest/training.hpp"

using namespace pforest;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Independent series evaluation of the standard normal CDF:
//   Phi(x) = 1/2 + pdf(x) * (x + x^3/3 + x^5/(3*5) + x^7/(3*5*7) + ...)
// (converges rapidly for |x| <= 6; no erf/erfc involved).
double cdf_series(double x) {
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::acos(-1.0));
  double term = x;
  double sum = x;
  for (int k = 1; k < 200; ++k) {
    term *= x * x / (2.0 * k + 1.0);
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return 0.5 + pdf * sum;
}

// Depth-1 stump on x0 with the given threshold and leaf values.
Tree stump(double threshold, double left, double right) {
  Tree tree;
  tree.nodes.resize(3);
  tree.nodes[0] = {0, threshold, 1, 2, -1};
  tree.nodes[1] = {-1, 0.0, -1, -1, 0};
  tree.nodes[2] = {-1, 0.0, -1, -1, 1};
  tree.leaf_values = {left, right};
  tree.num_leaves = 2;
  tree.output_dim = 1;
  return tree;
}

Forest stump_forest(double threshold, double left, double right) {
  Forest forest;
  forest.input_dim = 1;
  forest.output_dim = 1;
  forest.trees = {stump(threshold, left, right)};
  return forest;
}

}  // namespace

TEST_SUITE("smooth") {

TEST_CASE("gaussian cdf/pdf: frozen reference values") {
  // Reference values computed independently to full double precision.
  CHECK(gaussian_cdf(0.0) == 0.5);
  CHECK(gaussian_cdf(1.0) == doctest::Approx(0.8413447460685429).epsilon(1e-15));
  CHECK(gaussian_cdf(1.96) == doctest::Approx(0.9750021048517795).epsilon(1e-15));
  CHECK(gaussian_cdf(-1.0) == doctest::Approx(1.0 - 0.8413447460685429).epsilon(1e-15));
  CHECK(gaussian_cdf(kInf) == 1.0);
  CHECK(gaussian_cdf(-kInf) == 0.0);
  CHECK(gaussian_pdf(0.0) == doctest::Approx(0.3989422804014327).epsilon(1e-15));
  CHECK(gaussian_pdf(2.0) == doctest::Approx(0.05399096651318806).epsilon(1e-14));
  CHECK(gaussian_pdf(kInf) == 0.0);
  CHECK(gaussian_pdf(-kInf) == 0.0);
}

TEST_CASE("gaussian cdf: matches an independent series on [-6, 6]") {
  for (int i = 0; i <= 120; ++i) {
    const double x = -6.0 + i * 0.1;
    CHECK(gaussian_cdf(x) == doctest::Approx(cdf_series(x)).epsilon(1e-13));
  }
}

TEST_CASE("region mass: single and multi-feature products") {
  PerturbationSpec spec;
  spec.sigma = 0.25;

  LeafRegion box;
  box.leaf = 0;
  box.constraints = {{0, {0.0, 1.0}}};
  // mu = 0.5 centers the box two sigmas from each edge.
  const double expected = 0.9544997361036416;  // Phi(2) - Phi(-2)
  CHECK(region_mass(box, std::vector<double>{0.5}, spec) ==
        doctest::Approx(expected).epsilon(1e-15));

  LeafRegion box2 = box;
  box2.constraints.push_back({1, {0.0, 1.0}});
  CHECK(region_mass(box2, std::vector<double>{0.5, 0.5}, spec) ==
        doctest::Approx(expected * expected).epsilon(1e-14));

  // Unbounded sides use Phi(+-inf).
  LeafRegion half;
  half.leaf = 0;
  half.constraints = {{0, {0.5, kInf}}};
  CHECK(region_mass(half, std::vector<double>{0.5}, spec) == doctest::Approx(0.5));

  // No constraints: the whole space.
  LeafRegion whole;
  whole.leaf = 0;
  CHECK(region_mass(whole, std::vector<double>{0.5}, spec) == 1.0);
}

TEST_CASE("smoothed value: stump hand cases") {
  const Forest forest = stump_forest(0.5, 0.0, 1.0);
  PerturbationSpec spec;
  spec.sigma = 0.07;

  // At the cut, mass splits evenly: value = P(z >= 0.5) = 0.5.
  CHECK(smoothed_evaluate(forest, std::vector<double>{0.5}, spec).value[0] ==
        doctest::Approx(0.5).epsilon(1e-15));
  // One sigma right of the cut: P(z >= cut) = Phi(1).
  CHECK(smoothed_evaluate(forest, std::vector<double>{0.5 + spec.sigma}, spec).value[0] ==
        doctest::Approx(0.8413447460685429).epsilon(1e-13));
  // General leaves interpolate: value = l + (r - l) * Phi((mu - cut)/sigma).
  const Forest general = stump_forest(0.5, 3.0, -2.0);
  CHECK(smoothed_evaluate(general, std::vector<double>{0.5}, spec).value[0] ==
        doctest::Approx(0.5 * (3.0 - 2.0)).epsilon(1e-14));
}

TEST_CASE("smoothed gradient: stump slope is pdf(0)/sigma at the cut") {
  PerturbationSpec spec;
  spec.sigma = 0.2;
  const Forest forest = stump_forest(0.5, 0.0, 1.0);
  const std::vector<double> grad =
      smoothed_gradient_input(forest, std::vector<double>{0.5}, spec);
  REQUIRE(grad.size() == 1);
  CHECK(grad[0] == doctest::Approx(0.3989422804014327 / spec.sigma).epsilon(1e-13));
}

TEST_CASE("smoothed gradient: flat far from every cut") {
  PerturbationSpec spec;
  spec.sigma = 0.03;
  const Forest forest = stump_forest(0.5, 0.0, 1.0);
  // Ten sigmas from the cut the response is flat to ~1e-23.
  const std::vector<double> grad =
      smoothed_gradient_input(forest, std::vector<double>{0.5 - 10.0 * spec.sigma}, spec);
  CHECK(std::abs(grad[0]) <= 1e-8);
  const double value =
      smoothed_evaluate(forest, std::vector<double>{0.5 - 10.0 * spec.sigma}, spec).value[0];
  CHECK(value <= 1e-8);
}

TEST_CASE("smoothed value: per-tree leaf masses sum to one") {
  Rng rng(1234);
  PerturbationSpec spec;
  for (double sigma : {0.01, 0.05, 0.3}) {
    spec.sigma = sigma;
    const Forest forest = generate_random_forest(6, 3, 4, LeafInit::uniform01, 1, rng);
    const SmoothedForest cache(forest);
    Rng points(99);
    for (int trial = 0; trial < 20; ++trial) {
      const std::vector<double> mu = {points.uniform(), points.uniform(), points.uniform()};
      const SmoothedValue sv = cache.evaluate(mu, spec);
      for (std::size_t t = 0; t < forest.trees.size(); ++t) {
        double sum = 0.0;
        const int begin = cache.leaf_offset(static_cast<int>(t));
        for (int s = 0; s < forest.trees[t].num_leaves; ++s) {
          const double mass = sv.leaf_mass[static_cast<std::size_t>(begin + s)];
          CHECK(mass >= 0.0);
          sum += mass;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("smoothed value: bounded by leaf extremes, linear in leaves") {
  Rng rng(4321);
  const Forest forest = generate_random_forest(1, 2, 4, LeafInit::uniform01, 1, rng);
  const Tree& tree = forest.trees[0];
  const double lo = *std::min_element(tree.leaf_values.begin(), tree.leaf_values.end());
  const double hi = *std::max_element(tree.leaf_values.begin(), tree.leaf_values.end());
  PerturbationSpec spec;
  spec.sigma = 0.12;

  Forest doubled = forest;
  for (double& v : doubled.trees[0].leaf_values) v *= 2.0;

  Rng points(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::vector<double> mu = {points.uniform(), points.uniform()};
    const double v = smoothed_evaluate(forest, mu, spec).value[0];
    CHECK(v >= lo - 1e-12);
    CHECK(v <= hi + 1e-12);
    CHECK(smoothed_evaluate(doubled, mu, spec).value[0] == doctest::Approx(2.0 * v));
  }
}

TEST_CASE("smoothed value: monotone step stays monotone") {
  // Increasing step function in 1D: leaves 0, 1, 2 from left to right.
  Tree tree;
  tree.nodes.resize(5);
  tree.nodes[0] = {0, 0.5, 1, 2, -1};
  tree.nodes[1] = {0, 0.25, 3, 4, -1};
  tree.nodes[2] = {-1, 0.0, -1, -1, 2};
  tree.nodes[3] = {-1, 0.0, -1, -1, 0};
  tree.nodes[4] = {-1, 0.0, -1, -1, 1};
  tree.leaf_values = {0.0, 1.0, 2.0};
  tree.num_leaves = 3;
  tree.output_dim = 1;
  Forest forest;
  forest.input_dim = 1;
  forest.output_dim = 1;
  forest.trees = {tree};
  validate_forest(forest);

  PerturbationSpec spec;
  spec.sigma = 0.09;
  double prev = -kInf;
  for (int i = 0; i <= 200; ++i) {
    const double v =
        smoothed_evaluate(forest, std::vector<double>{i / 200.0}, spec).value[0];
    CHECK(v >= prev - 1e-14);
    prev = v;
  }
}

TEST_CASE("cache: fused evaluation equals the region-by-region sum bitwise") {
  Rng rng(86);
  for (int config = 0; config < 4; ++config) {
    const int dim = 1 + config;
    const Forest forest =
        generate_random_forest(3 + config, dim, 2 + config, LeafInit::uniform01,
                               1 + config % 2, rng);
    const SmoothedForest cache(forest);
    PerturbationSpec spec;
    spec.sigma = 0.02 + 0.1 * config;

    Rng points(87);
    std::vector<double> mu(static_cast<std::size_t>(dim));
    for (int trial = 0; trial < 25; ++trial) {
      for (double& m : mu) m = points.uniform();
      const SmoothedValue fast = cache.evaluate(mu, spec);

      // Reference: explicit regions, same factor order, same expressions.
      std::vector<double> slow(static_cast<std::size_t>(forest.output_dim), 0.0);
      for (const Tree& tree : forest.trees) {
        for (const LeafRegion& region : extract_leaf_regions(tree)) {
          const double mass = region_mass(region, mu, spec);
          const std::span<const double> leaf = tree.leaf_value(region.leaf);
          for (int c = 0; c < forest.output_dim; ++c) {
            slow[static_cast<std::size_t>(c)] += mass * leaf[static_cast<std::size_t>(c)];
          }
        }
      }
      for (int c = 0; c < forest.output_dim; ++c) {
        CHECK(fast.value[static_cast<std::size_t>(c)] == slow[static_cast<std::size_t>(c)]);
      }
    }
  }
}

TEST_CASE("cache: leaf masses match region_mass bitwise") {
  Rng rng(88);
  const Forest forest = generate_random_forest(4, 2, 3, LeafInit::uniform01, 1, rng);
  const SmoothedForest cache(forest);
  PerturbationSpec spec;
  spec.sigma = 0.06;
  const std::vector<double> mu = {0.37, 0.81};
  const SmoothedValue sv = cache.evaluate(mu, spec);
  for (std::size_t t = 0; t < forest.trees.size(); ++t) {
    const int begin = cache.leaf_offset(static_cast<int>(t));
    for (const LeafRegion& region : extract_leaf_regions(forest.trees[t])) {
      CHECK(sv.leaf_mass[static_cast<std::size_t>(begin + region.leaf)] ==
            region_mass(region, mu, spec));
    }
  }
}

TEST_CASE("cache: leaf values may change without rebuilding") {
  Rng rng(90);
  Forest forest = generate_random_forest(2, 2, 3, LeafInit::uniform01, 1, rng);
  const SmoothedForest cache(forest);
  PerturbationSpec spec;
  spec.sigma = 0.1;
  const std::vector<double> mu = {0.4, 0.6};
  const SmoothedValue before = cache.evaluate(mu, spec);

  // Bump one leaf: the value must move by exactly mass * delta (linearity),
  // using the mass the cache itself reported.
  const double delta = 0.75;
  forest.trees[1].leaf_values[2] += delta;
  const SmoothedValue after = cache.evaluate(mu, spec);
  const double mass = before.leaf_mass[static_cast<std::size_t>(cache.leaf_offset(1) + 2)];
  CHECK(after.value[0] == doctest::Approx(before.value[0] + mass * delta).epsilon(1e-14));
}

TEST_CASE("hard limit: tiny sigma reproduces the exact forest away from cuts") {
  Rng rng(91);
  const Forest forest = generate_random_forest(5, 2, 4, LeafInit::uniform01, 1, rng);
  PerturbationSpec spec;
  spec.sigma = 1e-6;
  const SmoothedForest cache(forest);

  // Collect every threshold per feature to keep probes off the cuts.
  std::vector<std::vector<double>> cuts(2);
  for (const Tree& tree : forest.trees) {
    for (const TreeNode& node : tree.nodes) {
      if (!node.is_leaf()) cuts[static_cast<std::size_t>(node.feature)].push_back(node.threshold);
    }
  }
  Rng points(92);
  int tested = 0;
  for (int trial = 0; trial < 30000 && tested < 10000; ++trial) {
    const std::vector<double> mu = {points.uniform(), points.uniform()};
    bool clear = true;
    for (int f = 0; f < 2 && clear; ++f) {
      for (double cut : cuts[static_cast<std::size_t>(f)]) {
        if (std::abs(mu[static_cast<std::size_t>(f)] - cut) < 1e-3) {
          clear = false;
          break;
        }
      }
    }
    if (!clear) continue;
    ++tested;
    const double smooth = cache.evaluate(mu, spec).value[0];
    const double exact = evaluate_forest(forest, mu)[0];
    CHECK(std::abs(smooth - exact) <= 1e-9);
  }
  CHECK(tested == 10000);
}

TEST_CASE("spec validation: sigma must be finite and positive") {
  PerturbationSpec spec;
  spec.sigma = 0.0;
  CHECK_THROWS_AS(validate(spec), std::invalid_argument);
  spec.sigma = -1.0;
  CHECK_THROWS_AS(validate(spec), std::invalid_argument);
  spec.sigma = std::nan("");
  CHECK_THROWS_AS(validate(spec), std::invalid_argument);
  const Forest forest = stump_forest(0.5, 0.0, 1.0);
  CHECK_THROWS_AS(smoothed_evaluate(forest, std::vector<double>{0.5}, spec),
                  std::invalid_argument);
}

// ------- Monte Carlo oracle -------

TEST_CASE("mc: constant forest has zero variance and the exact mean") {
  Forest forest;
  forest.input_dim = 2;
  forest.output_dim = 1;
  Tree tree;
  tree.nodes.resize(1);
  tree.nodes[0] = {-1, 0.0, -1, -1, 0};
  tree.leaf_values = {3.25};
  tree.num_leaves = 1;
  tree.output_dim = 1;
  forest.trees = {tree};

  const McEstimate est =
      mc_expectation(forest, std::vector<double>{0.5, 0.5}, 0.1, 10000, 7);
  CHECK(est.mean[0] == doctest::Approx(3.25).epsilon(1e-15));
  CHECK(est.stderr_[0] == doctest::Approx(0.0));
  CHECK(est.samples == 10000);
}

TEST_CASE("mc: stump mean matches the closed form within 4 standard errors") {
  const Forest forest = stump_forest(0.5, 0.0, 1.0);
  PerturbationSpec spec;
  spec.sigma = 0.15;
  const std::vector<double> mu = {0.55};
  const double analytic = smoothed_evaluate(forest, mu, spec).value[0];
  const McEstimate est = mc_expectation(forest, mu, spec.sigma, 400000, 123);
  REQUIRE(est.stderr_[0] > 0.0);
  CHECK(std::abs(est.mean[0] - analytic) <= 4.0 * est.stderr_[0]);
}

TEST_CASE("mc: deterministic in the seed; serial equals parallel bitwise") {
  Rng rng(8);
  const Forest forest = generate_random_forest(3, 2, 3, LeafInit::uniform01, 1, rng);
  const std::vector<double> mu = {0.5, 0.5};
  const McEstimate a = mc_expectation(forest, mu, 0.1, 50000, 42, Execution::parallel);
  const McEstimate b = mc_expectation(forest, mu, 0.1, 50000, 42, Execution::serial);
  const McEstimate c = mc_expectation(forest, mu, 0.1, 50000, 43);
  CHECK(a.mean[0] == b.mean[0]);        // bitwise
  CHECK(a.stderr_[0] == b.stderr_[0]);  // bitwise
  CHECK(a.mean[0] != c.mean[0]);
  CHECK_THROWS_AS(mc_expectation(forest, mu, 0.1, 1, 42), std::invalid_argument);
}

// ------- finite differences -------

TEST_CASE("fd: exact for affine maps, second-order for smooth ones") {
  // Affine: f(x) = (2x0 - 3x1 + 1, x0): derivative recovered to ~1e-10.
  const auto affine = [](std::span<const double> x) {
    return std::vector<double>{2.0 * x[0] - 3.0 * x[1] + 1.0, x[0]};
  };
  const std::vector<double> jac =
      finite_diff_gradient(affine, std::vector<double>{0.3, 0.7}, 1e-5);
  REQUIRE(jac.size() == 4);  // 2x2 row-major
  CHECK(jac[0] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(jac[1] == doctest::Approx(-3.0).epsilon(1e-9));
  CHECK(jac[2] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(jac[3] == doctest::Approx(0.0));

  // Cubic: central differences of t^3 have error exactly h^2 (f''' = 6).
  const auto cubic = [](std::span<const double> x) {
    return std::vector<double>{x[0] * x[0] * x[0]};
  };
  const double h = 1e-3;
  const double t = 0.8;
  const std::vector<double> d = finite_diff_gradient(cubic, std::vector<double>{t}, h);
  CHECK(d[0] - 3.0 * t * t == doctest::Approx(h * h).epsilon(1e-4));
}

// ------- model gradient check -------

TEST_CASE("gradcheck: random model passes at tight tolerances") {
  Rng rng(mix_seed(17, 0xC0FFEEull));
  Model model;
  model.embed = make_mlp(2, {3, 2}, Activation::tanh, Activation::sigmoid, rng);
  model.forest = generate_random_forest(4, 2, 3, LeafInit::uniform01, 1, rng);
  model.perturb.sigma = 0.05;

  const GradCheckReport report = gradcheck_model(model, 4, 1e-4, 17);
  CHECK(report.passed);
  CHECK(report.max_rel_err <= 1e-4);
  CHECK(report.max_rel_err_input <= 1e-5);
  CHECK(report.max_mass_err <= 1e-9);
  CHECK(!report.entries.empty());
}

TEST_CASE("gradcheck: identity embedding with multi-output forest passes") {
  Rng rng(18);
  Model model;
  model.forest = generate_random_forest(3, 3, 3, LeafInit::uniform01, 2, rng);
  model.embed = make_identity_net(3);
  model.loss = LossKind::softmax_cross_entropy;
  model.perturb.sigma = 0.02;
  const GradCheckReport report = gradcheck_model(model, 3, 1e-4, 18);
  CHECK(report.passed);
}

TEST_CASE("gradcheck: a corrupted gradient fails and names the culprit") {
  Rng rng(19);
  Model model;
  model.forest = generate_random_forest(2, 2, 2, LeafInit::uniform01, 1, rng);
  model.embed = make_identity_net(2);
  model.perturb.sigma = 0.05;

  GradCheckConfig config;
  config.num_cases = 2;
  config.tolerance = 1e-4;
  config.input_tolerance = 1e-5;
  config.seed = 19;
  config.corrupt_name = "tree0.leaf1";  // double this leaf's analytic gradient
  config.corrupt_scale = 2.0;

  const GradCheckReport report = gradcheck_model(model, config);
  CHECK(!report.passed);
  CHECK(report.worst_entry.find("tree0.leaf1") != std::string::npos);
  // The summary (what the CLI prints) names the offending parameter too.
  CHECK(report.summary().find("tree0.leaf1") != std::string::npos);

  // Same setup without corruption passes: the failure above is real signal.
  config.corrupt_name.clear();
  CHECK(gradcheck_model(model, config).passed);
}

TEST_CASE("gradcheck: analytic input gradient matches the oracle directly") {
  Rng rng(20);
  const Forest forest = generate_random_forest(4, 2, 4, LeafInit::uniform01, 1, rng);
  PerturbationSpec spec;
  spec.sigma = 0.08;
  const std::vector<double> mu = {0.45, 0.55};
  const std::vector<double> analytic = smoothed_gradient_input(forest, mu, spec);

  const auto f = [&](std::span<const double> x) {
    return smoothed_evaluate(forest, x, spec).value;
  };
  const std::vector<double> numeric = finite_diff_gradient(f, mu, 1e-5);
  REQUIRE(numeric.size() == analytic.size());
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    CHECK(analytic[i] == doctest::Approx(numeric[i]).epsilon(1e-6));
  }
}

}  // TEST_SUITE

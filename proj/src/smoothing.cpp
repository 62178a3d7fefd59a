#include "pforest/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pforest {

// ------- Gaussian helpers -------

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;   // 1/sqrt(2)
constexpr double kInvSqrt2Pi = 0.39894228040143267794; // 1/sqrt(2*pi)
}  // namespace

double gaussian_cdf(double t) { return 0.5 * std::erfc(-t * kInvSqrt2); }

double gaussian_pdf(double t) {
  if (std::isinf(t)) return 0.0;
  return kInvSqrt2Pi * std::exp(-0.5 * t * t);
}

void validate(const PerturbationSpec& spec) {
  if (!(spec.sigma > 0.0) || !std::isfinite(spec.sigma)) {
    throw std::invalid_argument("perturbation: sigma must be finite and > 0");
  }
}

// ------- region mass on explicit regions -------

double region_mass(const LeafRegion& region, std::span<const double> mu,
                   const PerturbationSpec& spec) {
  validate(spec);
  double mass = 1.0;
  for (const auto& [feature, iv] : region.constraints) {
    if (feature < 0 || feature >= static_cast<int>(mu.size())) {
      throw std::invalid_argument("region_mass: constraint on feature " +
                                  std::to_string(feature) + " but mu has " +
                                  std::to_string(mu.size()) + " entries");
    }
    const double m = mu[static_cast<std::size_t>(feature)];
    // Phi handles infinite bounds natively: Phi(+inf)=1, Phi(-inf)=0.
    const double upper_cdf = gaussian_cdf((iv.upper - m) / spec.sigma);
    const double lower_cdf = gaussian_cdf((iv.lower - m) / spec.sigma);
    mass *= upper_cdf - lower_cdf;
  }
  return mass;
}

// ------- SmoothedForest construction -------

SmoothedForest::SmoothedForest(const Forest& forest) : forest_(&forest) {
  validate_forest(forest);
  input_dim_ = forest.input_dim;
  output_dim_ = forest.output_dim;
  tree_cut_offset_.push_back(0);
  tree_region_offset_.push_back(0);
  region_con_offset_.push_back(0);
  for (const Tree& tree : forest.trees) {
    leaf_offset_.push_back(total_leaves_);
    total_leaves_ += tree.num_leaves;
    add_tree(tree);
  }
}

void SmoothedForest::add_tree(const Tree& tree) {
  const int cut_begin = tree_cut_offset_.back();
  // Assign cut ids in node order (internal nodes only) and remember each
  // node's local cut id for the region walk.
  node_cut_.assign(tree.nodes.size(), -1);
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    if (!tree.nodes[i].is_leaf()) {
      node_cut_[i] = static_cast<int>(cut_feature_.size()) - cut_begin;
      cut_feature_.push_back(tree.nodes[i].feature);
      cut_threshold_.push_back(tree.nodes[i].threshold);
    }
  }
  const int num_cuts = static_cast<int>(cut_feature_.size()) - cut_begin;
  max_tree_cuts_ = std::max(max_tree_cuts_, num_cuts);
  tree_cut_offset_.push_back(static_cast<int>(cut_feature_.size()));

  std::vector<std::pair<int, int>> bound_cuts(
      static_cast<std::size_t>(input_dim_), {-1, -1});  // per feature: (lo, hi) local cut ids
  walk(tree, 0, cut_begin, bound_cuts);
  tree_region_offset_.push_back(static_cast<int>(region_leaf_.size()));
}

void SmoothedForest::walk(const Tree& tree, int node_index, int tree_cut_begin,
                          std::vector<std::pair<int, int>>& bound_cuts) {
  const TreeNode& node = tree.nodes[static_cast<std::size_t>(node_index)];
  if (node.is_leaf()) {
    for (int f = 0; f < input_dim_; ++f) {
      const auto [lo, hi] = bound_cuts[static_cast<std::size_t>(f)];
      if (lo < 0 && hi < 0) continue;
      con_feature_.push_back(f);
      con_lo_.push_back(lo);
      con_hi_.push_back(hi);
    }
    const int ncons = static_cast<int>(con_feature_.size()) - region_con_offset_.back();
    max_region_cons_ = std::max(max_region_cons_, ncons);
    region_con_offset_.push_back(static_cast<int>(con_feature_.size()));
    region_leaf_.push_back(node.leaf);
    return;
  }

  const int local_cut = node_cut_[static_cast<std::size_t>(node_index)];
  const double threshold = cut_threshold_[static_cast<std::size_t>(tree_cut_begin + local_cut)];
  auto& [lo, hi] = bound_cuts[static_cast<std::size_t>(node.feature)];
  const auto value_of = [&](int cut) {
    return cut < 0 ? std::numeric_limits<double>::quiet_NaN()
                   : cut_threshold_[static_cast<std::size_t>(tree_cut_begin + cut)];
  };

  // Left: x < threshold tightens the upper bound (keep the smaller).
  const int saved_hi = hi;
  if (hi < 0 || threshold < value_of(hi)) hi = local_cut;
  if (lo >= 0 && !(value_of(lo) < value_of(hi))) {
    throw std::invalid_argument("tree: node " + std::to_string(node_index) +
                                " makes its left subtree empty (contradictory thresholds "
                                "on feature " + std::to_string(node.feature) + ")");
  }
  walk(tree, node.left, tree_cut_begin, bound_cuts);
  hi = saved_hi;

  // Right: x >= threshold tightens the lower bound (keep the larger).
  const int saved_lo = lo;
  if (lo < 0 || threshold > value_of(lo)) lo = local_cut;
  if (hi >= 0 && !(value_of(lo) < value_of(hi))) {
    throw std::invalid_argument("tree: node " + std::to_string(node_index) +
                                " makes its right subtree empty (contradictory thresholds "
                                "on feature " + std::to_string(node.feature) + ")");
  }
  walk(tree, node.right, tree_cut_begin, bound_cuts);
  lo = saved_lo;
}

// ------- evaluation -------

void SmoothedForest::evaluate(const double* mu, double sigma, double* value,
                              double* input_grad, double* leaf_mass,
                              SmoothWorkspace& ws) const {
  const int C = output_dim_;
  const int d = input_dim_;
  if (value) std::fill(value, value + C, 0.0);
  if (input_grad) std::fill(input_grad, input_grad + static_cast<std::size_t>(C) * d, 0.0);
  ws.cdf.resize(static_cast<std::size_t>(max_tree_cuts_));
  ws.pdf.resize(static_cast<std::size_t>(max_tree_cuts_));
  ws.factors.resize(static_cast<std::size_t>(max_region_cons_));

  const int num_trees = static_cast<int>(forest_->trees.size());
  for (int t = 0; t < num_trees; ++t) {
    const Tree& tree = forest_->trees[static_cast<std::size_t>(t)];
    const int cut_begin = tree_cut_offset_[static_cast<std::size_t>(t)];
    const int num_cuts = tree_cut_offset_[static_cast<std::size_t>(t) + 1] - cut_begin;
    for (int k = 0; k < num_cuts; ++k) {
      const double tt =
          (cut_threshold_[static_cast<std::size_t>(cut_begin + k)] -
           mu[cut_feature_[static_cast<std::size_t>(cut_begin + k)]]) / sigma;
      ws.cdf[static_cast<std::size_t>(k)] = gaussian_cdf(tt);
      ws.pdf[static_cast<std::size_t>(k)] = gaussian_pdf(tt);
    }

    const int region_begin = tree_region_offset_[static_cast<std::size_t>(t)];
    const int region_end = tree_region_offset_[static_cast<std::size_t>(t) + 1];
    for (int r = region_begin; r < region_end; ++r) {
      const int con_begin = region_con_offset_[static_cast<std::size_t>(r)];
      const int ncons = region_con_offset_[static_cast<std::size_t>(r) + 1] - con_begin;
      double mass = 1.0;
      for (int j = 0; j < ncons; ++j) {
        const int lo = con_lo_[static_cast<std::size_t>(con_begin + j)];
        const int hi = con_hi_[static_cast<std::size_t>(con_begin + j)];
        const double upper_cdf = hi < 0 ? 1.0 : ws.cdf[static_cast<std::size_t>(hi)];
        const double lower_cdf = lo < 0 ? 0.0 : ws.cdf[static_cast<std::size_t>(lo)];
        const double factor = upper_cdf - lower_cdf;
        ws.factors[static_cast<std::size_t>(j)] = factor;
        mass *= factor;
      }

      const auto leaf_value =
          tree.leaf_value(region_leaf_[static_cast<std::size_t>(r)]);
      if (leaf_mass) {
        leaf_mass[leaf_offset_[static_cast<std::size_t>(t)] +
                  region_leaf_[static_cast<std::size_t>(r)]] = mass;
      }
      if (value) {
        for (int c = 0; c < C; ++c) value[c] += leaf_value[c] * mass;
      }
      if (input_grad) {
        for (int j = 0; j < ncons; ++j) {
          // Product of the remaining factors, recomputed per constraint.
          double rest = 1.0;
          for (int k = 0; k < ncons; ++k) {
            if (k != j) rest *= ws.factors[static_cast<std::size_t>(k)];
          }
          const int lo = con_lo_[static_cast<std::size_t>(con_begin + j)];
          const int hi = con_hi_[static_cast<std::size_t>(con_begin + j)];
          const double lower_pdf = lo < 0 ? 0.0 : ws.pdf[static_cast<std::size_t>(lo)];
          const double upper_pdf = hi < 0 ? 0.0 : ws.pdf[static_cast<std::size_t>(hi)];
          const double dmass = (lower_pdf - upper_pdf) / sigma * rest;
          const int feature = con_feature_[static_cast<std::size_t>(con_begin + j)];
          for (int c = 0; c < C; ++c) {
            input_grad[static_cast<std::size_t>(c) * d + feature] += leaf_value[c] * dmass;
          }
        }
      }
    }
  }
}

namespace {

void check_mu(int input_dim, std::span<const double> mu) {
  if (static_cast<int>(mu.size()) != input_dim) {
    throw std::invalid_argument("smoothing: mu has " + std::to_string(mu.size()) +
                                " entries, expected " + std::to_string(input_dim));
  }
  for (double v : mu) {
    if (!std::isfinite(v)) throw std::invalid_argument("smoothing: non-finite mu entry");
  }
}

}  // namespace

SmoothedValue SmoothedForest::evaluate(std::span<const double> mu,
                                       const PerturbationSpec& spec) const {
  check_mu(input_dim_, mu);
  validate(spec);
  SmoothedValue out;
  out.value.resize(static_cast<std::size_t>(output_dim_));
  out.leaf_mass.resize(static_cast<std::size_t>(total_leaves_));
  SmoothWorkspace ws;
  evaluate(mu.data(), spec.sigma, out.value.data(), nullptr, out.leaf_mass.data(), ws);
  return out;
}

std::vector<double> SmoothedForest::input_gradient(std::span<const double> mu,
                                                   const PerturbationSpec& spec) const {
  check_mu(input_dim_, mu);
  validate(spec);
  std::vector<double> grad(static_cast<std::size_t>(output_dim_) * input_dim_);
  SmoothWorkspace ws;
  evaluate(mu.data(), spec.sigma, nullptr, grad.data(), nullptr, ws);
  return grad;
}

// ------- wrappers -------

SmoothedValue smoothed_evaluate(const Forest& forest, std::span<const double> mu,
                                const PerturbationSpec& spec) {
  return SmoothedForest(forest).evaluate(mu, spec);
}

std::vector<double> smoothed_gradient_input(const Forest& forest,
                                            std::span<const double> mu,
                                            const PerturbationSpec& spec) {
  return SmoothedForest(forest).input_gradient(mu, spec);
}

std::vector<double> smoothed_gradient_leaves(const Forest& forest,
                                             std::span<const double> mu,
                                             const PerturbationSpec& spec) {
  return SmoothedForest(forest).evaluate(mu, spec).leaf_mass;
}

}  // namespace pforest

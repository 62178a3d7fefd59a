#include "pforest/forest.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pforest {

// ------- validation -------

namespace {

void walk_checked(const Tree& tree, int node_index, int input_dim, int depth,
                  std::vector<bool>& node_seen, std::vector<bool>& leaf_seen,
                  int& max_depth) {
  if (node_index < 0 || node_index >= static_cast<int>(tree.nodes.size())) {
    throw std::invalid_argument("tree: child index " + std::to_string(node_index) +
                                " out of range");
  }
  if (node_seen[static_cast<std::size_t>(node_index)]) {
    throw std::invalid_argument("tree: node " + std::to_string(node_index) +
                                " reachable through two paths");
  }
  node_seen[static_cast<std::size_t>(node_index)] = true;
  if (depth > static_cast<int>(tree.nodes.size())) {
    throw std::invalid_argument("tree: depth exceeds node count (cycle?)");
  }
  const TreeNode& node = tree.nodes[static_cast<std::size_t>(node_index)];
  if (node.is_leaf()) {
    max_depth = std::max(max_depth, depth);
    if (node.leaf < 0 || node.leaf >= tree.num_leaves) {
      throw std::invalid_argument("tree: node " + std::to_string(node_index) +
                                  " has leaf slot " + std::to_string(node.leaf) +
                                  " outside [0, " + std::to_string(tree.num_leaves) + ")");
    }
    if (leaf_seen[static_cast<std::size_t>(node.leaf)]) {
      throw std::invalid_argument("tree: leaf slot " + std::to_string(node.leaf) +
                                  " used by two nodes");
    }
    leaf_seen[static_cast<std::size_t>(node.leaf)] = true;
    return;
  }
  if (node.feature >= input_dim) {
    throw std::invalid_argument("tree: node " + std::to_string(node_index) +
                                " splits on feature " + std::to_string(node.feature) +
                                " but input_dim is " + std::to_string(input_dim));
  }
  if (!std::isfinite(node.threshold)) {
    throw std::invalid_argument("tree: node " + std::to_string(node_index) +
                                " has non-finite threshold");
  }
  walk_checked(tree, node.left, input_dim, depth + 1, node_seen, leaf_seen, max_depth);
  walk_checked(tree, node.right, input_dim, depth + 1, node_seen, leaf_seen, max_depth);
}

}  // namespace

void validate_tree(const Tree& tree, int input_dim) {
  if (tree.nodes.empty()) throw std::invalid_argument("tree: empty node array");
  if (tree.num_leaves < 1) throw std::invalid_argument("tree: num_leaves must be >= 1");
  if (tree.output_dim < 1) throw std::invalid_argument("tree: output_dim must be >= 1");
  if (tree.leaf_values.size() !=
      static_cast<std::size_t>(tree.num_leaves) * static_cast<std::size_t>(tree.output_dim)) {
    throw std::invalid_argument("tree: leaf_values has " +
                                std::to_string(tree.leaf_values.size()) +
                                " entries, expected num_leaves * output_dim = " +
                                std::to_string(tree.num_leaves * tree.output_dim));
  }
  for (double v : tree.leaf_values) {
    if (!std::isfinite(v)) throw std::invalid_argument("tree: non-finite leaf value");
  }
  std::vector<bool> node_seen(tree.nodes.size(), false);
  std::vector<bool> leaf_seen(static_cast<std::size_t>(tree.num_leaves), false);
  int max_depth = 0;
  walk_checked(tree, 0, input_dim, 0, node_seen, leaf_seen, max_depth);
  for (int slot = 0; slot < tree.num_leaves; ++slot) {
    if (!leaf_seen[static_cast<std::size_t>(slot)]) {
      throw std::invalid_argument("tree: leaf slot " + std::to_string(slot) +
                                  " is not reachable from the root");
    }
  }
}

void validate_forest(const Forest& forest) {
  if (forest.input_dim < 1) throw std::invalid_argument("forest: input_dim must be >= 1");
  if (forest.output_dim < 1) throw std::invalid_argument("forest: output_dim must be >= 1");
  for (std::size_t i = 0; i < forest.trees.size(); ++i) {
    if (forest.trees[i].output_dim != forest.output_dim) {
      throw std::invalid_argument("forest: tree " + std::to_string(i) +
                                  " has output_dim " +
                                  std::to_string(forest.trees[i].output_dim) +
                                  ", forest expects " + std::to_string(forest.output_dim));
    }
    try {
      validate_tree(forest.trees[i], forest.input_dim);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("forest: tree " + std::to_string(i) + ": " + e.what());
    }
  }
}

int Tree::depth() const {
  // Iterative DFS; assumes a structurally valid tree.
  int max_depth = 0;
  std::vector<std::pair<int, int>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [index, d] = stack.back();
    stack.pop_back();
    const TreeNode& node = nodes[static_cast<std::size_t>(index)];
    if (node.is_leaf()) {
      max_depth = std::max(max_depth, d);
    } else {
      stack.emplace_back(node.left, d + 1);
      stack.emplace_back(node.right, d + 1);
    }
  }
  return max_depth;
}

// ------- exact evaluation -------

int route_leaf(const Tree& tree, const double* x) {
  int index = 0;
  while (true) {
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(index)];
    if (node.is_leaf()) return node.leaf;
    index = (x[node.feature] >= node.threshold) ? node.right : node.left;
  }
}

namespace {

void check_input(int input_dim, std::span<const double> x) {
  if (static_cast<int>(x.size()) != input_dim) {
    throw std::invalid_argument("evaluate: input has " + std::to_string(x.size()) +
                                " entries, expected " + std::to_string(input_dim));
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw std::invalid_argument("evaluate: non-finite input entry");
  }
}

}  // namespace

std::vector<double> evaluate_tree(const Tree& tree, int input_dim,
                                  std::span<const double> x) {
  check_input(input_dim, x);
  const auto value = tree.leaf_value(route_leaf(tree, x.data()));
  return {value.begin(), value.end()};
}

std::vector<double> evaluate_forest(const Forest& forest, std::span<const double> x) {
  check_input(forest.input_dim, x);
  std::vector<double> out(static_cast<std::size_t>(forest.output_dim), 0.0);
  evaluate_forest_into(forest, x.data(), out.data());
  return out;
}

void evaluate_forest_into(const Forest& forest, const double* x, double* out) {
  for (int c = 0; c < forest.output_dim; ++c) out[c] = 0.0;
  for (const Tree& tree : forest.trees) {
    const auto value = tree.leaf_value(route_leaf(tree, x));
    for (int c = 0; c < forest.output_dim; ++c) out[c] += value[c];
  }
}

// ------- leaf regions -------

namespace {

void collect_regions(const Tree& tree, int node_index,
                     std::vector<Interval>& bounds, std::vector<LeafRegion>& out) {
  const TreeNode& node = tree.nodes[static_cast<std::size_t>(node_index)];
  if (node.is_leaf()) {
    LeafRegion region;
    region.leaf = node.leaf;
    for (std::size_t f = 0; f < bounds.size(); ++f) {
      if (!bounds[f].is_whole()) {
        region.constraints.emplace_back(static_cast<int>(f), bounds[f]);
      }
    }
    out[static_cast<std::size_t>(node.leaf)] = std::move(region);
    return;
  }
  Interval& iv = bounds[static_cast<std::size_t>(node.feature)];
  const Interval saved = iv;

  // Left subtree: x[feature] < threshold tightens the upper bound.
  iv.upper = std::min(saved.upper, node.threshold);
  if (!(iv.lower < iv.upper)) {
    throw std::invalid_argument(
        "tree: node " + std::to_string(node_index) + " makes its left subtree empty (feature " +
        std::to_string(node.feature) + " constrained to [" + std::to_string(iv.lower) + ", " +
        std::to_string(iv.upper) + "))");
  }
  collect_regions(tree, node.left, bounds, out);
  iv = saved;

  // Right subtree: x[feature] >= threshold tightens the lower bound.
  iv.lower = std::max(saved.lower, node.threshold);
  if (!(iv.lower < iv.upper)) {
    throw std::invalid_argument(
        "tree: node " + std::to_string(node_index) + " makes its right subtree empty (feature " +
        std::to_string(node.feature) + " constrained to [" + std::to_string(iv.lower) + ", " +
        std::to_string(iv.upper) + "))");
  }
  collect_regions(tree, node.right, bounds, out);
  iv = saved;
}

}  // namespace

std::vector<LeafRegion> extract_leaf_regions(const Tree& tree) {
  int max_feature = -1;
  for (const TreeNode& node : tree.nodes) {
    if (!node.is_leaf()) max_feature = std::max(max_feature, node.feature);
  }
  std::vector<Interval> bounds(static_cast<std::size_t>(max_feature + 1));
  std::vector<LeafRegion> out(static_cast<std::size_t>(tree.num_leaves));
  collect_regions(tree, 0, bounds, out);
  return out;
}

}  // namespace pforest

#include "pforest/generate.hpp"

#include <stdexcept>
#include <utility>

namespace pforest {

namespace {

struct Builder {
  Tree tree;
  std::vector<std::pair<double, double>> reachable;  // per-feature open (lo, hi)
  int input_dim = 0;
  int output_dim = 1;
  LeafInit leaf_init = LeafInit::binary01;
  Rng* rng = nullptr;
  int next_leaf = 0;

  int build(int depth) {
    const int index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    if (depth == 0) {
      tree.nodes[static_cast<std::size_t>(index)].leaf = next_leaf++;
      for (int c = 0; c < output_dim; ++c) {
        double v = 0.0;
        switch (leaf_init) {
          case LeafInit::binary01: v = static_cast<double>(rng->uniform_int(2)); break;
          case LeafInit::uniform01: v = rng->uniform(); break;
          case LeafInit::zero: v = 0.0; break;
        }
        tree.leaf_values.push_back(v);
      }
      return index;
    }
    const int feature = rng->uniform_int(input_dim);
    auto& [lo, hi] = reachable[static_cast<std::size_t>(feature)];
    // Strictly interior draw keeps both children reachable.
    double threshold = lo + (hi - lo) * rng->uniform();
    while (threshold <= lo || threshold >= hi) threshold = lo + (hi - lo) * rng->uniform();

    tree.nodes[static_cast<std::size_t>(index)].feature = feature;
    tree.nodes[static_cast<std::size_t>(index)].threshold = threshold;

    const double saved_hi = hi;
    hi = threshold;
    const int left = build(depth - 1);
    hi = saved_hi;

    const double saved_lo = lo;
    lo = threshold;
    const int right = build(depth - 1);
    lo = saved_lo;

    tree.nodes[static_cast<std::size_t>(index)].left = left;
    tree.nodes[static_cast<std::size_t>(index)].right = right;
    return index;
  }
};

}  // namespace

Tree generate_random_tree(int input_dim, int depth, LeafInit leaf_init,
                          int output_dim, Rng& rng) {
  if (input_dim < 1) throw std::invalid_argument("generate: input_dim must be >= 1");
  if (depth < 0) throw std::invalid_argument("generate: depth must be >= 0");
  if (output_dim < 1) throw std::invalid_argument("generate: output_dim must be >= 1");

  Builder builder;
  builder.reachable.assign(static_cast<std::size_t>(input_dim), {0.0, 1.0});
  builder.input_dim = input_dim;
  builder.output_dim = output_dim;
  builder.leaf_init = leaf_init;
  builder.rng = &rng;
  builder.tree.output_dim = output_dim;
  builder.build(depth);
  builder.tree.num_leaves = builder.next_leaf;
  return std::move(builder.tree);
}

Forest generate_random_forest(int num_trees, int input_dim, int depth,
                              LeafInit leaf_init, int output_dim, Rng& rng) {
  if (num_trees < 1) throw std::invalid_argument("generate: num_trees must be >= 1");
  Forest forest;
  forest.input_dim = input_dim;
  forest.output_dim = output_dim;
  forest.trees.reserve(static_cast<std::size_t>(num_trees));
  for (int i = 0; i < num_trees; ++i) {
    forest.trees.push_back(
        generate_random_tree(input_dim, depth, leaf_init, output_dim, rng));
  }
  return forest;
}

}  // namespace pforest

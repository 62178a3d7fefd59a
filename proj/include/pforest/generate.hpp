#pragma once

// Random forest generation over the unit cube [0, 1]^d.
//
// Each internal node picks a feature uniformly at random and a threshold
// uniformly from the interval of that feature still reachable along the path
// (initially (0, 1); the root threshold is therefore plain uniform on (0, 1)).
// Sampling inside the reachable interval keeps every leaf's region non-empty,
// so each tree partitions the cube; thresholds drawn obliviously instead
// would almost surely dead-end some path once depth approaches or exceeds
// the number of features.

#include <cstdint>

#include "pforest/forest.hpp"
#include "pforest/rng.hpp"

namespace pforest {

enum class LeafInit {
  binary01,   // each leaf value drawn uniformly from {0, 1}
  uniform01,  // each leaf value drawn uniformly from [0, 1)
  zero,       // all leaf values zero (draws nothing from the generator)
};

// Complete binary tree of the given depth (depth 0 is a lone leaf); leaf
// slots run left to right.  Requires input_dim >= 1, depth >= 0,
// output_dim >= 1.
Tree generate_random_tree(int input_dim, int depth, LeafInit leaf_init,
                          int output_dim, Rng& rng);

// num_trees independent trees drawn from the same generator in order.
Forest generate_random_forest(int num_trees, int input_dim, int depth,
                              LeafInit leaf_init, int output_dim, Rng& rng);

}  // namespace pforest

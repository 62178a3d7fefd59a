#pragma once

// Axis-aligned decision trees and forests.
//
// A tree is stored as a flat node array (index 0 is the root).  Internal nodes
// carry a (feature, threshold) split with the convention
//
//     x[feature] >= threshold  ->  right child,   otherwise  ->  left child,
//
// so split boundaries belong to the right subtree.  Leaves carry an index into
// the tree's leaf-value table, which holds `num_leaves * output_dim` doubles
// in leaf-major order.  Every leaf corresponds to an axis-aligned box (an
// intersection of half-open intervals), and the boxes of one tree partition
// the input space.  A forest is the unweighted sum of its trees' outputs.

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pforest {

// ------- tree / forest types -------

struct TreeNode {
  int feature = -1;        // split feature; -1 marks a leaf
  double threshold = 0.0;  // split threshold (internal nodes only)
  int left = -1;           // node index of the x[feature] <  threshold child
  int right = -1;          // node index of the x[feature] >= threshold child
  int leaf = -1;           // leaf slot (leaves only)

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;     // non-empty; nodes[0] is the root
  std::vector<double> leaf_values; // num_leaves x output_dim, leaf-major
  int num_leaves = 0;
  int output_dim = 1;

  std::span<const double> leaf_value(int slot) const {
    return {leaf_values.data() + static_cast<std::size_t>(slot) * output_dim,
            static_cast<std::size_t>(output_dim)};
  }
  std::span<double> leaf_value(int slot) {
    return {leaf_values.data() + static_cast<std::size_t>(slot) * output_dim,
            static_cast<std::size_t>(output_dim)};
  }

  // Maximum root-to-leaf edge count.
  int depth() const;
};

struct Forest {
  std::vector<Tree> trees;
  int input_dim = 0;
  int output_dim = 1;

  int total_leaves() const {
    int n = 0;
    for (const Tree& t : trees) n += t.num_leaves;
    return n;
  }
};

// Throws std::invalid_argument if the structure is malformed: out-of-range
// feature or child indices, a node reachable twice, unreachable or duplicated
// leaf slots, leaf-value table of the wrong size, or non-finite values.
void validate_tree(const Tree& tree, int input_dim);
void validate_forest(const Forest& forest);

// ------- exact (hard) evaluation -------

// Leaf slot that x falls into.  No validation; x must have input_dim entries.
int route_leaf(const Tree& tree, const double* x);

// Checked single-point evaluation.  Throws std::invalid_argument when x has
// the wrong length or contains non-finite entries.
std::vector<double> evaluate_tree(const Tree& tree, int input_dim,
                                  std::span<const double> x);
std::vector<double> evaluate_forest(const Forest& forest,
                                    std::span<const double> x);

// Unchecked hot path: accumulates the forest output into out[0..output_dim).
void evaluate_forest_into(const Forest& forest, const double* x, double* out);

// ------- leaf regions -------

// Half-open interval [lower, upper); either end may be infinite.
struct Interval {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();

  bool contains(double v) const { return lower <= v && v < upper; }
  bool is_whole() const {
    return lower == -std::numeric_limits<double>::infinity() &&
           upper == std::numeric_limits<double>::infinity();
  }
};

// Axis-aligned box: per-feature interval constraints, sorted by feature index,
// with unconstrained features omitted.
struct LeafRegion {
  std::vector<std::pair<int, Interval>> constraints;
  int leaf = -1;

  bool contains(std::span<const double> x) const {
    for (const auto& [feature, iv] : constraints) {
      if (!iv.contains(x[static_cast<std::size_t>(feature)])) return false;
    }
    return true;
  }
};

// Regions of all leaves, ordered by leaf slot.  Walking a path tightens one
// interval per split; a path whose constraints become empty (lower >= upper)
// makes the leaf unreachable and raises std::invalid_argument naming the
// leaf, since such a tree cannot partition the input space.
std::vector<LeafRegion> extract_leaf_regions(const Tree& tree);

}  // namespace pforest

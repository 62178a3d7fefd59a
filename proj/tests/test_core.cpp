// Forest structure, evaluation, random generation, regions, and JSON I/O.

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "nlohmann/json.hpp"
#include "pforest/forest.hpp"
#include "pforest/forest_json.hpp"
#include "pforest/generate.hpp"
#include "pforest/rng.hpp"

using namespace pforest;

namespace {

// Root: x0 >= 0.5 -> right.  Left child: x1 >= 0.25.  Right child: x1 >= 0.75.
// Leaves left-to-right get slots 0..3 with values {10, 20, 30, 40}.
Tree hand_tree() {
  Tree tree;
  tree.nodes.resize(7);
  tree.nodes[0] = {0, 0.5, 1, 2, -1};
  tree.nodes[1] = {1, 0.25, 3, 4, -1};
  tree.nodes[2] = {1, 0.75, 5, 6, -1};
  tree.nodes[3] = {-1, 0.0, -1, -1, 0};
  tree.nodes[4] = {-1, 0.0, -1, -1, 1};
  tree.nodes[5] = {-1, 0.0, -1, -1, 2};
  tree.nodes[6] = {-1, 0.0, -1, -1, 3};
  tree.leaf_values = {10, 20, 30, 40};
  tree.num_leaves = 4;
  tree.output_dim = 1;
  return tree;
}

Tree constant_tree(double value) {
  Tree tree;
  tree.nodes.resize(1);
  tree.nodes[0] = {-1, 0.0, -1, -1, 0};
  tree.leaf_values = {value};
  tree.num_leaves = 1;
  tree.output_dim = 1;
  return tree;
}

}  // namespace

TEST_SUITE("core") {

TEST_CASE("rng: seeded streams are reproducible and distinct") {
  Rng a(123), b(123), c(124);
  bool same = true, diff = false;
  for (int i = 0; i < 100; ++i) {
    const std::uint64_t va = a.next_u64();
    same = same && (va == b.next_u64());
    diff = diff || (va != c.next_u64());
  }
  CHECK(same);
  CHECK(diff);
  CHECK(mix_seed(1, 2) != mix_seed(1, 3));
  CHECK(mix_seed(1, 2) != mix_seed(2, 2));
}

TEST_CASE("rng: uniform, uniform_int, and normal have sane distributions") {
  Rng rng(7);
  const int n = 20000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) < 0.01);

  std::vector<int> counts(10, 0);
  for (int i = 0; i < n; ++i) {
    const std::uint64_t k = rng.uniform_int(10);
    REQUIRE(k < 10);
    ++counts[static_cast<std::size_t>(k)];
  }
  for (int count : counts) CHECK(std::abs(count - n / 10) < 300);

  sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sum2 += z * z;
  }
  CHECK(std::abs(sum / n) < 0.03);
  CHECK(std::abs(sum2 / n - 1.0) < 0.05);
}

TEST_CASE("rng: shuffle yields a permutation") {
  Rng rng(99);
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[static_cast<std::size_t>(i)] = i;
  rng.shuffle(v);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("forest: hand-built depth-2 tree routes and evaluates as traced") {
  const Tree tree = hand_tree();
  validate_tree(tree, 2);
  CHECK(tree.depth() == 2);

  const double a[2] = {0.3, 0.2};   // left, left  -> slot 0
  const double b[2] = {0.3, 0.25};  // left, right -> slot 1 (>= goes right)
  const double c[2] = {0.5, 0.2};   // right, left -> slot 2
  const double d[2] = {0.9, 0.9};   // right, right-> slot 3
  CHECK(route_leaf(tree, a) == 0);
  CHECK(route_leaf(tree, b) == 1);
  CHECK(route_leaf(tree, c) == 2);
  CHECK(route_leaf(tree, d) == 3);
  CHECK(evaluate_tree(tree, 2, std::vector<double>{0.3, 0.2})[0] == 10.0);
  CHECK(evaluate_tree(tree, 2, std::vector<double>{0.9, 0.9})[0] == 40.0);
}

TEST_CASE("forest: evaluation sums trees and is linear in leaf values") {
  Forest forest;
  forest.input_dim = 2;
  forest.output_dim = 1;
  forest.trees = {hand_tree(), constant_tree(5.0)};
  validate_forest(forest);
  CHECK(forest.total_leaves() == 5);
  CHECK(evaluate_forest(forest, std::vector<double>{0.3, 0.2})[0] == 15.0);

  // Doubling every leaf doubles the output.
  Forest twice = forest;
  for (Tree& tree : twice.trees) {
    for (double& v : tree.leaf_values) v *= 2.0;
  }
  CHECK(evaluate_forest(twice, std::vector<double>{0.9, 0.9})[0] ==
        2.0 * evaluate_forest(forest, std::vector<double>{0.9, 0.9})[0]);
}

TEST_CASE("forest: validation rejects malformed trees") {
  Tree bad = hand_tree();
  bad.nodes[1].left = 9;  // out of range
  CHECK_THROWS_AS(validate_tree(bad, 2), std::invalid_argument);

  bad = hand_tree();
  bad.nodes[2].right = 1;  // node 1 reached twice
  CHECK_THROWS_AS(validate_tree(bad, 2), std::invalid_argument);

  bad = hand_tree();
  bad.nodes[4].leaf = 0;  // duplicate slot, slot 1 missing
  CHECK_THROWS_AS(validate_tree(bad, 2), std::invalid_argument);

  bad = hand_tree();
  bad.nodes[0].threshold = std::nan("");
  CHECK_THROWS_AS(validate_tree(bad, 2), std::invalid_argument);

  bad = hand_tree();
  bad.leaf_values[2] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(validate_tree(bad, 2), std::invalid_argument);

  bad = hand_tree();
  bad.nodes[0].feature = 2;  // >= input_dim
  CHECK_THROWS_AS(validate_tree(bad, 2), std::invalid_argument);

  CHECK_THROWS_AS(evaluate_tree(hand_tree(), 2, std::vector<double>{0.5}),
                  std::invalid_argument);
}

TEST_CASE("generate: complete trees with every leaf reachable") {
  Rng rng(2024);
  for (int depth = 0; depth <= 5; ++depth) {
    const Tree tree = generate_random_tree(3, depth, LeafInit::uniform01, 1, rng);
    validate_tree(tree, 3);
    CHECK(static_cast<int>(tree.nodes.size()) == (1 << (depth + 1)) - 1);
    CHECK(tree.num_leaves == (1 << depth));
    CHECK(tree.depth() == depth);

    // Each region is non-empty inside (0,1)^d: its box midpoint routes back
    // to the region's own leaf.
    for (const LeafRegion& region : extract_leaf_regions(tree)) {
      double x[3] = {0.5, 0.5, 0.5};
      for (const auto& [feature, interval] : region.constraints) {
        const double lo = std::max(interval.lower, 0.0);
        const double hi = std::min(interval.upper, 1.0);
        CHECK(lo < hi);  // reachable-interval sampling keeps paths feasible
        x[feature] = 0.5 * (lo + hi);
      }
      CHECK(route_leaf(tree, x) == region.leaf);
    }
  }
}

TEST_CASE("generate: thresholds lie strictly inside (0,1); root is well spread") {
  Rng rng(55);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  const int trials = 300;
  for (int t = 0; t < trials; ++t) {
    const Tree tree = generate_random_tree(2, 4, LeafInit::zero, 1, rng);
    for (const TreeNode& node : tree.nodes) {
      if (node.is_leaf()) continue;
      CHECK(node.threshold > 0.0);
      CHECK(node.threshold < 1.0);
    }
    const double root = tree.nodes[0].threshold;
    lo = std::min(lo, root);
    hi = std::max(hi, root);
    sum += root;
  }
  CHECK(sum / trials == doctest::Approx(0.5).epsilon(0.15));
  CHECK(lo < 0.1);
  CHECK(hi > 0.9);
}

TEST_CASE("generate: forest generation is deterministic in the seed") {
  Rng r1(31), r2(31), r3(32);
  const Forest a = generate_random_forest(4, 3, 3, LeafInit::uniform01, 2, r1);
  const Forest b = generate_random_forest(4, 3, 3, LeafInit::uniform01, 2, r2);
  const Forest c = generate_random_forest(4, 3, 3, LeafInit::uniform01, 2, r3);
  CHECK(export_forest(a) == export_forest(b));
  CHECK(export_forest(a) != export_forest(c));
}

TEST_CASE("regions: partition the cube (exactly one region holds each point)") {
  Rng rng(400);
  const Tree tree = generate_random_tree(3, 5, LeafInit::uniform01, 1, rng);
  const std::vector<LeafRegion> regions = extract_leaf_regions(tree);
  CHECK(static_cast<int>(regions.size()) == tree.num_leaves);

  Rng points(401);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::vector<double> x = {points.uniform(), points.uniform(), points.uniform()};
    int hits = 0;
    int hit_leaf = -1;
    for (const LeafRegion& region : regions) {
      if (region.contains(x)) {
        ++hits;
        hit_leaf = region.leaf;
      }
    }
    CHECK(hits == 1);
    CHECK(hit_leaf == route_leaf(tree, x.data()));
  }
}

TEST_CASE("regions: hand tree intervals are the traced boxes") {
  const std::vector<LeafRegion> regions = extract_leaf_regions(hand_tree());
  REQUIRE(regions.size() == 4);
  // Slot 0: x0 < 0.5, x1 < 0.25.
  const LeafRegion* slot0 = nullptr;
  for (const LeafRegion& r : regions) {
    if (r.leaf == 0) slot0 = &r;
  }
  REQUIRE(slot0 != nullptr);
  REQUIRE(slot0->constraints.size() == 2);
  CHECK(slot0->constraints[0].first == 0);
  CHECK(slot0->constraints[0].second.lower == -std::numeric_limits<double>::infinity());
  CHECK(slot0->constraints[0].second.upper == 0.5);
  CHECK(slot0->constraints[1].first == 1);
  CHECK(slot0->constraints[1].second.upper == 0.25);
}

TEST_CASE("regions: unconstrained features are omitted") {
  // Depth-1 split on feature 1 of a 3-feature tree.
  Tree tree;
  tree.nodes.resize(3);
  tree.nodes[0] = {1, 0.4, 1, 2, -1};
  tree.nodes[1] = {-1, 0.0, -1, -1, 0};
  tree.nodes[2] = {-1, 0.0, -1, -1, 1};
  tree.leaf_values = {0.0, 1.0};
  tree.num_leaves = 2;
  tree.output_dim = 1;
  for (const LeafRegion& region : extract_leaf_regions(tree)) {
    REQUIRE(region.constraints.size() == 1);
    CHECK(region.constraints[0].first == 1);
  }
}

TEST_CASE("regions: contradictory paths are construction errors") {
  // Right of x0 >= 0.6, then the *left* branch of x0 >= 0.2 requires
  // x0 < 0.2: the interval [0.6, 0.2) is empty.
  Tree tree;
  tree.nodes.resize(5);
  tree.nodes[0] = {0, 0.6, 1, 2, -1};
  tree.nodes[1] = {-1, 0.0, -1, -1, 0};
  tree.nodes[2] = {0, 0.2, 3, 4, -1};
  tree.nodes[3] = {-1, 0.0, -1, -1, 1};
  tree.nodes[4] = {-1, 0.0, -1, -1, 2};
  tree.leaf_values = {0, 0, 0};
  tree.num_leaves = 3;
  tree.output_dim = 1;
  CHECK_THROWS_WITH_AS(extract_leaf_regions(tree),
                       doctest::Contains("feature 0"), std::invalid_argument);
}

TEST_CASE("json: forest round-trips exactly") {
  Rng rng(77);
  const Forest forest = generate_random_forest(5, 4, 4, LeafInit::uniform01, 3, rng);
  const Forest copy = import_forest(export_forest(forest));
  CHECK(copy.input_dim == forest.input_dim);
  CHECK(copy.output_dim == forest.output_dim);
  REQUIRE(copy.trees.size() == forest.trees.size());
  for (std::size_t t = 0; t < forest.trees.size(); ++t) {
    CHECK(copy.trees[t].leaf_values == forest.trees[t].leaf_values);  // bitwise
    CHECK(copy.trees[t].num_leaves == forest.trees[t].num_leaves);
  }
  Rng points(78);
  for (int i = 0; i < 200; ++i) {
    const std::vector<double> x = {points.uniform(), points.uniform(), points.uniform(),
                                   points.uniform()};
    CHECK(evaluate_forest(copy, x) == evaluate_forest(forest, x));
  }
  // Serialization itself is stable.
  CHECK(export_forest(copy) == export_forest(forest));
}

TEST_CASE("json: leaf slots are assigned left to right") {
  const std::string text = R"({
    "input_dim": 1, "output_dim": 1,
    "trees": [{"split": {"feature": 0, "threshold": 0.5,
                         "left": {"leaf": {"value": [111.0]}},
                         "right": {"leaf": {"value": [222.0]}}}}]
  })";
  const Forest forest = import_forest(text);
  REQUIRE(forest.trees.size() == 1);
  CHECK(forest.trees[0].leaf_values == std::vector<double>{111.0, 222.0});
  const double left_x[1] = {0.0};
  CHECK(route_leaf(forest.trees[0], left_x) == 0);
}

TEST_CASE("json: import errors name the faulty path") {
  const std::string missing_right = R"({
    "input_dim": 1, "output_dim": 1,
    "trees": [{"split": {"feature": 0, "threshold": 0.5, "left": {"leaf": {"value": [0.0]}}}},
              {"split": {"feature": 0, "threshold": 0.5,
                         "left": {"leaf": {"value": [0.0]}},
                         "right": {"split": {"feature": 0, "threshold": 0.25,
                                             "left": {"leaf": {"value": [1.0]}}}}}}]
  })";
  CHECK_THROWS_WITH_AS(import_forest(missing_right), doctest::Contains("trees[0]"),
                       std::invalid_argument);

  CHECK_THROWS_WITH_AS(import_forest(R"({"output_dim": 1, "trees": []})"),
                       doctest::Contains("input_dim"), std::invalid_argument);

  CHECK_THROWS_WITH_AS(import_forest(R"({"input_dim": 1, "output_dim": 1,
    "trees": [{"leaf": {"value": [1.0, 2.0]}}]})"),
                       doctest::Contains("leaf"), std::invalid_argument);

  CHECK_THROWS_AS(import_forest("not json at all"), std::invalid_argument);
}

TEST_CASE("json: wrong nesting is reported with the deep path") {
  const std::string deep = R"({
    "input_dim": 2, "output_dim": 1,
    "trees": [{"split": {"feature": 0, "threshold": 0.5,
                         "left": {"leaf": {"value": [0.0]}},
                         "right": {"split": {"feature": 1, "threshold": 0.5,
                                             "left": {"leaf": {"value": [1.0]}},
                                             "right": {"bogus": true}}}}}]
  })";
  CHECK_THROWS_WITH_AS(import_forest(deep),
                       doctest::Contains("trees[0].split.right.split.right"),
                       std::invalid_argument);
}

}  // TEST_SUITE

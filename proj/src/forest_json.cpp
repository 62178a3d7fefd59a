#include "pforest/forest_json.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pforest {

using nlohmann::json;

// ------- export -------

namespace {

json node_to_json(const Tree& tree, int node_index) {
  const TreeNode& node = tree.nodes[static_cast<std::size_t>(node_index)];
  if (node.is_leaf()) {
    const auto value = tree.leaf_value(node.leaf);
    return json{{"leaf", {{"value", std::vector<double>(value.begin(), value.end())}}}};
  }
  return json{{"split",
               {{"feature", node.feature},
                {"threshold", node.threshold},
                {"left", node_to_json(tree, node.left)},
                {"right", node_to_json(tree, node.right)}}}};
}

}  // namespace

json forest_to_json(const Forest& forest) {
  validate_forest(forest);
  json trees = json::array();
  for (const Tree& tree : forest.trees) trees.push_back(node_to_json(tree, 0));
  return json{{"input_dim", forest.input_dim},
              {"output_dim", forest.output_dim},
              {"trees", std::move(trees)}};
}

std::string export_forest(const Forest& forest) { return forest_to_json(forest).dump(2); }

// ------- import -------

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw std::invalid_argument("forest import: " + path + ": " + message);
}

double require_number(const json& node, const char* key, const std::string& path) {
  if (!node.contains(key)) fail(path, std::string("missing '") + key + "'");
  const json& v = node.at(key);
  if (!v.is_number()) fail(path + "." + key, "expected a number");
  return v.get<double>();
}

// Parses one node, appending to tree; returns the node index.
int parse_node(const json& doc, Tree& tree, int input_dim, const std::string& path) {
  if (!doc.is_object()) fail(path, "expected an object");
  const bool has_split = doc.contains("split");
  const bool has_leaf = doc.contains("leaf");
  if (has_split == has_leaf) {
    fail(path, "node must have exactly one of 'split' or 'leaf'");
  }

  const int index = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();

  if (has_leaf) {
    const json& leaf = doc.at("leaf");
    if (!leaf.is_object() || !leaf.contains("value")) fail(path + ".leaf", "missing 'value'");
    const json& value = leaf.at("value");
    if (!value.is_array() || static_cast<int>(value.size()) != tree.output_dim) {
      fail(path + ".leaf.value", "expected an array of " +
                                     std::to_string(tree.output_dim) + " numbers");
    }
    tree.nodes[static_cast<std::size_t>(index)].leaf = tree.num_leaves++;
    for (const json& entry : value) {
      if (!entry.is_number()) fail(path + ".leaf.value", "expected a number");
      const double v = entry.get<double>();
      if (!std::isfinite(v)) fail(path + ".leaf.value", "non-finite value");
      tree.leaf_values.push_back(v);
    }
    return index;
  }

  const json& split = doc.at("split");
  if (!split.is_object()) fail(path + ".split", "expected an object");
  const double feature_raw = require_number(split, "feature", path + ".split");
  const double threshold = require_number(split, "threshold", path + ".split");
  const int feature = static_cast<int>(feature_raw);
  if (feature_raw != feature || feature < 0 || feature >= input_dim) {
    fail(path + ".split.feature",
         "expected an integer in [0, " + std::to_string(input_dim) + ")");
  }
  if (!std::isfinite(threshold)) fail(path + ".split.threshold", "non-finite value");
  if (!split.contains("left")) fail(path + ".split", "missing 'left'");
  if (!split.contains("right")) fail(path + ".split", "missing 'right'");

  tree.nodes[static_cast<std::size_t>(index)].feature = feature;
  tree.nodes[static_cast<std::size_t>(index)].threshold = threshold;
  const int left = parse_node(split.at("left"), tree, input_dim, path + ".split.left");
  const int right = parse_node(split.at("right"), tree, input_dim, path + ".split.right");
  tree.nodes[static_cast<std::size_t>(index)].left = left;
  tree.nodes[static_cast<std::size_t>(index)].right = right;
  return index;
}

int require_positive_int(const json& doc, const char* key) {
  if (!doc.contains(key)) {
    throw std::invalid_argument(std::string("forest import: missing '") + key + "'");
  }
  const json& v = doc.at(key);
  if (!v.is_number_integer() || v.get<int>() < 1) {
    throw std::invalid_argument(std::string("forest import: '") + key +
                                "' must be a positive integer");
  }
  return v.get<int>();
}

}  // namespace

Forest forest_from_json(const json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("forest import: expected an object");
  Forest forest;
  forest.input_dim = require_positive_int(doc, "input_dim");
  forest.output_dim = require_positive_int(doc, "output_dim");
  if (!doc.contains("trees") || !doc.at("trees").is_array()) {
    throw std::invalid_argument("forest import: missing 'trees' array");
  }
  const json& trees = doc.at("trees");
  for (std::size_t i = 0; i < trees.size(); ++i) {
    Tree tree;
    tree.output_dim = forest.output_dim;
    parse_node(trees[i], tree, forest.input_dim, "trees[" + std::to_string(i) + "]");
    forest.trees.push_back(std::move(tree));
  }
  validate_forest(forest);
  return forest;
}

Forest import_forest(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("forest import: invalid JSON: ") + e.what());
  }
  return forest_from_json(doc);
}

void save_forest(const Forest& forest, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << export_forest(forest) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

Forest load_forest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return import_forest(buffer.str());
}

}  // namespace pforest

#pragma once

// Forest serialization.
//
// Document layout:
//
//   {
//     "input_dim": 2,
//     "output_dim": 1,
//     "trees": [ <node>, ... ]
//   }
//
// where a node is either
//
//   {"split": {"feature": 0, "threshold": 0.5, "left": <node>, "right": <node>}}
//   {"leaf":  {"value": [0.0]}}
//
// Import validates as it parses and reports the path of the offending node,
// e.g. "trees[2].split.left.split.right".  Leaf slots are assigned in
// left-to-right order, matching the generator's layout, so a round trip
// preserves evaluation exactly.

#include <string>

#include "nlohmann/json.hpp"
#include "pforest/forest.hpp"

namespace pforest {

nlohmann::json forest_to_json(const Forest& forest);
Forest forest_from_json(const nlohmann::json& doc);

// String front-ends; export uses two-space indentation.
std::string export_forest(const Forest& forest);
Forest import_forest(const std::string& text);

void save_forest(const Forest& forest, const std::string& path);
Forest load_forest(const std::string& path);

}  // namespace pforest

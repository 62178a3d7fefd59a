#include "pforest/boosting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace pforest {

namespace {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

// Best squared-error split over the given rows, or feature = -1 when no
// split improves on the parent.  Candidate thresholds are midpoints between
// consecutive distinct sorted values, so boundary handling (x >= threshold
// goes right) routes exactly the intended rows.
SplitChoice best_split(const Dataset& data, const std::vector<double>& residual,
                       const std::vector<int>& rows, int min_samples_leaf) {
  SplitChoice best;
  const int n = static_cast<int>(rows.size());
  std::vector<std::pair<double, double>> order(static_cast<std::size_t>(n));
  double total = 0.0;
  for (int i : rows) total += residual[static_cast<std::size_t>(i)];

  for (int feature = 0; feature < data.cols; ++feature) {
    for (int k = 0; k < n; ++k) {
      const int row = rows[static_cast<std::size_t>(k)];
      order[static_cast<std::size_t>(k)] = {data.row(row)[feature],
                                            residual[static_cast<std::size_t>(row)]};
    }
    std::sort(order.begin(), order.end());
    // Gain = sum_left^2/n_left + sum_right^2/n_right - total^2/n (constant
    // dropped from comparisons but kept so `gain > 0` means a real drop).
    const double parent = total * total / n;
    double left_sum = 0.0;
    for (int k = 0; k + 1 < n; ++k) {
      left_sum += order[static_cast<std::size_t>(k)].second;
      if (order[static_cast<std::size_t>(k)].first ==
          order[static_cast<std::size_t>(k) + 1].first) {
        continue;  // not a boundary between distinct values
      }
      const int n_left = k + 1;
      const int n_right = n - n_left;
      if (n_left < min_samples_leaf || n_right < min_samples_leaf) continue;
      const double right_sum = total - left_sum;
      const double gain =
          left_sum * left_sum / n_left + right_sum * right_sum / n_right - parent;
      if (gain > best.gain + 1e-12) {
        best.gain = gain;
        best.feature = feature;
        best.threshold = 0.5 * (order[static_cast<std::size_t>(k)].first +
                                order[static_cast<std::size_t>(k) + 1].first);
      }
    }
  }
  return best;
}

struct TreeBuilder {
  const Dataset* data = nullptr;
  const std::vector<double>* residual = nullptr;
  double learning_rate = 0.1;
  int max_depth = 3;
  int min_samples_leaf = 1;
  Tree tree;

  int build(std::vector<int>& rows, int depth) {
    const int index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();

    SplitChoice choice;
    if (depth < max_depth && static_cast<int>(rows.size()) >= 2) {
      choice = best_split(*data, *residual, rows, min_samples_leaf);
    }
    if (choice.feature < 0) {
      double mean = 0.0;
      for (int i : rows) mean += (*residual)[static_cast<std::size_t>(i)];
      mean /= static_cast<double>(rows.size());
      tree.nodes[static_cast<std::size_t>(index)].leaf = tree.num_leaves++;
      tree.leaf_values.push_back(learning_rate * mean);
      return index;
    }

    std::vector<int> left_rows;
    std::vector<int> right_rows;
    for (int i : rows) {
      if (data->row(i)[choice.feature] >= choice.threshold) {
        right_rows.push_back(i);
      } else {
        left_rows.push_back(i);
      }
    }
    rows.clear();
    rows.shrink_to_fit();

    tree.nodes[static_cast<std::size_t>(index)].feature = choice.feature;
    tree.nodes[static_cast<std::size_t>(index)].threshold = choice.threshold;
    const int left = build(left_rows, depth + 1);
    const int right = build(right_rows, depth + 1);
    tree.nodes[static_cast<std::size_t>(index)].left = left;
    tree.nodes[static_cast<std::size_t>(index)].right = right;
    return index;
  }
};

Tree constant_tree(double value) {
  Tree tree;
  tree.nodes.emplace_back();
  tree.nodes[0].leaf = 0;
  tree.num_leaves = 1;
  tree.leaf_values = {value};
  return tree;
}

double mean_loss(LossKind loss, const std::vector<double>& score,
                 const std::vector<double>& labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double s[1] = {score[i]};
    total += loss_and_grad(loss, s, labels[i]).loss;
  }
  return total / static_cast<double>(labels.size());
}

}  // namespace

Forest train_boosted_forest(const Dataset& data, const BoostConfig& config,
                            std::vector<double>* round_losses) {
  validate_dataset(data);
  if (data.rows < 2) throw std::invalid_argument("boosting: need at least 2 examples");
  if (config.num_trees < 1) throw std::invalid_argument("boosting: num_trees must be >= 1");
  if (config.max_depth < 1) throw std::invalid_argument("boosting: max_depth must be >= 1");
  if (!(config.learning_rate > 0.0 && config.learning_rate <= 1.0)) {
    throw std::invalid_argument("boosting: learning_rate must lie in (0, 1]");
  }
  const bool logistic = config.loss == LossKind::sigmoid_cross_entropy;
  if (!logistic && config.loss != LossKind::squared_error) {
    throw std::invalid_argument("boosting: loss must be sigmoid_cross_entropy or squared_error");
  }
  if (logistic) {
    for (double y : data.labels) {
      if (y != 0.0 && y != 1.0) {
        throw std::invalid_argument("boosting: logistic loss requires labels in {0, 1}");
      }
    }
  }

  Forest forest;
  forest.input_dim = data.cols;
  forest.output_dim = 1;

  // Prior tree: label mean (squared) or log-odds of the positive rate
  // (logistic), clamped away from the degenerate all-one/all-zero cases.
  const double label_mean =
      std::accumulate(data.labels.begin(), data.labels.end(), 0.0) /
      static_cast<double>(data.rows);
  double prior = label_mean;
  if (logistic) {
    const double p = std::clamp(label_mean, 1e-12, 1.0 - 1e-12);
    prior = std::log(p / (1.0 - p));
  }
  forest.trees.push_back(constant_tree(prior));

  std::vector<double> score(static_cast<std::size_t>(data.rows), prior);
  std::vector<double> residual(static_cast<std::size_t>(data.rows));
  if (round_losses) round_losses->push_back(mean_loss(config.loss, score, data.labels));

  for (int round = 0; round < config.num_trees; ++round) {
    for (int i = 0; i < data.rows; ++i) {
      const double s = score[static_cast<std::size_t>(i)];
      const double y = data.labels[static_cast<std::size_t>(i)];
      // Negative gradient of the per-example loss w.r.t. the score.
      residual[static_cast<std::size_t>(i)] =
          logistic ? y - 1.0 / (1.0 + std::exp(-s)) : y - s;
    }

    TreeBuilder builder;
    builder.data = &data;
    builder.residual = &residual;
    builder.learning_rate = config.learning_rate;
    builder.max_depth = config.max_depth;
    builder.min_samples_leaf = config.min_samples_leaf;
    std::vector<int> rows(static_cast<std::size_t>(data.rows));
    std::iota(rows.begin(), rows.end(), 0);
    builder.build(rows, 0);

    for (int i = 0; i < data.rows; ++i) {
      score[static_cast<std::size_t>(i)] +=
          builder.tree.leaf_value(route_leaf(builder.tree, data.row(i).data()))[0];
    }
    forest.trees.push_back(std::move(builder.tree));
    if (round_losses) round_losses->push_back(mean_loss(config.loss, score, data.labels));
  }
  return forest;
}

}  // namespace pforest

#pragma once

// Minimal greedy gradient-boosted tree trainer.
//
// The returned forest starts with a constant prior tree (the label mean for
// squared error, the label log-odds for the logistic objective) followed by
// one tree per boosting round, each fit by exact greedy CART to the negative
// gradients (residuals) of the running prediction.  Split search considers
// the midpoints between consecutive distinct sorted feature values and
// maximizes squared-error variance reduction; a leaf's value is
// learning_rate times the mean residual routed to it.  The training loss is
// therefore non-increasing round over round for learning_rate in (0, 1].
//
// Binary targets only (labels in {0, 1} for the logistic objective, any
// finite reals for squared error), scalar leaves.

#include <vector>

#include "pforest/datasets.hpp"
#include "pforest/forest.hpp"
#include "pforest/neural.hpp"

namespace pforest {

struct BoostConfig {
  int num_trees = 50;     // boosting rounds, excluding the prior tree
  int max_depth = 3;
  double learning_rate = 0.1;
  LossKind loss = LossKind::sigmoid_cross_entropy;  // or squared_error
  int min_samples_leaf = 1;
};

// Mean training loss after the prior and after each round (num_trees + 1
// entries) is appended to round_losses when provided.
Forest train_boosted_forest(const Dataset& data, const BoostConfig& config,
                            std::vector<double>* round_losses = nullptr);

}  // namespace pforest

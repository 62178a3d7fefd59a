#pragma once

// Smoothed forest evaluation under isotropic Gaussian input perturbation.
//
// For z ~ N(mu, sigma^2 I) the expectation of a tree's output is a sum over
// its leaf regions of leaf_value * P(z in region), and the probability
// factorizes per feature into differences of Gaussian CDFs:
//
//     P(z in region) = prod_i [ Phi((u_i - mu_i)/sigma) - Phi((l_i - mu_i)/sigma) ]
//
// with only the features the region actually constrains contributing (an
// unconstrained feature's factor is exactly 1 and is never iterated).  This
// makes the expectation differentiable in mu:
//
//     d/dmu_i factor = [ phi((l_i - mu_i)/sigma) - phi((u_i - mu_i)/sigma) ] / sigma,
//
// and the gradient w.r.t. a leaf's value is simply its region's mass.
//
// SmoothedForest precomputes, per tree, the distinct cuts (feature,
// threshold) and each region's bounds as cut references, so an evaluation
// point costs one CDF and one density per internal node rather than per
// (region x constraint).  Far-tail CDF differences may underflow to zero;
// that is accepted, since such regions contribute negligibly.

#include <span>
#include <vector>

#include "pforest/forest.hpp"

namespace pforest {

// ------- Gaussian helpers -------

// Standard normal CDF; absolute error <= 1e-12, Phi(-inf)=0, Phi(+inf)=1.
double gaussian_cdf(double t);
// Standard normal density; phi(+-inf) = 0.
double gaussian_pdf(double t);

// ------- perturbation parameters -------

struct PerturbationSpec {
  double sigma = 0.015;
};

// Throws std::invalid_argument unless sigma is finite and > 0.
void validate(const PerturbationSpec& spec);

// ------- smoothed results -------

struct SmoothedValue {
  std::vector<double> value;      // output_dim
  std::vector<double> leaf_mass;  // one entry per leaf across trees, tree-major
};

// P(z in region) for z ~ N(mu, sigma^2 I); product over constrained features.
double region_mass(const LeafRegion& region, std::span<const double> mu,
                   const PerturbationSpec& spec);

// ------- cached smoothed forest -------

// Per-thread scratch space for evaluate(); reused across calls.
struct SmoothWorkspace {
  std::vector<double> cdf;
  std::vector<double> pdf;
  std::vector<double> factors;
};

// Structure cache over a forest.  Holds a pointer to the forest: the forest
// must outlive the cache and keep its structure (splits, leaf count) fixed;
// leaf *values* may change freely between evaluations, which is exactly what
// leaf training does.
class SmoothedForest {
 public:
  explicit SmoothedForest(const Forest& forest);

  const Forest& forest() const { return *forest_; }
  int input_dim() const { return input_dim_; }
  int output_dim() const { return output_dim_; }
  int total_leaves() const { return total_leaves_; }
  // First global leaf slot of a tree; global slot = leaf_offset(t) + local slot.
  int leaf_offset(int tree_index) const {
    return leaf_offset_[static_cast<std::size_t>(tree_index)];
  }

  // Fused evaluation at one point.  Output pointers may be null to skip:
  //   value      [output_dim]              smoothed forest output
  //   input_grad [output_dim * input_dim]  d value[c] / d mu[i], row-major
  //   leaf_mass  [total_leaves]            region masses, tree-major; the
  //              gradient of output component c w.r.t. leaf entry (slot, c)
  //              is the slot's mass (cross-component derivatives are zero)
  // Unchecked hot path; mu must hold input_dim finite values, sigma > 0.
  void evaluate(const double* mu, double sigma, double* value, double* input_grad,
                double* leaf_mass, SmoothWorkspace& ws) const;

  // Checked variants.
  SmoothedValue evaluate(std::span<const double> mu, const PerturbationSpec& spec) const;
  std::vector<double> input_gradient(std::span<const double> mu,
                                     const PerturbationSpec& spec) const;

 private:
  void add_tree(const Tree& tree);
  void walk(const Tree& tree, int node_index, int tree_cut_begin,
            std::vector<std::pair<int, int>>& bound_cuts);

  const Forest* forest_;
  int input_dim_ = 0;
  int output_dim_ = 0;
  int total_leaves_ = 0;

  // Cuts (one per internal node), grouped by tree.
  std::vector<int> tree_cut_offset_;   // size trees+1
  std::vector<int> cut_feature_;
  std::vector<double> cut_threshold_;

  // Regions (one per leaf), grouped by tree; constraints reference local cut
  // ids within the owning tree, -1 meaning unbounded on that side.
  std::vector<int> tree_region_offset_;  // size trees+1
  std::vector<int> region_con_offset_;   // size total regions+1
  std::vector<int> region_leaf_;         // local leaf slot
  std::vector<int> con_feature_;
  std::vector<int> con_lo_;
  std::vector<int> con_hi_;

  std::vector<int> leaf_offset_;  // per tree
  std::vector<int> node_cut_;     // construction scratch: node index -> local cut id
  int max_tree_cuts_ = 0;
  int max_region_cons_ = 0;
};

// ------- convenience wrappers (build the cache per call) -------

SmoothedValue smoothed_evaluate(const Forest& forest, std::span<const double> mu,
                                const PerturbationSpec& spec);
// Row-major output_dim x input_dim matrix of d value[c] / d mu[i].
std::vector<double> smoothed_gradient_input(const Forest& forest,
                                            std::span<const double> mu,
                                            const PerturbationSpec& spec);
// Per-leaf masses (tree-major) = gradient of each output component w.r.t.
// the matching component of that leaf's value.
std::vector<double> smoothed_gradient_leaves(const Forest& forest,
                                             std::span<const double> mu,
                                             const PerturbationSpec& spec);

}  // namespace pforest

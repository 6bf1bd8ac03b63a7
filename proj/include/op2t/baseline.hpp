#pragma once

#include "op2t/rewards.hpp"
#include "op2t/tree.hpp"

namespace op2t {

// Per-sample best-action labels for the meta-learning baseline. Regression
// picks the action minimizing |y - w'h(x)|; classification picks the action
// maximizing (correctness, cross-entropy) lexicographically. Ties go to the
// smallest action index. Rejection actions never appear as labels unless the
// optional rejection labeling is enabled, which adds one extra label class
// for samples whose best non-rejection reward is worse than rejecting.
struct MetaLabels {
  std::vector<int> labels;
  int n_label_classes = 0;
  std::vector<std::string> class_names;
};

MetaLabels meta_labels(const ValidatedBundle& bundle, const ActionSet& actions,
                       const std::optional<RejectionSpec>& rejection_labeling = {},
                       double binary_threshold = 0.5);

// A plain classification tree (greedy CART with Gini impurity).
struct ClassTree {
  TreeSkeleton tree;
  int n_classes = 0;
  std::vector<std::string> class_names;
  std::vector<std::string> feature_names;
};

// Greedy top-down induction: each node takes the (feature, midpoint) split
// with the largest Gini impurity decrease, stopping when no split strictly
// decreases impurity or the depth/leaf-size budget is exhausted. Leaves
// predict the majority label (smallest index on ties). Uses max_depth and
// min_leaf from the config; penalty/restarts do not apply.
ClassTree fit_meta_tree(const Eigen::MatrixXd& features, const MetaLabels& labels,
                        const FitConfig& config, std::vector<std::string> feature_names = {});

int predict_class(const ClassTree& tree, const Eigen::RowVectorXd& row);
std::vector<int> predict_class_all(const ClassTree& tree, const Eigen::MatrixXd& features);

std::string class_tree_to_json(const ClassTree& tree);
ClassTree class_tree_from_json(const std::string& text);
std::string class_tree_to_dot(const ClassTree& tree);

double metric_mse(const Eigen::VectorXd& truth, const Eigen::VectorXd& predicted);
double metric_accuracy(const std::vector<int>& truth, const std::vector<int>& predicted);

// Area under the ROC curve by the rank-sum formulation; tied scores get
// average ranks. Throws DegenerateAuc when only one class is present.
double metric_auc(const std::vector<int>& truth, const Eigen::VectorXd& scores);

}  // namespace op2t

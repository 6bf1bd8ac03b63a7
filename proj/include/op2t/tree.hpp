#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "op2t/rewards.hpp"

namespace op2t {

// Axis-aligned binary tree node. A sample routes left iff its feature value
// is strictly below the threshold. Leaves carry an action index (or class
// index when used by classification trees).
struct TreeNode {
  bool is_leaf = true;
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int action = 0;
};

struct TreeSkeleton {
  std::vector<TreeNode> nodes;
  int root = -1;

  bool empty() const { return root < 0; }
  int route(const Eigen::RowVectorXd& row) const;  // index of the reached leaf
  int depth() const;
  int num_splits() const;
  int num_leaves() const;
};

// Structural equality: same shape, features, thresholds, leaf payloads.
bool same_structure(const TreeSkeleton& a, const TreeSkeleton& b);

// A fitted prescription tree over a reward matrix's action space.
struct PolicyTree {
  TreeSkeleton tree;
  ActionSet actions;
  std::vector<std::string> feature_names;
};

struct FitConfig {
  int max_depth = 3;
  int min_leaf = 1;
  // Per-split complexity penalty. Empty selects the penalty automatically on
  // an internal 75/25 split via the pruning path.
  std::optional<double> complexity_penalty = 0.0;
  int restarts = 8;
  // 0 considers all midpoints of consecutive distinct node-local values;
  // q > 0 thins them to midpoints nearest q evenly spaced node quantiles.
  int quantiles = 0;
  std::uint64_t seed = 0;
};

// Objective recorded after each local-search sweep, one series per restart.
struct FitTrace {
  std::vector<std::vector<double>> sweep_objectives;
};

// Coordinate-descent fit: restart 0 starts from a greedy top-down tree;
// each later restart pins the root to one feasible candidate split (cycling
// a seeded shuffle of all of them) and completes the subtrees greedily.
// Every restart then repeatedly revisits nodes in random order applying the
// best of {replace split, prune to leaf, grow leaf} until no visit improves
// the penalized objective. A move that merely matches the objective is taken
// only when it removes splits, so zero-gain splits are always pruned and
// the search terminates. Returns the best restart under the final
// tie-break (objective, fewer splits, smaller preorder encoding).
// Restarts run in parallel, capped by the OP2T_THREADS environment
// variable; the result does not depend on thread count.
PolicyTree fit_policy_tree(const RewardMatrix& rewards, const Eigen::MatrixXd& features,
                           const FitConfig& config,
                           std::vector<std::string> feature_names = {},
                           FitTrace* trace = nullptr);

// Exact optimum by enumeration of every tree over global midpoint
// thresholds, for cross-checking the local search. Guard rails: n <= 64,
// d <= 3, depth <= 2, at most 16 candidate thresholds per feature;
// otherwise InstanceTooLarge. Requires a concrete complexity penalty.
PolicyTree exhaustive_policy_tree(const RewardMatrix& rewards, const Eigen::MatrixXd& features,
                                  const FitConfig& config,
                                  std::vector<std::string> feature_names = {});

int prescribe(const PolicyTree& tree, const Eigen::RowVectorXd& row);
std::vector<int> prescribe_all(const PolicyTree& tree, const Eigen::MatrixXd& features);

struct EvalSummary {
  double total_reward = 0.0;
  double mean_reward = 0.0;
  std::vector<Eigen::Index> action_counts;
  double reject_fraction = 0.0;
};

// Routes every row and accumulates the reward of the prescribed action.
EvalSummary evaluate_policy(const PolicyTree& tree, const RewardMatrix& rewards,
                            const Eigen::MatrixXd& features);

// Penalized objective in the matrix's native sense: total reward minus
// (maximize) or plus (minimize) penalty * number of splits.
double objective_value(const PolicyTree& tree, const RewardMatrix& rewards,
                       const Eigen::MatrixXd& features, double penalty);

struct PrunePoint {
  double lambda;  // smallest penalty at which this subtree becomes optimal
  PolicyTree tree;
  double validation_total;
  int num_splits;
};

// Weakest-link pruning sequence from the full tree down to a single leaf.
// Each step collapses the internal node(s) with the smallest per-split
// reward gain on the training rows; lambda values are nondecreasing and
// split counts strictly decreasing along the path. Validation totals are
// recorded for selection.
std::vector<PrunePoint> prune_path(const PolicyTree& tree, const RewardMatrix& train_rewards,
                                   const Eigen::MatrixXd& train_features,
                                   const RewardMatrix& val_rewards,
                                   const Eigen::MatrixXd& val_features);

// Index of the path entry with the best validation total for the sense;
// ties go to the smaller tree.
std::size_t select_prune_point(const std::vector<PrunePoint>& path, Sense sense);

std::string tree_to_json(const PolicyTree& tree);
PolicyTree tree_from_json(const std::string& text);
std::string tree_to_dot(const PolicyTree& tree);

struct GridSpec {
  std::vector<int> depths{1, 2, 3};
  std::vector<int> min_leafs{1};
  int folds = 3;
  int restarts = 4;
  int quantiles = 0;
  std::uint64_t seed = 0;
};

struct GridCell {
  int depth = 0;
  int min_leaf = 0;
  double lambda = 0.0;
  double mean_validation = 0.0;  // per-sample validation reward, sense-native
};

struct GridResult {
  PolicyTree tree;
  FitConfig chosen;
  std::vector<GridCell> cells;
};

// Cross-validated sweep over depth and leaf-size budgets; within each cell
// the penalty is chosen from the union of per-fold pruning-path
// breakpoints. The winning configuration is refit on all rows.
GridResult grid_search(const RewardMatrix& rewards, const Eigen::MatrixXd& features,
                       const GridSpec& spec, std::vector<std::string> feature_names = {});

}  // namespace op2t

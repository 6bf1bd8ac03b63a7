#pragma once

#include <optional>

#include "op2t/core.hpp"

namespace op2t {

enum class RewardKind { cross_entropy, misclassification, squared_error };

// The action space a policy tree prescribes over: one action per base model,
// optional ensemble actions (each a weight vector over the models), and
// optional trailing rejection actions. Rejections always occupy the last
// indices and carry no weight row.
struct ActionSet {
  Eigen::MatrixXd weights;         // one row per non-rejection action, m columns
  std::vector<std::string> names;  // all actions, rejections last
  int rejections = 0;

  int size() const { return static_cast<int>(names.size()); }
  int non_rejection() const { return size() - rejections; }
  bool has_rejection() const { return rejections > 0; }
  bool is_rejection(int a) const { return a >= non_rejection(); }
  Eigen::Index n_models() const { return weights.cols(); }
};

// Action set containing exactly the unit-weight action for each model.
ActionSet model_actions(const std::vector<std::string>& model_names);
ActionSet model_actions(Eigen::Index m);

// Appends an ensemble action with the given model weights.
void add_ensemble(ActionSet& actions, const Eigen::VectorXd& w, const std::string& name);

// Appends a rejection action (always kept at the tail).
void add_rejection(ActionSet& actions, const std::string& name = "reject");

// Structural invariants: weight rows match the model count, every unit
// vector is present, and for classification every weight row lies on the
// simplex within 1e-9. Throws DimensionMismatch or ValidationError.
void check_actions(const ActionSet& actions, TaskKind kind, Eigen::Index n_models);

// Parameters of the rejection option. Classification uses one cost
// alpha_k in [0,1) per class; regression uses a single constant reward
// alpha >= 0 (a squared-error-scale budget, lower is better).
struct RejectionSpec {
  TaskKind kind = TaskKind::classification;
  Eigen::VectorXd alpha;

  static RejectionSpec classification_uniform(double alpha, Eigen::Index k);
  static RejectionSpec classification(Eigen::VectorXd per_class);
  static RejectionSpec regression(double alpha);
};

// Dense n x actions reward table with its optimization sense. All entries
// are finite; probability clamping happens during construction.
struct RewardMatrix {
  Eigen::MatrixXd values;
  Sense sense = Sense::maximize;
  ActionSet actions;

  Eigen::Index n() const { return values.rows(); }
  Eigen::Index n_actions() const { return values.cols(); }
};

// Blended class probabilities w' h(x) for every sample: n x K.
Eigen::MatrixXd blend_probs(const PredictionTensor& preds, const Eigen::VectorXd& w);

// Class decision for one probability row: argmax with lowest-index ties.
// For two classes the decision is prob(class 1) > threshold.
int predict_class(const Eigen::RowVectorXd& probs, double binary_threshold = 0.5);

// Cross-entropy rewards are log of the blended probability of the true
// class, clamped to [1e-12, 1-1e-12] before the log; sense maximize.
// Misclassification rewards are the 0/1 correctness indicator; sense
// maximize. A rejection column holds log(1 - alpha_y) resp. 1 - alpha_y.
RewardMatrix build_classification_rewards(const ValidatedBundle& bundle,
                                          const ActionSet& actions, RewardKind kind,
                                          const std::optional<RejectionSpec>& rejection = {},
                                          double binary_threshold = 0.5);

// Squared-error rewards (w' h(x) - y)^2; sense minimize. A rejection column
// holds the constant alpha.
RewardMatrix build_regression_rewards(const ValidatedBundle& bundle, const ActionSet& actions,
                                      const std::optional<RejectionSpec>& rejection = {});

// Ridge blend weights (H'H + lambda I)^{-1} H' y.
Eigen::VectorXd ridge_weights(const Eigen::MatrixXd& preds, const Eigen::VectorXd& targets,
                              double lambda = 1.0);

// Uniform blend weights 1/m.
Eigen::VectorXd mean_ensemble(Eigen::Index m);

// Largest per-class rejection cost at which rejecting a whole leaf still
// beats its best single model under cross-entropy:
//   alpha* = 1 - max_j exp(mean_i log p_ij)
// where p_ij is model j's probability of sample i's true class. One vector
// of true-class probabilities per model, all of equal positive length.
double critical_rejection_threshold(const std::vector<Eigen::VectorXd>& true_class_probs);

}  // namespace op2t

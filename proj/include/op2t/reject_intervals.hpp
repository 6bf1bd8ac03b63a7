#pragma once

#include "op2t/tree.hpp"

namespace op2t {

struct IntervalCaps {
  std::optional<double> max_fnr;
  std::optional<double> max_fpr;
};

// A score interval [a, b] on which a binary scorer abstains: samples with
// s < a are predicted 0, s > b predicted 1, and a <= s <= b rejected.
struct RejectionInterval {
  double a = 0.0;
  double b = 1.0;
  Eigen::Index coverage = 0;
  double accuracy = 1.0;  // over covered samples; vacuously 1 when none
  std::optional<double> fnr;
  std::optional<double> fpr;
};

// Maximizes coverage subject to accuracy >= min_accuracy on the covered
// samples, plus optional false-negative/false-positive rate caps, by
// scanning every candidate endpoint pair. Candidates are {0, 1}, the
// distinct scores, and midpoints of consecutive distinct scores; grid > 0
// instead uses the evenly spaced grid {i/grid}. Ties prefer higher
// accuracy, then a narrower interval, then a smaller left endpoint.
// The all-rejecting interval is always feasible, so this never fails.
RejectionInterval solve_single_interval(const Eigen::VectorXd& scores,
                                        const std::vector<int>& labels, double min_accuracy,
                                        const IntervalCaps& caps = {}, int grid = 0);

struct ClassPolicyConfig {
  double alpha = 0.8;    // constant reward for rejecting a sample
  Eigen::VectorXd beta;  // per-class reward for a correct prescription; ones if empty
  FitConfig tree;
};

// Prescription tree over score space whose actions are the class labels
// plus a trailing rejection: a correct prescription of class y earns
// beta_y, an incorrect one earns 0, and rejection earns alpha.
PolicyTree fit_class_policy(const Eigen::MatrixXd& scores, const std::vector<int>& labels,
                            const ClassPolicyConfig& config,
                            std::vector<std::string> feature_names = {});

struct PolicyVote {
  bool reject = false;
  int label = 0;
};

inline PolicyVote vote_class(int label) { return {false, label}; }
inline PolicyVote vote_reject() { return {true, 0}; }

// Combines the prescriptions of two binary class policies (the first voting
// for class 1, the second for class 0) into one decision: positive when the
// first says 1 and the second does not contradict it, negative when the
// second says 0 and the first does not contradict it, rejection otherwise
// (both abstain, outright disagreement, or a one-sided abstention that
// leaves the other side unconfirmed). Exactly two votes are supported;
// anything else throws UnsupportedArity.
PolicyVote combine_prescriptions(const std::vector<PolicyVote>& votes);

}  // namespace op2t

#pragma once

#include "op2t/core.hpp"
#include "op2t/rewards.hpp"

namespace op2t {

// One-dimensional two-expert benchmark: feature x sampled uniformly on
// [lo, hi]; each model's reward column is exp(-(x - mean)^2 / 2) + offset,
// plus one constant-valued rejection column per entry of rejection_alphas.
// Sense is maximize.
struct GaussianRewardSpec {
  double lo = 0.0;
  double hi = 12.0;
  Eigen::Index n = 500;
  std::uint64_t seed = 0;
  double mean1 = 4.0;
  double mean2 = 8.0;
  double offset1 = 0.0;
  double offset2 = 0.0;
  std::vector<double> rejection_alphas;
};

struct GaussianRewards {
  Eigen::MatrixXd features;  // n x 1
  RewardMatrix rewards;
  std::vector<std::string> feature_names;
};

GaussianRewards gaussian_rewards(const GaussianRewardSpec& spec);

struct ProjectileParams {
  double v0 = 0.0;       // launch speed
  double theta = 0.0;    // launch angle in radians, [0, pi/2]
  double drag = 0.0;     // linear drag coefficient
  double mass = 1.0;
  double gravity = 9.81;
};

// Vacuum range v0^2 sin(2 theta) / g.
double physics_no_drag(const ProjectileParams& p);

// Strong-drag limiting range v0 vt cos(theta) / g with vt = m g / drag.
// Throws ZeroDrag when drag <= 0.
double physics_drag_limit(const ProjectileParams& p);

// Range under linear drag: flight time solves y(t) = 0 by bracketing and
// bisection to |y| <= 1e-10 max(1, v0); degenerate launches return 0 and
// drag = 0 falls back to the vacuum formula.
double ground_truth_range(const ProjectileParams& p);

// Height and horizontal position under linear drag, evaluated in a
// cancellation-free form so tiny drag stays accurate.
double projectile_height(const ProjectileParams& p, double t);
double projectile_distance(const ProjectileParams& p, double t);

// Distance-weighted k-nearest-neighbor regressor on standardized features;
// the stand-in learned model for the projectile benchmark.
struct KnnRegressor {
  Eigen::MatrixXd train_features;  // standardized
  Eigen::VectorXd train_targets;
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;
  int k = 10;
};

// Requires at least 25 training rows. Standardization statistics come from
// the training rows only.
KnnRegressor fit_reference_regressor(const Eigen::MatrixXd& features,
                                     const Eigen::VectorXd& targets, int k = 10);
double knn_predict(const KnnRegressor& model, const Eigen::RowVectorXd& row);
Eigen::VectorXd knn_predict_all(const KnnRegressor& model, const Eigen::MatrixXd& features);

// Projectile benchmark: features (v0, theta, drag) ~ U(0,100) x U(0,pi/2)
// x U(0,1), target = true range, and three prediction columns: the vacuum
// formula, the strong-drag formula, and a k-NN regressor trained on the
// train split. Split is 50/25/25.
struct ProjectileData {
  Dataset data;
  PredictionTensor preds;
  SplitIndices split;
};

ProjectileData gen_projectile_dataset(Eigen::Index n, std::uint64_t seed);

}  // namespace op2t

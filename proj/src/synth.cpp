#include "op2t/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <utility>

#include "op2t/rng.hpp"

namespace op2t {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string format_alpha(double alpha) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", alpha);
  return buf;
}

void check_projectile(const ProjectileParams& p) {
  if (!(p.v0 >= 0.0)) throw ValidationError("launch speed must be non-negative");
  if (!(p.theta >= 0.0 && p.theta <= kPi / 2.0))
    throw ValidationError("launch angle must lie in [0, pi/2]");
  if (!(p.mass > 0.0)) throw ValidationError("mass must be positive");
  if (!(p.gravity > 0.0)) throw ValidationError("gravity must be positive");
  if (!(p.drag >= 0.0)) throw ValidationError("drag must be non-negative");
}

// f(e) = exp(-e) - 1 + e, computed without cancellation for small e.
double expm1_residual(double e) {
  if (e < 1e-3) {
    const double e2 = e * e;
    return e2 * (0.5 - e / 6.0 + e2 / 24.0 - e2 * e / 120.0);
  }
  return std::exp(-e) - 1.0 + e;
}

}  // namespace

double physics_no_drag(const ProjectileParams& p) {
  check_projectile(p);
  return p.v0 * p.v0 * std::sin(2.0 * p.theta) / p.gravity;
}

double physics_drag_limit(const ProjectileParams& p) {
  check_projectile(p);
  if (p.drag <= 0.0) throw ZeroDrag("the strong-drag limit is undefined at zero drag");
  const double vt = p.mass * p.gravity / p.drag;
  return p.v0 * vt * std::cos(p.theta) / p.gravity;
}

double projectile_height(const ProjectileParams& p, double t) {
  const double vt = p.mass * p.gravity / p.drag;
  const double e = p.gravity * t / vt;
  const double rise = -std::expm1(-e);  // 1 - exp(-e)
  return (vt / p.gravity) * (p.v0 * std::sin(p.theta) * rise - vt * expm1_residual(e));
}

double projectile_distance(const ProjectileParams& p, double t) {
  const double vt = p.mass * p.gravity / p.drag;
  const double e = p.gravity * t / vt;
  return (p.v0 * vt * std::cos(p.theta) / p.gravity) * -std::expm1(-e);
}

double ground_truth_range(const ProjectileParams& p) {
  check_projectile(p);
  if (p.drag == 0.0) return physics_no_drag(p);
  if (p.v0 == 0.0 || p.theta == 0.0 || p.theta == kPi / 2.0) return 0.0;

  const double tol = 1e-10 * std::max(1.0, p.v0);

  // Bracket the landing time: shrink to a height above ground, then double
  // until below it. y'(0) = v0 sin(theta) > 0 guarantees a bracket exists.
  double t_lo = p.v0 * std::sin(p.theta) / p.gravity;
  for (int i = 0; i < 300 && projectile_height(p, t_lo) <= 0.0; ++i) t_lo *= 0.5;
  if (projectile_height(p, t_lo) <= 0.0) return 0.0;
  double t_hi = t_lo;
  for (int i = 0; i < 300 && projectile_height(p, t_hi) > 0.0; ++i) t_hi *= 2.0;

  double t_mid = 0.5 * (t_lo + t_hi);
  for (int i = 0; i < 200; ++i) {
    t_mid = 0.5 * (t_lo + t_hi);
    const double y = projectile_height(p, t_mid);
    if (std::abs(y) <= tol) break;
    (y > 0.0 ? t_lo : t_hi) = t_mid;
  }
  return projectile_distance(p, t_mid);
}

GaussianRewards gaussian_rewards(const GaussianRewardSpec& spec) {
  if (!(spec.lo < spec.hi)) throw ValidationError("interval must satisfy lo < hi");
  if (spec.n < 1) throw TooFewSamples("need at least one sample");
  for (double alpha : spec.rejection_alphas)
    if (!std::isfinite(alpha)) throw ValidationError("rejection rewards must be finite");

  Rng rng(spec.seed);
  GaussianRewards out;
  out.features.resize(spec.n, 1);
  for (Eigen::Index i = 0; i < spec.n; ++i) out.features(i, 0) = rng.uniform(spec.lo, spec.hi);
  out.feature_names = {"x"};

  ActionSet actions = model_actions(std::vector<std::string>{"M1", "M2"});
  const bool single = spec.rejection_alphas.size() == 1;
  for (double alpha : spec.rejection_alphas)
    add_rejection(actions, single ? "reject" : "reject_" + format_alpha(alpha));

  out.rewards.sense = Sense::maximize;
  out.rewards.actions = actions;
  out.rewards.values.resize(spec.n, actions.size());
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    const double x = out.features(i, 0);
    const double d1 = x - spec.mean1;
    const double d2 = x - spec.mean2;
    out.rewards.values(i, 0) = std::exp(-0.5 * d1 * d1) + spec.offset1;
    out.rewards.values(i, 1) = std::exp(-0.5 * d2 * d2) + spec.offset2;
    for (std::size_t r = 0; r < spec.rejection_alphas.size(); ++r)
      out.rewards.values(i, 2 + static_cast<Eigen::Index>(r)) = spec.rejection_alphas[r];
  }
  return out;
}

KnnRegressor fit_reference_regressor(const Eigen::MatrixXd& features,
                                     const Eigen::VectorXd& targets, int k) {
  if (features.rows() != targets.size())
    throw DimensionMismatch("feature rows do not match target length");
  if (features.rows() < 25)
    throw TooFewSamples("the reference regressor needs at least 25 training rows");
  if (k < 1) throw ValidationError("neighbor count must be positive");
  if (!features.allFinite() || !targets.allFinite())
    throw NonFinite(-1, -1, "training data contains non-finite values");

  KnnRegressor model;
  model.k = std::min<int>(k, static_cast<int>(features.rows()));
  model.mean = features.colwise().mean();
  Eigen::MatrixXd centered = features.rowwise() - model.mean.transpose();
  model.scale = (centered.array().square().colwise().mean()).sqrt();
  for (Eigen::Index j = 0; j < model.scale.size(); ++j)
    if (model.scale(j) < 1e-12) model.scale(j) = 1.0;
  model.train_features = centered.array().rowwise() / model.scale.transpose().array();
  model.train_targets = targets;
  return model;
}

double knn_predict(const KnnRegressor& model, const Eigen::RowVectorXd& row) {
  if (row.size() != model.train_features.cols())
    throw DimensionMismatch("query dimension does not match training features");
  const Eigen::RowVectorXd q =
      (row - model.mean.transpose()).array() / model.scale.transpose().array();

  const Eigen::Index n = model.train_features.rows();
  std::vector<std::pair<double, Eigen::Index>> dist(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    dist[static_cast<std::size_t>(i)] = {(model.train_features.row(i) - q).squaredNorm(), i};
  const int k = std::min<int>(model.k, static_cast<int>(n));
  std::partial_sort(dist.begin(), dist.begin() + k, dist.end());

  // An exact feature match wins outright (lowest training index first).
  if (dist[0].first < 1e-24) return model.train_targets(dist[0].second);

  double weight_sum = 0.0, value = 0.0;
  for (int i = 0; i < k; ++i) {
    const double w = 1.0 / std::sqrt(dist[static_cast<std::size_t>(i)].first);
    weight_sum += w;
    value += w * model.train_targets(dist[static_cast<std::size_t>(i)].second);
  }
  return value / weight_sum;
}

Eigen::VectorXd knn_predict_all(const KnnRegressor& model, const Eigen::MatrixXd& features) {
  Eigen::VectorXd out(features.rows());
  for (Eigen::Index i = 0; i < features.rows(); ++i)
    out(i) = knn_predict(model, features.row(i));
  return out;
}

ProjectileData gen_projectile_dataset(Eigen::Index n, std::uint64_t seed) {
  if (n < 10) throw TooFewSamples("projectile benchmark needs at least 10 rows");

  Rng rng = Rng(seed).fork(1);
  ProjectileData out;
  out.data.features.resize(n, 3);
  out.data.targets.resize(n);
  out.data.feature_names = {"v0", "theta", "drag"};
  for (Eigen::Index i = 0; i < n; ++i) {
    ProjectileParams p;
    p.v0 = rng.uniform(0.0, 100.0);
    p.theta = rng.uniform(0.0, kPi / 2.0);
    do {
      p.drag = rng.uniform(0.0, 1.0);
    } while (p.drag == 0.0);
    out.data.features(i, 0) = p.v0;
    out.data.features(i, 1) = p.theta;
    out.data.features(i, 2) = p.drag;
    out.data.targets(i) = ground_truth_range(p);
  }

  SplitSpec split_spec;
  split_spec.seed = Rng(seed).fork(2).next();
  out.split = split(n, split_spec);

  const Eigen::MatrixXd train_x = take_rows(out.data.features, out.split.train);
  const Eigen::VectorXd train_y = take_rows(out.data.targets, out.split.train);
  const KnnRegressor knn = fit_reference_regressor(train_x, train_y);

  Eigen::MatrixXd preds(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    ProjectileParams p;
    p.v0 = out.data.features(i, 0);
    p.theta = out.data.features(i, 1);
    p.drag = out.data.features(i, 2);
    preds(i, 0) = physics_no_drag(p);
    preds(i, 1) = physics_drag_limit(p);
  }
  preds.col(2) = knn_predict_all(knn, out.data.features);
  out.preds = make_regression_tensor(std::move(preds),
                                     {"physics_no_drag", "physics_drag", "knn"});
  return out;
}

}  // namespace op2t

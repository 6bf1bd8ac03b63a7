#include "op2t/rewards.hpp"

#include <cmath>
#include <limits>

namespace op2t {

namespace {

constexpr double kProbClamp = 1e-12;
constexpr double kWeightTol = 1e-9;

double clamp_prob(double p) {
  if (p < kProbClamp) return kProbClamp;
  if (p > 1.0 - kProbClamp) return 1.0 - kProbClamp;
  return p;
}

void check_finite_rewards(const Eigen::MatrixXd& r) {
  for (Eigen::Index i = 0; i < r.rows(); ++i)
    for (Eigen::Index j = 0; j < r.cols(); ++j)
      if (!std::isfinite(r(i, j)))
        throw NonFinite(i, j, "reward entry is not finite");
}

void require_rejection_params(const ActionSet& actions,
                              const std::optional<RejectionSpec>& rejection, TaskKind kind,
                              Eigen::Index k) {
  if (!actions.has_rejection()) return;
  if (!rejection)
    throw MissingRejectionSpec("action set contains a rejection action but no rejection "
                               "parameters were supplied");
  if (rejection->kind != kind)
    throw KindMismatch("rejection parameters are for the wrong task kind");
  if (kind == TaskKind::classification) {
    if (rejection->alpha.size() != k)
      throw DimensionMismatch("per-class rejection costs must have one entry per class");
    for (Eigen::Index c = 0; c < k; ++c)
      if (!(rejection->alpha(c) >= 0.0 && rejection->alpha(c) < 1.0))
        throw ValidationError("classification rejection costs must lie in [0, 1)");
  } else {
    if (rejection->alpha.size() != 1)
      throw DimensionMismatch("regression rejection takes a single constant");
    if (!(rejection->alpha(0) >= 0.0))
      throw ValidationError("regression rejection constant must be non-negative");
  }
}

}  // namespace

ActionSet model_actions(const std::vector<std::string>& model_names) {
  ActionSet a;
  const Eigen::Index m = static_cast<Eigen::Index>(model_names.size());
  a.weights = Eigen::MatrixXd::Identity(m, m);
  a.names = model_names;
  return a;
}

ActionSet model_actions(Eigen::Index m) {
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < m; ++j) names.push_back("model" + std::to_string(j));
  return model_actions(names);
}

void add_ensemble(ActionSet& actions, const Eigen::VectorXd& w, const std::string& name) {
  if (actions.has_rejection())
    throw ValidationError("ensemble actions must be added before rejection actions");
  if (w.size() != actions.weights.cols())
    throw DimensionMismatch("ensemble weight length does not match model count");
  actions.weights.conservativeResize(actions.weights.rows() + 1, Eigen::NoChange);
  actions.weights.row(actions.weights.rows() - 1) = w.transpose();
  actions.names.push_back(name);
}

void add_rejection(ActionSet& actions, const std::string& name) {
  actions.names.push_back(name);
  ++actions.rejections;
}

void check_actions(const ActionSet& actions, TaskKind kind, Eigen::Index n_models) {
  if (actions.weights.cols() != n_models)
    throw DimensionMismatch("action weights have " + std::to_string(actions.weights.cols()) +
                            " columns but the tensor has " + std::to_string(n_models) +
                            " models");
  if (actions.weights.rows() != actions.non_rejection())
    throw DimensionMismatch("one weight row per non-rejection action is required");
  for (Eigen::Index j = 0; j < n_models; ++j) {
    bool found = false;
    for (Eigen::Index a = 0; a < actions.weights.rows() && !found; ++a) {
      double dev = 0.0;
      for (Eigen::Index c = 0; c < n_models; ++c)
        dev = std::max(dev, std::abs(actions.weights(a, c) - (c == j ? 1.0 : 0.0)));
      found = dev <= kWeightTol;
    }
    if (!found)
      throw ValidationError("action set is missing the unit action for model " +
                            std::to_string(j));
  }
  if (kind == TaskKind::classification) {
    for (Eigen::Index a = 0; a < actions.weights.rows(); ++a) {
      if (std::abs(actions.weights.row(a).sum() - 1.0) > kWeightTol ||
          actions.weights.row(a).minCoeff() < -kWeightTol)
        throw ValidationError("classification blend weights must lie on the simplex");
    }
  }
}

RejectionSpec RejectionSpec::classification_uniform(double alpha, Eigen::Index k) {
  RejectionSpec s;
  s.kind = TaskKind::classification;
  s.alpha = Eigen::VectorXd::Constant(k, alpha);
  return s;
}

RejectionSpec RejectionSpec::classification(Eigen::VectorXd per_class) {
  RejectionSpec s;
  s.kind = TaskKind::classification;
  s.alpha = std::move(per_class);
  return s;
}

RejectionSpec RejectionSpec::regression(double alpha) {
  RejectionSpec s;
  s.kind = TaskKind::regression;
  s.alpha = Eigen::VectorXd::Constant(1, alpha);
  return s;
}

Eigen::MatrixXd blend_probs(const PredictionTensor& preds, const Eigen::VectorXd& w) {
  if (preds.kind != TaskKind::classification)
    throw KindMismatch("blend_probs requires a classification tensor");
  if (w.size() != preds.n_models())
    throw DimensionMismatch("blend weight length does not match model count");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(preds.n(), preds.n_classes());
  for (Eigen::Index j = 0; j < preds.n_models(); ++j)
    out += w(j) * preds.class_probs[static_cast<std::size_t>(j)];
  return out;
}

int predict_class(const Eigen::RowVectorXd& probs, double binary_threshold) {
  if (probs.size() == 2) return probs(1) > binary_threshold ? 1 : 0;
  int best = 0;
  for (int c = 1; c < probs.size(); ++c)
    if (probs(c) > probs(best)) best = c;
  return best;
}

RewardMatrix build_classification_rewards(const ValidatedBundle& bundle,
                                          const ActionSet& actions, RewardKind kind,
                                          const std::optional<RejectionSpec>& rejection,
                                          double binary_threshold) {
  if (bundle.preds.kind != TaskKind::classification)
    throw KindMismatch("classification rewards require a classification tensor");
  if (kind == RewardKind::squared_error)
    throw KindMismatch("squared error is a regression reward");
  check_actions(actions, TaskKind::classification, bundle.preds.n_models());
  const Eigen::Index k = bundle.preds.n_classes();
  require_rejection_params(actions, rejection, TaskKind::classification, k);

  const Eigen::Index n = bundle.n();
  RewardMatrix r;
  r.sense = Sense::maximize;
  r.actions = actions;
  r.values.resize(n, actions.size());

  for (int a = 0; a < actions.non_rejection(); ++a) {
    const Eigen::MatrixXd blended = blend_probs(bundle.preds, actions.weights.row(a).transpose());
    for (Eigen::Index i = 0; i < n; ++i) {
      const int y = static_cast<int>(bundle.data.targets(i));
      if (kind == RewardKind::cross_entropy) {
        r.values(i, a) = std::log(clamp_prob(blended(i, y)));
      } else {
        r.values(i, a) = predict_class(blended.row(i), binary_threshold) == y ? 1.0 : 0.0;
      }
    }
  }
  for (int rj = 0; rj < actions.rejections; ++rj) {
    const int a = actions.non_rejection() + rj;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int y = static_cast<int>(bundle.data.targets(i));
      const double alpha = rejection->alpha(y);
      r.values(i, a) =
          kind == RewardKind::cross_entropy ? std::log(clamp_prob(1.0 - alpha)) : 1.0 - alpha;
    }
  }
  check_finite_rewards(r.values);
  return r;
}

RewardMatrix build_regression_rewards(const ValidatedBundle& bundle, const ActionSet& actions,
                                      const std::optional<RejectionSpec>& rejection) {
  if (bundle.preds.kind != TaskKind::regression)
    throw KindMismatch("regression rewards require a regression tensor");
  check_actions(actions, TaskKind::regression, bundle.preds.n_models());
  require_rejection_params(actions, rejection, TaskKind::regression, 1);

  const Eigen::Index n = bundle.n();
  RewardMatrix r;
  r.sense = Sense::minimize;
  r.actions = actions;
  r.values.resize(n, actions.size());

  for (int a = 0; a < actions.non_rejection(); ++a) {
    const Eigen::VectorXd blended =
        bundle.preds.scalar_preds * actions.weights.row(a).transpose();
    r.values.col(a) = (blended - bundle.data.targets).array().square();
  }
  for (int rj = 0; rj < actions.rejections; ++rj)
    r.values.col(actions.non_rejection() + rj).setConstant(rejection->alpha(0));
  check_finite_rewards(r.values);
  return r;
}

Eigen::VectorXd ridge_weights(const Eigen::MatrixXd& preds, const Eigen::VectorXd& targets,
                              double lambda) {
  if (preds.rows() != targets.size())
    throw DimensionMismatch("prediction rows do not match target length");
  if (!(lambda >= 0.0)) throw ValidationError("ridge penalty must be non-negative");
  const Eigen::Index m = preds.cols();
  const Eigen::MatrixXd gram =
      preds.transpose() * preds + lambda * Eigen::MatrixXd::Identity(m, m);
  return gram.ldlt().solve(preds.transpose() * targets);
}

Eigen::VectorXd mean_ensemble(Eigen::Index m) {
  if (m < 1) throw ValidationError("mean ensemble needs at least one model");
  return Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
}

double critical_rejection_threshold(const std::vector<Eigen::VectorXd>& true_class_probs) {
  if (true_class_probs.empty())
    throw ValidationError("critical threshold needs at least one model");
  const Eigen::Index n = true_class_probs.front().size();
  if (n < 1) throw ValidationError("critical threshold needs a non-empty leaf");
  double best = -std::numeric_limits<double>::infinity();
  for (const Eigen::VectorXd& probs : true_class_probs) {
    if (probs.size() != n)
      throw DimensionMismatch("every model must score the same leaf samples");
    double mean_log = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(probs(i) > 0.0 && probs(i) <= 1.0))
        throw ValidationError("true-class probabilities must lie in (0, 1]");
      mean_log += std::log(probs(i));
    }
    best = std::max(best, mean_log / static_cast<double>(n));
  }
  return 1.0 - std::exp(best);
}

}  // namespace op2t

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "op2t/errors.hpp"

namespace op2t {

enum class TaskKind { classification, regression };
enum class Sense { maximize, minimize };

// Tabular features plus a target column. For classification the targets are
// integer class indices stored as doubles; validate() enforces this.
struct Dataset {
  Eigen::MatrixXd features;  // n x d
  Eigen::VectorXd targets;   // n
  std::vector<std::string> feature_names;

  Eigen::Index n() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
};

// Per-model predictions over the same n samples. Classification holds one
// n x K probability block per model; regression holds an n x m matrix of
// point predictions.
struct PredictionTensor {
  TaskKind kind = TaskKind::regression;
  std::vector<Eigen::MatrixXd> class_probs;
  Eigen::MatrixXd scalar_preds;
  std::vector<std::string> model_names;

  Eigen::Index n() const {
    if (kind == TaskKind::classification)
      return class_probs.empty() ? 0 : class_probs.front().rows();
    return scalar_preds.rows();
  }
  Eigen::Index n_models() const {
    if (kind == TaskKind::classification)
      return static_cast<Eigen::Index>(class_probs.size());
    return scalar_preds.cols();
  }
  Eigen::Index n_classes() const {
    return class_probs.empty() ? 0 : class_probs.front().cols();
  }
};

PredictionTensor make_classification_tensor(std::vector<Eigen::MatrixXd> probs,
                                            std::vector<std::string> model_names = {});
PredictionTensor make_regression_tensor(Eigen::MatrixXd preds,
                                        std::vector<std::string> model_names = {});

// Fractions must each lie in (0,1) and sum to 1 within 1e-9.
struct SplitSpec {
  double train = 0.5;
  double validation = 0.25;
  double test = 0.25;
  std::optional<int> k_folds;
  std::uint64_t seed = 0;
};

struct SplitIndices {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> validation;
  std::vector<Eigen::Index> test;
};

// A dataset and prediction tensor that have passed validate(). Treated as
// immutable after construction; all downstream operations are pure.
struct ValidatedBundle {
  Dataset data;
  PredictionTensor preds;

  Eigen::Index n() const { return data.n(); }
};

// Checks row counts, finiteness, probability rows against the simplex
// (tolerance 1e-6 on the row sum), and target domains. Throws
// DimensionMismatch, NonFinite, SimplexViolation, or ValidationError.
ValidatedBundle validate(Dataset data, PredictionTensor preds);

// Disjoint shuffled train/validation/test index sets covering 0..n-1.
// Validation and test sizes are the floors of their fractions, train takes
// the remainder; every part is non-empty or EmptyPartition is thrown.
SplitIndices split(Eigen::Index n, const SplitSpec& spec);
inline SplitIndices split(const Dataset& data, const SplitSpec& spec) {
  return split(data.n(), spec);
}

// k disjoint shuffled folds covering 0..n-1, sizes differing by at most one.
std::vector<std::vector<Eigen::Index>> kfold(Eigen::Index n, int k, std::uint64_t seed);

// Rows of `m` selected by `idx`, in idx order.
Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& idx);
Eigen::VectorXd take_rows(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& idx);

}  // namespace op2t

#include "op2t/core.hpp"

#include <cmath>
#include <numeric>

#include "op2t/rng.hpp"

namespace op2t {

namespace {

constexpr double kSimplexTol = 1e-6;

void check_finite(const Eigen::MatrixXd& m, const char* what) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (!std::isfinite(m(i, j))) {
        throw NonFinite(i, j, std::string(what) + " contains a non-finite value at row " +
                                  std::to_string(i) + ", column " + std::to_string(j));
      }
    }
  }
}

}  // namespace

PredictionTensor make_classification_tensor(std::vector<Eigen::MatrixXd> probs,
                                            std::vector<std::string> model_names) {
  PredictionTensor t;
  t.kind = TaskKind::classification;
  t.class_probs = std::move(probs);
  if (model_names.empty()) {
    for (std::size_t j = 0; j < t.class_probs.size(); ++j)
      model_names.push_back("model" + std::to_string(j));
  }
  t.model_names = std::move(model_names);
  return t;
}

PredictionTensor make_regression_tensor(Eigen::MatrixXd preds,
                                        std::vector<std::string> model_names) {
  PredictionTensor t;
  t.kind = TaskKind::regression;
  t.scalar_preds = std::move(preds);
  if (model_names.empty()) {
    for (Eigen::Index j = 0; j < t.scalar_preds.cols(); ++j)
      model_names.push_back("model" + std::to_string(j));
  }
  t.model_names = std::move(model_names);
  return t;
}

ValidatedBundle validate(Dataset data, PredictionTensor preds) {
  const Eigen::Index n = data.n();
  if (n < 1) throw ValidationError("dataset must contain at least one row");
  if (data.dim() < 1) throw ValidationError("dataset must contain at least one feature");
  if (data.targets.size() != n)
    throw DimensionMismatch("targets have " + std::to_string(data.targets.size()) +
                            " rows but features have " + std::to_string(n));
  if (!data.feature_names.empty() &&
      static_cast<Eigen::Index>(data.feature_names.size()) != data.dim())
    throw DimensionMismatch("feature name count does not match feature columns");

  check_finite(data.features, "features");
  check_finite(data.targets, "targets");

  if (preds.n_models() < 1) throw ValidationError("prediction tensor has no models");
  if (static_cast<Eigen::Index>(preds.model_names.size()) != preds.n_models())
    throw DimensionMismatch("model name count does not match model count");

  if (preds.kind == TaskKind::regression) {
    if (preds.scalar_preds.rows() != n)
      throw DimensionMismatch("prediction rows (" + std::to_string(preds.scalar_preds.rows()) +
                              ") do not match dataset rows (" + std::to_string(n) + ")");
    check_finite(preds.scalar_preds, "predictions");
  } else {
    const Eigen::Index k = preds.n_classes();
    if (k < 1) throw ValidationError("classification tensor has no classes");
    for (std::size_t j = 0; j < preds.class_probs.size(); ++j) {
      const Eigen::MatrixXd& p = preds.class_probs[j];
      if (p.rows() != n)
        throw DimensionMismatch("model " + std::to_string(j) + " has " +
                                std::to_string(p.rows()) + " prediction rows, expected " +
                                std::to_string(n));
      if (p.cols() != k)
        throw DimensionMismatch("model " + std::to_string(j) +
                                " has inconsistent class count");
      check_finite(p, "class probabilities");
      // Worst simplex offender across the block, reported with its deviation.
      for (Eigen::Index i = 0; i < n; ++i) {
        double dev = std::abs(p.row(i).sum() - 1.0);
        for (Eigen::Index c = 0; c < k; ++c) {
          if (p(i, c) < 0.0) dev = std::max(dev, -p(i, c));
          if (p(i, c) > 1.0) dev = std::max(dev, p(i, c) - 1.0);
        }
        if (dev > kSimplexTol) {
          throw SimplexViolation(i, dev,
                                 "probability row " + std::to_string(i) + " of model " +
                                     std::to_string(j) + " deviates from the simplex by " +
                                     std::to_string(dev));
        }
      }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const double y = data.targets(i);
      if (y != std::floor(y) || y < 0.0 || y >= static_cast<double>(k))
        throw ValidationError("target at row " + std::to_string(i) +
                              " is not a class index in [0, " + std::to_string(k) + ")");
    }
  }

  ValidatedBundle b;
  b.data = std::move(data);
  b.preds = std::move(preds);
  return b;
}

SplitIndices split(Eigen::Index n, const SplitSpec& spec) {
  const double fracs[3] = {spec.train, spec.validation, spec.test};
  double sum = 0.0;
  for (double f : fracs) {
    if (!(f > 0.0 && f < 1.0))
      throw ValidationError("split fractions must each lie in (0, 1)");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ValidationError("split fractions must sum to 1");
  if (n < 3) throw EmptyPartition("cannot three-way split fewer than 3 rows");

  // Validation and test get the floors; flooring losses go to train.
  Eigen::Index sizes[3];
  for (int p = 1; p < 3; ++p)
    sizes[p] = static_cast<Eigen::Index>(std::floor(fracs[p] * static_cast<double>(n)));
  sizes[0] = n - sizes[1] - sizes[2];
  for (int p = 0; p < 3; ++p)
    if (sizes[p] == 0)
      throw EmptyPartition("split would leave an empty partition; adjust fractions or n");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(spec.seed);
  rng.shuffle(order);

  SplitIndices out;
  auto it = order.begin();
  out.train.assign(it, it + sizes[0]);
  it += sizes[0];
  out.validation.assign(it, it + sizes[1]);
  it += sizes[1];
  out.test.assign(it, it + sizes[2]);
  return out;
}

std::vector<std::vector<Eigen::Index>> kfold(Eigen::Index n, int k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("k-fold requires k >= 2");
  if (n < k) throw EmptyPartition("cannot make " + std::to_string(k) + " folds from " +
                                  std::to_string(n) + " rows");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<std::vector<Eigen::Index>> folds(static_cast<std::size_t>(k));
  const Eigen::Index base = n / k;
  const Eigen::Index extra = n % k;
  auto it = order.begin();
  for (int f = 0; f < k; ++f) {
    const Eigen::Index size = base + (f < extra ? 1 : 0);
    folds[static_cast<std::size_t>(f)].assign(it, it + size);
    it += size;
  }
  return folds;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
  return out;
}

Eigen::VectorXd take_rows(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i)
    out(static_cast<Eigen::Index>(i)) = v(idx[i]);
  return out;
}

}  // namespace op2t

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "op2t/core.hpp"

using namespace op2t;

namespace {

Dataset tiny_regression_data(Eigen::Index n = 4) {
  Dataset d;
  d.features = Eigen::MatrixXd::Zero(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    d.features(i, 0) = static_cast<double>(i);
    d.features(i, 1) = 0.5 * static_cast<double>(i);
  }
  d.targets = Eigen::VectorXd::LinSpaced(n, 0.0, 1.0);
  d.feature_names = {"x0", "x1"};
  return d;
}

PredictionTensor tiny_class_tensor(Eigen::Index n, double p_first_class = 0.7) {
  Eigen::MatrixXd probs(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    probs(i, 0) = p_first_class;
    probs(i, 1) = 1.0 - p_first_class;
  }
  return make_classification_tensor({probs});
}

bool is_partition(const std::vector<std::vector<Eigen::Index>>& parts, Eigen::Index n) {
  std::set<Eigen::Index> seen;
  Eigen::Index total = 0;
  for (const auto& part : parts) {
    total += static_cast<Eigen::Index>(part.size());
    seen.insert(part.begin(), part.end());
  }
  if (total != n || static_cast<Eigen::Index>(seen.size()) != n) return false;
  return *seen.begin() == 0 && *seen.rbegin() == n - 1;
}

}  // namespace

TEST_CASE("split honors the documented sizes on the 8-row example") {
  SplitSpec spec;
  spec.seed = 7;
  const SplitIndices s = split(8, spec);
  CHECK(s.train.size() == 4);
  CHECK(s.validation.size() == 2);
  CHECK(s.test.size() == 2);
  CHECK(is_partition({s.train, s.validation, s.test}, 8));
}

TEST_CASE("split is deterministic for a fixed seed") {
  SplitSpec spec;
  spec.seed = 7;
  const SplitIndices a = split(8, spec);
  const SplitIndices b = split(8, spec);
  CHECK(a.train == b.train);
  CHECK(a.validation == b.validation);
  CHECK(a.test == b.test);
}

TEST_CASE("split sends flooring remainders to the training set") {
  SplitSpec spec;
  const SplitIndices s = split(10, spec);
  CHECK(s.train.size() == 6);  // 10 - floor(2.5) - floor(2.5)
  CHECK(s.validation.size() == 2);
  CHECK(s.test.size() == 2);
}

TEST_CASE("split rejects partitions that would come out empty") {
  SplitSpec spec;
  CHECK_THROWS_AS(split(2, spec), EmptyPartition);
  CHECK_THROWS_AS(split(3, spec), EmptyPartition);  // floor(0.25 * 3) = 0
}

TEST_CASE("split validates the fractions") {
  SplitSpec spec;
  spec.train = 0.6;  // now summing to 1.1
  CHECK_THROWS_AS(split(100, spec), ValidationError);
  spec.train = 1.0;
  spec.validation = 0.0;
  spec.test = 0.0;
  CHECK_THROWS_AS(split(100, spec), ValidationError);
}

TEST_CASE("split partitions the index range for random sizes and fractions") {
  std::mt19937_64 gen(2024);
  std::uniform_int_distribution<Eigen::Index> n_dist(4, 400);
  std::uniform_real_distribution<double> f_dist(0.15, 0.5);
  int checked = 0;
  for (int rep = 0; rep < 150; ++rep) {
    const Eigen::Index n = n_dist(gen);
    SplitSpec spec;
    spec.validation = f_dist(gen);
    spec.test = f_dist(gen);
    spec.train = 1.0 - spec.validation - spec.test;
    spec.seed = gen();
    if (spec.train <= 0.15) continue;
    SplitIndices s;
    try {
      s = split(n, spec);
    } catch (const EmptyPartition&) {
      continue;  // legitimately too small for these fractions
    }
    const auto want_val =
        static_cast<Eigen::Index>(std::floor(spec.validation * static_cast<double>(n)));
    const auto want_test =
        static_cast<Eigen::Index>(std::floor(spec.test * static_cast<double>(n)));
    CHECK(static_cast<Eigen::Index>(s.validation.size()) == want_val);
    CHECK(static_cast<Eigen::Index>(s.test.size()) == want_test);
    CHECK(static_cast<Eigen::Index>(s.train.size()) == n - want_val - want_test);
    CHECK(is_partition({s.train, s.validation, s.test}, n));
    ++checked;
  }
  CHECK(checked >= 100);
}

TEST_CASE("kfold produces balanced disjoint folds") {
  std::mt19937_64 gen(99);
  std::uniform_int_distribution<Eigen::Index> n_dist(5, 300);
  std::uniform_int_distribution<int> k_dist(2, 5);
  for (int rep = 0; rep < 120; ++rep) {
    const Eigen::Index n = n_dist(gen);
    const int k = k_dist(gen);
    const auto folds = kfold(n, k, gen());
    REQUIRE(static_cast<int>(folds.size()) == k);
    CHECK(is_partition(folds, n));
    Eigen::Index lo = n, hi = 0;
    for (const auto& f : folds) {
      lo = std::min(lo, static_cast<Eigen::Index>(f.size()));
      hi = std::max(hi, static_cast<Eigen::Index>(f.size()));
    }
    CHECK(hi - lo <= 1);
  }
}

TEST_CASE("kfold rejects degenerate fold counts") {
  CHECK_THROWS_AS(kfold(10, 1, 0), ValidationError);
  CHECK_THROWS_AS(kfold(3, 4, 0), EmptyPartition);
}

TEST_CASE("validate accepts a well-formed regression bundle") {
  Dataset d = tiny_regression_data();
  Eigen::MatrixXd preds(4, 2);
  preds << 0.0, 0.1, 0.3, 0.2, 0.6, 0.7, 1.0, 0.9;
  const ValidatedBundle b = validate(d, make_regression_tensor(preds, {"a", "b"}));
  CHECK(b.n() == 4);
  CHECK(b.preds.n_models() == 2);
  CHECK(b.preds.model_names == std::vector<std::string>{"a", "b"});
}

TEST_CASE("validate reports non-finite cells with their position") {
  Dataset d = tiny_regression_data();
  d.features(2, 1) = std::numeric_limits<double>::quiet_NaN();
  Eigen::MatrixXd preds = Eigen::MatrixXd::Zero(4, 1);
  try {
    validate(d, make_regression_tensor(preds));
    FAIL("expected NonFinite");
  } catch (const NonFinite& e) {
    CHECK(e.row == 2);
    CHECK(e.col == 1);
  }
}

TEST_CASE("validate rejects row-count mismatches") {
  Dataset d = tiny_regression_data();
  CHECK_THROWS_AS(validate(d, make_regression_tensor(Eigen::MatrixXd::Zero(3, 1))),
                  DimensionMismatch);
  d.targets = Eigen::VectorXd::Zero(5);
  CHECK_THROWS_AS(validate(d, make_regression_tensor(Eigen::MatrixXd::Zero(4, 1))),
                  DimensionMismatch);
}

TEST_CASE("validate reports the worst simplex offender with its deviation") {
  Dataset d = tiny_regression_data();
  d.targets = Eigen::VectorXd::Zero(4);
  Eigen::MatrixXd probs(4, 2);
  probs << 0.5, 0.5, 0.7, 0.7, 0.2, 0.8, 1.0, 0.0;
  try {
    validate(d, make_classification_tensor({probs}));
    FAIL("expected SimplexViolation");
  } catch (const SimplexViolation& e) {
    CHECK(e.row == 1);
    CHECK(e.deviation == doctest::Approx(0.4).epsilon(1e-12));
  }
}

TEST_CASE("validate fuzzes the simplex boundary at the 1e-6 tolerance") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> unit(0.05, 0.95);
  std::uniform_real_distribution<double> within(0.0, 9e-7);
  std::uniform_real_distribution<double> beyond(2e-6, 1e-3);
  for (int rep = 0; rep < 120; ++rep) {
    Dataset d = tiny_regression_data(1);
    d.targets = Eigen::VectorXd::Zero(1);
    const double p = unit(gen);
    Eigen::MatrixXd probs(1, 2);
    const bool ok = rep % 2 == 0;
    const double bump = ok ? within(gen) : beyond(gen);
    probs << p, 1.0 - p + bump;
    if (ok)
      CHECK_NOTHROW(validate(d, make_classification_tensor({probs})));
    else
      CHECK_THROWS_AS(validate(d, make_classification_tensor({probs})), SimplexViolation);
  }
}

TEST_CASE("validate rejects negative probabilities even when the row sums to one") {
  Dataset d = tiny_regression_data(1);
  d.targets = Eigen::VectorXd::Zero(1);
  Eigen::MatrixXd probs(1, 3);
  probs << -0.2, 0.6, 0.6;
  CHECK_THROWS_AS(validate(d, make_classification_tensor({probs})), SimplexViolation);
}

TEST_CASE("validate requires integer class targets in range") {
  Dataset d = tiny_regression_data();
  Eigen::MatrixXd probs(4, 2);
  probs << 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5;

  d.targets = Eigen::VectorXd::Zero(4);
  d.targets(2) = 1.5;
  CHECK_THROWS_AS(validate(d, make_classification_tensor({probs})), ValidationError);

  d.targets(2) = 2.0;  // == n_classes
  CHECK_THROWS_AS(validate(d, make_classification_tensor({probs})), ValidationError);

  d.targets(2) = -1.0;
  CHECK_THROWS_AS(validate(d, make_classification_tensor({probs})), ValidationError);

  d.targets(2) = 1.0;
  CHECK_NOTHROW(validate(d, make_classification_tensor({probs})));
}

TEST_CASE("validate rejects models with inconsistent class counts") {
  Dataset d = tiny_regression_data(2);
  d.targets = Eigen::VectorXd::Zero(2);
  Eigen::MatrixXd two(2, 2), three(2, 3);
  two << 0.5, 0.5, 0.5, 0.5;
  three << 0.2, 0.3, 0.5, 0.2, 0.3, 0.5;
  CHECK_THROWS_AS(validate(d, make_classification_tensor({two, three})), DimensionMismatch);
}

TEST_CASE("tensor factories invent model names when none are given") {
  const PredictionTensor reg = make_regression_tensor(Eigen::MatrixXd::Zero(3, 2));
  CHECK(reg.model_names == std::vector<std::string>{"model0", "model1"});
  const PredictionTensor cls = tiny_class_tensor(3);
  CHECK(cls.model_names == std::vector<std::string>{"model0"});
  CHECK(cls.n_classes() == 2);
}

TEST_CASE("take_rows selects rows in index order, repeats allowed") {
  Eigen::MatrixXd m(3, 2);
  m << 1, 2, 3, 4, 5, 6;
  const Eigen::MatrixXd picked = take_rows(m, {2, 0, 2});
  CHECK(picked.rows() == 3);
  CHECK(picked(0, 0) == 5);
  CHECK(picked(1, 1) == 2);
  CHECK(picked(2, 0) == 5);

  Eigen::VectorXd v(3);
  v << 10, 20, 30;
  const Eigen::VectorXd pv = take_rows(v, {1, 1, 0});
  CHECK(pv(0) == 20);
  CHECK(pv(1) == 20);
  CHECK(pv(2) == 10);
}

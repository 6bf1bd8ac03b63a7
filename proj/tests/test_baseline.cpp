#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "op2t/baseline.hpp"

using namespace op2t;

namespace {

ValidatedBundle regression_bundle(const Eigen::MatrixXd& preds, const Eigen::VectorXd& y) {
  Dataset d;
  d.features = Eigen::MatrixXd::Zero(y.size(), 1);
  d.features.col(0) = Eigen::VectorXd::LinSpaced(y.size(), 0.0, 1.0);
  d.targets = y;
  return validate(d, make_regression_tensor(preds));
}

ValidatedBundle classification_bundle(const std::vector<Eigen::MatrixXd>& probs,
                                      const Eigen::VectorXd& y) {
  Dataset d;
  d.features = Eigen::MatrixXd::Zero(y.size(), 1);
  d.targets = y;
  return validate(d, make_classification_tensor(probs));
}

MetaLabels manual_labels(std::vector<int> labels, int n_classes) {
  MetaLabels m;
  m.labels = std::move(labels);
  m.n_label_classes = n_classes;
  for (int c = 0; c < n_classes; ++c) m.class_names.push_back("class" + std::to_string(c));
  return m;
}

}  // namespace

TEST_CASE("regression meta labels take the closest model, ties to the lowest index") {
  Eigen::MatrixXd preds(2, 2);
  preds << 2.1, 1.5, 4.0, 6.0;
  const Eigen::VectorXd y = Eigen::Vector2d(2.0, 5.0);
  const ValidatedBundle b = regression_bundle(preds, y);

  const MetaLabels m = meta_labels(b, model_actions(2));
  CHECK(m.labels == std::vector<int>{0, 0});  // row 1 is a |err|=1 tie
  CHECK(m.n_label_classes == 2);
  CHECK(m.class_names == std::vector<std::string>{"model0", "model1"});

  ActionSet acts = model_actions(2);
  add_ensemble(acts, Eigen::Vector2d(0.5, 0.5), "mean");
  const MetaLabels with_mean = meta_labels(b, acts);
  CHECK(with_mean.labels == std::vector<int>{0, 2});  // blend hits y=5 exactly
  CHECK(with_mean.class_names.back() == "mean");
}

TEST_CASE("regression rejection labeling flags rows whose best squared error exceeds alpha") {
  Eigen::MatrixXd preds(2, 2);
  preds << 0.1, 3.0, 9.0, 12.0;
  const Eigen::VectorXd y = Eigen::Vector2d(0.0, 10.0);
  const ValidatedBundle b = regression_bundle(preds, y);

  const MetaLabels m =
      meta_labels(b, model_actions(2), RejectionSpec::regression(0.5));
  CHECK(m.labels == std::vector<int>{0, 2});  // (10-9)^2 = 1 > 0.5
  CHECK(m.n_label_classes == 3);
  CHECK(m.class_names == std::vector<std::string>{"model0", "model1", "reject"});

  CHECK_THROWS_AS(
      meta_labels(b, model_actions(2), RejectionSpec::classification_uniform(0.2, 2)),
      KindMismatch);
}

TEST_CASE("classification meta labels rank by correctness first, then confidence") {
  Eigen::MatrixXd m0(4, 2), m1(4, 2);
  // y:        0            1            1            0
  m0.row(0) << 0.6, 0.4;    // correct, p=0.6
  m1.row(0) << 0.9, 0.1;    // correct, p=0.9 -> wins on confidence
  m0.row(1) << 0.4, 0.6;    // correct
  m1.row(1) << 0.8, 0.2;    // wrong  -> correctness dominates confidence
  m0.row(2) << 0.7, 0.3;    // wrong
  m1.row(2) << 0.9, 0.1;    // wrong, even less confident in the truth
  m0.row(3) << 0.3, 0.7;    // wrong
  m1.row(3) << 0.2, 0.8;    // wrong
  Eigen::VectorXd y(4);
  y << 0, 1, 1, 0;
  const ValidatedBundle b = classification_bundle({m0, m1}, y);

  const MetaLabels m = meta_labels(b, model_actions(2));
  CHECK(m.labels == std::vector<int>{1, 0, 0, 0});  // last two tie-break by CE then index

  // Rejection labeling: only rows where every model is wrong get the label.
  const MetaLabels r =
      meta_labels(b, model_actions(2), RejectionSpec::classification_uniform(0.3, 2));
  CHECK(r.labels == std::vector<int>{1, 0, 2, 2});
  CHECK(r.class_names == std::vector<std::string>{"model0", "model1", "reject"});
}

TEST_CASE("identical models give the lowest-index label everywhere") {
  Eigen::MatrixXd p(3, 2);
  p << 0.6, 0.4, 0.2, 0.8, 0.5, 0.5;
  Eigen::VectorXd y(3);
  y << 0, 1, 0;
  const ValidatedBundle b = classification_bundle({p, p, p}, y);
  const MetaLabels m = meta_labels(b, model_actions(3));
  CHECK(m.labels == std::vector<int>{0, 0, 0});
}

TEST_CASE("meta tree splits cleanly separable labels at the midpoint") {
  Eigen::MatrixXd x(6, 1);
  x << 0, 1, 2, 3, 4, 5;
  const MetaLabels labels = manual_labels({0, 0, 0, 1, 1, 1}, 2);
  FitConfig config;
  const ClassTree tree = fit_meta_tree(x, labels, config, {"x"});

  CHECK(tree.tree.num_splits() == 1);
  CHECK(tree.tree.nodes[tree.tree.root].threshold == doctest::Approx(2.5));
  CHECK(predict_class_all(tree, x) == labels.labels);
  CHECK(tree.n_classes == 2);
  CHECK(tree.feature_names == std::vector<std::string>{"x"});
}

TEST_CASE("meta tree leaves fall back to the majority label, ties to the lowest") {
  Eigen::MatrixXd x(4, 1);
  x << 0, 1, 2, 3;
  FitConfig config;
  config.max_depth = 0;
  const ClassTree even = fit_meta_tree(x, manual_labels({1, 1, 0, 0}, 2), config);
  Eigen::RowVectorXd row(1);
  row << 2.0;
  CHECK(predict_class(even, row) == 0);  // 2-2 tie

  const ClassTree skewed = fit_meta_tree(x, manual_labels({1, 1, 1, 0}, 2), config);
  CHECK(predict_class(skewed, row) == 1);
}

TEST_CASE("meta tree stops when no split strictly lowers impurity") {
  Eigen::MatrixXd x(4, 1);
  x << 0, 1, 2, 3;
  const MetaLabels pure = manual_labels({1, 1, 1, 1}, 2);
  FitConfig config;
  const ClassTree tree = fit_meta_tree(x, pure, config);
  CHECK(tree.tree.num_splits() == 0);
  Eigen::RowVectorXd row(1);
  row << 1.5;
  CHECK(predict_class(tree, row) == 1);
}

TEST_CASE("meta tree recovers random axis-aligned labelings exactly") {
  std::mt19937_64 gen(8080);
  std::uniform_int_distribution<int> n_dist(8, 60);
  std::uniform_int_distribution<int> d_dist(1, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int rep = 0; rep < 110; ++rep) {
    const int n = n_dist(gen), d = d_dist(gen);
    Eigen::MatrixXd x(n, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) x(i, j) = unit(gen);
    const int f = static_cast<int>(gen() % static_cast<unsigned>(d));
    const double t = unit(gen);
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = x(i, f) > t ? 1 : 0;

    FitConfig config;
    config.max_depth = 2;
    const ClassTree tree = fit_meta_tree(x, manual_labels(labels, 2), config);
    CHECK(metric_accuracy(labels, predict_class_all(tree, x)) == 1.0);
  }
}

TEST_CASE("meta tree fitting validates its inputs") {
  Eigen::MatrixXd x(3, 1);
  x << 0, 1, 2;
  FitConfig config;
  CHECK_THROWS_AS(fit_meta_tree(x, manual_labels({0, 1}, 2), config), DimensionMismatch);
  CHECK_THROWS_AS(fit_meta_tree(x, manual_labels({0, 1, 5}, 2), config), ValidationError);
  config.min_leaf = 4;
  CHECK_THROWS_AS(fit_meta_tree(x, manual_labels({0, 1, 1}, 2), config), TooFewSamples);
}

TEST_CASE("class tree JSON round-trips and rejects prescription-tree leaves") {
  Eigen::MatrixXd x(6, 1);
  x << 0, 1, 2, 3, 4, 5;
  const MetaLabels labels = manual_labels({0, 0, 1, 1, 2, 2}, 3);
  FitConfig config;
  config.max_depth = 2;
  const ClassTree tree = fit_meta_tree(x, labels, config, {"score"});

  const std::string text = class_tree_to_json(tree);
  const ClassTree back = class_tree_from_json(text);
  CHECK(same_structure(tree.tree, back.tree));
  CHECK(back.class_names == tree.class_names);
  CHECK(back.feature_names == tree.feature_names);
  CHECK(predict_class_all(back, x) == predict_class_all(tree, x));

  try {
    class_tree_from_json("{\"action_names\":[\"a\"],\"feature_names\":[\"x\"],\"root\":0,"
                         "\"nodes\":[{\"id\":0,\"leaf\":{\"action\":0}}]}");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.field == "class");
  }

  const std::string dot = class_tree_to_dot(tree);
  CHECK(dot.find("digraph") != std::string::npos);
  CHECK(dot.find("score") != std::string::npos);
  std::size_t edges = 0;
  for (std::size_t pos = dot.find("->"); pos != std::string::npos;
       pos = dot.find("->", pos + 2))
    ++edges;
  CHECK(edges == 2 * static_cast<std::size_t>(tree.tree.num_splits()));
}

TEST_CASE("mse, accuracy, and their input validation") {
  Eigen::VectorXd truth(3), pred(3);
  truth << 1, 2, 3;
  pred << 1, 2, 5;
  CHECK(metric_mse(truth, pred) == doctest::Approx(4.0 / 3.0));
  CHECK_THROWS_AS(metric_mse(truth, Eigen::Vector2d(1, 2)), DimensionMismatch);
  CHECK_THROWS_AS(metric_mse(Eigen::VectorXd(), Eigen::VectorXd()), ValidationError);

  CHECK(metric_accuracy({0, 1, 1, 0}, {0, 1, 0, 0}) == doctest::Approx(0.75));
  CHECK_THROWS_AS(metric_accuracy({0, 1}, {0}), DimensionMismatch);
  CHECK_THROWS_AS(metric_accuracy({}, {}), ValidationError);
}

TEST_CASE("auc matches the textbook example and handles ties and degeneracy") {
  Eigen::VectorXd scores(4);
  scores << 0.1, 0.4, 0.35, 0.8;
  CHECK(metric_auc({0, 0, 1, 1}, scores) == doctest::Approx(0.75));

  Eigen::VectorXd tied(2);
  tied << 0.5, 0.5;
  CHECK(metric_auc({0, 1}, tied) == doctest::Approx(0.5));

  CHECK_THROWS_AS(metric_auc({1, 1}, tied), DegenerateAuc);
  CHECK_THROWS_AS(metric_auc({0, 2}, tied), ValidationError);
  CHECK_THROWS_AS(metric_auc({0}, tied), DimensionMismatch);
}

TEST_CASE("auc equals the pairwise win rate on random instances") {
  std::mt19937_64 gen(6174);
  std::uniform_int_distribution<int> n_dist(2, 50);
  std::uniform_int_distribution<int> level(0, 9);
  for (int rep = 0; rep < 110; ++rep) {
    const int n = n_dist(gen);
    std::vector<int> truth(static_cast<std::size_t>(n));
    Eigen::VectorXd scores(n);
    int pos = 0;
    for (int i = 0; i < n; ++i) {
      truth[static_cast<std::size_t>(i)] = static_cast<int>(gen() % 2);
      pos += truth[static_cast<std::size_t>(i)];
      scores(i) = 0.1 * level(gen);  // coarse levels force plenty of ties
    }
    if (pos == 0 || pos == n) {
      CHECK_THROWS_AS(metric_auc(truth, scores), DegenerateAuc);
      continue;
    }
    double wins = 0.0;
    for (int i = 0; i < n; ++i) {
      if (truth[static_cast<std::size_t>(i)] != 1) continue;
      for (int j = 0; j < n; ++j) {
        if (truth[static_cast<std::size_t>(j)] != 0) continue;
        if (scores(i) > scores(j))
          wins += 1.0;
        else if (scores(i) == scores(j))
          wins += 0.5;
      }
    }
    const double oracle = wins / (static_cast<double>(pos) * (n - pos));
    CHECK(metric_auc(truth, scores) == doctest::Approx(oracle).epsilon(1e-12));
  }
}

TEST_CASE("prescription trees beat label-majority routing on the stripe harness") {
  // Every third row pays well under action 1; the rest pay a pittance under
  // action 0. Best-action labels are then a 2:1 majority for action 0 in
  // every window of at least ten rows, so a label tree routes everything to
  // action 0 while reward-aware fitting routes everything to action 1.
  const int n = 90;
  Eigen::MatrixXd x(n, 1);
  RewardMatrix rewards;
  rewards.values = Eigen::MatrixXd::Zero(n, 2);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = (i + 0.5) / n;
    if (i % 3 == 2) {
      rewards.values(i, 1) = 1.0;
      labels[static_cast<std::size_t>(i)] = 1;
    } else {
      rewards.values(i, 0) = 0.01;
      labels[static_cast<std::size_t>(i)] = 0;
    }
  }
  rewards.actions = model_actions(2);

  FitConfig config;
  config.min_leaf = 10;
  const PolicyTree policy = fit_policy_tree(rewards, x, config);
  const EvalSummary s = evaluate_policy(policy, rewards, x);
  CHECK(s.total_reward == doctest::Approx(30.0));
  CHECK(s.action_counts[1] == n);

  const ClassTree meta = fit_meta_tree(x, manual_labels(labels, 2), config);
  const std::vector<int> routed = predict_class_all(meta, x);
  double meta_total = 0.0;
  for (int i = 0; i < n; ++i) meta_total += rewards.values(i, routed[static_cast<std::size_t>(i)]);
  CHECK(meta_total == doctest::Approx(0.6));
  CHECK(s.total_reward - meta_total > 29.0);
}

#include "op2t/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

namespace op2t {

namespace {

constexpr double kProbClamp = 1e-12;

double clamped_log(double p) {
  return std::log(std::clamp(p, kProbClamp, 1.0 - kProbClamp));
}

}  // namespace

MetaLabels meta_labels(const ValidatedBundle& bundle, const ActionSet& actions,
                       const std::optional<RejectionSpec>& rejection_labeling,
                       double binary_threshold) {
  check_actions(actions, bundle.preds.kind, bundle.preds.n_models());
  if (rejection_labeling && rejection_labeling->kind != bundle.preds.kind)
    throw KindMismatch("rejection labeling parameters are for the wrong task kind");

  const Eigen::Index n = bundle.n();
  const int m = actions.non_rejection();
  MetaLabels out;
  out.labels.resize(static_cast<std::size_t>(n));
  for (int a = 0; a < m; ++a) out.class_names.push_back(actions.names[static_cast<std::size_t>(a)]);
  out.n_label_classes = m;
  const int reject_label = m;
  if (rejection_labeling) {
    out.class_names.push_back("reject");
    out.n_label_classes = m + 1;
  }

  if (bundle.preds.kind == TaskKind::regression) {
    Eigen::MatrixXd blended(n, m);
    for (int a = 0; a < m; ++a)
      blended.col(a) = bundle.preds.scalar_preds * actions.weights.row(a).transpose();
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_err = std::abs(blended(i, 0) - bundle.data.targets(i));
      for (int a = 1; a < m; ++a) {
        const double err = std::abs(blended(i, a) - bundle.data.targets(i));
        if (err < best_err) {
          best_err = err;
          best = a;
        }
      }
      if (rejection_labeling && best_err * best_err > rejection_labeling->alpha(0))
        out.labels[static_cast<std::size_t>(i)] = reject_label;
      else
        out.labels[static_cast<std::size_t>(i)] = best;
    }
    return out;
  }

  // Classification: rank actions by correctness first, log-probability of
  // the true class second.
  std::vector<Eigen::MatrixXd> blended;
  for (int a = 0; a < m; ++a)
    blended.push_back(blend_probs(bundle.preds, actions.weights.row(a).transpose()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = static_cast<int>(bundle.data.targets(i));
    int best = 0;
    double best_mis =
        predict_class(Eigen::RowVectorXd(blended[0].row(i)), binary_threshold) == y ? 1.0 : 0.0;
    double best_ce = clamped_log(blended[0](i, y));
    for (int a = 1; a < m; ++a) {
      const double mis =
          predict_class(Eigen::RowVectorXd(blended[static_cast<std::size_t>(a)].row(i)),
                        binary_threshold) == y
              ? 1.0
              : 0.0;
      const double ce = clamped_log(blended[static_cast<std::size_t>(a)](i, y));
      if (mis > best_mis || (mis == best_mis && ce > best_ce)) {
        best = a;
        best_mis = mis;
        best_ce = ce;
      }
    }
    if (rejection_labeling) {
      const double alpha = rejection_labeling->alpha(y);
      const double rej_mis = 1.0 - alpha;
      const double rej_ce = clamped_log(1.0 - alpha);
      if (rej_mis > best_mis || (rej_mis == best_mis && rej_ce > best_ce)) {
        out.labels[static_cast<std::size_t>(i)] = reject_label;
        continue;
      }
    }
    out.labels[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Greedy CART.

namespace {

struct CartContext {
  const Eigen::MatrixXd& X;
  const std::vector<int>& y;
  int n_classes;
  int max_depth;
  int min_leaf;
};

double gini(const std::vector<int>& counts, int total) {
  if (total == 0) return 0.0;
  double sum_sq = 0.0;
  for (int c : counts) {
    const double p = static_cast<double>(c) / total;
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

int majority(const std::vector<int>& counts) {
  int best = 0;
  for (std::size_t c = 1; c < counts.size(); ++c)
    if (counts[c] > counts[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
  return best;
}

int cart_grow(TreeSkeleton& t, const std::vector<int>& rows, int depth,
              const CartContext& ctx) {
  std::vector<int> counts(static_cast<std::size_t>(ctx.n_classes), 0);
  for (int r : rows) ++counts[static_cast<std::size_t>(ctx.y[static_cast<std::size_t>(r)])];
  const int nv = static_cast<int>(rows.size());
  const double node_gini = gini(counts, nv);

  TreeNode leaf;
  leaf.is_leaf = true;
  leaf.action = majority(counts);
  t.nodes.push_back(leaf);
  const int id = static_cast<int>(t.nodes.size()) - 1;
  if (depth >= ctx.max_depth || nv < 2 * ctx.min_leaf || node_gini <= 0.0) return id;

  double best_weighted = node_gini;
  int best_feature = -1;
  double best_threshold = 0.0;
  std::vector<int> left_counts(static_cast<std::size_t>(ctx.n_classes));
  for (int f = 0; f < ctx.X.cols(); ++f) {
    std::vector<int> order = rows;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (ctx.X(a, f) != ctx.X(b, f)) return ctx.X(a, f) < ctx.X(b, f);
      return a < b;
    });
    std::fill(left_counts.begin(), left_counts.end(), 0);
    for (int i = 1; i < nv; ++i) {
      ++left_counts[static_cast<std::size_t>(
          ctx.y[static_cast<std::size_t>(order[static_cast<std::size_t>(i - 1)])])];
      const double lo = ctx.X(order[static_cast<std::size_t>(i - 1)], f);
      const double hi = ctx.X(order[static_cast<std::size_t>(i)], f);
      if (!(lo < hi)) continue;
      if (i < ctx.min_leaf || nv - i < ctx.min_leaf) continue;
      double left_gini_sum = 0.0, right_gini_sum = 0.0;
      for (int c = 0; c < ctx.n_classes; ++c) {
        const double lc = left_counts[static_cast<std::size_t>(c)];
        const double rc = counts[static_cast<std::size_t>(c)] - lc;
        left_gini_sum += lc * lc;
        right_gini_sum += rc * rc;
      }
      const double gl = 1.0 - left_gini_sum / (static_cast<double>(i) * i);
      const double gr =
          1.0 - right_gini_sum / (static_cast<double>(nv - i) * (nv - i));
      const double weighted = (i * gl + (nv - i) * gr) / nv;
      if (weighted < best_weighted - 1e-12) {
        best_weighted = weighted;
        best_feature = f;
        best_threshold = lo + 0.5 * (hi - lo);
      }
    }
  }
  if (best_feature < 0) return id;

  std::vector<int> lrows, rrows;
  for (int r : rows)
    (ctx.X(r, best_feature) < best_threshold ? lrows : rrows).push_back(r);
  const int l = cart_grow(t, lrows, depth + 1, ctx);
  const int r = cart_grow(t, rrows, depth + 1, ctx);
  TreeNode& nd = t.nodes[static_cast<std::size_t>(id)];
  nd.is_leaf = false;
  nd.feature = best_feature;
  nd.threshold = best_threshold;
  nd.left = l;
  nd.right = r;
  return id;
}

std::vector<std::string> default_names(Eigen::Index d) {
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < d; ++j) names.push_back("f" + std::to_string(j));
  return names;
}

}  // namespace

ClassTree fit_meta_tree(const Eigen::MatrixXd& features, const MetaLabels& labels,
                        const FitConfig& config, std::vector<std::string> feature_names) {
  if (static_cast<Eigen::Index>(labels.labels.size()) != features.rows())
    throw DimensionMismatch("label count does not match feature rows");
  if (labels.n_label_classes < 1) throw ValidationError("labels need at least one class");
  if (features.rows() < 1) throw TooFewSamples("cannot fit a tree on no rows");
  if (config.min_leaf < 1) throw ValidationError("min_leaf must be at least 1");
  if (config.max_depth < 0) throw ValidationError("max_depth must be non-negative");
  if (features.rows() < config.min_leaf)
    throw TooFewSamples("need at least min_leaf rows to fit");
  if (!features.allFinite()) throw NonFinite(-1, -1, "features contain non-finite values");
  for (int label : labels.labels)
    if (label < 0 || label >= labels.n_label_classes)
      throw ValidationError("label " + std::to_string(label) + " is out of range");

  ClassTree out;
  out.n_classes = labels.n_label_classes;
  out.class_names = labels.class_names;
  if (out.class_names.empty())
    for (int c = 0; c < out.n_classes; ++c) out.class_names.push_back("class" + std::to_string(c));
  out.feature_names =
      feature_names.empty() ? default_names(features.cols()) : std::move(feature_names);

  std::vector<int> rows(static_cast<std::size_t>(features.rows()));
  std::iota(rows.begin(), rows.end(), 0);
  CartContext ctx{features, labels.labels, out.n_classes, config.max_depth, config.min_leaf};
  out.tree.root = cart_grow(out.tree, rows, 0, ctx);
  return out;
}

int predict_class(const ClassTree& tree, const Eigen::RowVectorXd& row) {
  const int leaf = tree.tree.route(row);
  return tree.tree.nodes[static_cast<std::size_t>(leaf)].action;
}

std::vector<int> predict_class_all(const ClassTree& tree, const Eigen::MatrixXd& features) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index i = 0; i < features.rows(); ++i)
    out.push_back(predict_class(tree, features.row(i)));
  return out;
}

// ---------------------------------------------------------------------------
// Serialization: identical layout to the policy tree format, with leaves
// carrying {"class": int}.

std::string class_tree_to_json(const ClassTree& tree) {
  nlohmann::json j;
  j["action_names"] = tree.class_names;
  j["feature_names"] = tree.feature_names;
  j["root"] = tree.tree.root;
  nlohmann::json nodes = nlohmann::json::array();
  for (std::size_t id = 0; id < tree.tree.nodes.size(); ++id) {
    const TreeNode& nd = tree.tree.nodes[id];
    nlohmann::json entry;
    entry["id"] = id;
    if (nd.is_leaf) {
      entry["leaf"] = {{"class", nd.action}};
    } else {
      entry["split"] = {{"feature", nd.feature},
                        {"threshold", nd.threshold},
                        {"left", nd.left},
                        {"right", nd.right}};
    }
    nodes.push_back(std::move(entry));
  }
  j["nodes"] = std::move(nodes);
  return j.dump(2) + "\n";
}

ClassTree class_tree_from_json(const std::string& text) {
  // Reuse the policy-tree reader by renaming the leaf payload key, then
  // reinterpret the action names as class names.
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("json", std::string("invalid JSON: ") + e.what());
  }
  if (j.contains("nodes") && j.at("nodes").is_array()) {
    for (nlohmann::json& entry : j.at("nodes")) {
      if (entry.is_object() && entry.contains("leaf") && entry.at("leaf").is_object()) {
        nlohmann::json& leaf = entry.at("leaf");
        if (!leaf.contains("class"))
          throw ParseError("class", "class tree leaves need an integer 'class'");
        leaf["action"] = leaf.at("class");
        leaf.erase("class");
      }
    }
  }
  const PolicyTree as_policy = tree_from_json(j.dump());
  ClassTree out;
  out.tree = as_policy.tree;
  out.class_names = as_policy.actions.names;
  out.n_classes = static_cast<int>(out.class_names.size());
  out.feature_names = as_policy.feature_names;
  return out;
}

std::string class_tree_to_dot(const ClassTree& tree) {
  PolicyTree as_policy;
  as_policy.tree = tree.tree;
  as_policy.actions.names = tree.class_names;
  as_policy.feature_names = tree.feature_names;
  return tree_to_dot(as_policy);
}

// ---------------------------------------------------------------------------
// Metrics.

double metric_mse(const Eigen::VectorXd& truth, const Eigen::VectorXd& predicted) {
  if (truth.size() != predicted.size())
    throw DimensionMismatch("mse inputs differ in length");
  if (truth.size() == 0) throw ValidationError("mse of an empty vector is undefined");
  return (truth - predicted).squaredNorm() / static_cast<double>(truth.size());
}

double metric_accuracy(const std::vector<int>& truth, const std::vector<int>& predicted) {
  if (truth.size() != predicted.size())
    throw DimensionMismatch("accuracy inputs differ in length");
  if (truth.empty()) throw ValidationError("accuracy of an empty vector is undefined");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (truth[i] == predicted[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double metric_auc(const std::vector<int>& truth, const Eigen::VectorXd& scores) {
  if (static_cast<Eigen::Index>(truth.size()) != scores.size())
    throw DimensionMismatch("auc inputs differ in length");
  const std::size_t n = truth.size();
  std::size_t n_pos = 0;
  for (int y : truth) {
    if (y != 0 && y != 1) throw ValidationError("auc labels must be 0 or 1");
    n_pos += static_cast<std::size_t>(y);
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw DegenerateAuc("auc is undefined when only one class is present");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores(static_cast<Eigen::Index>(a)) != scores(static_cast<Eigen::Index>(b)))
      return scores(static_cast<Eigen::Index>(a)) < scores(static_cast<Eigen::Index>(b));
    return a < b;
  });

  // Rank sum of positives with average ranks over tied score groups.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores(static_cast<Eigen::Index>(order[j + 1])) ==
                            scores(static_cast<Eigen::Index>(order[i])))
      ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k)
      if (truth[order[k]] == 1) rank_sum_pos += avg_rank;
    i = j + 1;
  }
  const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) *
                                      (static_cast<double>(n_pos) + 1.0);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

}  // namespace op2t

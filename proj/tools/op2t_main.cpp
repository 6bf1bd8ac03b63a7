// op2t: pipeline CLI for prescription trees over reward matrices.
// One artifact per subcommand; every run is deterministic given --seed.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "op2t/baseline.hpp"
#include "op2t/csv.hpp"
#include "op2t/reject_intervals.hpp"
#include "op2t/synth.hpp"
#include "op2t/tree.hpp"

namespace {

using namespace op2t;

std::vector<double> parse_double_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string cell =
        comma == std::string::npos ? text.substr(start) : text.substr(start, comma - start);
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw ParseError(flag, flag + ": cannot parse '" + cell + "' as a number");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

TaskKind task_of(RewardKind kind) {
  return kind == RewardKind::squared_error ? TaskKind::regression : TaskKind::classification;
}

Sense sense_of(RewardKind kind) {
  return kind == RewardKind::squared_error ? Sense::minimize : Sense::maximize;
}

RewardKind parse_reward_kind(const std::string& text) {
  if (text == "ce") return RewardKind::cross_entropy;
  if (text == "mis") return RewardKind::misclassification;
  if (text == "se") return RewardKind::squared_error;
  throw CLI::ValidationError("--reward", "must be one of ce, mis, se");
}

// --task is redundant next to self-describing inputs; when given it must agree.
void check_task_flag(const std::string& task, Sense sense, const std::string& context) {
  if (task.empty()) return;
  const Sense want = task == "max" ? Sense::maximize : Sense::minimize;
  if (want != sense)
    throw CLI::ValidationError("--task", "--task " + task + " contradicts " + context);
}

std::optional<RejectionSpec> make_rejection(const std::string& alpha_text, TaskKind kind,
                                            Eigen::Index n_classes) {
  if (alpha_text.empty()) return std::nullopt;
  const std::vector<double> alphas = parse_double_list(alpha_text, "--reject-alpha");
  if (kind == TaskKind::regression) {
    if (alphas.size() != 1)
      throw CLI::ValidationError("--reject-alpha", "regression takes a single rejection value");
    return RejectionSpec::regression(alphas[0]);
  }
  if (alphas.size() == 1) return RejectionSpec::classification_uniform(alphas[0], n_classes);
  Eigen::VectorXd per_class(static_cast<Eigen::Index>(alphas.size()));
  for (std::size_t i = 0; i < alphas.size(); ++i)
    per_class(static_cast<Eigen::Index>(i)) = alphas[i];
  return RejectionSpec::classification(per_class);
}

ActionSet actions_with_ensembles(const PredictionTensor& preds,
                                 const std::string& ensembles_path) {
  ActionSet actions = model_actions(preds.model_names);
  if (ensembles_path.empty()) return actions;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(ensembles_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(ensembles_path, "invalid ensemble JSON: " + std::string(e.what()));
  }
  if (!j.is_array())
    throw ParseError(ensembles_path, "ensemble file must be a JSON list of weight vectors");
  int idx = 0;
  for (const nlohmann::json& entry : j) {
    if (!entry.is_array() ||
        entry.size() != static_cast<std::size_t>(preds.n_models()))
      throw ParseError(ensembles_path, "each ensemble needs one weight per model (" +
                                           std::to_string(preds.n_models()) + ")");
    Eigen::VectorXd w(preds.n_models());
    for (Eigen::Index m = 0; m < preds.n_models(); ++m) {
      const nlohmann::json& cell = entry.at(static_cast<std::size_t>(m));
      if (!cell.is_number())
        throw ParseError(ensembles_path, "ensemble weights must be numbers");
      w(m) = cell.get<double>();
    }
    add_ensemble(actions, w, "ensemble" + std::to_string(idx++));
  }
  return actions;
}

ValidatedBundle load_bundle(const std::string& data_path, const std::string& preds_path,
                            const std::string& target_col, TaskKind kind) {
  Dataset data = dataset_from_table(read_csv_file(data_path), target_col);
  PredictionTensor preds = predictions_from_table(read_csv_file(preds_path), kind);
  return validate(std::move(data), std::move(preds));
}

// Columns named by the tree, in tree order, pulled out of an arbitrary table.
Eigen::MatrixXd select_features(const Table& table, const std::vector<std::string>& names) {
  Eigen::MatrixXd out(table.values.rows(), static_cast<Eigen::Index>(names.size()));
  for (std::size_t f = 0; f < names.size(); ++f) {
    const auto it = std::find(table.columns.begin(), table.columns.end(), names[f]);
    if (it == table.columns.end())
      throw ParseError(names[f], "feature column '" + names[f] + "' not found in the data");
    out.col(static_cast<Eigen::Index>(f)) = table.values.col(it - table.columns.begin());
  }
  return out;
}

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty())
    std::cout << text;
  else
    write_text_file(out_path, text);
}

nlohmann::json summary_json(const EvalSummary& s, const PolicyTree& tree) {
  nlohmann::json counts = nlohmann::json::object();
  for (std::size_t a = 0; a < tree.actions.names.size(); ++a)
    counts[tree.actions.names[a]] = s.action_counts[a];
  return nlohmann::json{{"total_reward", s.total_reward},
                        {"mean_reward", s.mean_reward},
                        {"reject_fraction", s.reject_fraction},
                        {"action_counts", counts},
                        {"splits", tree.tree.num_splits()},
                        {"depth", tree.tree.depth()}};
}

// "out.csv" -> "out_preds.csv" / "out_split.csv".
std::string derived_path(const std::string& base, const std::string& tag) {
  const std::size_t slash = base.find_last_of('/');
  const std::size_t dot = base.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return base + tag;
  return base.substr(0, dot) + tag + base.substr(dot);
}

struct Args {
  std::string data, preds, scores, tree, val, ensembles, out;
  std::string target_col = "target";
  std::string task, reward, lambda = "0", reject_alpha, beta, format = "json";
  std::string alpha;  // synth gaussian rejection list / interval min accuracy
  int depth = 3, min_leaf = 1, restarts = 8, folds = 0, quantiles = 0, grid = 0;
  long long n = 500;
  std::uint64_t seed = 0;
  double lo = 0.0, hi = 12.0, mean1 = 4.0, mean2 = 8.0, offset1 = 0.0, offset2 = 0.0;
  double max_fnr = -1.0, max_fpr = -1.0;
};

FitConfig fit_config(const Args& a) {
  FitConfig c;
  c.max_depth = a.depth;
  c.min_leaf = a.min_leaf;
  if (a.lambda == "auto") {
    c.complexity_penalty.reset();
  } else {
    try {
      std::size_t used = 0;
      c.complexity_penalty = std::stod(a.lambda, &used);
      if (used != a.lambda.size()) throw std::invalid_argument(a.lambda);
    } catch (const std::exception&) {
      throw CLI::ValidationError("--lambda", "must be a number or 'auto'");
    }
  }
  c.restarts = a.restarts;
  c.quantiles = a.quantiles;
  c.seed = a.seed;
  return c;
}

int cmd_rewards(const Args& a) {
  const RewardKind kind = parse_reward_kind(a.reward);
  check_task_flag(a.task, sense_of(kind), "--reward " + a.reward);
  const ValidatedBundle bundle = load_bundle(a.data, a.preds, a.target_col, task_of(kind));
  ActionSet actions = actions_with_ensembles(bundle.preds, a.ensembles);
  const auto rejection = make_rejection(a.reject_alpha, task_of(kind), bundle.preds.n_classes());
  if (rejection) add_rejection(actions);
  const RewardMatrix rewards =
      kind == RewardKind::squared_error
          ? build_regression_rewards(bundle, actions, rejection)
          : build_classification_rewards(bundle, actions, kind, rejection);
  write_csv_file(a.out, rewards_to_table(bundle.data.features, bundle.data.feature_names, rewards));
  return 0;
}

int cmd_train(const Args& a) {
  const RewardFile file = rewards_from_table(read_csv_file(a.data));
  check_task_flag(a.task, file.rewards.sense, "the reward file's sense");
  PolicyTree tree;
  if (a.folds >= 2) {
    GridSpec spec;
    spec.depths.clear();
    for (int d = 1; d <= a.depth; ++d) spec.depths.push_back(d);
    spec.min_leafs = {a.min_leaf};
    spec.folds = a.folds;
    spec.restarts = a.restarts;
    spec.quantiles = a.quantiles;
    spec.seed = a.seed;
    tree = grid_search(file.rewards, file.features, spec, file.feature_names).tree;
  } else {
    tree = fit_policy_tree(file.rewards, file.features, fit_config(a), file.feature_names);
  }
  emit(a.out, a.format == "dot" ? tree_to_dot(tree) : tree_to_json(tree));
  return 0;
}

int cmd_predict(const Args& a) {
  const PolicyTree tree = tree_from_json(read_text_file(a.tree));
  const Table table = read_csv_file(a.data);
  const Eigen::MatrixXd features = select_features(table, tree.feature_names);
  const std::vector<int> actions = prescribe_all(tree, features);
  std::string text = "action,action_name\n";
  for (const int action : actions) {
    text += std::to_string(action);
    text += ',';
    text += tree.actions.names[static_cast<std::size_t>(action)];
    text += '\n';
  }
  emit(a.out, text);
  return 0;
}

int cmd_eval(const Args& a) {
  const PolicyTree tree = tree_from_json(read_text_file(a.tree));
  const RewardFile file = rewards_from_table(read_csv_file(a.data));
  check_task_flag(a.task, file.rewards.sense, "the reward file's sense");
  const Eigen::MatrixXd features =
      select_features(read_csv_file(a.data), tree.feature_names);
  const EvalSummary s = evaluate_policy(tree, file.rewards, features);
  emit(a.out, summary_json(s, tree).dump(2) + "\n");
  return 0;
}

int cmd_prune(const Args& a) {
  const PolicyTree tree = tree_from_json(read_text_file(a.tree));
  const RewardFile train = rewards_from_table(read_csv_file(a.data));
  const RewardFile val = rewards_from_table(read_csv_file(a.val));
  const Eigen::MatrixXd train_x = select_features(read_csv_file(a.data), tree.feature_names);
  const Eigen::MatrixXd val_x = select_features(read_csv_file(a.val), tree.feature_names);
  const std::vector<PrunePoint> path =
      prune_path(tree, train.rewards, train_x, val.rewards, val_x);
  const std::size_t pick = select_prune_point(path, train.rewards.sense);

  nlohmann::json steps = nlohmann::json::array();
  for (const PrunePoint& p : path)
    steps.push_back(nlohmann::json{{"lambda", p.lambda},
                                   {"splits", p.num_splits},
                                   {"validation_total", p.validation_total}});
  std::cout << nlohmann::json{{"path", steps}, {"selected", pick}}.dump(2) << "\n";
  if (!a.out.empty()) write_text_file(a.out, tree_to_json(path[pick].tree));
  return 0;
}

int cmd_synth_gaussian(const Args& a) {
  GaussianRewardSpec spec;
  spec.lo = a.lo;
  spec.hi = a.hi;
  spec.n = a.n;
  spec.seed = a.seed;
  spec.mean1 = a.mean1;
  spec.mean2 = a.mean2;
  spec.offset1 = a.offset1;
  spec.offset2 = a.offset2;
  if (!a.alpha.empty()) spec.rejection_alphas = parse_double_list(a.alpha, "--alpha");
  const GaussianRewards g = gaussian_rewards(spec);
  write_csv_file(a.out, rewards_to_table(g.features, g.feature_names, g.rewards));
  return 0;
}

int cmd_synth_projectile(const Args& a) {
  const ProjectileData d = gen_projectile_dataset(a.n, a.seed);

  Table data;
  data.columns = d.data.feature_names;
  data.columns.push_back("target");
  data.values.resize(d.data.n(), d.data.dim() + 1);
  data.values.leftCols(d.data.dim()) = d.data.features;
  data.values.rightCols(1) = d.data.targets;
  write_csv_file(a.out, data);

  write_csv_file(derived_path(a.out, "_preds"), predictions_to_table(d.preds));

  Table split;
  split.columns = {"row", "part"};  // part: 0 train, 1 validation, 2 test
  split.values.resize(d.data.n(), 2);
  const std::vector<const std::vector<Eigen::Index>*> parts = {&d.split.train,
                                                               &d.split.validation,
                                                               &d.split.test};
  Eigen::Index r = 0;
  for (std::size_t p = 0; p < parts.size(); ++p)
    for (const Eigen::Index row : *parts[p]) {
      split.values(r, 0) = static_cast<double>(row);
      split.values(r, 1) = static_cast<double>(p);
      ++r;
    }
  write_csv_file(derived_path(a.out, "_split"), split);
  return 0;
}

int cmd_baseline(const Args& a) {
  const RewardKind kind = parse_reward_kind(a.reward);
  const ValidatedBundle bundle = load_bundle(a.data, a.preds, a.target_col, task_of(kind));
  const ActionSet actions = actions_with_ensembles(bundle.preds, a.ensembles);
  const auto rejection = make_rejection(a.reject_alpha, task_of(kind), bundle.preds.n_classes());
  const MetaLabels labels = meta_labels(bundle, actions, rejection);
  // meta_labels adds the rejection label class itself when enabled.
  const ClassTree tree =
      fit_meta_tree(bundle.data.features, labels, fit_config(a), bundle.data.feature_names);
  emit(a.out, a.format == "dot" ? class_tree_to_dot(tree) : class_tree_to_json(tree));
  return 0;
}

// Scores files: every non-target column is a score feature; the target column
// holds 0/1 labels (or class indices for class-policy).
std::pair<Eigen::MatrixXd, std::vector<int>> load_scores(const Args& a,
                                                         std::vector<std::string>* names) {
  const Table table = read_csv_file(a.scores);
  const Dataset d = dataset_from_table(table, a.target_col);
  std::vector<int> labels(static_cast<std::size_t>(d.n()));
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    const double y = d.targets(i);
    if (y != static_cast<double>(static_cast<int>(y)))
      throw ValidationError("labels must be integers, got " + std::to_string(y));
    labels[static_cast<std::size_t>(i)] = static_cast<int>(y);
  }
  if (names) *names = d.feature_names;
  return {d.features, labels};
}

int cmd_reject_interval(const Args& a) {
  const auto [scores, labels] = load_scores(a, nullptr);
  if (scores.cols() != 1)
    throw ValidationError("reject-interval expects exactly one score column");
  double min_accuracy = 0.0;
  try {
    std::size_t used = 0;
    min_accuracy = std::stod(a.alpha, &used);
    if (used != a.alpha.size()) throw std::invalid_argument(a.alpha);
  } catch (const std::exception&) {
    throw CLI::ValidationError("--alpha", "must be a number");
  }
  IntervalCaps caps;
  if (a.max_fnr >= 0.0) caps.max_fnr = a.max_fnr;
  if (a.max_fpr >= 0.0) caps.max_fpr = a.max_fpr;
  const RejectionInterval r =
      solve_single_interval(scores.col(0), labels, min_accuracy, caps, a.grid);
  nlohmann::json j{{"a", r.a},
                   {"b", r.b},
                   {"coverage", r.coverage},
                   {"accuracy", r.accuracy}};
  if (r.fnr) j["fnr"] = *r.fnr;
  if (r.fpr) j["fpr"] = *r.fpr;
  std::cout << j.dump(2) << "\n";
  if (!a.out.empty()) write_text_file(a.out, j.dump(2) + "\n");
  return 0;
}

int cmd_class_policy(const Args& a) {
  std::vector<std::string> names;
  const auto [scores, labels] = load_scores(a, &names);
  ClassPolicyConfig config;
  config.tree = fit_config(a);
  try {
    std::size_t used = 0;
    config.alpha = std::stod(a.alpha, &used);
    if (used != a.alpha.size()) throw std::invalid_argument(a.alpha);
  } catch (const std::exception&) {
    throw CLI::ValidationError("--alpha", "must be a number");
  }
  if (!a.beta.empty()) {
    const std::vector<double> betas = parse_double_list(a.beta, "--beta");
    config.beta.resize(static_cast<Eigen::Index>(betas.size()));
    for (std::size_t i = 0; i < betas.size(); ++i)
      config.beta(static_cast<Eigen::Index>(i)) = betas[i];
  }
  const PolicyTree tree = fit_class_policy(scores, labels, config, names);
  emit(a.out, a.format == "dot" ? tree_to_dot(tree) : tree_to_json(tree));
  return 0;
}

int cmd_export_dot(const Args& a) {
  const std::string text = read_text_file(a.tree);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("json", std::string("invalid JSON: ") + e.what());
  }
  // Class trees share the schema except leaves carry "class" instead of "action".
  bool class_tree = false;
  if (j.is_object() && j.contains("nodes") && j["nodes"].is_array())
    for (const nlohmann::json& node : j["nodes"])
      if (node.is_object() && node.contains("leaf") && node["leaf"].is_object() &&
          node["leaf"].contains("class"))
        class_tree = true;
  const std::string dot = class_tree ? class_tree_to_dot(class_tree_from_json(text))
                                     : tree_to_dot(tree_from_json(text));
  emit(a.out, dot);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prescription trees over reward matrices"};
  app.require_subcommand(1);
  Args a;

  const auto add_fit_flags = [&a](CLI::App* cmd) {
    cmd->add_option("--depth", a.depth, "maximum tree depth")->check(CLI::NonNegativeNumber);
    cmd->add_option("--min-leaf", a.min_leaf, "minimum samples per leaf")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--restarts", a.restarts, "local-search restarts")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--quantiles", a.quantiles, "0 = all midpoints, q > 0 thins candidates")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--seed", a.seed, "random seed");
    return cmd->add_option("--lambda", a.lambda, "per-split penalty, a number or 'auto'");
  };

  CLI::App* rewards = app.add_subcommand("rewards", "build a reward matrix CSV");
  rewards->add_option("--data", a.data, "features + target CSV")->required();
  rewards->add_option("--preds", a.preds, "prediction tensor CSV")->required();
  rewards->add_option("--target-col", a.target_col, "target column name");
  rewards->add_option("--reward", a.reward, "ce, mis, or se")->required();
  rewards->add_option("--task", a.task, "max or min (checked against --reward)")
      ->check(CLI::IsMember({"max", "min"}));
  rewards->add_option("--ensembles", a.ensembles, "JSON list of ensemble weight vectors");
  rewards->add_option("--reject-alpha", a.reject_alpha, "rejection cost, scalar or comma list");
  rewards->add_option("--out", a.out, "output reward CSV")->required();

  CLI::App* train = app.add_subcommand("train", "fit a policy tree on a reward CSV");
  train->add_option("--data", a.data, "reward CSV")->required();
  train->add_option("--task", a.task, "max or min (checked against the file)")
      ->check(CLI::IsMember({"max", "min"}));
  CLI::Option* lambda_opt = add_fit_flags(train);
  train->add_option("--folds", a.folds, "cross-validate depth and penalty with this many folds")
      ->check(CLI::Range(2, 1000))
      ->excludes(lambda_opt);
  train->add_option("--out", a.out, "output tree path (default: stdout)");
  train->add_option("--format", a.format, "json or dot")
      ->check(CLI::IsMember({"json", "dot"}));

  CLI::App* predict = app.add_subcommand("predict", "prescribe actions for a feature CSV");
  predict->add_option("--tree", a.tree, "tree JSON")->required();
  predict->add_option("--data", a.data, "CSV containing the tree's feature columns")->required();
  predict->add_option("--out", a.out, "output CSV (default: stdout)");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a tree on a reward CSV");
  eval->add_option("--tree", a.tree, "tree JSON")->required();
  eval->add_option("--data", a.data, "reward CSV")->required();
  eval->add_option("--task", a.task, "max or min (checked against the file)")
      ->check(CLI::IsMember({"max", "min"}));
  eval->add_option("--out", a.out, "write the summary JSON here too");

  CLI::App* prune = app.add_subcommand("prune", "weakest-link pruning path + selection");
  prune->add_option("--tree", a.tree, "tree JSON")->required();
  prune->add_option("--data", a.data, "training reward CSV")->required();
  prune->add_option("--val", a.val, "validation reward CSV")->required();
  prune->add_option("--out", a.out, "write the selected subtree here");

  CLI::App* synth = app.add_subcommand("synth", "generate benchmark data");
  synth->require_subcommand(1);
  CLI::App* gauss = synth->add_subcommand("gaussian", "1-D two-expert reward CSV");
  gauss->add_option("--n", a.n, "sample count")->check(CLI::PositiveNumber);
  gauss->add_option("--lo", a.lo, "interval start");
  gauss->add_option("--hi", a.hi, "interval end");
  gauss->add_option("--mean1", a.mean1, "first expert's peak");
  gauss->add_option("--mean2", a.mean2, "second expert's peak");
  gauss->add_option("--offset1", a.offset1, "added to the first expert's rewards");
  gauss->add_option("--offset2", a.offset2, "added to the second expert's rewards");
  gauss->add_option("--alpha", a.alpha, "rejection reward(s), comma list");
  gauss->add_option("--seed", a.seed, "random seed");
  gauss->add_option("--out", a.out, "output reward CSV")->required();

  CLI::App* proj = synth->add_subcommand("projectile", "projectile range dataset");
  proj->add_option("--n", a.n, "sample count (>= 10)")->check(CLI::PositiveNumber);
  proj->add_option("--seed", a.seed, "random seed");
  proj->add_option("--out", a.out,
                   "data CSV; also writes <out>_preds and <out>_split")
      ->required();

  CLI::App* baseline = app.add_subcommand("baseline", "predictive baselines");
  baseline->require_subcommand(1);
  CLI::App* meta = baseline->add_subcommand("meta-tree", "greedy tree on best-action labels");
  meta->add_option("--data", a.data, "features + target CSV")->required();
  meta->add_option("--preds", a.preds, "prediction tensor CSV")->required();
  meta->add_option("--target-col", a.target_col, "target column name");
  meta->add_option("--reward", a.reward, "ce, mis, or se")->required();
  meta->add_option("--ensembles", a.ensembles, "JSON list of ensemble weight vectors");
  meta->add_option("--reject-alpha", a.reject_alpha,
                   "enable rejection labels with this cost");
  meta->add_option("--depth", a.depth, "maximum tree depth")->check(CLI::NonNegativeNumber);
  meta->add_option("--min-leaf", a.min_leaf, "minimum samples per leaf")
      ->check(CLI::PositiveNumber);
  meta->add_option("--out", a.out, "output tree path (default: stdout)");
  meta->add_option("--format", a.format, "json or dot")
      ->check(CLI::IsMember({"json", "dot"}));

  CLI::App* interval = app.add_subcommand("reject-interval",
                                          "best single rejection interval for binary scores");
  interval->add_option("--scores", a.scores, "CSV with one score column and a target column")
      ->required();
  interval->add_option("--target-col", a.target_col, "label column name");
  interval->add_option("--alpha", a.alpha, "minimum accuracy on covered samples")->required();
  interval->add_option("--max-fnr", a.max_fnr, "false-negative rate cap");
  interval->add_option("--max-fpr", a.max_fpr, "false-positive rate cap");
  interval->add_option("--grid", a.grid, "endpoint grid resolution (0 = data-driven)")
      ->check(CLI::NonNegativeNumber);
  interval->add_option("--out", a.out, "write the interval JSON here too");

  CLI::App* cpolicy = app.add_subcommand("class-policy",
                                         "policy tree over scores with a rejection action");
  cpolicy->add_option("--scores", a.scores, "CSV with score columns and a target column")
      ->required();
  cpolicy->add_option("--target-col", a.target_col, "label column name");
  cpolicy->add_option("--alpha", a.alpha, "reward for rejecting")->required();
  cpolicy->add_option("--beta", a.beta, "per-class correct-prescription rewards, comma list");
  add_fit_flags(cpolicy);
  cpolicy->add_option("--out", a.out, "output tree path (default: stdout)");
  cpolicy->add_option("--format", a.format, "json or dot")
      ->check(CLI::IsMember({"json", "dot"}));

  CLI::App* dot = app.add_subcommand("export-dot", "convert a tree JSON to Graphviz DOT");
  dot->add_option("--tree", a.tree, "tree JSON (policy or class tree)")->required();
  dot->add_option("--out", a.out, "output DOT path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*rewards) return cmd_rewards(a);
    if (*train) return cmd_train(a);
    if (*predict) return cmd_predict(a);
    if (*eval) return cmd_eval(a);
    if (*prune) return cmd_prune(a);
    if (*gauss) return cmd_synth_gaussian(a);
    if (*proj) return cmd_synth_projectile(a);
    if (*meta) return cmd_baseline(a);
    if (*interval) return cmd_reject_interval(a);
    if (*cpolicy) return cmd_class_policy(a);
    if (*dot) return cmd_export_dot(a);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

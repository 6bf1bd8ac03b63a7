#include <doctest.h>
#include <json.hpp>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "op2t/baseline.hpp"
#include "op2t/csv.hpp"
#include "op2t/reject_intervals.hpp"
#include "op2t/synth.hpp"
#include "op2t/tree.hpp"

using namespace op2t;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Runs the installed binary with stdout/stderr captured to files; no pipes,
// so the exit status is the CLI's own.
RunResult run_cli(const std::string& dir, const std::string& args) {
  const std::string out_path = dir + "/run_stdout.txt";
  const std::string err_path = dir + "/run_stderr.txt";
  const std::string cmd =
      std::string(OP2T_CLI_PATH) + " " + args + " > " + out_path + " 2> " + err_path;
  const int status = std::system(cmd.c_str());
  RunResult r;
  REQUIRE(status != -1);
  r.code = WEXITSTATUS(status);
  r.out = slurp(out_path);
  r.err = slurp(err_path);
  return r;
}

std::string fresh_dir(const std::string& tag) {
  const std::string dir = "/tmp/op2t_cli_" + tag;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

GaussianRewardSpec bench_spec() {
  GaussianRewardSpec spec;
  spec.n = 300;
  spec.seed = 11;
  spec.rejection_alphas = {0.1};
  return spec;
}

}  // namespace

TEST_CASE("cli exit codes: help succeeds, usage errors return 1, data errors return 2") {
  const std::string dir = fresh_dir("codes");
  CHECK(run_cli(dir, "--help").code == 0);
  CHECK(run_cli(dir, "").code == 1);                      // a subcommand is required
  CHECK(run_cli(dir, "train").code == 1);                 // missing --data
  CHECK(run_cli(dir, "train --no-such-flag x").code == 1);
  CHECK(run_cli(dir, "train --data d.csv --format svg").code == 1);

  write_text_file(dir + "/bogus.csv", "a,b\n1,2\n");
  const RunResult missing = run_cli(dir, "train --data " + dir + "/bogus.csv");
  CHECK(missing.code == 2);  // not a reward file
  CHECK(missing.err.find("error:") != std::string::npos);
  CHECK(run_cli(dir, "train --data " + dir + "/does_not_exist.csv").code == 2);
}

TEST_CASE("cli pipeline: synth, train, predict, and eval agree with the library") {
  const std::string dir = fresh_dir("pipeline");
  const std::string rewards_csv = dir + "/rewards.csv";
  const std::string tree_json = dir + "/tree.json";

  CHECK(run_cli(dir, "synth gaussian --n 300 --seed 11 --alpha 0.1 --out " + rewards_csv)
            .code == 0);

  const GaussianRewards g = gaussian_rewards(bench_spec());
  const RewardFile file = rewards_from_table(read_csv_file(rewards_csv));
  CHECK(file.feature_names == g.feature_names);
  CHECK(file.features == g.features);          // CSV round-trips bit-exactly
  CHECK(file.rewards.values == g.rewards.values);
  CHECK(file.rewards.sense == Sense::maximize);
  CHECK(file.rewards.actions.names == g.rewards.actions.names);
  CHECK(file.rewards.actions.rejections == 1);

  CHECK(run_cli(dir, "train --data " + rewards_csv + " --depth 2 --seed 4 --out " + tree_json)
            .code == 0);
  FitConfig config;
  config.max_depth = 2;
  config.seed = 4;
  const PolicyTree fitted = fit_policy_tree(g.rewards, g.features, config, g.feature_names);
  CHECK(slurp(tree_json) == tree_to_json(fitted));

  const std::string again = dir + "/tree_again.json";
  CHECK(run_cli(dir, "train --data " + rewards_csv + " --depth 2 --seed 4 --out " + again)
            .code == 0);
  CHECK(slurp(again) == slurp(tree_json));  // byte-identical rerun

  const std::string pred_csv = dir + "/pred.csv";
  CHECK(run_cli(dir, "predict --tree " + tree_json + " --data " + rewards_csv + " --out " +
                         pred_csv)
            .code == 0);
  const std::vector<int> want = prescribe_all(fitted, g.features);
  std::ifstream in(pred_csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "action,action_name");
  for (std::size_t i = 0; i < want.size(); ++i) {
    REQUIRE(std::getline(in, line));
    const std::size_t comma = line.find(',');
    CHECK(std::stoi(line.substr(0, comma)) == want[i]);
    CHECK(line.substr(comma + 1) ==
          fitted.actions.names[static_cast<std::size_t>(want[i])]);
  }

  const RunResult eval = run_cli(dir, "eval --tree " + tree_json + " --data " + rewards_csv);
  CHECK(eval.code == 0);
  const nlohmann::json summary = nlohmann::json::parse(eval.out);
  const EvalSummary expect = evaluate_policy(fitted, g.rewards, g.features);
  CHECK(summary.at("total_reward").get<double>() == expect.total_reward);
  CHECK(summary.at("mean_reward").get<double>() == expect.mean_reward);
  CHECK(summary.at("reject_fraction").get<double>() == expect.reject_fraction);
  CHECK(summary.at("splits").get<int>() == fitted.tree.num_splits());
  for (std::size_t a = 0; a < fitted.actions.names.size(); ++a)
    CHECK(summary.at("action_counts").at(fitted.actions.names[a]).get<Eigen::Index>() ==
          expect.action_counts[a]);
}

TEST_CASE("cli rewards subcommand reproduces the library's reward matrix") {
  const std::string dir = fresh_dir("rewards");

  Table data;
  data.columns = {"f1", "f2", "target"};
  data.values.resize(8, 3);
  Table preds;
  preds.columns = {"m1_class0", "m1_class1", "m2_class0", "m2_class1"};
  preds.values.resize(8, 4);
  for (Eigen::Index i = 0; i < 8; ++i) {
    data.values(i, 0) = 0.25 * static_cast<double>(i);
    data.values(i, 1) = 10.0 - static_cast<double>(i);
    data.values(i, 2) = i % 2;
    const double p1 = 0.1 + 0.1 * static_cast<double>(i);
    preds.values(i, 0) = 1.0 - p1;
    preds.values(i, 1) = p1;
    preds.values(i, 2) = 0.55;
    preds.values(i, 3) = 0.45;
  }
  write_csv_file(dir + "/data.csv", data);
  write_csv_file(dir + "/preds.csv", preds);

  const std::string out_csv = dir + "/rewards.csv";
  CHECK(run_cli(dir, "rewards --data " + dir + "/data.csv --preds " + dir +
                         "/preds.csv --reward ce --reject-alpha 0.2 --out " + out_csv)
            .code == 0);

  Dataset d = dataset_from_table(data, "target");
  PredictionTensor t = predictions_from_table(preds, TaskKind::classification);
  const ValidatedBundle bundle = validate(std::move(d), std::move(t));
  ActionSet actions = model_actions(bundle.preds.model_names);
  add_rejection(actions);
  const RewardMatrix want = build_classification_rewards(
      bundle, actions, RewardKind::cross_entropy,
      RejectionSpec::classification_uniform(0.2, 2));

  const RewardFile got = rewards_from_table(read_csv_file(out_csv));
  CHECK(got.rewards.values == want.values);
  CHECK(got.rewards.sense == Sense::maximize);
  CHECK(got.rewards.actions.names == std::vector<std::string>{"m1", "m2", "reject"});
  CHECK(got.feature_names == std::vector<std::string>{"f1", "f2"});
  CHECK(got.features == bundle.data.features);

  // The task flag is redundant but must agree when present.
  CHECK(run_cli(dir, "rewards --data " + dir + "/data.csv --preds " + dir +
                         "/preds.csv --reward ce --task min --out " + dir + "/x.csv")
            .code == 1);
  CHECK(run_cli(dir, "rewards --data " + dir + "/data.csv --preds " + dir +
                         "/preds.csv --reward nope --out " + dir + "/x.csv")
            .code == 1);
}

TEST_CASE("cli export-dot renders both policy trees and class trees") {
  const std::string dir = fresh_dir("dot");

  const GaussianRewards g = gaussian_rewards(bench_spec());
  FitConfig config;
  config.max_depth = 2;
  const PolicyTree policy = fit_policy_tree(g.rewards, g.features, config, g.feature_names);
  write_text_file(dir + "/policy.json", tree_to_json(policy));
  const RunResult pol = run_cli(dir, "export-dot --tree " + dir + "/policy.json");
  CHECK(pol.code == 0);
  CHECK(pol.out == tree_to_dot(policy));
  CHECK(pol.out.rfind("digraph", 0) == 0);

  Eigen::MatrixXd x(6, 1);
  x << 0, 1, 2, 3, 4, 5;
  MetaLabels labels;
  labels.labels = {0, 0, 0, 1, 1, 1};
  labels.n_label_classes = 2;
  labels.class_names = {"m1", "m2"};
  const ClassTree ct = fit_meta_tree(x, labels, config, {"x"});
  write_text_file(dir + "/class.json", class_tree_to_json(ct));
  const RunResult cls = run_cli(dir, "export-dot --tree " + dir + "/class.json");
  CHECK(cls.code == 0);
  CHECK(cls.out == class_tree_to_dot(ct));

  write_text_file(dir + "/broken.json", "{not json");
  CHECK(run_cli(dir, "export-dot --tree " + dir + "/broken.json").code == 2);
}

TEST_CASE("cli reject-interval matches the solver and honors --out") {
  const std::string dir = fresh_dir("interval");
  Table scores;
  scores.columns = {"score", "target"};
  scores.values.resize(4, 2);
  scores.values << 0.1, 0, 0.45, 1, 0.55, 0, 0.9, 1;
  write_csv_file(dir + "/scores.csv", scores);

  const RunResult r = run_cli(dir, "reject-interval --scores " + dir +
                                       "/scores.csv --alpha 1.0 --out " + dir + "/interval.json");
  CHECK(r.code == 0);
  const nlohmann::json j = nlohmann::json::parse(r.out);
  const RejectionInterval want =
      solve_single_interval(scores.values.col(0), {0, 1, 0, 1}, 1.0);
  CHECK(j.at("a").get<double>() == want.a);
  CHECK(j.at("b").get<double>() == want.b);
  CHECK(j.at("coverage").get<Eigen::Index>() == want.coverage);
  CHECK(j.at("accuracy").get<double>() == want.accuracy);
  CHECK(nlohmann::json::parse(slurp(dir + "/interval.json")) == j);

  CHECK(run_cli(dir, "reject-interval --scores " + dir + "/scores.csv --alpha 0").code == 2);
  CHECK(run_cli(dir, "reject-interval --scores " + dir + "/scores.csv --alpha x").code == 1);
}

TEST_CASE("cli class-policy fits the same tree as the library call") {
  const std::string dir = fresh_dir("cpolicy");
  Table scores;
  scores.columns = {"score", "target"};
  scores.values.resize(10, 2);
  for (Eigen::Index i = 0; i < 10; ++i) {
    scores.values(i, 0) = 0.1 * static_cast<double>(i);
    scores.values(i, 1) = i >= 5 ? 1 : 0;
  }
  write_csv_file(dir + "/scores.csv", scores);

  const std::string out = dir + "/policy.json";
  CHECK(run_cli(dir, "class-policy --scores " + dir +
                         "/scores.csv --alpha 0.9 --beta 1,1 --depth 2 --out " + out)
            .code == 0);

  ClassPolicyConfig config;
  config.alpha = 0.9;
  config.beta = Eigen::Vector2d(1.0, 1.0);
  config.tree.max_depth = 2;
  std::vector<int> labels(10);
  for (int i = 0; i < 10; ++i) labels[static_cast<std::size_t>(i)] = i >= 5 ? 1 : 0;
  const PolicyTree want =
      fit_class_policy(scores.values.col(0), labels, config, {"score"});
  CHECK(slurp(out) == tree_to_json(want));
}

TEST_CASE("cli prune reports the weakest-link path and writes the selected subtree") {
  const std::string dir = fresh_dir("prune");
  GaussianRewardSpec train_spec = bench_spec();
  GaussianRewardSpec val_spec = bench_spec();
  val_spec.seed = 12;
  const std::string train_csv = dir + "/train.csv";
  const std::string val_csv = dir + "/val.csv";
  const GaussianRewards train_g = gaussian_rewards(train_spec);
  const GaussianRewards val_g = gaussian_rewards(val_spec);
  write_csv_file(train_csv,
                 rewards_to_table(train_g.features, train_g.feature_names, train_g.rewards));
  write_csv_file(val_csv,
                 rewards_to_table(val_g.features, val_g.feature_names, val_g.rewards));

  const std::string tree_json = dir + "/tree.json";
  CHECK(run_cli(dir, "train --data " + train_csv + " --depth 3 --out " + tree_json).code == 0);

  const RunResult r = run_cli(dir, "prune --tree " + tree_json + " --data " + train_csv +
                                       " --val " + val_csv + " --out " + dir + "/pruned.json");
  CHECK(r.code == 0);
  const nlohmann::json j = nlohmann::json::parse(r.out);
  const auto& path = j.at("path");
  REQUIRE(path.size() >= 1);
  double prev_lambda = -1.0;
  int prev_splits = 1 << 20;
  for (const nlohmann::json& step : path) {
    CHECK(step.at("lambda").get<double>() >= prev_lambda);
    CHECK(step.at("splits").get<int>() < prev_splits);
    prev_lambda = step.at("lambda").get<double>();
    prev_splits = step.at("splits").get<int>();
  }
  const std::size_t selected = j.at("selected").get<std::size_t>();
  REQUIRE(selected < path.size());
  const PolicyTree pruned = tree_from_json(slurp(dir + "/pruned.json"));
  CHECK(pruned.tree.num_splits() == path[selected].at("splits").get<int>());
}

TEST_CASE("cli projectile synth writes the data, prediction, and split files") {
  const std::string dir = fresh_dir("projectile");
  CHECK(run_cli(dir, "synth projectile --n 80 --seed 9 --out " + dir + "/proj.csv").code == 0);

  const ProjectileData want = gen_projectile_dataset(80, 9);
  const Table data = read_csv_file(dir + "/proj.csv");
  CHECK(data.columns == std::vector<std::string>{"v0", "theta", "drag", "target"});
  CHECK(data.values.rows() == 80);
  CHECK(data.values.leftCols(3) == want.data.features);
  CHECK(data.values.col(3) == want.data.targets);

  const PredictionTensor preds =
      predictions_from_table(read_csv_file(dir + "/proj_preds.csv"), TaskKind::regression);
  CHECK(preds.model_names == want.preds.model_names);
  CHECK(preds.scalar_preds == want.preds.scalar_preds);

  const Table split = read_csv_file(dir + "/proj_split.csv");
  CHECK(split.columns == std::vector<std::string>{"row", "part"});
  CHECK(split.values.rows() == 80);
  Eigen::Index train_rows = 0;
  for (Eigen::Index i = 0; i < split.values.rows(); ++i)
    if (split.values(i, 1) == 0.0) ++train_rows;
  CHECK(train_rows == 40);
}

TEST_CASE("cli train cross-validates when --folds is given and rejects --lambda with it") {
  const std::string dir = fresh_dir("folds");
  const std::string rewards_csv = dir + "/rewards.csv";
  const GaussianRewards g = gaussian_rewards(bench_spec());
  write_csv_file(rewards_csv, rewards_to_table(g.features, g.feature_names, g.rewards));

  CHECK(run_cli(dir, "train --data " + rewards_csv + " --folds 3 --lambda 0.5").code == 1);

  const std::string out = dir + "/cv_tree.json";
  CHECK(run_cli(dir,
                "train --data " + rewards_csv + " --depth 3 --folds 3 --seed 2 --out " + out)
            .code == 0);
  GridSpec spec;
  spec.depths = {1, 2, 3};
  spec.folds = 3;
  spec.restarts = 8;  // the CLI's default restart count
  spec.seed = 2;
  const PolicyTree want = grid_search(g.rewards, g.features, spec, g.feature_names).tree;
  CHECK(slurp(out) == tree_to_json(want));
}

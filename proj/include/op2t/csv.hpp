#pragma once

#include <string>

#include "op2t/core.hpp"
#include "op2t/rewards.hpp"

namespace op2t {

// A numeric CSV with a header row and optional leading '#' comment lines.
// Values round-trip exactly: doubles are written in shortest form that
// parses back to the same bits.
struct Table {
  std::vector<std::string> columns;
  Eigen::MatrixXd values;
  std::vector<std::string> comments;  // leading comment lines, '#' stripped
};

Table read_csv_text(const std::string& text, const std::string& origin = "<string>");
Table read_csv_file(const std::string& path);
std::string write_csv_text(const Table& table);
void write_csv_file(const std::string& path, const Table& table);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

// Splits a table into a dataset: `target_col` becomes the target, every
// other column a feature.
Dataset dataset_from_table(const Table& table, const std::string& target_col);

// Prediction tables use one column per model for regression, or one column
// per (model, class) named "<model>_class<k>" for classification.
PredictionTensor predictions_from_table(const Table& table, TaskKind kind);
Table predictions_to_table(const PredictionTensor& preds);

// Reward files carry features and reward columns side by side, described by
// leading comments: "# sense=max|min", "# actions=<comma-separated names>",
// "# rejections=<count>". Columns not named as actions are features.
struct RewardFile {
  Eigen::MatrixXd features;
  std::vector<std::string> feature_names;
  RewardMatrix rewards;
};

RewardFile rewards_from_table(const Table& table);
Table rewards_to_table(const Eigen::MatrixXd& features,
                       const std::vector<std::string>& feature_names,
                       const RewardMatrix& rewards);

}  // namespace op2t

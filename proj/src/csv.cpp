#include "op2t/csv.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace op2t {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return cells;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& cell, const std::string& where) {
  double v = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc{} || res.ptr != end)
    throw ParseError(where, "cannot parse '" + cell + "' as a number at " + where);
  return v;
}

}  // namespace

Table read_csv_text(const std::string& text, const std::string& origin) {
  Table table;
  std::istringstream in(text);
  std::string line;
  long long line_no = 0;
  bool have_header = false;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    if (stripped[0] == '#') {
      if (have_header)
        throw ParseError(origin + ":" + std::to_string(line_no),
                         "comments are only allowed before the header");
      table.comments.push_back(trim(stripped.substr(1)));
      continue;
    }
    if (!have_header) {
      table.columns = split_line(stripped);
      for (const std::string& name : table.columns)
        if (name.empty())
          throw ParseError(origin + ":" + std::to_string(line_no), "empty column name");
      have_header = true;
      continue;
    }
    const std::vector<std::string> cells = split_line(stripped);
    if (cells.size() != table.columns.size())
      throw ParseError(origin + ":" + std::to_string(line_no),
                       "expected " + std::to_string(table.columns.size()) + " cells, got " +
                           std::to_string(cells.size()));
    std::vector<double> row(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c)
      row[c] = parse_double(cells[c], origin + ":" + std::to_string(line_no) + ", column '" +
                                          table.columns[c] + "'");
    rows.push_back(std::move(row));
  }
  if (!have_header) throw ParseError(origin, "missing header row");

  table.values.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(table.columns.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < rows[i].size(); ++c)
      table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
  return table;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("failed to write '" + path + "'");
}

Table read_csv_file(const std::string& path) { return read_csv_text(read_text_file(path), path); }

std::string write_csv_text(const Table& table) {
  if (static_cast<Eigen::Index>(table.columns.size()) != table.values.cols())
    throw DimensionMismatch("column names do not match value columns");
  std::ostringstream out;
  for (const std::string& comment : table.comments) out << "# " << comment << "\n";
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (table.columns[c].find(',') != std::string::npos ||
        table.columns[c].find('\n') != std::string::npos)
      throw ValidationError("column names must not contain commas or newlines");
    out << (c ? "," : "") << table.columns[c];
  }
  out << "\n";
  for (Eigen::Index i = 0; i < table.values.rows(); ++i) {
    for (Eigen::Index c = 0; c < table.values.cols(); ++c)
      out << (c ? "," : "") << format_double(table.values(i, c));
    out << "\n";
  }
  return out.str();
}

void write_csv_file(const std::string& path, const Table& table) {
  write_text_file(path, write_csv_text(table));
}

Dataset dataset_from_table(const Table& table, const std::string& target_col) {
  const auto it = std::find(table.columns.begin(), table.columns.end(), target_col);
  if (it == table.columns.end())
    throw ParseError(target_col, "target column '" + target_col + "' not found");
  const Eigen::Index target = it - table.columns.begin();
  if (table.columns.size() < 2)
    throw ValidationError("dataset needs at least one feature besides the target");
  if (table.values.rows() < 1) throw ValidationError("dataset has no rows");

  Dataset d;
  d.targets = table.values.col(target);
  d.features.resize(table.values.rows(), table.values.cols() - 1);
  Eigen::Index out = 0;
  for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
    if (c == target) continue;
    d.features.col(out) = table.values.col(c);
    d.feature_names.push_back(table.columns[static_cast<std::size_t>(c)]);
    ++out;
  }
  return d;
}

PredictionTensor predictions_from_table(const Table& table, TaskKind kind) {
  if (table.values.rows() < 1) throw ValidationError("prediction table has no rows");
  if (kind == TaskKind::regression) {
    PredictionTensor t = make_regression_tensor(table.values, table.columns);
    return t;
  }

  // Classification columns are "<model>_class<k>"; class indices must form
  // the complete range 0..K-1 for every model, in any column order.
  std::vector<std::string> model_names;
  std::vector<std::vector<Eigen::Index>> cols;  // per model, indexed by class
  Eigen::Index k = 0;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    const std::string& name = table.columns[c];
    const std::size_t tag = name.rfind("_class");
    if (tag == std::string::npos || tag == 0 || tag + 6 == name.size())
      throw ParseError(name,
                       "classification prediction columns must be named '<model>_class<k>'");
    const std::string model = name.substr(0, tag);
    const std::string cls = name.substr(tag + 6);
    Eigen::Index cls_idx = 0;
    try {
      std::size_t used = 0;
      cls_idx = std::stoll(cls, &used);
      if (used != cls.size()) throw std::invalid_argument(cls);
    } catch (const std::exception&) {
      throw ParseError(name, "class suffix of '" + name + "' must be an integer");
    }
    if (cls_idx < 0) throw ParseError(name, "class indices must be non-negative");
    k = std::max(k, cls_idx + 1);

    std::size_t m = 0;
    for (; m < model_names.size(); ++m)
      if (model_names[m] == model) break;
    if (m == model_names.size()) {
      model_names.push_back(model);
      cols.emplace_back();
    }
    if (static_cast<Eigen::Index>(cols[m].size()) <= cls_idx) cols[m].resize(cls_idx + 1, -1);
    if (cols[m][static_cast<std::size_t>(cls_idx)] != -1)
      throw ParseError(name, "duplicate prediction column '" + name + "'");
    cols[m][static_cast<std::size_t>(cls_idx)] = static_cast<Eigen::Index>(c);
  }
  if (model_names.empty()) throw ValidationError("prediction table has no columns");

  std::vector<Eigen::MatrixXd> probs;
  for (std::size_t m = 0; m < model_names.size(); ++m) {
    if (static_cast<Eigen::Index>(cols[m].size()) != k)
      throw ParseError(model_names[m],
                       "model '" + model_names[m] + "' is missing class columns");
    Eigen::MatrixXd p(table.values.rows(), k);
    for (Eigen::Index cls = 0; cls < k; ++cls) {
      const Eigen::Index src = cols[m][static_cast<std::size_t>(cls)];
      if (src < 0)
        throw ParseError(model_names[m], "model '" + model_names[m] + "' is missing class " +
                                             std::to_string(cls));
      p.col(cls) = table.values.col(src);
    }
    probs.push_back(std::move(p));
  }
  return make_classification_tensor(std::move(probs), std::move(model_names));
}

Table predictions_to_table(const PredictionTensor& preds) {
  Table t;
  if (preds.kind == TaskKind::regression) {
    t.columns = preds.model_names;
    t.values = preds.scalar_preds;
    return t;
  }
  const Eigen::Index k = preds.n_classes();
  t.values.resize(preds.n(), preds.n_models() * k);
  Eigen::Index out = 0;
  for (Eigen::Index m = 0; m < preds.n_models(); ++m) {
    for (Eigen::Index cls = 0; cls < k; ++cls) {
      t.columns.push_back(preds.model_names[static_cast<std::size_t>(m)] + "_class" +
                          std::to_string(cls));
      t.values.col(out++) = preds.class_probs[static_cast<std::size_t>(m)].col(cls);
    }
  }
  return t;
}

namespace {

std::string comment_value(const Table& table, const std::string& key) {
  for (const std::string& comment : table.comments) {
    const std::size_t eq = comment.find('=');
    if (eq == std::string::npos) continue;
    if (trim(comment.substr(0, eq)) == key) return trim(comment.substr(eq + 1));
  }
  return {};
}

}  // namespace

RewardFile rewards_from_table(const Table& table) {
  const std::string sense = comment_value(table, "sense");
  if (sense != "max" && sense != "min")
    throw ParseError("sense", "reward file needs a leading '# sense=max' or '# sense=min'");
  const std::string actions_csv = comment_value(table, "actions");
  if (actions_csv.empty())
    throw ParseError("actions", "reward file needs a leading '# actions=...' comment");
  const std::vector<std::string> action_names = split_line(actions_csv);

  int rejections = 0;
  const std::string rej = comment_value(table, "rejections");
  if (!rej.empty()) {
    try {
      std::size_t used = 0;
      rejections = std::stoi(rej, &used);
      if (used != rej.size() || rejections < 0) throw std::invalid_argument(rej);
    } catch (const std::exception&) {
      throw ParseError("rejections", "'# rejections=' must be a non-negative integer");
    }
  }
  if (rejections > static_cast<int>(action_names.size()))
    throw ParseError("rejections", "more rejections than actions");

  RewardFile out;
  out.rewards.sense = sense == "max" ? Sense::maximize : Sense::minimize;
  out.rewards.actions.names = action_names;
  out.rewards.actions.rejections = rejections;
  out.rewards.actions.weights.resize(0, 0);

  std::vector<Eigen::Index> action_cols;
  for (const std::string& name : action_names) {
    const auto it = std::find(table.columns.begin(), table.columns.end(), name);
    if (it == table.columns.end())
      throw ParseError(name, "action column '" + name + "' not found in the reward file");
    action_cols.push_back(it - table.columns.begin());
  }
  std::vector<Eigen::Index> feature_cols;
  for (Eigen::Index c = 0; c < table.values.cols(); ++c)
    if (std::find(action_cols.begin(), action_cols.end(), c) == action_cols.end())
      feature_cols.push_back(c);
  if (feature_cols.empty())
    throw ValidationError("reward file has no feature columns");
  if (table.values.rows() < 1) throw ValidationError("reward file has no rows");

  out.rewards.values.resize(table.values.rows(),
                            static_cast<Eigen::Index>(action_cols.size()));
  for (std::size_t a = 0; a < action_cols.size(); ++a)
    out.rewards.values.col(static_cast<Eigen::Index>(a)) = table.values.col(action_cols[a]);
  if (!out.rewards.values.allFinite())
    throw NonFinite(-1, -1, "reward file contains non-finite rewards");

  out.features.resize(table.values.rows(), static_cast<Eigen::Index>(feature_cols.size()));
  for (std::size_t f = 0; f < feature_cols.size(); ++f) {
    out.features.col(static_cast<Eigen::Index>(f)) = table.values.col(feature_cols[f]);
    out.feature_names.push_back(table.columns[static_cast<std::size_t>(feature_cols[f])]);
  }
  return out;
}

Table rewards_to_table(const Eigen::MatrixXd& features,
                       const std::vector<std::string>& feature_names,
                       const RewardMatrix& rewards) {
  if (features.rows() != rewards.n())
    throw DimensionMismatch("feature rows do not match reward rows");
  if (static_cast<Eigen::Index>(feature_names.size()) != features.cols())
    throw DimensionMismatch("feature names do not match feature columns");

  Table t;
  t.comments.push_back(std::string("sense=") +
                       (rewards.sense == Sense::maximize ? "max" : "min"));
  std::string actions;
  for (std::size_t a = 0; a < rewards.actions.names.size(); ++a)
    actions += (a ? "," : "") + rewards.actions.names[a];
  t.comments.push_back("actions=" + actions);
  t.comments.push_back("rejections=" + std::to_string(rewards.actions.rejections));

  t.columns = feature_names;
  for (const std::string& name : rewards.actions.names) t.columns.push_back(name);
  t.values.resize(features.rows(), features.cols() + rewards.n_actions());
  t.values.leftCols(features.cols()) = features;
  t.values.rightCols(rewards.n_actions()) = rewards.values;
  return t;
}

}  // namespace op2t

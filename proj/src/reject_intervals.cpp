#include "op2t/reject_intervals.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace op2t {

namespace {

struct Counts {
  Eigen::Index below = 0;      // samples with s <  candidate
  Eigen::Index below_pos = 0;  // positives among them
  Eigen::Index at_or_below = 0;
  Eigen::Index at_or_below_pos = 0;
};

struct Scan {
  Eigen::Index coverage = 0;
  Eigen::Index correct = 0;
  Eigen::Index fn = 0;
  Eigen::Index fp = 0;
  Eigen::Index covered_pos = 0;
  Eigen::Index covered_neg = 0;
};

// Exact rational comparison of accuracies; empty coverage counts as perfect.
int compare_accuracy(const Scan& x, const Scan& y) {
  const long long lhs = static_cast<long long>(x.correct) * std::max<Eigen::Index>(y.coverage, 1);
  const long long rhs = static_cast<long long>(y.correct) * std::max<Eigen::Index>(x.coverage, 1);
  const long long a = x.coverage == 0 ? std::max<Eigen::Index>(y.coverage, 1) : lhs;
  const long long b = y.coverage == 0 ? std::max<Eigen::Index>(x.coverage, 1) : rhs;
  if (a > b) return 1;
  if (a < b) return -1;
  return 0;
}

}  // namespace

RejectionInterval solve_single_interval(const Eigen::VectorXd& scores,
                                        const std::vector<int>& labels, double min_accuracy,
                                        const IntervalCaps& caps, int grid) {
  const Eigen::Index n = scores.size();
  if (n != static_cast<Eigen::Index>(labels.size()))
    throw DimensionMismatch("scores and labels differ in length");
  if (n < 1) throw TooFewSamples("need at least one sample");
  if (!(min_accuracy > 0.0 && min_accuracy <= 1.0))
    throw ValidationError("accuracy requirement must lie in (0, 1]");
  if (grid < 0) throw ValidationError("grid must be non-negative");
  for (const std::optional<double>& cap : {caps.max_fnr, caps.max_fpr})
    if (cap && !(*cap >= 0.0 && *cap <= 1.0))
      throw ValidationError("rate caps must lie in [0, 1]");
  Eigen::Index total_pos = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (labels[static_cast<std::size_t>(i)] != 0 && labels[static_cast<std::size_t>(i)] != 1)
      throw ValidationError("labels must be 0 or 1");
    if (!(scores(i) >= 0.0 && scores(i) <= 1.0))
      throw ValidationError("scores must lie in [0, 1]");
    total_pos += labels[static_cast<std::size_t>(i)];
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) {
    if (scores(x) != scores(y)) return scores(x) < scores(y);
    return x < y;
  });
  std::vector<double> sorted(static_cast<std::size_t>(n));
  std::vector<Eigen::Index> pos_prefix(static_cast<std::size_t>(n) + 1, 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    sorted[static_cast<std::size_t>(i)] = scores(order[static_cast<std::size_t>(i)]);
    pos_prefix[static_cast<std::size_t>(i) + 1] =
        pos_prefix[static_cast<std::size_t>(i)] +
        labels[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
  }

  std::vector<double> candidates;
  if (grid > 0) {
    for (int i = 0; i <= grid; ++i)
      candidates.push_back(static_cast<double>(i) / static_cast<double>(grid));
  } else {
    candidates.push_back(0.0);
    candidates.push_back(1.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      candidates.push_back(sorted[static_cast<std::size_t>(i)]);
      if (i + 1 < n && sorted[static_cast<std::size_t>(i)] < sorted[static_cast<std::size_t>(i) + 1])
        candidates.push_back(sorted[static_cast<std::size_t>(i)] +
                             0.5 * (sorted[static_cast<std::size_t>(i) + 1] -
                                    sorted[static_cast<std::size_t>(i)]));
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  }

  std::vector<Counts> at(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const auto lo =
        std::lower_bound(sorted.begin(), sorted.end(), candidates[c]) - sorted.begin();
    const auto hi =
        std::upper_bound(sorted.begin(), sorted.end(), candidates[c]) - sorted.begin();
    at[c].below = static_cast<Eigen::Index>(lo);
    at[c].below_pos = pos_prefix[static_cast<std::size_t>(lo)];
    at[c].at_or_below = static_cast<Eigen::Index>(hi);
    at[c].at_or_below_pos = pos_prefix[static_cast<std::size_t>(hi)];
  }

  bool have_best = false;
  Scan best_scan;
  double best_a = 0.0, best_b = 1.0;

  for (std::size_t ai = 0; ai < candidates.size(); ++ai) {
    for (std::size_t bi = ai; bi < candidates.size(); ++bi) {
      Scan s;
      const Eigen::Index lo_pos = at[ai].below_pos;
      const Eigen::Index lo_neg = at[ai].below - lo_pos;
      const Eigen::Index hi_cnt = n - at[bi].at_or_below;
      const Eigen::Index hi_pos = total_pos - at[bi].at_or_below_pos;
      const Eigen::Index hi_neg = hi_cnt - hi_pos;
      s.coverage = at[ai].below + hi_cnt;
      s.correct = lo_neg + hi_pos;
      s.fn = lo_pos;
      s.fp = hi_neg;
      s.covered_pos = lo_pos + hi_pos;
      s.covered_neg = lo_neg + hi_neg;

      if (s.coverage > 0 &&
          static_cast<double>(s.correct) + 1e-9 <
              min_accuracy * static_cast<double>(s.coverage))
        continue;
      if (caps.max_fnr && s.covered_pos > 0 &&
          static_cast<double>(s.fn) >
              *caps.max_fnr * static_cast<double>(s.covered_pos) + 1e-9)
        continue;
      if (caps.max_fpr && s.covered_neg > 0 &&
          static_cast<double>(s.fp) >
              *caps.max_fpr * static_cast<double>(s.covered_neg) + 1e-9)
        continue;

      bool better = false;
      if (!have_best) {
        better = true;
      } else if (s.coverage != best_scan.coverage) {
        better = s.coverage > best_scan.coverage;
      } else {
        const int acc = compare_accuracy(s, best_scan);
        if (acc != 0) {
          better = acc > 0;
        } else {
          const double width = candidates[bi] - candidates[ai];
          const double best_width = best_b - best_a;
          if (width != best_width)
            better = width < best_width;
          else
            better = candidates[ai] < best_a;
        }
      }
      if (better) {
        have_best = true;
        best_scan = s;
        best_a = candidates[ai];
        best_b = candidates[bi];
      }
    }
  }

  RejectionInterval out;
  out.a = best_a;
  out.b = best_b;
  out.coverage = best_scan.coverage;
  out.accuracy = best_scan.coverage > 0 ? static_cast<double>(best_scan.correct) /
                                              static_cast<double>(best_scan.coverage)
                                        : 1.0;
  if (best_scan.covered_pos > 0)
    out.fnr = static_cast<double>(best_scan.fn) / static_cast<double>(best_scan.covered_pos);
  if (best_scan.covered_neg > 0)
    out.fpr = static_cast<double>(best_scan.fp) / static_cast<double>(best_scan.covered_neg);
  return out;
}

PolicyTree fit_class_policy(const Eigen::MatrixXd& scores, const std::vector<int>& labels,
                            const ClassPolicyConfig& config,
                            std::vector<std::string> feature_names) {
  const Eigen::Index n = scores.rows();
  if (n != static_cast<Eigen::Index>(labels.size()))
    throw DimensionMismatch("scores and labels differ in length");
  if (n < 1) throw TooFewSamples("need at least one sample");
  if (!(config.alpha > 0.0)) throw ValidationError("rejection reward must be positive");

  int k = 0;
  for (int y : labels) {
    if (y < 0) throw ValidationError("labels must be non-negative class indices");
    k = std::max(k, y + 1);
  }
  Eigen::VectorXd beta = config.beta;
  if (beta.size() == 0) beta = Eigen::VectorXd::Ones(k);
  if (beta.size() < k)
    throw DimensionMismatch("need one class weight per observed class");
  k = static_cast<int>(beta.size());
  for (Eigen::Index c = 0; c < beta.size(); ++c)
    if (!(beta(c) > 0.0)) throw ValidationError("class weights must be positive");

  RewardMatrix rewards;
  rewards.sense = Sense::maximize;
  rewards.values = Eigen::MatrixXd::Zero(n, k + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    rewards.values(i, y) = beta(y);
    rewards.values(i, k) = config.alpha;
  }
  for (int c = 0; c < k; ++c) rewards.actions.names.push_back("class" + std::to_string(c));
  rewards.actions.names.push_back("reject");
  rewards.actions.rejections = 1;
  rewards.actions.weights.resize(0, 0);

  return fit_policy_tree(rewards, scores, config.tree, std::move(feature_names));
}

PolicyVote combine_prescriptions(const std::vector<PolicyVote>& votes) {
  if (votes.size() != 2)
    throw UnsupportedArity("prescription combination is defined for exactly two policies, got " +
                           std::to_string(votes.size()));
  const PolicyVote& one = votes[0];  // votes for class 1
  const PolicyVote& zero = votes[1];  // votes for class 0
  for (const PolicyVote& v : votes)
    if (!v.reject && v.label != 0 && v.label != 1)
      throw ValidationError("combined policies must be binary");

  if (!one.reject && one.label == 1 && (zero.reject || zero.label == 1)) return vote_class(1);
  if (!zero.reject && zero.label == 0 && (one.reject || one.label == 0)) return vote_class(0);
  return vote_reject();
}

}  // namespace op2t

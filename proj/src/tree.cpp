#include "op2t/tree.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>
#include <utility>

#include <nlohmann/json.hpp>

#include "op2t/rng.hpp"

namespace op2t {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double rel_tol(double scale) { return 1e-9 * (1.0 + std::abs(scale)); }

int require_feature(const TreeNode& node, Eigen::Index d) {
  if (node.feature < 0 || node.feature >= d)
    throw DimensionMismatch("tree references feature " + std::to_string(node.feature) +
                            " but the data has " + std::to_string(d) + " columns");
  return node.feature;
}

}  // namespace

int TreeSkeleton::route(const Eigen::RowVectorXd& row) const {
  if (root < 0) throw ValidationError("cannot route through an empty tree");
  int id = root;
  while (!nodes[static_cast<std::size_t>(id)].is_leaf) {
    const TreeNode& nd = nodes[static_cast<std::size_t>(id)];
    require_feature(nd, row.size());
    id = row(nd.feature) < nd.threshold ? nd.left : nd.right;
  }
  return id;
}

namespace {

int depth_rec(const TreeSkeleton& t, int id) {
  const TreeNode& nd = t.nodes[static_cast<std::size_t>(id)];
  if (nd.is_leaf) return 0;
  return 1 + std::max(depth_rec(t, nd.left), depth_rec(t, nd.right));
}

void count_rec(const TreeSkeleton& t, int id, int& splits, int& leaves) {
  const TreeNode& nd = t.nodes[static_cast<std::size_t>(id)];
  if (nd.is_leaf) {
    ++leaves;
    return;
  }
  ++splits;
  count_rec(t, nd.left, splits, leaves);
  count_rec(t, nd.right, splits, leaves);
}

bool same_rec(const TreeSkeleton& a, int ia, const TreeSkeleton& b, int ib) {
  const TreeNode& na = a.nodes[static_cast<std::size_t>(ia)];
  const TreeNode& nb = b.nodes[static_cast<std::size_t>(ib)];
  if (na.is_leaf != nb.is_leaf) return false;
  if (na.is_leaf) return na.action == nb.action;
  if (na.feature != nb.feature || na.threshold != nb.threshold) return false;
  return same_rec(a, na.left, b, nb.left) && same_rec(a, na.right, b, nb.right);
}

int compact_rec(const TreeSkeleton& src, int id, TreeSkeleton& dst) {
  const TreeNode& nd = src.nodes[static_cast<std::size_t>(id)];
  const int out = static_cast<int>(dst.nodes.size());
  dst.nodes.push_back(nd);
  if (!nd.is_leaf) {
    const int l = compact_rec(src, nd.left, dst);
    const int r = compact_rec(src, nd.right, dst);
    dst.nodes[static_cast<std::size_t>(out)].left = l;
    dst.nodes[static_cast<std::size_t>(out)].right = r;
  }
  return out;
}

// Preorder renumbering; drops nodes that are no longer reachable.
TreeSkeleton compact(const TreeSkeleton& t) {
  TreeSkeleton out;
  if (t.root < 0) return out;
  out.root = 0;
  compact_rec(t, t.root, out);
  return out;
}

}  // namespace

int TreeSkeleton::depth() const { return root < 0 ? -1 : depth_rec(*this, root); }

int TreeSkeleton::num_splits() const {
  if (root < 0) return 0;
  int s = 0, l = 0;
  count_rec(*this, root, s, l);
  return s;
}

int TreeSkeleton::num_leaves() const {
  if (root < 0) return 0;
  int s = 0, l = 0;
  count_rec(*this, root, s, l);
  return l;
}

bool same_structure(const TreeSkeleton& a, const TreeSkeleton& b) {
  if ((a.root < 0) != (b.root < 0)) return false;
  if (a.root < 0) return true;
  return same_rec(a, a.root, b, b.root);
}

// ---------------------------------------------------------------------------
// Local search internals. All optimization below works on S, the rewards
// brought into maximize form (negated when the native sense is minimize);
// penalties subtract per split.

namespace {

struct Instance {
  const Eigen::MatrixXd& S;  // n x A, maximize form
  const Eigen::MatrixXd& X;  // n x d
  double lambda = 0.0;
  int max_depth = 0;
  int min_leaf = 1;
  int quantiles = 0;

  Eigen::Index n() const { return S.rows(); }
  int n_actions() const { return static_cast<int>(S.cols()); }
  int dims() const { return static_cast<int>(X.cols()); }
};

std::pair<int, double> best_action(const std::vector<int>& rows, const Eigen::MatrixXd& S) {
  const int a_count = static_cast<int>(S.cols());
  std::vector<double> sums(static_cast<std::size_t>(a_count), 0.0);
  for (int r : rows)
    for (int a = 0; a < a_count; ++a) sums[static_cast<std::size_t>(a)] += S(r, a);
  int best = 0;
  for (int a = 1; a < a_count; ++a)
    if (sums[static_cast<std::size_t>(a)] > sums[static_cast<std::size_t>(best)]) best = a;
  return {best, sums[static_cast<std::size_t>(best)]};
}

// Rows sorted by feature value (row index breaks ties for determinism).
std::vector<int> sorted_rows(const std::vector<int>& rows, const Eigen::MatrixXd& X, int f) {
  std::vector<int> order = rows;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (X(a, f) != X(b, f)) return X(a, f) < X(b, f);
    return a < b;
  });
  return order;
}

struct Cut {
  int pos;  // number of rows routed left
  double threshold;
};

// Midpoints between consecutive distinct values, optionally thinned to the
// cuts nearest q evenly spaced node-local quantile positions.
std::vector<Cut> cuts_for(const std::vector<int>& order, const Eigen::MatrixXd& X, int f,
                          int quantiles) {
  std::vector<Cut> cuts;
  const int nv = static_cast<int>(order.size());
  for (int i = 1; i < nv; ++i) {
    const double lo = X(order[static_cast<std::size_t>(i - 1)], f);
    const double hi = X(order[static_cast<std::size_t>(i)], f);
    if (lo < hi) cuts.push_back({i, lo + 0.5 * (hi - lo)});
  }
  if (quantiles > 0 && static_cast<int>(cuts.size()) > quantiles) {
    std::vector<Cut> picked;
    for (int j = 1; j <= quantiles; ++j) {
      const double target = static_cast<double>(j) * nv / (quantiles + 1);
      std::size_t lo = 0, hi = cuts.size();
      while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (cuts[mid].pos < target)
          lo = mid + 1;
        else
          hi = mid;
      }
      std::size_t pick = std::min(lo, cuts.size() - 1);
      if (pick > 0 &&
          std::abs(cuts[pick - 1].pos - target) <= std::abs(cuts[pick].pos - target))
        pick = pick - 1;
      if (picked.empty() || picked.back().pos != cuts[pick].pos) picked.push_back(cuts[pick]);
    }
    cuts = std::move(picked);
  }
  return cuts;
}

struct SplitChoice {
  bool ok = false;
  double total = kNegInf;
  int feature = -1;
  double threshold = 0.0;
  int action_left = 0;
  int action_right = 0;
};

// Best single split of `rows` into two leaves. Strictly-greater updates over
// ascending (feature, threshold) iteration give lowest-feature then
// lowest-threshold tie-breaking for free.
SplitChoice best_single_split(const std::vector<int>& rows, const Instance& ins) {
  SplitChoice best;
  const int nv = static_cast<int>(rows.size());
  if (nv < 2 * ins.min_leaf) return best;
  const int a_count = ins.n_actions();

  std::vector<double> totals(static_cast<std::size_t>(a_count), 0.0);
  for (int r : rows)
    for (int a = 0; a < a_count; ++a) totals[static_cast<std::size_t>(a)] += ins.S(r, a);

  std::vector<double> left(static_cast<std::size_t>(a_count));
  for (int f = 0; f < ins.dims(); ++f) {
    const std::vector<int> order = sorted_rows(rows, ins.X, f);
    const std::vector<Cut> cuts = cuts_for(order, ins.X, f, ins.quantiles);
    if (cuts.empty()) continue;
    std::fill(left.begin(), left.end(), 0.0);
    int consumed = 0;
    for (const Cut& cut : cuts) {
      while (consumed < cut.pos) {
        const int r = order[static_cast<std::size_t>(consumed)];
        for (int a = 0; a < a_count; ++a) left[static_cast<std::size_t>(a)] += ins.S(r, a);
        ++consumed;
      }
      if (cut.pos < ins.min_leaf || nv - cut.pos < ins.min_leaf) continue;
      int bl = 0, br = 0;
      double vl = left[0], vr = totals[0] - left[0];
      for (int a = 1; a < a_count; ++a) {
        const double l = left[static_cast<std::size_t>(a)];
        const double r = totals[static_cast<std::size_t>(a)] - l;
        if (l > vl) {
          vl = l;
          bl = a;
        }
        if (r > vr) {
          vr = r;
          br = a;
        }
      }
      const double score = vl + vr;
      if (score > best.total) {
        best = {true, score, f, cut.threshold, bl, br};
      }
    }
  }
  return best;
}

// Reward total of the subtree rooted at `id` over `rows`, with leaf actions
// re-optimized (and stored when set_actions). Also reports subtree splits.
double eval_subtree(TreeSkeleton& t, int id, const std::vector<int>& rows, const Instance& ins,
                    bool set_actions, int* splits_out) {
  TreeNode& nd = t.nodes[static_cast<std::size_t>(id)];
  if (nd.is_leaf) {
    if (splits_out) *splits_out = 0;
    auto [a, total] = best_action(rows, ins.S);
    if (set_actions) nd.action = a;
    return total;
  }
  std::vector<int> lrows, rrows;
  lrows.reserve(rows.size());
  rrows.reserve(rows.size());
  for (int r : rows)
    (ins.X(r, nd.feature) < nd.threshold ? lrows : rrows).push_back(r);
  int sl = 0, sr = 0;
  const double vl = eval_subtree(t, nd.left, lrows, ins, set_actions, &sl);
  const double vr = eval_subtree(t, nd.right, rrows, ins, set_actions, &sr);
  if (splits_out) *splits_out = 1 + sl + sr;
  return vl + vr;
}

void collect_leaf_ids(const TreeSkeleton& t, int id, std::vector<int>& out) {
  const TreeNode& nd = t.nodes[static_cast<std::size_t>(id)];
  if (nd.is_leaf) {
    out.push_back(id);
    return;
  }
  collect_leaf_ids(t, nd.left, out);
  collect_leaf_ids(t, nd.right, out);
}

int route_from(const TreeSkeleton& t, int id, const Eigen::MatrixXd& X, int row) {
  while (!t.nodes[static_cast<std::size_t>(id)].is_leaf) {
    const TreeNode& nd = t.nodes[static_cast<std::size_t>(id)];
    id = X(row, nd.feature) < nd.threshold ? nd.left : nd.right;
  }
  return id;
}

struct ReplaceChoice {
  bool ok = false;
  double total = kNegInf;
  int feature = -1;
  double threshold = 0.0;
};

// Best replacement split at internal node `v`, keeping both child subtrees.
// A single pass per feature moves rows one by one from their right-subtree
// leaf to their left-subtree leaf while maintaining per-leaf action sums,
// the sum of per-leaf maxima, and the count of min-leaf violations.
ReplaceChoice best_replace(const TreeSkeleton& t, int v, const std::vector<int>& rows,
                           const Instance& ins) {
  ReplaceChoice best;
  const TreeNode& nd = t.nodes[static_cast<std::size_t>(v)];
  std::vector<int> lleaves, rleaves;
  collect_leaf_ids(t, nd.left, lleaves);
  collect_leaf_ids(t, nd.right, rleaves);
  const int n_left = static_cast<int>(lleaves.size());
  const int n_slots = n_left + static_cast<int>(rleaves.size());
  std::vector<int> slot_of(t.nodes.size(), -1);
  for (int s = 0; s < n_left; ++s) slot_of[static_cast<std::size_t>(lleaves[s])] = s;
  for (std::size_t s = 0; s < rleaves.size(); ++s)
    slot_of[static_cast<std::size_t>(rleaves[s])] = n_left + static_cast<int>(s);

  const int nv = static_cast<int>(rows.size());
  const int a_count = ins.n_actions();
  std::vector<int> slot_l(static_cast<std::size_t>(nv)), slot_r(static_cast<std::size_t>(nv));
  std::vector<int> local(ins.n(), -1);
  for (int i = 0; i < nv; ++i) {
    const int r = rows[static_cast<std::size_t>(i)];
    local[r] = i;
    slot_l[static_cast<std::size_t>(i)] = slot_of[static_cast<std::size_t>(
        route_from(t, nd.left, ins.X, r))];
    slot_r[static_cast<std::size_t>(i)] = slot_of[static_cast<std::size_t>(
        route_from(t, nd.right, ins.X, r))];
  }

  std::vector<double> sums(static_cast<std::size_t>(n_slots * a_count));
  std::vector<double> slot_best(static_cast<std::size_t>(n_slots));
  std::vector<int> cnt(static_cast<std::size_t>(n_slots));

  auto recompute_slot = [&](int s) {
    if (cnt[static_cast<std::size_t>(s)] == 0) {
      slot_best[static_cast<std::size_t>(s)] = 0.0;
      return;
    }
    const double* base = sums.data() + static_cast<std::size_t>(s * a_count);
    double m = base[0];
    for (int a = 1; a < a_count; ++a) m = std::max(m, base[a]);
    slot_best[static_cast<std::size_t>(s)] = m;
  };

  for (int f = 0; f < ins.dims(); ++f) {
    const std::vector<int> order = sorted_rows(rows, ins.X, f);
    const std::vector<Cut> cuts = cuts_for(order, ins.X, f, ins.quantiles);
    if (cuts.empty()) continue;

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(cnt.begin(), cnt.end(), 0);
    for (int i = 0; i < nv; ++i) {
      const int r = rows[static_cast<std::size_t>(i)];
      const int s = slot_r[static_cast<std::size_t>(i)];
      double* base = sums.data() + static_cast<std::size_t>(s * a_count);
      for (int a = 0; a < a_count; ++a) base[a] += ins.S(r, a);
      ++cnt[static_cast<std::size_t>(s)];
    }
    double total_best = 0.0;
    int violations = 0;
    for (int s = 0; s < n_slots; ++s) {
      recompute_slot(s);
      total_best += slot_best[static_cast<std::size_t>(s)];
      if (cnt[static_cast<std::size_t>(s)] < ins.min_leaf) ++violations;
    }

    auto move_row = [&](int r) {
      const int i = local[r];
      const int from = slot_r[static_cast<std::size_t>(i)];
      const int to = slot_l[static_cast<std::size_t>(i)];
      for (const int s : {from, to}) total_best -= slot_best[static_cast<std::size_t>(s)];
      double* fb = sums.data() + static_cast<std::size_t>(from * a_count);
      double* tb = sums.data() + static_cast<std::size_t>(to * a_count);
      for (int a = 0; a < a_count; ++a) {
        fb[a] -= ins.S(r, a);
        tb[a] += ins.S(r, a);
      }
      if (--cnt[static_cast<std::size_t>(from)] == ins.min_leaf - 1) ++violations;
      if (++cnt[static_cast<std::size_t>(to)] == ins.min_leaf) --violations;
      recompute_slot(from);
      recompute_slot(to);
      for (const int s : {from, to}) total_best += slot_best[static_cast<std::size_t>(s)];
    };

    int consumed = 0;
    for (const Cut& cut : cuts) {
      while (consumed < cut.pos) {
        move_row(order[static_cast<std::size_t>(consumed)]);
        ++consumed;
      }
      if (violations > 0) continue;
      if (total_best > best.total) best = {true, total_best, f, cut.threshold};
    }
  }
  return best;
}

struct NodeCtx {
  bool present = false;
  int depth = 0;
  std::vector<int> rows;
};

void collect_rec(const TreeSkeleton& t, int id, int depth, std::vector<int> rows,
                 const Eigen::MatrixXd& X, std::vector<NodeCtx>& out) {
  const TreeNode& nd = t.nodes[static_cast<std::size_t>(id)];
  NodeCtx& ctx = out[static_cast<std::size_t>(id)];
  ctx.present = true;
  ctx.depth = depth;
  if (nd.is_leaf) {
    ctx.rows = std::move(rows);
    return;
  }
  std::vector<int> lrows, rrows;
  for (int r : rows)
    (X(r, nd.feature) < nd.threshold ? lrows : rrows).push_back(r);
  ctx.rows = std::move(rows);
  collect_rec(t, nd.left, depth + 1, std::move(lrows), X, out);
  collect_rec(t, nd.right, depth + 1, std::move(rrows), X, out);
}

std::vector<NodeCtx> collect(const TreeSkeleton& t, const std::vector<int>& all_rows,
                             const Eigen::MatrixXd& X) {
  std::vector<NodeCtx> out(t.nodes.size());
  collect_rec(t, t.root, 0, all_rows, X, out);
  return out;
}

int alloc_leaf(TreeSkeleton& t, int action) {
  TreeNode nd;
  nd.is_leaf = true;
  nd.action = action;
  t.nodes.push_back(nd);
  return static_cast<int>(t.nodes.size()) - 1;
}

// One full pass over the nodes in random order. Returns whether any move
// was applied. A move is accepted only if it improves the penalized
// objective beyond a relative tolerance, or matches it with fewer splits.
bool sweep_once(TreeSkeleton& t, const Instance& ins, Rng& rng,
                const std::vector<int>& all_rows) {
  std::vector<NodeCtx> ctx = collect(t, all_rows, ins.X);
  std::vector<int> order;
  for (std::size_t id = 0; id < ctx.size(); ++id)
    if (ctx[id].present) order.push_back(static_cast<int>(id));
  rng.shuffle(order);

  bool improved = false;
  for (int id : order) {
    if (static_cast<std::size_t>(id) >= ctx.size() || !ctx[static_cast<std::size_t>(id)].present)
      continue;
    const NodeCtx& c = ctx[static_cast<std::size_t>(id)];
    const bool node_is_leaf = t.nodes[static_cast<std::size_t>(id)].is_leaf;

    int cur_splits = 0;
    const double cur_total = eval_subtree(t, id, c.rows, ins, false, &cur_splits);
    const double cur_score = cur_total - ins.lambda * cur_splits;
    const double tol = rel_tol(cur_score);

    bool applied = false;
    if (node_is_leaf) {
      if (c.depth < ins.max_depth) {
        const SplitChoice sc = best_single_split(c.rows, ins);
        if (sc.ok && sc.total - ins.lambda > cur_score + tol) {
          const int left = alloc_leaf(t, sc.action_left);
          const int right = alloc_leaf(t, sc.action_right);
          TreeNode& mut = t.nodes[static_cast<std::size_t>(id)];
          mut.is_leaf = false;
          mut.feature = sc.feature;
          mut.threshold = sc.threshold;
          mut.left = left;
          mut.right = right;
          applied = true;
        }
      }
    } else {
      auto [leaf_action, leaf_total] = best_action(c.rows, ins.S);
      const ReplaceChoice rc = best_replace(t, id, c.rows, ins);
      const double prune_score = leaf_total;
      const double replace_score = rc.ok ? rc.total - ins.lambda * cur_splits : kNegInf;

      // Prune wins ties against replace: fewer splits at equal objective.
      const bool prune_better =
          prune_score >= replace_score - rel_tol(replace_score) || !rc.ok;
      if (prune_better &&
          (prune_score > cur_score + tol || prune_score >= cur_score - tol)) {
        // cur_splits >= 1, so equal-score pruning always strictly shrinks.
        TreeNode& mut = t.nodes[static_cast<std::size_t>(id)];
        mut.is_leaf = true;
        mut.feature = -1;
        mut.left = mut.right = -1;
        mut.action = leaf_action;
        applied = true;
      } else if (rc.ok && replace_score > cur_score + tol) {
        TreeNode& mut = t.nodes[static_cast<std::size_t>(id)];
        mut.feature = rc.feature;
        mut.threshold = rc.threshold;
        eval_subtree(t, id, c.rows, ins, true, nullptr);
        applied = true;
      }
    }

    if (applied) {
      improved = true;
      ctx = collect(t, all_rows, ins.X);
    }
  }
  return improved;
}

void greedy_grow(TreeSkeleton& t, int id, const std::vector<int>& rows, int depth,
                 const Instance& ins) {
  auto [action, leaf_total] = best_action(rows, ins.S);
  t.nodes[static_cast<std::size_t>(id)].action = action;
  if (depth >= ins.max_depth) return;
  const SplitChoice sc = best_single_split(rows, ins);
  if (!sc.ok) return;
  if (sc.total - ins.lambda <= leaf_total + rel_tol(leaf_total)) return;

  const int left = alloc_leaf(t, sc.action_left);
  const int right = alloc_leaf(t, sc.action_right);
  TreeNode& nd = t.nodes[static_cast<std::size_t>(id)];
  nd.is_leaf = false;
  nd.feature = sc.feature;
  nd.threshold = sc.threshold;
  nd.left = left;
  nd.right = right;

  std::vector<int> lrows, rrows;
  for (int r : rows)
    (ins.X(r, sc.feature) < sc.threshold ? lrows : rrows).push_back(r);
  greedy_grow(t, t.nodes[static_cast<std::size_t>(id)].left, lrows, depth + 1, ins);
  greedy_grow(t, t.nodes[static_cast<std::size_t>(id)].right, rrows, depth + 1, ins);
}

struct RootCut {
  int feature;
  double threshold;
};

// Feasible root splits over all rows, feature-major then threshold-ascending.
std::vector<RootCut> root_candidates(const Instance& ins, const std::vector<int>& all_rows) {
  std::vector<RootCut> out;
  const int nv = static_cast<int>(all_rows.size());
  for (int f = 0; f < ins.dims(); ++f) {
    const std::vector<int> order = sorted_rows(all_rows, ins.X, f);
    for (const Cut& c : cuts_for(order, ins.X, f, ins.quantiles))
      if (c.pos >= ins.min_leaf && nv - c.pos >= ins.min_leaf)
        out.push_back({f, c.threshold});
  }
  return out;
}

struct RestartResult {
  double objective = kNegInf;
  int splits = 0;
  TreeSkeleton tree;
  std::vector<double> key;  // preorder encoding for the final tie-break
};

std::vector<double> structure_key(const TreeSkeleton& t) {
  std::vector<double> key;
  if (t.root < 0) return key;
  std::vector<int> stack{t.root};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    const TreeNode& nd = t.nodes[static_cast<std::size_t>(id)];
    if (nd.is_leaf) {
      key.push_back(1.0);
      key.push_back(static_cast<double>(nd.action));
    } else {
      key.push_back(0.0);
      key.push_back(static_cast<double>(nd.feature));
      key.push_back(nd.threshold);
      stack.push_back(nd.right);
      stack.push_back(nd.left);
    }
  }
  return key;
}

RestartResult run_restart(const Instance& ins, std::uint64_t base_seed, int restart,
                          const std::vector<RootCut>& roots, std::vector<double>* trace) {
  Rng rng = Rng(base_seed).fork(static_cast<std::uint64_t>(restart));
  std::vector<int> all_rows(static_cast<std::size_t>(ins.n()));
  std::iota(all_rows.begin(), all_rows.end(), 0);

  // Restart 0 descends from the pure greedy tree. Every later restart pins
  // the root to one candidate split (cycling through a seeded shuffle of all
  // of them) and completes the children greedily, so the merged search
  // explores every root basin once restarts exceed the candidate count.
  TreeSkeleton t;
  t.root = alloc_leaf(t, 0);
  if (restart == 0 || roots.empty() || ins.max_depth < 1) {
    greedy_grow(t, t.root, all_rows, 0, ins);
  } else {
    const RootCut rc = roots[static_cast<std::size_t>(restart - 1) % roots.size()];
    const int left = alloc_leaf(t, 0);
    const int right = alloc_leaf(t, 0);
    TreeNode& nd = t.nodes[static_cast<std::size_t>(t.root)];
    nd.is_leaf = false;
    nd.feature = rc.feature;
    nd.threshold = rc.threshold;
    nd.left = left;
    nd.right = right;
    std::vector<int> lrows, rrows;
    for (int r : all_rows)
      (ins.X(r, rc.feature) < rc.threshold ? lrows : rrows).push_back(r);
    greedy_grow(t, left, lrows, 1, ins);
    greedy_grow(t, right, rrows, 1, ins);
  }

  int splits = 0;
  double total = eval_subtree(t, t.root, all_rows, ins, true, &splits);
  if (trace) trace->push_back(total - ins.lambda * splits);

  for (int sweepi = 0; sweepi < 100; ++sweepi) {
    const bool improved = sweep_once(t, ins, rng, all_rows);
    total = eval_subtree(t, t.root, all_rows, ins, true, &splits);
    if (trace) trace->push_back(total - ins.lambda * splits);
    if (!improved) break;
  }

  RestartResult res;
  res.tree = compact(t);
  // Row-order total, independent of tree shape: restarts that end on the
  // same policy through different structures tie bit-for-bit, so the
  // fewer-splits tie-break can actually fire.
  double flat = 0.0;
  for (int r = 0; r < ins.n(); ++r)
    flat += ins.S(r, res.tree.nodes[static_cast<std::size_t>(route_from(
                         res.tree, res.tree.root, ins.X, r))].action);
  res.objective = flat - ins.lambda * splits;
  res.splits = splits;
  res.key = structure_key(res.tree);
  return res;
}

int worker_count() {
  if (const char* env = std::getenv("OP2T_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

bool better_restart(const RestartResult& a, const RestartResult& b) {
  if (a.objective != b.objective) return a.objective > b.objective;
  if (a.splits != b.splits) return a.splits < b.splits;
  return a.key < b.key;
}

void check_fit_inputs(const RewardMatrix& rewards, const Eigen::MatrixXd& features,
                      const FitConfig& config) {
  if (rewards.n() != features.rows())
    throw DimensionMismatch("reward rows (" + std::to_string(rewards.n()) +
                            ") do not match feature rows (" + std::to_string(features.rows()) +
                            ")");
  if (rewards.n_actions() < 1) throw ValidationError("reward matrix has no actions");
  if (rewards.n() < 1) throw TooFewSamples("cannot fit on an empty reward matrix");
  if (!features.allFinite()) throw NonFinite(-1, -1, "features contain non-finite values");
  if (!rewards.values.allFinite()) throw NonFinite(-1, -1, "rewards contain non-finite values");
  if (config.max_depth < 0) throw ValidationError("max_depth must be non-negative");
  if (config.min_leaf < 1) throw ValidationError("min_leaf must be at least 1");
  if (config.restarts < 1) throw ValidationError("restarts must be at least 1");
  if (config.quantiles < 0) throw ValidationError("quantiles must be non-negative");
  if (config.complexity_penalty &&
      !(*config.complexity_penalty >= 0.0 && std::isfinite(*config.complexity_penalty)))
    throw ValidationError("complexity penalty must be a finite non-negative number");
  if (rewards.n() < config.min_leaf)
    throw TooFewSamples("need at least min_leaf = " + std::to_string(config.min_leaf) +
                        " rows, got " + std::to_string(rewards.n()));
}

std::vector<std::string> default_feature_names(Eigen::Index d) {
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < d; ++j) names.push_back("f" + std::to_string(j));
  return names;
}

RewardMatrix subset_rewards(const RewardMatrix& r, const std::vector<Eigen::Index>& idx) {
  RewardMatrix out;
  out.values = take_rows(r.values, idx);
  out.sense = r.sense;
  out.actions = r.actions;
  return out;
}

PolicyTree fit_with_auto_penalty(const RewardMatrix& rewards, const Eigen::MatrixXd& features,
                                 const FitConfig& config, std::vector<std::string> feature_names,
                                 FitTrace* trace);

}  // namespace

PolicyTree fit_policy_tree(const RewardMatrix& rewards, const Eigen::MatrixXd& features,
                           const FitConfig& config, std::vector<std::string> feature_names,
                           FitTrace* trace) {
  check_fit_inputs(rewards, features, config);
  if (!config.complexity_penalty)
    return fit_with_auto_penalty(rewards, features, config, std::move(feature_names), trace);

  const Eigen::MatrixXd S =
      rewards.sense == Sense::maximize ? rewards.values : (-rewards.values).eval();
  Instance ins{S, features, config.complexity_penalty.value(),
               config.max_depth, config.min_leaf, config.quantiles};
  const int restarts = config.restarts;
  std::vector<RestartResult> results(static_cast<std::size_t>(restarts));
  std::vector<std::vector<double>> traces(static_cast<std::size_t>(restarts));

  std::vector<int> all_rows(static_cast<std::size_t>(ins.n()));
  std::iota(all_rows.begin(), all_rows.end(), 0);
  std::vector<RootCut> roots = root_candidates(ins, all_rows);
  Rng root_rng = Rng(config.seed).fork(0x726f6f74ULL);  // distinct init stream
  root_rng.shuffle(roots);

  const int workers = std::min(worker_count(), restarts);
  if (workers <= 1) {
    for (int r = 0; r < restarts; ++r)
      results[static_cast<std::size_t>(r)] = run_restart(
          ins, config.seed, r, roots, trace ? &traces[static_cast<std::size_t>(r)] : nullptr);
  } else {
    std::atomic<int> next{0};
    auto work = [&]() {
      for (;;) {
        const int r = next.fetch_add(1);
        if (r >= restarts) return;
        results[static_cast<std::size_t>(r)] = run_restart(
            ins, config.seed, r, roots, trace ? &traces[static_cast<std::size_t>(r)] : nullptr);
      }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& th : pool) th.join();
  }

  std::size_t best = 0;
  for (std::size_t r = 1; r < results.size(); ++r)
    if (better_restart(results[r], results[best])) best = r;

  if (trace) trace->sweep_objectives = std::move(traces);

  PolicyTree out;
  out.tree = std::move(results[best].tree);
  out.actions = rewards.actions;
  out.feature_names = feature_names.empty() ? default_feature_names(features.cols())
                                            : std::move(feature_names);
  return out;
}

namespace {

PolicyTree fit_with_auto_penalty(const RewardMatrix& rewards, const Eigen::MatrixXd& features,
                                 const FitConfig& config, std::vector<std::string> feature_names,
                                 FitTrace* trace) {
  const Eigen::Index n = rewards.n();
  FitConfig concrete = config;
  concrete.complexity_penalty = 0.0;

  const Eigen::Index n_train = (3 * n) / 4;
  const Eigen::Index n_val = n - n_train;
  if (n_train < std::max<Eigen::Index>(config.min_leaf, 1) || n_val < 1)
    return fit_policy_tree(rewards, features, concrete, std::move(feature_names), trace);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng shuffler = Rng(config.seed).fork(0x4155544fULL);
  shuffler.shuffle(order);
  const std::vector<Eigen::Index> train_idx(order.begin(), order.begin() + n_train);
  const std::vector<Eigen::Index> val_idx(order.begin() + n_train, order.end());

  const RewardMatrix train_r = subset_rewards(rewards, train_idx);
  const RewardMatrix val_r = subset_rewards(rewards, val_idx);
  const Eigen::MatrixXd train_x = take_rows(features, train_idx);
  const Eigen::MatrixXd val_x = take_rows(features, val_idx);

  const PolicyTree full = fit_policy_tree(train_r, train_x, concrete, feature_names, nullptr);
  const std::vector<PrunePoint> path = prune_path(full, train_r, train_x, val_r, val_x);
  concrete.complexity_penalty = path[select_prune_point(path, rewards.sense)].lambda;
  return fit_policy_tree(rewards, features, concrete, std::move(feature_names), trace);
}

}  // namespace

int prescribe(const PolicyTree& tree, const Eigen::RowVectorXd& row) {
  const int leaf = tree.tree.route(row);
  return tree.tree.nodes[static_cast<std::size_t>(leaf)].action;
}

std::vector<int> prescribe_all(const PolicyTree& tree, const Eigen::MatrixXd& features) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index i = 0; i < features.rows(); ++i)
    out.push_back(prescribe(tree, features.row(i)));
  return out;
}

EvalSummary evaluate_policy(const PolicyTree& tree, const RewardMatrix& rewards,
                            const Eigen::MatrixXd& features) {
  if (rewards.n() != features.rows())
    throw DimensionMismatch("reward rows do not match feature rows");
  if (static_cast<int>(tree.actions.names.size()) != rewards.n_actions())
    throw DimensionMismatch("tree action count does not match reward columns");
  if (!tree.actions.names.empty() && !rewards.actions.names.empty() &&
      tree.actions.names != rewards.actions.names)
    throw ValidationError("tree and reward matrix disagree on action names");

  EvalSummary summary;
  summary.action_counts.assign(static_cast<std::size_t>(rewards.n_actions()), 0);
  Eigen::Index rejected = 0;
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const int a = prescribe(tree, features.row(i));
    if (a < 0 || a >= rewards.n_actions())
      throw ValidationError("tree prescribes action " + std::to_string(a) +
                            " outside the reward matrix");
    summary.total_reward += rewards.values(i, a);
    ++summary.action_counts[static_cast<std::size_t>(a)];
    if (rewards.actions.is_rejection(a)) ++rejected;
  }
  summary.mean_reward = summary.total_reward / static_cast<double>(features.rows());
  summary.reject_fraction =
      static_cast<double>(rejected) / static_cast<double>(features.rows());
  return summary;
}

double objective_value(const PolicyTree& tree, const RewardMatrix& rewards,
                       const Eigen::MatrixXd& features, double penalty) {
  const EvalSummary s = evaluate_policy(tree, rewards, features);
  const double signed_penalty = rewards.sense == Sense::maximize ? -penalty : penalty;
  return s.total_reward + signed_penalty * tree.tree.num_splits();
}

// ---------------------------------------------------------------------------
// Exhaustive enumeration.

namespace {

struct ExCand {
  bool ok = false;
  double obj = kNegInf;
  int splits = 0;
  std::vector<TreeNode> pre;          // preorder, indices into this vector
  std::vector<double> key_splits;     // preorder (feature, threshold) pairs
  std::vector<double> key_actions;    // preorder leaf actions
};

bool better_cand(const ExCand& a, const ExCand& b) {
  if (!b.ok) return a.ok;
  if (!a.ok) return false;
  if (a.obj != b.obj) return a.obj > b.obj;
  if (a.splits != b.splits) return a.splits < b.splits;
  if (a.key_splits != b.key_splits) return a.key_splits < b.key_splits;
  return a.key_actions < b.key_actions;
}

struct ExInstance {
  const Eigen::MatrixXd& S;
  const Eigen::MatrixXd& X;
  double lambda;
  int min_leaf;
  std::vector<std::vector<double>> cuts;  // global midpoints per feature
};

ExCand ex_best(const ExInstance& ins, const std::vector<int>& rows, int budget) {
  ExCand best;
  if (static_cast<int>(rows.size()) >= ins.min_leaf) {
    auto [a, total] = best_action(rows, ins.S);
    best.ok = true;
    best.obj = total;
    best.splits = 0;
    TreeNode leaf;
    leaf.is_leaf = true;
    leaf.action = a;
    best.pre = {leaf};
    best.key_actions = {static_cast<double>(a)};
  }
  if (budget <= 0 || static_cast<int>(rows.size()) < 2 * ins.min_leaf) return best;

  std::vector<int> lrows, rrows;
  for (int f = 0; f < static_cast<int>(ins.cuts.size()); ++f) {
    for (const double threshold : ins.cuts[static_cast<std::size_t>(f)]) {
      lrows.clear();
      rrows.clear();
      for (int r : rows)
        (ins.X(r, f) < threshold ? lrows : rrows).push_back(r);
      if (static_cast<int>(lrows.size()) < ins.min_leaf ||
          static_cast<int>(rrows.size()) < ins.min_leaf)
        continue;
      const ExCand left = ex_best(ins, lrows, budget - 1);
      if (!left.ok) continue;
      const ExCand right = ex_best(ins, rrows, budget - 1);
      if (!right.ok) continue;

      ExCand combo;
      combo.ok = true;
      combo.obj = left.obj + right.obj - ins.lambda;
      combo.splits = left.splits + right.splits + 1;
      TreeNode rootnd;
      rootnd.is_leaf = false;
      rootnd.feature = f;
      rootnd.threshold = threshold;
      rootnd.left = 1;
      rootnd.right = 1 + static_cast<int>(left.pre.size());
      combo.pre.push_back(rootnd);
      for (TreeNode nd : left.pre) {
        if (!nd.is_leaf) {
          nd.left += 1;
          nd.right += 1;
        }
        combo.pre.push_back(nd);
      }
      const int shift = 1 + static_cast<int>(left.pre.size());
      for (TreeNode nd : right.pre) {
        if (!nd.is_leaf) {
          nd.left += shift;
          nd.right += shift;
        }
        combo.pre.push_back(nd);
      }
      combo.key_splits.push_back(static_cast<double>(f));
      combo.key_splits.push_back(threshold);
      combo.key_splits.insert(combo.key_splits.end(), left.key_splits.begin(),
                              left.key_splits.end());
      combo.key_splits.insert(combo.key_splits.end(), right.key_splits.begin(),
                              right.key_splits.end());
      combo.key_actions = left.key_actions;
      combo.key_actions.insert(combo.key_actions.end(), right.key_actions.begin(),
                               right.key_actions.end());
      if (better_cand(combo, best)) best = std::move(combo);
    }
  }
  return best;
}

}  // namespace

PolicyTree exhaustive_policy_tree(const RewardMatrix& rewards, const Eigen::MatrixXd& features,
                                  const FitConfig& config,
                                  std::vector<std::string> feature_names) {
  check_fit_inputs(rewards, features, config);
  if (!config.complexity_penalty)
    throw ValidationError("exhaustive fit requires a concrete complexity penalty");
  if (rewards.n() > 64)
    throw InstanceTooLarge("exhaustive fit is limited to 64 rows, got " +
                           std::to_string(rewards.n()));
  if (features.cols() > 3)
    throw InstanceTooLarge("exhaustive fit is limited to 3 features, got " +
                           std::to_string(features.cols()));
  if (config.max_depth > 2)
    throw InstanceTooLarge("exhaustive fit is limited to depth 2, got " +
                           std::to_string(config.max_depth));

  const Eigen::MatrixXd S =
      rewards.sense == Sense::maximize ? rewards.values : (-rewards.values).eval();
  ExInstance ins{S, features, config.complexity_penalty.value(), config.min_leaf, {}};
  for (Eigen::Index f = 0; f < features.cols(); ++f) {
    std::vector<double> values(static_cast<std::size_t>(features.rows()));
    for (Eigen::Index i = 0; i < features.rows(); ++i) values[static_cast<std::size_t>(i)] =
        features(i, f);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    std::vector<double> cuts;
    for (std::size_t i = 1; i < values.size(); ++i)
      cuts.push_back(values[i - 1] + 0.5 * (values[i] - values[i - 1]));
    if (cuts.size() > 16)
      throw InstanceTooLarge("exhaustive fit is limited to 16 thresholds per feature, got " +
                             std::to_string(cuts.size()) + " on feature " + std::to_string(f));
    ins.cuts.push_back(std::move(cuts));
  }

  std::vector<int> all_rows(static_cast<std::size_t>(rewards.n()));
  std::iota(all_rows.begin(), all_rows.end(), 0);
  const ExCand best = ex_best(ins, all_rows, config.max_depth);
  if (!best.ok) throw TooFewSamples("no feasible tree under the leaf-size constraint");

  PolicyTree out;
  out.tree.nodes = best.pre;
  out.tree.root = 0;
  out.actions = rewards.actions;
  out.feature_names = feature_names.empty() ? default_feature_names(features.cols())
                                            : std::move(feature_names);
  return out;
}

// ---------------------------------------------------------------------------
// Weakest-link pruning.

std::vector<PrunePoint> prune_path(const PolicyTree& tree, const RewardMatrix& train_rewards,
                                   const Eigen::MatrixXd& train_features,
                                   const RewardMatrix& val_rewards,
                                   const Eigen::MatrixXd& val_features) {
  if (train_rewards.n() != train_features.rows() || val_rewards.n() != val_features.rows())
    throw DimensionMismatch("reward rows do not match feature rows");
  if (train_rewards.n_actions() != val_rewards.n_actions())
    throw DimensionMismatch("train and validation rewards disagree on actions");

  const Eigen::MatrixXd S = train_rewards.sense == Sense::maximize
                                ? train_rewards.values
                                : (-train_rewards.values).eval();
  Instance ins{S, train_features, 0.0, tree.tree.depth(), 1, 0};

  PolicyTree current = tree;
  current.tree = compact(current.tree);
  std::vector<int> all_rows(static_cast<std::size_t>(train_rewards.n()));
  std::iota(all_rows.begin(), all_rows.end(), 0);
  eval_subtree(current.tree, current.tree.root, all_rows, ins, true, nullptr);

  auto snapshot = [&](double lambda) {
    PrunePoint p;
    p.lambda = lambda;
    p.tree = current;
    p.tree.tree = compact(p.tree.tree);
    p.num_splits = p.tree.tree.num_splits();
    p.validation_total =
        evaluate_policy(p.tree, val_rewards, val_features).total_reward;
    return p;
  };

  std::vector<PrunePoint> path;
  path.push_back(snapshot(0.0));
  double prev_lambda = 0.0;

  while (current.tree.num_splits() > 0) {
    const std::vector<NodeCtx> ctx = collect(current.tree, all_rows, ins.X);
    double min_gain = std::numeric_limits<double>::infinity();
    std::vector<std::pair<int, double>> gains;
    for (std::size_t id = 0; id < ctx.size(); ++id) {
      if (!ctx[id].present || current.tree.nodes[id].is_leaf) continue;
      int splits = 0;
      const double sub = eval_subtree(current.tree, static_cast<int>(id), ctx[id].rows, ins,
                                      false, &splits);
      const double leaf = best_action(ctx[id].rows, ins.S).second;
      const double gain = (sub - leaf) / static_cast<double>(splits);
      gains.emplace_back(static_cast<int>(id), gain);
      min_gain = std::min(min_gain, gain);
    }

    // Collapse every node attaining the minimum; a collapsed ancestor
    // subsumes its marked descendants.
    const double tol = rel_tol(min_gain);
    for (const auto& [id, gain] : gains) {
      if (gain > min_gain + tol) continue;
      if (!ctx[static_cast<std::size_t>(id)].present) continue;
      TreeNode& nd = current.tree.nodes[static_cast<std::size_t>(id)];
      if (nd.is_leaf) continue;
      bool reachable = true;
      {
        // Guard against nodes orphaned by an earlier collapse this round.
        const std::vector<NodeCtx> now = collect(current.tree, all_rows, ins.X);
        reachable = static_cast<std::size_t>(id) < now.size() &&
                    now[static_cast<std::size_t>(id)].present;
      }
      if (!reachable) continue;
      nd.is_leaf = true;
      nd.feature = -1;
      nd.left = nd.right = -1;
      nd.action = best_action(ctx[static_cast<std::size_t>(id)].rows, ins.S).first;
    }
    current.tree = compact(current.tree);

    prev_lambda = std::max(prev_lambda, min_gain);
    path.push_back(snapshot(prev_lambda));
  }
  return path;
}

std::size_t select_prune_point(const std::vector<PrunePoint>& path, Sense sense) {
  if (path.empty()) throw ValidationError("empty pruning path");
  std::size_t best = 0;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const double v = path[i].validation_total;
    const double b = path[best].validation_total;
    const bool strictly = sense == Sense::maximize ? v > b : v < b;
    if (strictly || (v == b && path[i].num_splits < path[best].num_splits)) best = i;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Serialization.

namespace {

std::string format_threshold(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::string escape_label(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::string tree_to_json(const PolicyTree& tree) {
  const TreeSkeleton t = compact(tree.tree);
  nlohmann::json j;
  j["action_names"] = tree.actions.names;
  j["feature_names"] = tree.feature_names;
  j["root"] = t.root;
  nlohmann::json nodes = nlohmann::json::array();
  for (std::size_t id = 0; id < t.nodes.size(); ++id) {
    const TreeNode& nd = t.nodes[id];
    nlohmann::json entry;
    entry["id"] = id;
    if (nd.is_leaf) {
      entry["leaf"] = {{"action", nd.action}};
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

namespace {

void check_tree_shape(const TreeSkeleton& t) {
  const std::size_t n = t.nodes.size();
  if (t.root < 0 || static_cast<std::size_t>(t.root) >= n)
    throw ParseError("root", "root is not a valid node id");
  std::vector<int> seen(n, 0);
  std::vector<int> stack{t.root};
  std::size_t visited = 0;
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    if (id < 0 || static_cast<std::size_t>(id) >= n)
      throw ParseError("nodes", "child reference " + std::to_string(id) + " is out of range");
    if (seen[static_cast<std::size_t>(id)]++)
      throw ParseError("nodes", "node " + std::to_string(id) +
                                    " is referenced more than once (cycle or shared child)");
    ++visited;
    const TreeNode& nd = t.nodes[static_cast<std::size_t>(id)];
    if (!nd.is_leaf) {
      stack.push_back(nd.left);
      stack.push_back(nd.right);
    }
  }
  if (visited != n)
    throw ParseError("nodes", "tree contains unreachable nodes");
}

}  // namespace

PolicyTree tree_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("json", std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("json", "top level must be an object");
  for (const char* key : {"action_names", "feature_names", "root", "nodes"})
    if (!j.contains(key)) throw ParseError(key, std::string("missing required key '") + key + "'");

  PolicyTree out;
  try {
    out.actions.names = j.at("action_names").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError("action_names", "action_names must be an array of strings");
  }
  try {
    out.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError("feature_names", "feature_names must be an array of strings");
  }
  if (out.actions.names.empty()) throw ParseError("action_names", "at least one action required");
  out.actions.weights.resize(0, 0);

  if (!j.at("nodes").is_array() || j.at("nodes").empty())
    throw ParseError("nodes", "nodes must be a non-empty array");
  const std::size_t count = j.at("nodes").size();
  out.tree.nodes.assign(count, TreeNode{});
  std::vector<bool> defined(count, false);
  for (const nlohmann::json& entry : j.at("nodes")) {
    if (!entry.is_object() || !entry.contains("id") || !entry.at("id").is_number_integer())
      throw ParseError("nodes", "every node needs an integer id");
    const long long id = entry.at("id").get<long long>();
    if (id < 0 || static_cast<std::size_t>(id) >= count)
      throw ParseError("id", "node id " + std::to_string(id) + " is out of range");
    if (defined[static_cast<std::size_t>(id)])
      throw ParseError("id", "duplicate node id " + std::to_string(id));
    defined[static_cast<std::size_t>(id)] = true;
    TreeNode& nd = out.tree.nodes[static_cast<std::size_t>(id)];
    const bool has_split = entry.contains("split");
    const bool has_leaf = entry.contains("leaf");
    if (has_split == has_leaf)
      throw ParseError("nodes", "node " + std::to_string(id) +
                                    " must have exactly one of 'split' or 'leaf'");
    if (has_leaf) {
      const nlohmann::json& leaf = entry.at("leaf");
      if (!leaf.is_object() || !leaf.contains("action") ||
          !leaf.at("action").is_number_integer())
        throw ParseError("leaf", "leaf of node " + std::to_string(id) +
                                     " needs an integer 'action'");
      nd.is_leaf = true;
      nd.action = leaf.at("action").get<int>();
      if (nd.action < 0 || nd.action >= static_cast<int>(out.actions.names.size()))
        throw ParseError("action", "leaf action " + std::to_string(nd.action) +
                                       " is outside the action set");
    } else {
      const nlohmann::json& split = entry.at("split");
      for (const char* key : {"feature", "threshold", "left", "right"})
        if (!split.is_object() || !split.contains(key))
          throw ParseError(key, std::string("split of node ") + std::to_string(id) +
                                    " needs '" + key + "'");
      if (!split.at("feature").is_number_integer() || !split.at("threshold").is_number() ||
          !split.at("left").is_number_integer() || !split.at("right").is_number_integer())
        throw ParseError("split", "split of node " + std::to_string(id) + " has wrong types");
      nd.is_leaf = false;
      nd.feature = split.at("feature").get<int>();
      nd.threshold = split.at("threshold").get<double>();
      nd.left = split.at("left").get<int>();
      nd.right = split.at("right").get<int>();
      if (nd.feature < 0 || nd.feature >= static_cast<int>(out.feature_names.size()))
        throw ParseError("feature", "split feature " + std::to_string(nd.feature) +
                                        " is outside the feature list");
      if (!std::isfinite(nd.threshold))
        throw ParseError("threshold", "split threshold must be finite");
    }
  }
  for (std::size_t id = 0; id < count; ++id)
    if (!defined[id]) throw ParseError("nodes", "node id " + std::to_string(id) + " is missing");

  if (!j.at("root").is_number_integer())
    throw ParseError("root", "root must be an integer node id");
  out.tree.root = j.at("root").get<int>();
  check_tree_shape(out.tree);
  return out;
}

std::string tree_to_dot(const PolicyTree& tree) {
  const TreeSkeleton t = compact(tree.tree);
  std::ostringstream os;
  os << "digraph policy_tree {\n";
  for (std::size_t id = 0; id < t.nodes.size(); ++id) {
    const TreeNode& nd = t.nodes[id];
    if (nd.is_leaf) {
      const std::string name = nd.action < static_cast<int>(tree.actions.names.size())
                                   ? tree.actions.names[static_cast<std::size_t>(nd.action)]
                                   : "action" + std::to_string(nd.action);
      os << "  n" << id << " [label=\"" << escape_label(name) << "\"];\n";
    } else {
      const std::string feat = nd.feature < static_cast<int>(tree.feature_names.size())
                                   ? tree.feature_names[static_cast<std::size_t>(nd.feature)]
                                   : "f" + std::to_string(nd.feature);
      os << "  n" << id << " [shape=box, label=\"" << escape_label(feat) << " < "
         << format_threshold(nd.threshold) << "\"];\n";
    }
  }
  for (std::size_t id = 0; id < t.nodes.size(); ++id) {
    const TreeNode& nd = t.nodes[id];
    if (!nd.is_leaf)
      os << "  n" << id << " -> n" << nd.left << ";\n  n" << id << " -> n" << nd.right << ";\n";
  }
  os << "}\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Cross-validated configuration search.

GridResult grid_search(const RewardMatrix& rewards, const Eigen::MatrixXd& features,
                       const GridSpec& spec, std::vector<std::string> feature_names) {
  if (spec.depths.empty() || spec.min_leafs.empty())
    throw ValidationError("grid search needs at least one depth and one leaf size");
  if (spec.folds < 2) throw ValidationError("grid search needs at least 2 folds");
  const Eigen::Index n = rewards.n();
  const auto folds = kfold(n, spec.folds, Rng(spec.seed).fork(0xF01dULL).next());

  const bool maximize = rewards.sense == Sense::maximize;
  GridResult result;
  bool have_best = false;
  GridCell best_cell;

  for (const int depth : spec.depths) {
    for (const int min_leaf : spec.min_leafs) {
      struct FoldPath {
        std::vector<PrunePoint> path;
        Eigen::Index val_n = 0;
      };
      std::vector<FoldPath> fold_paths;
      bool feasible = true;
      for (int f = 0; f < spec.folds && feasible; ++f) {
        std::vector<Eigen::Index> train_idx;
        for (int g = 0; g < spec.folds; ++g)
          if (g != f)
            train_idx.insert(train_idx.end(), folds[static_cast<std::size_t>(g)].begin(),
                             folds[static_cast<std::size_t>(g)].end());
        const std::vector<Eigen::Index>& val_idx = folds[static_cast<std::size_t>(f)];
        if (static_cast<int>(train_idx.size()) < min_leaf) {
          feasible = false;
          break;
        }
        FitConfig c;
        c.max_depth = depth;
        c.min_leaf = min_leaf;
        c.complexity_penalty = 0.0;
        c.restarts = spec.restarts;
        c.quantiles = spec.quantiles;
        c.seed = Rng(spec.seed).fork(static_cast<std::uint64_t>(f + 1)).next();

        const RewardMatrix train_r = subset_rewards(rewards, train_idx);
        const RewardMatrix val_r = subset_rewards(rewards, val_idx);
        const Eigen::MatrixXd train_x = take_rows(features, train_idx);
        const Eigen::MatrixXd val_x = take_rows(features, val_idx);
        const PolicyTree t = fit_policy_tree(train_r, train_x, c, feature_names, nullptr);
        FoldPath fp;
        fp.path = prune_path(t, train_r, train_x, val_r, val_x);
        fp.val_n = static_cast<Eigen::Index>(val_idx.size());
        fold_paths.push_back(std::move(fp));
      }
      if (!feasible) continue;

      std::vector<double> lambdas{0.0};
      for (const FoldPath& fp : fold_paths)
        for (const PrunePoint& p : fp.path) lambdas.push_back(p.lambda);
      std::sort(lambdas.begin(), lambdas.end());
      lambdas.erase(std::unique(lambdas.begin(), lambdas.end()), lambdas.end());

      bool have_lambda = false;
      double cell_lambda = 0.0, cell_value = 0.0;
      for (const double lam : lambdas) {
        double mean = 0.0;
        for (const FoldPath& fp : fold_paths) {
          std::size_t active = 0;
          for (std::size_t i = 0; i < fp.path.size(); ++i)
            if (fp.path[i].lambda <= lam * (1.0 + 1e-12) + 1e-15) active = i;
          mean += fp.path[active].validation_total / static_cast<double>(fp.val_n);
        }
        mean /= static_cast<double>(fold_paths.size());
        const bool better = !have_lambda || (maximize ? mean > cell_value : mean < cell_value) ||
                            (mean == cell_value && lam > cell_lambda);
        if (better) {
          have_lambda = true;
          cell_lambda = lam;
          cell_value = mean;
        }
      }

      GridCell cell{depth, min_leaf, cell_lambda, cell_value};
      result.cells.push_back(cell);
      const bool better_cell =
          !have_best || (maximize ? cell.mean_validation > best_cell.mean_validation
                                  : cell.mean_validation < best_cell.mean_validation) ||
          (cell.mean_validation == best_cell.mean_validation &&
           (cell.depth < best_cell.depth ||
            (cell.depth == best_cell.depth && cell.min_leaf > best_cell.min_leaf)));
      if (better_cell) {
        have_best = true;
        best_cell = cell;
      }
    }
  }
  if (!have_best) throw TooFewSamples("no grid cell was feasible");

  FitConfig chosen;
  chosen.max_depth = best_cell.depth;
  chosen.min_leaf = best_cell.min_leaf;
  chosen.complexity_penalty = best_cell.lambda;
  chosen.restarts = spec.restarts;
  chosen.quantiles = spec.quantiles;
  chosen.seed = spec.seed;
  result.chosen = chosen;
  result.tree = fit_policy_tree(rewards, features, chosen, std::move(feature_names), nullptr);
  return result;
}

}  // namespace op2t

#pragma once

// Exact-greedy regression tree growth over pre-sorted feature columns.
//
// One grower serves every tree learner. The split criterion is a policy type:
//   - VarianceCriterion: vector-valued leaves, summed per-output SSE reduction
//   - GradientCriterion: second-order boosting gain with L1 soft-thresholding
//     and L2 shrinkage
// Candidate thresholds are midpoints between consecutive distinct values; on
// equal gain the lowest feature index, then the lowest threshold, wins.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <queue>
#include <span>
#include <utility>
#include <vector>

#include "circularity/data.hpp"
#include "circularity/rng.hpp"

namespace circularity {

template <std::size_t K>
struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::array<double, K> value{};
  std::int64_t n_samples = 0;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

/// Nodes are stored in preorder; the root is nodes[0].
template <std::size_t K>
struct RegressionTree {
  std::vector<TreeNode<K>> nodes;

  std::size_t leaf_index(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf())
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(nodes[i].feature)] <= nodes[i].threshold
                                       ? nodes[i].left
                                       : nodes[i].right);
    return i;
  }

  const std::array<double, K>& predict(std::span<const double> x) const { return nodes[leaf_index(x)].value; }

  int depth() const {
    if (nodes.empty()) return 0;
    int best = 0;
    std::vector<std::pair<std::size_t, int>> stack{{0, 0}};
    while (!stack.empty()) {
      auto [i, d] = stack.back();
      stack.pop_back();
      best = std::max(best, d);
      if (!nodes[i].is_leaf()) {
        stack.push_back({static_cast<std::size_t>(nodes[i].left), d + 1});
        stack.push_back({static_cast<std::size_t>(nodes[i].right), d + 1});
      }
    }
    return best;
  }

  std::size_t leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const auto& n) { return n.is_leaf(); }));
  }

  bool uses_feature(std::size_t f) const {
    return std::any_of(nodes.begin(), nodes.end(),
                       [f](const auto& n) { return !n.is_leaf() && static_cast<std::size_t>(n.feature) == f; });
  }

  bool operator==(const RegressionTree&) const = default;
};

struct GrowthLimits {
  int max_depth = 6;
  int min_samples_split = 2;
  int min_samples_leaf = 1;
  std::size_t max_leaves = 0;          // 0: unlimited
  std::size_t features_per_split = 0;  // 0: every feature is eligible at every node
};

enum class Growth {
  DepthFirst,  // split every eligible node; visiting order does not affect the result
  BestFirst,   // repeatedly split the leaf with the largest gain until max_leaves
};

/// Summed per-output squared-error reduction; leaves hold per-output means.
class VarianceCriterion {
 public:
  static constexpr std::size_t kOutputs = kOutputCount;

  struct Stats {
    double n = 0.0;
    std::array<double, kOutputs> sum{};
    std::array<double, kOutputs> sumsq{};
  };

  explicit VarianceCriterion(std::span<const TargetTriple> y) : y_(y) {}

  Stats zero() const { return {}; }
  void add(Stats& s, std::uint32_t row) const {
    s.n += 1.0;
    for (std::size_t o = 0; o < kOutputs; ++o) {
      double v = y_[row][o];
      s.sum[o] += v;
      s.sumsq[o] += v * v;
    }
  }
  Stats minus(const Stats& a, const Stats& b) const {
    Stats r;
    r.n = a.n - b.n;
    for (std::size_t o = 0; o < kOutputs; ++o) {
      r.sum[o] = a.sum[o] - b.sum[o];
      r.sumsq[o] = a.sumsq[o] - b.sumsq[o];
    }
    return r;
  }
  // SSE = sumsq - sum²/n, so maximizing sum(score) over children minimizes
  // the size-weighted child variance.
  double score(const Stats& s) const {
    if (s.n <= 0) return 0.0;
    double acc = 0.0;
    for (std::size_t o = 0; o < kOutputs; ++o) acc += s.sum[o] * s.sum[o] / s.n;
    return acc;
  }
  bool pure(const Stats& s) const {
    for (std::size_t o = 0; o < kOutputs; ++o) {
      double sse = s.sumsq[o] - s.sum[o] * s.sum[o] / s.n;
      if (sse > 1e-12 * std::max(1.0, s.sumsq[o])) return false;
    }
    return true;
  }
  std::array<double, kOutputs> leaf_value(std::span<const std::uint32_t> rows) const {
    std::array<double, kOutputs> v{};
    for (auto r : rows)
      for (std::size_t o = 0; o < kOutputs; ++o) v[o] += y_[r][o];
    for (auto& x : v) x /= static_cast<double>(rows.size());
    return v;
  }

 private:
  std::span<const TargetTriple> y_;
};

inline double soft_threshold(double g, double alpha) {
  if (g > alpha) return g - alpha;
  if (g < -alpha) return g + alpha;
  return 0.0;
}

/// Second-order boosting gain ½·T_α(G)²/(H+λ); leaf weight -T_α(G)/(H+λ).
class GradientCriterion {
 public:
  static constexpr std::size_t kOutputs = 1;

  struct Stats {
    double n = 0.0;
    double g = 0.0;
    double h = 0.0;
  };

  GradientCriterion(std::span<const double> grad, std::span<const double> hess, double alpha, double lambda)
      : grad_(grad), hess_(hess), alpha_(alpha), lambda_(lambda) {}

  Stats zero() const { return {}; }
  void add(Stats& s, std::uint32_t row) const {
    s.n += 1.0;
    s.g += grad_[row];
    s.h += hess_[row];
  }
  Stats minus(const Stats& a, const Stats& b) const { return {a.n - b.n, a.g - b.g, a.h - b.h}; }
  double score(const Stats& s) const {
    double denom = s.h + lambda_;
    if (!(denom > 0)) return 0.0;
    double t = soft_threshold(s.g, alpha_);
    return 0.5 * t * t / denom;
  }
  bool pure(const Stats&) const { return false; }
  std::array<double, 1> leaf_value(std::span<const std::uint32_t> rows) const {
    Stats s;
    for (auto r : rows) add(s, r);
    double denom = s.h + lambda_;
    if (!(denom > 0)) return {0.0};
    return {-soft_threshold(s.g, alpha_) / denom};
  }

 private:
  std::span<const double> grad_;
  std::span<const double> hess_;
  double alpha_;
  double lambda_;
};

struct SplitChoice {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  double gain = 0.0;
};

namespace detail {

// For each feature, the node's rows sorted by (value, row).
using SortedColumns = std::array<std::vector<std::uint32_t>, kFeatureCount>;

inline SortedColumns sort_columns(std::span<const FeatureVector> x, std::span<const std::uint32_t> rows) {
  SortedColumns cols;
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    auto& c = cols[f];
    c.assign(rows.begin(), rows.end());
    std::sort(c.begin(), c.end(), [&](std::uint32_t a, std::uint32_t b) {
      return x[a][f] < x[b][f] || (x[a][f] == x[b][f] && a < b);
    });
  }
  return cols;
}

template <class Criterion>
class TreeGrower {
 public:
  static constexpr std::size_t K = Criterion::kOutputs;

  TreeGrower(std::span<const FeatureVector> x, const Criterion& crit, const GrowthLimits& limits, Rng* rng)
      : x_(x), crit_(crit), limits_(limits), rng_(rng), goes_left_(x.size(), 0) {}

  RegressionTree<K> grow(std::span<const std::uint32_t> rows, Growth growth) {
    nodes_.clear();
    if (rows.empty()) {
      TreeNode<K> leaf;
      nodes_.push_back(leaf);
      return finish();
    }
    auto cols = sort_columns(x_, rows);
    if (growth == Growth::DepthFirst && limits_.max_leaves == 0) {
      grow_depth_first(std::move(cols), 0);
    } else {
      grow_best_first(std::move(cols));
    }
    return finish();
  }

  SplitChoice best_split(const SortedColumns& cols, int depth) {
    SplitChoice best;
    const auto& any = cols[0];
    const auto n = any.size();
    if (depth >= limits_.max_depth) return best;
    if (n < static_cast<std::size_t>(std::max(2, limits_.min_samples_split))) return best;
    if (n < 2 * static_cast<std::size_t>(std::max(1, limits_.min_samples_leaf))) return best;

    auto total = crit_.zero();
    for (auto r : any) crit_.add(total, r);
    if (crit_.pure(total)) return best;
    const double parent_score = crit_.score(total);

    for (std::size_t f : eligible_features()) {
      const auto& col = cols[f];
      auto left = crit_.zero();
      const std::size_t min_leaf = static_cast<std::size_t>(std::max(1, limits_.min_samples_leaf));
      for (std::size_t i = 0; i + 1 < n; ++i) {
        crit_.add(left, col[i]);
        double v = x_[col[i]][f];
        double next = x_[col[i + 1]][f];
        if (!(v < next)) continue;
        if (i + 1 < min_leaf || n - i - 1 < min_leaf) continue;
        auto right = crit_.minus(total, left);
        double child = crit_.score(left) + crit_.score(right);
        double gain = child - parent_score;
        if (!(gain > 1e-12 * child)) continue;
        if (!best.found || gain > best.gain + 1e-10 * std::abs(best.gain)) {
          best.found = true;
          best.feature = f;
          best.threshold = v + (next - v) / 2.0;
          best.gain = gain;
        }
      }
    }
    return best;
  }

 private:
  std::vector<std::size_t> eligible_features() {
    std::vector<std::size_t> all(kFeatureCount);
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto k = limits_.features_per_split;
    if (k == 0 || k >= kFeatureCount || rng_ == nullptr) return all;
    for (std::size_t i = 0; i < k; ++i) std::swap(all[i], all[i + uniform_index(*rng_, kFeatureCount - i)]);
    all.resize(k);
    std::sort(all.begin(), all.end());
    return all;
  }

  std::int32_t make_leaf(const SortedColumns& cols) {
    TreeNode<K> leaf;
    leaf.value = crit_.leaf_value(cols[0]);
    leaf.n_samples = static_cast<std::int64_t>(cols[0].size());
    nodes_.push_back(leaf);
    return static_cast<std::int32_t>(nodes_.size() - 1);
  }

  std::pair<SortedColumns, SortedColumns> partition(SortedColumns&& cols, const SplitChoice& s) {
    for (auto r : cols[0]) goes_left_[r] = x_[r][s.feature] <= s.threshold ? 1 : 0;
    std::pair<SortedColumns, SortedColumns> out;
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      auto& l = out.first[f];
      auto& r = out.second[f];
      for (auto row : cols[f]) (goes_left_[row] ? l : r).push_back(row);
      cols[f].clear();
      cols[f].shrink_to_fit();
    }
    return out;
  }

  std::int32_t grow_depth_first(SortedColumns cols, int depth) {
    auto split = best_split(cols, depth);
    std::int32_t id = make_leaf(cols);
    if (!split.found) return id;
    nodes_[static_cast<std::size_t>(id)].feature = static_cast<std::int32_t>(split.feature);
    nodes_[static_cast<std::size_t>(id)].threshold = split.threshold;
    auto [l, r] = partition(std::move(cols), split);
    std::int32_t left = grow_depth_first(std::move(l), depth + 1);
    std::int32_t right = grow_depth_first(std::move(r), depth + 1);
    nodes_[static_cast<std::size_t>(id)].left = left;
    nodes_[static_cast<std::size_t>(id)].right = right;
    return id;
  }

  struct Pending {
    std::int32_t node;
    int depth;
    SplitChoice split;
    SortedColumns cols;
  };

  void grow_best_first(SortedColumns root_cols) {
    // Max-heap on gain; among equal gains the earliest-created leaf goes first.
    auto worse = [](const Pending* a, const Pending* b) {
      if (a->split.gain != b->split.gain) return a->split.gain < b->split.gain;
      return a->node > b->node;
    };
    std::vector<std::unique_ptr<Pending>> store;
    std::priority_queue<Pending*, std::vector<Pending*>, decltype(worse)> heap(worse);

    auto enqueue = [&](SortedColumns cols, int depth) {
      auto split = best_split(cols, depth);
      std::int32_t id = make_leaf(cols);
      if (!split.found) return;
      store.push_back(std::make_unique<Pending>(Pending{id, depth, split, std::move(cols)}));
      heap.push(store.back().get());
    };

    enqueue(std::move(root_cols), 0);
    std::size_t leaves = 1;
    const std::size_t budget = limits_.max_leaves == 0 ? SIZE_MAX : limits_.max_leaves;
    while (leaves < budget && !heap.empty()) {
      Pending* p = heap.top();
      heap.pop();
      auto& node = nodes_[static_cast<std::size_t>(p->node)];
      node.feature = static_cast<std::int32_t>(p->split.feature);
      node.threshold = p->split.threshold;
      auto [l, r] = partition(std::move(p->cols), p->split);
      std::int32_t left_id = static_cast<std::int32_t>(nodes_.size());
      enqueue(std::move(l), p->depth + 1);
      std::int32_t right_id = static_cast<std::int32_t>(nodes_.size());
      enqueue(std::move(r), p->depth + 1);
      nodes_[static_cast<std::size_t>(p->node)].left = left_id;
      nodes_[static_cast<std::size_t>(p->node)].right = right_id;
      ++leaves;
    }
  }

  // Re-lays nodes out in preorder.
  RegressionTree<K> finish() {
    RegressionTree<K> tree;
    tree.nodes.reserve(nodes_.size());
    struct Frame {
      std::size_t old_id;
      std::int64_t parent;
      bool is_left;
    };
    std::vector<Frame> frames{{0, -1, false}};
    while (!frames.empty()) {
      Frame fr = frames.back();
      frames.pop_back();
      auto node = nodes_[fr.old_id];
      auto new_id = static_cast<std::int32_t>(tree.nodes.size());
      if (fr.parent >= 0) {
        auto& parent = tree.nodes[static_cast<std::size_t>(fr.parent)];
        (fr.is_left ? parent.left : parent.right) = new_id;
      }
      std::int32_t old_left = node.left;
      std::int32_t old_right = node.right;
      node.left = node.right = -1;
      tree.nodes.push_back(node);
      if (!node.is_leaf()) {
        frames.push_back({static_cast<std::size_t>(old_right), new_id, false});
        frames.push_back({static_cast<std::size_t>(old_left), new_id, true});
      }
    }
    return tree;
  }

  std::span<const FeatureVector> x_;
  const Criterion& crit_;
  GrowthLimits limits_;
  Rng* rng_;
  std::vector<char> goes_left_;
  std::vector<TreeNode<K>> nodes_;
};

}  // namespace detail

/// Grows one tree on `rows` (duplicates allowed, e.g. a bootstrap resample).
/// `rng` is only consulted when limits.features_per_split restricts the
/// eligible features.
template <class Criterion>
RegressionTree<Criterion::kOutputs> grow_tree(std::span<const FeatureVector> x, const Criterion& crit,
                                              std::span<const std::uint32_t> rows, const GrowthLimits& limits,
                                              Growth growth, Rng* rng = nullptr) {
  detail::TreeGrower<Criterion> grower(x, crit, limits, rng);
  return grower.grow(rows, growth);
}

/// Best root split under the criterion, without growing a tree.
template <class Criterion>
SplitChoice find_best_split(std::span<const FeatureVector> x, const Criterion& crit,
                            std::span<const std::uint32_t> rows, const GrowthLimits& limits) {
  detail::TreeGrower<Criterion> grower(x, crit, limits, nullptr);
  return grower.best_split(detail::sort_columns(x, rows), 0);
}

}  // namespace circularity

#pragma once

// The five multi-output regressors and their shared prediction contract.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "circularity/data.hpp"
#include "circularity/errors.hpp"
#include "circularity/rng.hpp"
#include "circularity/tree.hpp"

namespace circularity {

enum class LearnerKind { DecisionTree, Knn, RandomForest, GbtLevelWise, GbtLeafWise };

inline constexpr std::array<LearnerKind, 5> kAllLearners = {LearnerKind::DecisionTree, LearnerKind::Knn,
                                                            LearnerKind::RandomForest, LearnerKind::GbtLevelWise,
                                                            LearnerKind::GbtLeafWise};

/// Short names used by the CLI (`--algo`) and the model file.
constexpr std::string_view to_string(LearnerKind k) {
  switch (k) {
    case LearnerKind::DecisionTree: return "dt";
    case LearnerKind::Knn: return "knn";
    case LearnerKind::RandomForest: return "rf";
    case LearnerKind::GbtLevelWise: return "xgb";
    case LearnerKind::GbtLeafWise: return "lgbm";
  }
  return "?";
}

constexpr std::string_view display_name(LearnerKind k) {
  switch (k) {
    case LearnerKind::DecisionTree: return "DT";
    case LearnerKind::Knn: return "KNN";
    case LearnerKind::RandomForest: return "RF";
    case LearnerKind::GbtLevelWise: return "XGBoost";
    case LearnerKind::GbtLeafWise: return "LightGBM";
  }
  return "?";
}

inline std::optional<LearnerKind> parse_learner(std::string_view s) {
  for (auto k : kAllLearners)
    if (to_string(k) == s) return k;
  return std::nullopt;
}

struct TreeParams {
  int max_depth = 12;
  int min_samples_split = 2;
  int min_samples_leaf = 1;

  void validate() const {
    if (max_depth < 1) throw Error(ErrorCode::InvalidArgument, "max_depth must be >= 1");
    if (min_samples_split < 2) throw Error(ErrorCode::InvalidArgument, "min_samples_split must be >= 2");
    if (min_samples_leaf < 1) throw Error(ErrorCode::InvalidArgument, "min_samples_leaf must be >= 1");
  }
  GrowthLimits limits() const { return {max_depth, min_samples_split, min_samples_leaf, 0, 0}; }
  bool operator==(const TreeParams&) const = default;
};

enum class KnnWeighting { Uniform, Distance };

struct KnnParams {
  int k = 5;
  KnnWeighting weighting = KnnWeighting::Uniform;
  double p = 2.0;  // Minkowski power

  void validate() const {
    if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
    if (!(p >= 1.0)) throw Error(ErrorCode::InvalidArgument, "Minkowski power must be >= 1");
  }
  bool operator==(const KnnParams&) const = default;
};

struct ForestParams {
  TreeParams tree;
  int n_trees = 100;
  std::size_t features_per_split = 5;  // 0 or >= 14: all features
  bool bootstrap = true;

  void validate() const {
    tree.validate();
    if (n_trees < 1) throw Error(ErrorCode::InvalidArgument, "n_trees must be >= 1");
  }
  bool operator==(const ForestParams&) const = default;
};

struct BoostParams {
  int max_depth = 6;
  double alpha = 0.0;   // L1
  double lambda = 1.0;  // L2
  double subsample = 1.0;
  int n_estimators = 100;
  double learning_rate = 0.1;
  int min_samples_leaf = 1;

  void validate() const {
    if (max_depth < 1) throw Error(ErrorCode::InvalidArgument, "max_depth must be >= 1");
    if (!(alpha >= 0.0)) throw Error(ErrorCode::InvalidArgument, "alpha must be >= 0");
    if (!(lambda >= 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda must be >= 0");
    if (!(subsample > 0.0 && subsample <= 1.0)) throw Error(ErrorCode::InvalidArgument, "subsample must lie in (0, 1]");
    if (n_estimators < 0) throw Error(ErrorCode::InvalidArgument, "n_estimators must be >= 0");
    if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning_rate must be > 0");
    if (min_samples_leaf < 1) throw Error(ErrorCode::InvalidArgument, "min_samples_leaf must be >= 1");
  }
  bool operator==(const BoostParams&) const = default;
};

/// Gradient-based one-side sampling: keep the top `a` fraction of rows by
/// |gradient|, sample `b` of the total from the rest and amplify their
/// gradient and hessian by (1 - a) / b.
struct GossParams {
  double a = 0.2;
  double b = 0.1;
  std::size_t max_leaves = 31;

  void validate() const {
    bool ok = a > 0.0 && a <= 1.0 && b >= 0.0 && b <= 1.0 && (a == 1.0 || a + b <= 1.0);
    if (!ok) throw Error(ErrorCode::InvalidGossFractions, "need a in (0,1], b in [0,1], a + b <= 1");
    if (max_leaves < 2) throw Error(ErrorCode::InvalidArgument, "leaf budget must be >= 2");
  }
  bool operator==(const GossParams&) const = default;
};

struct DecisionTreeModel {
  TreeParams params;
  RegressionTree<kOutputCount> tree;
  bool operator==(const DecisionTreeModel&) const = default;
};

struct KnnModel {
  KnnParams params;
  FeatureVector scale{};              // multiplied into raw features
  std::vector<FeatureVector> points;  // scaled training features
  std::vector<TargetTriple> targets;
  bool operator==(const KnnModel&) const = default;
};

struct ForestModel {
  ForestParams params;
  std::uint64_t seed = 0;
  std::vector<RegressionTree<kOutputCount>> trees;
  bool operator==(const ForestModel&) const = default;
};

/// Three independent additive ensembles, one per output.
struct BoostedEnsemble {
  BoostParams params;
  std::array<double, kOutputCount> base_score{};
  std::array<std::vector<RegressionTree<1>>, kOutputCount> stages;
  bool operator==(const BoostedEnsemble&) const = default;
};

struct LevelWiseBoostModel : BoostedEnsemble {
  bool operator==(const LevelWiseBoostModel&) const = default;
};

struct LeafWiseBoostModel : BoostedEnsemble {
  GossParams goss;
  bool operator==(const LeafWiseBoostModel&) const = default;
};

using LearnerState = std::variant<DecisionTreeModel, KnnModel, ForestModel, LevelWiseBoostModel, LeafWiseBoostModel>;

struct TrainingMetadata {
  std::uint64_t seed = 0;
  std::string trained_at;  // UTC, ISO-8601
  Provenance provenance = Provenance::Csv;
  std::optional<std::uint64_t> data_seed;
  std::size_t n_train = 0;
};

struct TrainedModel {
  LearnerState state;
  std::uint64_t fingerprint = schema_fingerprint();
  TrainingMetadata metadata;

  LearnerKind kind() const { return static_cast<LearnerKind>(state.index()); }
};

namespace detail {

inline std::string utc_now_iso() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline TrainingMetadata make_metadata(const Dataset& d, std::uint64_t seed) {
  return {seed, utc_now_iso(), d.provenance, d.seed, d.size()};
}

inline void require_rows(const Dataset& d) {
  if (d.empty()) throw Error(ErrorCode::EmptyDataset, "training set is empty");
}

inline std::vector<std::uint32_t> all_rows(std::size_t n) {
  std::vector<std::uint32_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0u);
  return rows;
}

inline double minkowski(const FeatureVector& a, const FeatureVector& b, double p) {
  double acc = 0.0;
  if (p == 1.0) {
    for (std::size_t j = 0; j < kFeatureCount; ++j) acc += std::abs(a[j] - b[j]);
    return acc;
  }
  if (p == 2.0) {
    for (std::size_t j = 0; j < kFeatureCount; ++j) acc += (a[j] - b[j]) * (a[j] - b[j]);
    return std::sqrt(acc);
  }
  for (std::size_t j = 0; j < kFeatureCount; ++j) acc += std::pow(std::abs(a[j] - b[j]), p);
  return std::pow(acc, 1.0 / p);
}

}  // namespace detail

// ---------------------------------------------------------------- training

inline TrainedModel train_decision_tree(const Dataset& train, const TreeParams& params, std::uint64_t seed) {
  detail::require_rows(train);
  params.validate();
  auto x = train.features();
  auto y = train.targets();
  auto rows = detail::all_rows(train.size());
  VarianceCriterion crit(y);
  DecisionTreeModel m{params, grow_tree(std::span<const FeatureVector>(x), crit, rows, params.limits(), Growth::DepthFirst)};
  return {m, schema_fingerprint(), detail::make_metadata(train, seed)};
}

inline TrainedModel train_knn(const Dataset& train, const KnnParams& params) {
  detail::require_rows(train);
  params.validate();
  if (static_cast<std::size_t>(params.k) > train.size())
    throw Error(ErrorCode::KTooLarge, "k = " + std::to_string(params.k) + " exceeds training size " +
                                          std::to_string(train.size()));
  KnnModel m;
  m.params = params;
  auto x = train.features();
  for (std::size_t j = 0; j < kFeatureCount; ++j) {
    std::vector<double> col(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) col[i] = x[i][j];
    double sd = column_stats(col).std;
    m.scale[j] = sd > 0.0 ? 1.0 / sd : 1.0;
  }
  m.points.reserve(x.size());
  for (const auto& row : x) {
    FeatureVector s;
    for (std::size_t j = 0; j < kFeatureCount; ++j) s[j] = row[j] * m.scale[j];
    m.points.push_back(s);
  }
  m.targets = train.targets();
  return {m, schema_fingerprint(), detail::make_metadata(train, 0)};
}

inline TrainedModel train_random_forest(const Dataset& train, const ForestParams& params, std::uint64_t seed) {
  detail::require_rows(train);
  params.validate();
  auto x = train.features();
  auto y = train.targets();
  VarianceCriterion crit(y);
  auto limits = params.tree.limits();
  limits.features_per_split = params.features_per_split;
  ForestModel m{params, seed, {}};
  m.trees.reserve(static_cast<std::size_t>(params.n_trees));
  const auto n = train.size();
  for (int t = 0; t < params.n_trees; ++t) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(t)));
    std::vector<std::uint32_t> rows;
    if (params.bootstrap) {
      rows.resize(n);
      for (auto& r : rows) r = static_cast<std::uint32_t>(uniform_index(rng, n));
    } else {
      rows = detail::all_rows(n);
    }
    m.trees.push_back(grow_tree(std::span<const FeatureVector>(x), crit, rows, limits, Growth::DepthFirst, &rng));
  }
  return {m, schema_fingerprint(), detail::make_metadata(train, seed)};
}

namespace detail {

inline std::vector<std::uint32_t> subsample_rows(std::size_t n, double rate, Rng& rng) {
  auto rows = all_rows(n);
  if (rate >= 1.0) return rows;
  auto m = static_cast<std::size_t>(std::floor(rate * static_cast<double>(n) + 0.5));
  m = std::clamp<std::size_t>(m, 1, n);
  for (std::size_t i = 0; i < m; ++i) std::swap(rows[i], rows[i + uniform_index(rng, n - i)]);
  rows.resize(m);
  std::sort(rows.begin(), rows.end());
  return rows;
}

// Applies GOSS to `rows`; returns the kept rows and writes amplified
// gradient/hessian weights into `grad`/`hess`.
inline std::vector<std::uint32_t> goss_select(std::vector<std::uint32_t> rows, const GossParams& goss,
                                              std::vector<double>& grad, std::vector<double>& hess, Rng& rng) {
  if (goss.a >= 1.0) return rows;
  const auto m = rows.size();
  std::stable_sort(rows.begin(), rows.end(),
                   [&](std::uint32_t l, std::uint32_t r) { return std::abs(grad[l]) > std::abs(grad[r]); });
  auto top = std::clamp<std::size_t>(static_cast<std::size_t>(goss.a * static_cast<double>(m)), 1, m);
  auto other = std::min(m - top, static_cast<std::size_t>(goss.b * static_cast<double>(m)));
  for (std::size_t i = 0; i < other; ++i)
    std::swap(rows[top + i], rows[top + i + uniform_index(rng, m - top - i)]);
  const double amplify = other > 0 ? (1.0 - goss.a) / goss.b : 1.0;
  for (std::size_t i = top; i < top + other; ++i) {
    grad[rows[i]] *= amplify;
    hess[rows[i]] *= amplify;
  }
  rows.resize(top + other);
  std::sort(rows.begin(), rows.end());
  return rows;
}

template <class Model>
void fit_boosted(Model& m, const Dataset& train, std::uint64_t seed, Growth growth, const GrowthLimits& limits,
                 const GossParams* goss) {
  auto x = train.features();
  auto y = train.targets();
  const auto n = train.size();
  for (std::size_t o = 0; o < kOutputCount; ++o) {
    long double sum = 0.0L;
    for (const auto& t : y) sum += t[o];
    m.base_score[o] = static_cast<double>(sum / static_cast<long double>(n));
    std::vector<double> pred(n, m.base_score[o]);
    Rng sample_rng(mix_seed(seed, o));
    Rng goss_rng(mix_seed(seed, 100 + o));
    auto& stages = m.stages[o];
    stages.reserve(static_cast<std::size_t>(m.params.n_estimators));
    std::vector<double> grad(n), hess(n);
    for (int t = 0; t < m.params.n_estimators; ++t) {
      for (std::size_t i = 0; i < n; ++i) {
        grad[i] = pred[i] - y[i][o];
        hess[i] = 1.0;
      }
      auto rows = subsample_rows(n, m.params.subsample, sample_rng);
      if (goss != nullptr) rows = goss_select(std::move(rows), *goss, grad, hess, goss_rng);
      GradientCriterion crit(grad, hess, m.params.alpha, m.params.lambda);
      stages.push_back(grow_tree(std::span<const FeatureVector>(x), crit, rows, limits, growth));
      const auto& tree = stages.back();
      for (std::size_t i = 0; i < n; ++i) pred[i] += m.params.learning_rate * tree.predict(x[i])[0];
    }
  }
}

}  // namespace detail

inline TrainedModel train_gbt_levelwise(const Dataset& train, const BoostParams& params, std::uint64_t seed) {
  detail::require_rows(train);
  params.validate();
  LevelWiseBoostModel m;
  m.params = params;
  GrowthLimits limits{params.max_depth, 2, params.min_samples_leaf, 0, 0};
  detail::fit_boosted(m, train, seed, Growth::DepthFirst, limits, nullptr);
  return {m, schema_fingerprint(), detail::make_metadata(train, seed)};
}

inline TrainedModel train_gbt_leafwise_goss(const Dataset& train, const BoostParams& params, const GossParams& goss,
                                            std::uint64_t seed) {
  goss.validate();
  detail::require_rows(train);
  params.validate();
  LeafWiseBoostModel m;
  m.params = params;
  m.goss = goss;
  GrowthLimits limits{params.max_depth, 2, params.min_samples_leaf, goss.max_leaves, 0};
  detail::fit_boosted(m, train, seed, Growth::BestFirst, limits, &goss);
  return {m, schema_fingerprint(), detail::make_metadata(train, seed)};
}

// -------------------------------------------------------------- prediction

/// Indices of the k nearest stored points to an already-scaled query,
/// ordered by (distance, index).
inline std::vector<std::pair<double, std::size_t>> knn_neighbors(const KnnModel& m, const FeatureVector& scaled_query) {
  std::vector<std::pair<double, std::size_t>> d(m.points.size());
  for (std::size_t i = 0; i < m.points.size(); ++i) d[i] = {detail::minkowski(scaled_query, m.points[i], m.params.p), i};
  auto k = static_cast<std::size_t>(m.params.k);
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
  d.resize(k);
  return d;
}

inline TargetTriple predict(const KnnModel& m, const FeatureVector& x) {
  FeatureVector q;
  for (std::size_t j = 0; j < kFeatureCount; ++j) q[j] = x[j] * m.scale[j];
  auto nn = knn_neighbors(m, q);
  std::array<double, kOutputCount> acc{};
  if (m.params.weighting == KnnWeighting::Distance) {
    // Exact matches dominate: average only the zero-distance neighbours.
    std::size_t zeros = 0;
    for (auto [dist, i] : nn)
      if (dist == 0.0) {
        ++zeros;
        for (std::size_t o = 0; o < kOutputCount; ++o) acc[o] += m.targets[i][o];
      }
    if (zeros > 0) {
      for (auto& v : acc) v /= static_cast<double>(zeros);
      return TargetTriple::from_array(acc);
    }
    double wsum = 0.0;
    for (auto [dist, i] : nn) {
      double w = 1.0 / dist;
      wsum += w;
      for (std::size_t o = 0; o < kOutputCount; ++o) acc[o] += w * m.targets[i][o];
    }
    for (auto& v : acc) v /= wsum;
    return TargetTriple::from_array(acc);
  }
  for (auto [dist, i] : nn)
    for (std::size_t o = 0; o < kOutputCount; ++o) acc[o] += m.targets[i][o];
  for (auto& v : acc) v /= static_cast<double>(nn.size());
  return TargetTriple::from_array(acc);
}

inline TargetTriple predict(const DecisionTreeModel& m, const FeatureVector& x) {
  return TargetTriple::from_array(m.tree.predict(x));
}

inline TargetTriple predict(const ForestModel& m, const FeatureVector& x) {
  std::array<double, kOutputCount> acc{};
  for (const auto& t : m.trees) {
    const auto& v = t.predict(x);
    for (std::size_t o = 0; o < kOutputCount; ++o) acc[o] += v[o];
  }
  for (auto& v : acc) v /= static_cast<double>(m.trees.size());
  return TargetTriple::from_array(acc);
}

/// Prediction using only the first `n_stages` boosting stages per output.
inline TargetTriple predict_stages(const BoostedEnsemble& m, const FeatureVector& x, std::size_t n_stages) {
  std::array<double, kOutputCount> out = m.base_score;
  for (std::size_t o = 0; o < kOutputCount; ++o) {
    auto limit = std::min(n_stages, m.stages[o].size());
    for (std::size_t t = 0; t < limit; ++t) out[o] += m.params.learning_rate * m.stages[o][t].predict(x)[0];
  }
  return TargetTriple::from_array(out);
}

inline TargetTriple predict(const BoostedEnsemble& m, const FeatureVector& x) {
  return predict_stages(m, x, SIZE_MAX);
}

inline TargetTriple predict(const TrainedModel& model, const FeatureVector& x) {
  return std::visit([&](const auto& m) { return predict(m, x); }, model.state);
}

/// Prediction from an unchecked feature row; the row must have the 14-wide layout.
inline TargetTriple predict(const TrainedModel& model, std::span<const double> x) {
  if (x.size() != kFeatureCount || model.fingerprint != schema_fingerprint())
    throw Error(ErrorCode::SchemaMismatch, "feature row does not match the model's schema");
  FeatureVector v;
  std::copy(x.begin(), x.end(), v.begin());
  return predict(model, v);
}

// ------------------------------------------------------- generic dispatch

using ParamValue = std::variant<double, std::int64_t, std::string>;
using ParamMap = std::map<std::string, ParamValue>;

inline double param_double(const ParamMap& p, const std::string& name, double fallback) {
  auto it = p.find(name);
  if (it == p.end()) return fallback;
  if (auto d = std::get_if<double>(&it->second)) return *d;
  if (auto i = std::get_if<std::int64_t>(&it->second)) return static_cast<double>(*i);
  throw Error(ErrorCode::InvalidArgument, "parameter '" + name + "' must be numeric");
}

inline std::int64_t param_int(const ParamMap& p, const std::string& name, std::int64_t fallback) {
  auto it = p.find(name);
  if (it == p.end()) return fallback;
  if (auto i = std::get_if<std::int64_t>(&it->second)) return *i;
  if (auto d = std::get_if<double>(&it->second)) {
    if (*d != std::floor(*d)) throw Error(ErrorCode::InvalidArgument, "parameter '" + name + "' must be an integer");
    return static_cast<std::int64_t>(*d);
  }
  throw Error(ErrorCode::InvalidArgument, "parameter '" + name + "' must be an integer");
}

inline std::string param_string(const ParamMap& p, const std::string& name, const std::string& fallback) {
  auto it = p.find(name);
  if (it == p.end()) return fallback;
  if (auto s = std::get_if<std::string>(&it->second)) return *s;
  throw Error(ErrorCode::InvalidArgument, "parameter '" + name + "' must be a string");
}

/// Parses "3" as an integer, "0.5" as a real and anything else as a string.
inline ParamValue parse_param_value(std::string_view text) {
  std::int64_t i = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), i);
  if (ec == std::errc() && p == text.data() + text.size() && !text.empty()) return i;
  if (auto d = detail::parse_double(text)) return *d;
  return std::string(text);
}

inline std::string format_param_value(const ParamValue& v) {
  if (auto d = std::get_if<double>(&v)) return detail::format_double(*d);
  if (auto i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  return std::get<std::string>(v);
}

inline TreeParams tree_params_from(const ParamMap& p) {
  TreeParams t;
  t.max_depth = static_cast<int>(param_int(p, "max_depth", t.max_depth));
  t.min_samples_split = static_cast<int>(param_int(p, "min_samples_split", t.min_samples_split));
  t.min_samples_leaf = static_cast<int>(param_int(p, "min_samples_leaf", t.min_samples_leaf));
  return t;
}

inline KnnParams knn_params_from(const ParamMap& p) {
  KnnParams k;
  k.k = static_cast<int>(param_int(p, "n_neighbors", k.k));
  auto w = param_string(p, "weights", "uniform");
  if (w == "uniform" || w == "Uniform") k.weighting = KnnWeighting::Uniform;
  else if (w == "distance" || w == "Distance") k.weighting = KnnWeighting::Distance;
  else throw Error(ErrorCode::InvalidArgument, "weights must be 'uniform' or 'distance'");
  k.p = param_double(p, "p", k.p);
  return k;
}

inline ForestParams forest_params_from(const ParamMap& p) {
  ForestParams f;
  f.tree = tree_params_from(p);
  f.n_trees = static_cast<int>(param_int(p, "n_trees", f.n_trees));
  f.features_per_split = static_cast<std::size_t>(param_int(p, "features_per_split", static_cast<std::int64_t>(f.features_per_split)));
  f.bootstrap = param_int(p, "bootstrap", 1) != 0;
  return f;
}

inline BoostParams boost_params_from(const ParamMap& p) {
  BoostParams b;
  b.max_depth = static_cast<int>(param_int(p, "max_depth", b.max_depth));
  b.alpha = param_double(p, "reg_alpha", b.alpha);
  b.lambda = param_double(p, "reg_lambda", b.lambda);
  b.subsample = param_double(p, "subsample", b.subsample);
  b.n_estimators = static_cast<int>(param_int(p, "n_estimators", b.n_estimators));
  b.learning_rate = param_double(p, "learning_rate", b.learning_rate);
  b.min_samples_leaf = static_cast<int>(param_int(p, "min_samples_leaf", b.min_samples_leaf));
  return b;
}

inline GossParams goss_params_from(const ParamMap& p) {
  GossParams g;
  g.a = param_double(p, "goss_a", g.a);
  g.b = param_double(p, "goss_b", g.b);
  g.max_leaves = static_cast<std::size_t>(param_int(p, "num_leaves", static_cast<std::int64_t>(g.max_leaves)));
  return g;
}

/// Trains any learner from a name -> value hyperparameter map; unspecified
/// names take the learner defaults.
inline TrainedModel train_model(LearnerKind kind, const Dataset& train, const ParamMap& params, std::uint64_t seed) {
  switch (kind) {
    case LearnerKind::DecisionTree: return train_decision_tree(train, tree_params_from(params), seed);
    case LearnerKind::Knn: {
      auto m = train_knn(train, knn_params_from(params));
      m.metadata.seed = seed;
      return m;
    }
    case LearnerKind::RandomForest: return train_random_forest(train, forest_params_from(params), seed);
    case LearnerKind::GbtLevelWise: return train_gbt_levelwise(train, boost_params_from(params), seed);
    case LearnerKind::GbtLeafWise:
      return train_gbt_leafwise_goss(train, boost_params_from(params), goss_params_from(params), seed);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown learner");
}

}  // namespace circularity

#pragma once

// Bayesian hyperparameter optimization: seeded Latin-hypercube initial
// design, then fit surrogate -> maximize EI over quasi-random candidates ->
// evaluate, until the budget is spent or the best objective stalls.
//
// Mixed spaces are relaxed into the unit cube: continuous and integer
// parameters take one coordinate each (integers round on decode), a
// categorical parameter takes one coordinate per value and decodes to the
// largest coordinate.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "circularity/data.hpp"
#include "circularity/errors.hpp"
#include "circularity/gp.hpp"
#include "circularity/learners.hpp"
#include "circularity/metrics.hpp"
#include "circularity/rng.hpp"

namespace circularity {

struct ContinuousRange {
  double lo;
  double hi;
};
struct IntegerRange {
  std::int64_t lo;
  std::int64_t hi;
};
struct Categories {
  std::vector<std::string> values;
};

struct ParamSpec {
  std::string name;
  std::variant<ContinuousRange, IntegerRange, Categories> kind;

  std::size_t encoded_dims() const {
    if (auto c = std::get_if<Categories>(&kind)) return c->values.size();
    return 1;
  }

  bool contains(const ParamValue& v) const {
    if (auto r = std::get_if<ContinuousRange>(&kind)) {
      auto d = std::get_if<double>(&v);
      return d && *d >= r->lo && *d <= r->hi;
    }
    if (auto r = std::get_if<IntegerRange>(&kind)) {
      auto i = std::get_if<std::int64_t>(&v);
      return i && *i >= r->lo && *i <= r->hi;
    }
    auto s = std::get_if<std::string>(&v);
    const auto& vals = std::get<Categories>(kind).values;
    return s && std::find(vals.begin(), vals.end(), *s) != vals.end();
  }
};

struct SearchSpace {
  std::vector<ParamSpec> params;

  void validate() const {
    if (params.empty()) throw Error(ErrorCode::InvalidArgument, "search space is empty");
    for (std::size_t i = 0; i < params.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j)
        if (params[i].name == params[j].name)
          throw Error(ErrorCode::InvalidArgument, "duplicate parameter '" + params[i].name + "'");
      const auto& k = params[i].kind;
      bool ok = true;
      if (auto r = std::get_if<ContinuousRange>(&k)) ok = r->lo < r->hi;
      if (auto r = std::get_if<IntegerRange>(&k)) ok = r->lo < r->hi;
      if (auto c = std::get_if<Categories>(&k)) ok = c->values.size() >= 2;
      if (!ok) throw Error(ErrorCode::InvalidArgument, "invalid range for '" + params[i].name + "'");
    }
  }

  std::size_t encoded_dims() const {
    std::size_t d = 0;
    for (const auto& p : params) d += p.encoded_dims();
    return d;
  }

  bool contains(const ParamMap& m) const {
    for (const auto& p : params) {
      auto it = m.find(p.name);
      if (it == m.end() || !p.contains(it->second)) return false;
    }
    return true;
  }

  /// Unit-cube point -> concrete assignment (rounding / snapping).
  ParamMap decode(std::span<const double> u) const {
    ParamMap out;
    std::size_t pos = 0;
    for (const auto& p : params) {
      if (auto r = std::get_if<ContinuousRange>(&p.kind)) {
        out[p.name] = std::clamp(r->lo + std::clamp(u[pos], 0.0, 1.0) * (r->hi - r->lo), r->lo, r->hi);
        pos += 1;
      } else if (auto r = std::get_if<IntegerRange>(&p.kind)) {
        double v = static_cast<double>(r->lo) + std::clamp(u[pos], 0.0, 1.0) * static_cast<double>(r->hi - r->lo);
        out[p.name] = std::clamp(static_cast<std::int64_t>(std::llround(v)), r->lo, r->hi);
        pos += 1;
      } else {
        const auto& vals = std::get<Categories>(p.kind).values;
        std::size_t best = 0;
        for (std::size_t c = 1; c < vals.size(); ++c)
          if (u[pos + c] > u[pos + best]) best = c;
        out[p.name] = vals[best];
        pos += vals.size();
      }
    }
    return out;
  }

  /// Assignment -> unit-cube point (categoricals one-hot).
  std::vector<double> encode(const ParamMap& m) const {
    std::vector<double> u;
    u.reserve(encoded_dims());
    for (const auto& p : params) {
      const auto& v = m.at(p.name);
      if (auto r = std::get_if<ContinuousRange>(&p.kind)) {
        u.push_back((std::get<double>(v) - r->lo) / (r->hi - r->lo));
      } else if (auto r = std::get_if<IntegerRange>(&p.kind)) {
        u.push_back(static_cast<double>(std::get<std::int64_t>(v) - r->lo) / static_cast<double>(r->hi - r->lo));
      } else {
        const auto& vals = std::get<Categories>(p.kind).values;
        for (const auto& c : vals) u.push_back(c == std::get<std::string>(v) ? 1.0 : 0.0);
      }
    }
    return u;
  }

  /// One stratum coordinate per parameter (categoricals pick floor(u·count)).
  ParamMap decode_per_param(std::span<const double> u) const {
    ParamMap out;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& p = params[i];
      if (auto c = std::get_if<Categories>(&p.kind)) {
        auto idx = std::min(c->values.size() - 1, static_cast<std::size_t>(u[i] * static_cast<double>(c->values.size())));
        out[p.name] = c->values[idx];
      } else {
        std::vector<double> one{u[i]};
        auto single = SearchSpace{{p}}.decode(one);
        out[p.name] = single.at(p.name);
      }
    }
    return out;
  }
};

// ----------------------------------------------------------- search spaces

/// Hyperparameter ranges per learner. min_samples_split starts at 2 because
/// a one-sample split is undefined.
inline SearchSpace builtin_search_space(LearnerKind kind) {
  SearchSpace s;
  auto tree_space = [&] {
    s.params.push_back({"max_depth", IntegerRange{1, 500}});
    s.params.push_back({"min_samples_split", IntegerRange{2, 20}});
    s.params.push_back({"min_samples_leaf", IntegerRange{1, 20}});
  };
  auto boost_space = [&] {
    s.params.push_back({"max_depth", IntegerRange{1, 500}});
    s.params.push_back({"reg_alpha", ContinuousRange{0.0, 1.0}});
    s.params.push_back({"reg_lambda", ContinuousRange{0.0, 1.0}});
    s.params.push_back({"subsample", ContinuousRange{0.001, 1.0}});
    s.params.push_back({"n_estimators", IntegerRange{1, 1000}});
  };
  switch (kind) {
    case LearnerKind::DecisionTree:
    case LearnerKind::RandomForest: tree_space(); break;
    case LearnerKind::Knn:
      s.params.push_back({"n_neighbors", IntegerRange{1, 10}});
      s.params.push_back({"weights", Categories{{"uniform", "distance"}}});
      s.params.push_back({"p", IntegerRange{1, 5}});
      break;
    case LearnerKind::GbtLevelWise:
    case LearnerKind::GbtLeafWise: boost_space(); break;
  }
  return s;
}

/// Adds the boosting learning rate as a tunable continuous parameter.
inline SearchSpace with_learning_rate(SearchSpace s, double lo = 0.01, double hi = 0.5) {
  s.params.push_back({"learning_rate", ContinuousRange{lo, hi}});
  return s;
}

inline nlohmann::json search_space_to_json(LearnerKind kind, const SearchSpace& s) {
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : s.params) {
    nlohmann::json j{{"name", p.name}};
    if (auto r = std::get_if<ContinuousRange>(&p.kind)) {
      j["type"] = "continuous";
      j["low"] = r->lo;
      j["high"] = r->hi;
    } else if (auto r = std::get_if<IntegerRange>(&p.kind)) {
      j["type"] = "integer";
      j["low"] = r->lo;
      j["high"] = r->hi;
    } else {
      j["type"] = "categorical";
      j["values"] = std::get<Categories>(p.kind).values;
    }
    params.push_back(std::move(j));
  }
  return {{"learner", to_string(kind)}, {"params", std::move(params)}};
}

inline SearchSpace search_space_from_json(const nlohmann::json& j) {
  try {
    SearchSpace s;
    for (const auto& p : j.at("params")) {
      auto type = p.at("type").get<std::string>();
      auto name = p.at("name").get<std::string>();
      if (type == "continuous")
        s.params.push_back({name, ContinuousRange{p.at("low").get<double>(), p.at("high").get<double>()}});
      else if (type == "integer")
        s.params.push_back({name, IntegerRange{p.at("low").get<std::int64_t>(), p.at("high").get<std::int64_t>()}});
      else if (type == "categorical")
        s.params.push_back({name, Categories{p.at("values").get<std::vector<std::string>>()}});
      else
        throw Error(ErrorCode::InvalidArgument, "unknown parameter type '" + type + "'");
    }
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptFile, std::string("search space: ") + e.what());
  }
}

inline SearchSpace load_search_space(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open search space '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptFile, e.what());
  }
  return search_space_from_json(j);
}

// ---------------------------------------------------------------- trials

enum class TrialStatus { Ok, Failed };

struct Trial {
  ParamMap params;
  double objective = std::numeric_limits<double>::quiet_NaN();
  TrialStatus status = TrialStatus::Ok;
  std::string error;
};

enum class StopReason { Budget, Plateau };

struct TuneResult {
  Trial best;
  std::vector<Trial> history;
  StopReason stop = StopReason::Budget;
};

struct TuneOptions {
  std::size_t init_design = 8;
  std::size_t patience = 10;
  double min_delta = 1e-4;
  std::size_t n_candidates = 2048;
  GpOptions gp;
};

inline SurrogateState fit_surrogate(const SearchSpace& space, std::span<const Trial> history,
                                    const GpOptions& options = {}) {
  std::vector<std::vector<double>> pts;
  std::vector<double> ys;
  for (const auto& t : history) {
    if (t.status != TrialStatus::Ok) continue;
    pts.push_back(space.encode(t.params));
    ys.push_back(t.objective);
  }
  if (pts.empty()) throw Error(ErrorCode::NoSuccessfulTrials, "no successful trials to fit");
  return fit_gp(std::move(pts), std::move(ys), options);
}

namespace detail {

inline constexpr std::array<int, 32> kPrimes = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31,  37,  41,  43,  47,  53,
                                                59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131};

inline double radical_inverse(std::uint64_t i, int base) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % static_cast<std::uint64_t>(base));
    i /= static_cast<std::uint64_t>(base);
    f *= inv;
  }
  return r;
}

// Halton points with a seeded Cranley-Patterson rotation.
inline std::vector<std::vector<double>> halton_candidates(std::size_t count, std::size_t dims, std::uint64_t seed) {
  if (dims > kPrimes.size()) throw Error(ErrorCode::InvalidArgument, "too many encoded dimensions");
  Rng rng(seed);
  std::vector<double> shift(dims);
  for (auto& s : shift) s = uniform01(rng);
  std::vector<std::vector<double>> out(count, std::vector<double>(dims));
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t d = 0; d < dims; ++d) {
      double v = radical_inverse(i + 1, kPrimes[d]) + shift[d];
      out[i][d] = v - std::floor(v);
    }
  return out;
}

}  // namespace detail

/// Candidate with the largest EI among n_candidates quasi-random points,
/// each snapped to a feasible assignment before scoring. Ties go to the
/// lexicographically smallest snapped point.
inline ParamMap propose_next(const SurrogateState& s, const SearchSpace& space, std::uint64_t seed,
                             std::size_t n_candidates = 2048) {
  auto cands = detail::halton_candidates(n_candidates, space.encoded_dims(), seed);
  ParamMap best_params;
  std::vector<double> best_point;
  double best_ei = -1.0;
  for (const auto& c : cands) {
    auto params = space.decode(c);
    auto point = space.encode(params);
    double ei = s.expected_improvement_at(point);
    if (ei > best_ei || (ei == best_ei && point < best_point)) {
      best_ei = ei;
      best_point = std::move(point);
      best_params = std::move(params);
    }
  }
  return best_params;
}

using Objective = std::function<double(const ParamMap&)>;

inline TuneResult tune(const SearchSpace& space, const Objective& objective, std::size_t budget, std::uint64_t seed,
                       const TuneOptions& options = {}) {
  space.validate();
  if (budget < options.init_design || options.init_design == 0)
    throw Error(ErrorCode::BudgetTooSmall, "budget " + std::to_string(budget) + " is below the initial design size " +
                                               std::to_string(options.init_design));
  TuneResult result;
  auto evaluate = [&](ParamMap params) {
    Trial t;
    t.params = std::move(params);
    try {
      t.objective = objective(t.params);
      if (!std::isfinite(t.objective)) {
        t.status = TrialStatus::Failed;
        t.error = "non-finite objective";
      }
    } catch (const std::exception& e) {
      t.status = TrialStatus::Failed;
      t.objective = std::numeric_limits<double>::quiet_NaN();
      t.error = e.what();
    }
    result.history.push_back(std::move(t));
  };
  auto best_ok = [&]() {
    double b = std::numeric_limits<double>::infinity();
    for (const auto& t : result.history)
      if (t.status == TrialStatus::Ok) b = std::min(b, t.objective);
    return b;
  };

  // Latin hypercube: one stratum permutation per parameter.
  {
    Rng rng(mix_seed(seed, 0));
    const auto n = options.init_design;
    const auto d = space.params.size();
    std::vector<std::vector<double>> u(n, std::vector<double>(d));
    for (std::size_t j = 0; j < d; ++j) {
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[uniform_index(rng, i)]);
      for (std::size_t i = 0; i < n; ++i)
        u[i][j] = (static_cast<double>(perm[i]) + uniform01(rng)) / static_cast<double>(n);
    }
    for (const auto& row : u) evaluate(space.decode_per_param(row));
  }

  std::size_t stale = 0;
  result.stop = StopReason::Budget;
  std::size_t iteration = 0;
  while (result.history.size() < budget) {
    const double before = best_ok();
    ParamMap next;
    if (std::isfinite(before)) {
      auto surrogate = fit_surrogate(space, result.history, options.gp);
      next = propose_next(surrogate, space, mix_seed(seed, 1000 + iteration), options.n_candidates);
    } else {
      Rng rng(mix_seed(seed, 5000 + iteration));
      std::vector<double> u(space.encoded_dims());
      for (auto& v : u) v = uniform01(rng);
      next = space.decode(u);
    }
    ++iteration;
    evaluate(std::move(next));
    const double after = best_ok();
    if (std::isfinite(after) && (!std::isfinite(before) || before - after >= options.min_delta))
      stale = 0;
    else
      ++stale;
    if (stale >= options.patience) {
      result.stop = StopReason::Plateau;
      break;
    }
  }

  const Trial* best = nullptr;
  for (const auto& t : result.history)
    if (t.status == TrialStatus::Ok && (best == nullptr || t.objective < best->objective)) best = &t;
  if (best == nullptr) throw Error(ErrorCode::NoSuccessfulTrials, "every trial failed");
  result.best = *best;
  return result;
}

/// Validation objective: aggregate RMSE on an inner 80/20 holdout of `train`.
inline Objective holdout_objective(LearnerKind kind, const Dataset& train, std::uint64_t seed,
                                   const ParamMap& fixed = {}) {
  auto [inner_train, holdout] = split_dataset(train, 0.8, mix_seed(seed, 999));
  auto actual = holdout.targets();
  auto x = holdout.features();
  return [kind, inner_train = std::move(inner_train), actual = std::move(actual), x = std::move(x), fixed,
          seed](const ParamMap& params) {
    ParamMap merged = fixed;
    for (const auto& [k, v] : params) merged[k] = v;
    auto model = train_model(kind, inner_train, merged, mix_seed(seed, 1));
    std::vector<TargetTriple> pred;
    pred.reserve(x.size());
    for (const auto& row : x) pred.push_back(predict(model, row));
    return compute_metrics(actual, pred, Scope::Aggregate).rmse;
  };
}

inline TuneResult tune_learner(LearnerKind kind, const SearchSpace& space, const Dataset& train, std::size_t budget,
                               std::uint64_t seed, const TuneOptions& options = {}, const ParamMap& fixed = {}) {
  if (train.empty()) throw Error(ErrorCode::EmptyDataset, "cannot tune on an empty dataset");
  return tune(space, holdout_objective(kind, train, seed, fixed), budget, seed, options);
}

inline void write_history_csv(const SearchSpace& space, const TuneResult& r, std::ostream& out) {
  out << "trial";
  for (const auto& p : space.params) out << ',' << p.name;
  out << ",objective,status\n";
  for (std::size_t i = 0; i < r.history.size(); ++i) {
    const auto& t = r.history[i];
    out << i;
    for (const auto& p : space.params) {
      auto it = t.params.find(p.name);
      out << ',' << (it == t.params.end() ? std::string() : format_param_value(it->second));
    }
    out << ',' << (t.status == TrialStatus::Ok ? detail::format_double(t.objective) : std::string("nan")) << ','
        << (t.status == TrialStatus::Ok ? "ok" : "failed") << '\n';
  }
}

}  // namespace circularity

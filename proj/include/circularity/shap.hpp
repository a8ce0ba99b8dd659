#pragma once

// Interventional Shapley attributions.
//
// The value of a coalition S is the model output averaged over a background
// set, with features in S taken from the explained instance and the rest
// from the background row:
//
//   v(S) = mean_b f(x_S, b_~S)
//   phi_j = Σ_{S ⊆ N\{j}} |S|! (|N|-|S|-1)! / |N|! · [v(S ∪ {j}) - v(S)]
//
// so Σ phi_j = f(x) - v(∅), and v(∅) is the mean output over the background.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "circularity/data.hpp"
#include "circularity/errors.hpp"
#include "circularity/learners.hpp"
#include "circularity/rng.hpp"

namespace circularity {

inline constexpr std::size_t kMaxExactFeatures = 20;
inline constexpr std::size_t kDefaultBackgroundSize = 64;

struct BackgroundSet {
  std::vector<std::vector<double>> rows;

  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }
};

/// Seeded sample of up to `max_rows` distinct dataset rows, encoded.
inline BackgroundSet make_background(const Dataset& d, std::size_t max_rows, std::uint64_t seed) {
  if (d.empty() || max_rows == 0) throw Error(ErrorCode::EmptyBackground, "background needs at least one row");
  std::vector<std::size_t> idx(d.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto m = std::min(max_rows, d.size());
  Rng rng(seed);
  for (std::size_t i = 0; i < m; ++i) std::swap(idx[i], idx[i + uniform_index(rng, d.size() - i)]);
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  BackgroundSet bg;
  for (auto i : idx) {
    auto x = encode_record(d.records[i].building);
    bg.rows.emplace_back(x.begin(), x.end());
  }
  return bg;
}

struct OutputAttribution {
  std::vector<double> phi;
  std::vector<double> std_error;  // sampled estimator only
  double baseline = 0.0;
  double prediction = 0.0;
  double residual = 0.0;  // prediction - baseline - Σ phi before any renormalization

  double sum_phi() const {
    long double s = 0.0L;
    for (double v : phi) s += v;
    return static_cast<double>(s);
  }
  /// |Σ phi - (prediction - baseline)| as delivered.
  double local_accuracy_gap() const { return std::abs(sum_phi() - (prediction - baseline)); }
};

struct ShapExplanation {
  std::vector<OutputAttribution> outputs;
  bool renormalized = false;
};

namespace detail {

inline std::size_t output_count(double) { return 1; }
inline double output_at(double v, std::size_t) { return v; }
inline std::size_t output_count(const TargetTriple&) { return kOutputCount; }
inline double output_at(const TargetTriple& t, std::size_t i) { return t[i]; }
template <std::size_t M>
std::size_t output_count(const std::array<double, M>&) {
  return M;
}
template <std::size_t M>
double output_at(const std::array<double, M>& a, std::size_t i) {
  return a[i];
}

inline void check_background(const BackgroundSet& bg, std::size_t n) {
  if (bg.empty()) throw Error(ErrorCode::EmptyBackground, "background set is empty");
  for (const auto& r : bg.rows)
    if (r.size() != n) throw Error(ErrorCode::SchemaMismatch, "background row width differs from the instance");
}

// Evaluates v(S) for one coalition mask: Σ over outputs into `out`.
template <class F>
void coalition_value(const F& f, std::span<const double> x, const BackgroundSet& bg, std::uint64_t mask,
                     std::vector<double>& z, std::span<long double> acc) {
  std::fill(acc.begin(), acc.end(), 0.0L);
  const auto n = x.size();
  for (const auto& b : bg.rows) {
    for (std::size_t j = 0; j < n; ++j) z[j] = (mask >> j) & 1u ? x[j] : b[j];
    auto r = f(std::span<const double>(z));
    for (std::size_t o = 0; o < acc.size(); ++o) acc[o] += output_at(r, o);
  }
  for (auto& a : acc) a /= static_cast<long double>(bg.size());
}

}  // namespace detail

/// Exact attributions for every output of `f` by enumerating all 2^n
/// coalitions. `f` maps a feature row to double, TargetTriple or
/// std::array<double, M>.
template <class F>
ShapExplanation shap_exact_all(const F& f, std::span<const double> x, const BackgroundSet& bg) {
  const auto n = x.size();
  if (n == 0 || n > kMaxExactFeatures)
    throw Error(ErrorCode::TooManyFeatures, std::to_string(n) + " features exceeds the exact-enumeration bound");
  detail::check_background(bg, n);
  const auto fx = f(x);
  const auto m = detail::output_count(fx);
  const std::uint64_t n_masks = std::uint64_t{1} << n;
  const std::uint64_t full = n_masks - 1;

  std::vector<double> value(n_masks * m);
  std::vector<double> z(n);
  std::vector<long double> acc(m);
  for (std::uint64_t mask = 0; mask < full; ++mask) {
    detail::coalition_value(f, x, bg, mask, z, acc);
    for (std::size_t o = 0; o < m; ++o) value[mask * m + o] = static_cast<double>(acc[o]);
  }
  for (std::size_t o = 0; o < m; ++o) value[full * m + o] = detail::output_at(fx, o);

  // weight[s] = s! (n-s-1)! / n!, via log-gamma to stay finite for large n.
  std::vector<double> weight(n);
  for (std::size_t s = 0; s < n; ++s)
    weight[s] = std::exp(std::lgamma(static_cast<double>(s) + 1.0) + std::lgamma(static_cast<double>(n - s)) -
                         std::lgamma(static_cast<double>(n) + 1.0));

  ShapExplanation out;
  out.outputs.resize(m);
  for (std::size_t o = 0; o < m; ++o) {
    auto& a = out.outputs[o];
    a.phi.assign(n, 0.0);
    a.baseline = value[o];
    a.prediction = value[full * m + o];
    for (std::size_t j = 0; j < n; ++j) {
      const std::uint64_t bit = std::uint64_t{1} << j;
      long double phi = 0.0L;
      for (std::uint64_t mask = 0; mask < n_masks; ++mask) {
        if (mask & bit) continue;
        const auto s = static_cast<std::size_t>(std::popcount(mask));
        phi += static_cast<long double>(weight[s]) *
               (static_cast<long double>(value[(mask | bit) * m + o]) - static_cast<long double>(value[mask * m + o]));
      }
      a.phi[j] = static_cast<double>(phi);
    }
    a.residual = (a.prediction - a.baseline) - a.sum_phi();
  }
  return out;
}

template <class F>
OutputAttribution shap_exact(const F& f, std::span<const double> x, const BackgroundSet& bg,
                             std::size_t output_index) {
  auto all = shap_exact_all(f, x, bg);
  if (output_index >= all.outputs.size()) throw Error(ErrorCode::InvalidArgument, "output index out of range");
  return all.outputs[output_index];
}

/// Permutation-sampling estimate with per-feature standard errors. Each
/// permutation's marginal contributions telescope to f(x) - v(∅); any
/// floating-point residual is spread evenly across features afterwards.
template <class F>
ShapExplanation shap_sampled_all(const F& f, std::span<const double> x, const BackgroundSet& bg,
                                 std::size_t n_permutations, std::uint64_t seed) {
  const auto n = x.size();
  if (n == 0 || n >= 64) throw Error(ErrorCode::TooManyFeatures, "feature count must lie in [1, 63]");
  if (n_permutations < 1) throw Error(ErrorCode::InvalidArgument, "need at least one permutation");
  detail::check_background(bg, n);
  const auto fx = f(x);
  const auto m = detail::output_count(fx);

  std::vector<double> z(n);
  std::vector<long double> acc(m);
  detail::coalition_value(f, x, bg, 0, z, acc);
  std::vector<double> base(m);
  for (std::size_t o = 0; o < m; ++o) base[o] = static_cast<double>(acc[o]);

  std::vector<long double> sum(n * m, 0.0L), sumsq(n * m, 0.0L);
  std::vector<std::size_t> order(n);
  std::vector<double> prev(m), cur(m);
  Rng rng(seed);
  for (std::size_t p = 0; p < n_permutations; ++p) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    std::uint64_t mask = 0;
    prev = base;
    for (std::size_t step = 0; step < n; ++step) {
      const auto j = order[step];
      mask |= std::uint64_t{1} << j;
      if (step + 1 == n) {
        for (std::size_t o = 0; o < m; ++o) cur[o] = detail::output_at(fx, o);
      } else {
        detail::coalition_value(f, x, bg, mask, z, acc);
        for (std::size_t o = 0; o < m; ++o) cur[o] = static_cast<double>(acc[o]);
      }
      for (std::size_t o = 0; o < m; ++o) {
        const long double d = static_cast<long double>(cur[o]) - prev[o];
        sum[j * m + o] += d;
        sumsq[j * m + o] += d * d;
      }
      prev = cur;
    }
  }

  ShapExplanation out;
  out.outputs.resize(m);
  const auto np = static_cast<long double>(n_permutations);
  for (std::size_t o = 0; o < m; ++o) {
    auto& a = out.outputs[o];
    a.baseline = base[o];
    a.prediction = detail::output_at(fx, o);
    a.phi.resize(n);
    a.std_error.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      const long double mean = sum[j * m + o] / np;
      a.phi[j] = static_cast<double>(mean);
      if (n_permutations > 1) {
        long double var = (sumsq[j * m + o] - np * mean * mean) / (np - 1.0L);
        a.std_error[j] = static_cast<double>(std::sqrt(std::max(0.0L, var) / np));
      }
    }
    a.residual = (a.prediction - a.baseline) - a.sum_phi();
    if (a.residual != 0.0) {
      for (auto& v : a.phi) v += a.residual / static_cast<double>(n);
      out.renormalized = true;
    }
  }
  return out;
}

template <class F>
OutputAttribution shap_sampled(const F& f, std::span<const double> x, const BackgroundSet& bg,
                               std::size_t output_index, std::size_t n_permutations, std::uint64_t seed) {
  auto all = shap_sampled_all(f, x, bg, n_permutations, seed);
  if (output_index >= all.outputs.size()) throw Error(ErrorCode::InvalidArgument, "output index out of range");
  return all.outputs[output_index];
}

/// Adapter from a trained model to the explainer's callable contract.
inline auto model_function(const TrainedModel& model) {
  return [&model](std::span<const double> z) {
    FeatureVector v;
    std::copy(z.begin(), z.end(), v.begin());
    return predict(model, v);
  };
}

inline ShapExplanation explain_instance(const TrainedModel& model, const FeatureVector& x, const BackgroundSet& bg) {
  return shap_exact_all(model_function(model), std::span<const double>(x), bg);
}

// ---------------------------------------------------------------- grouping

inline constexpr std::array<std::string_view, 5> kFeatureGroups = {"gfa", "volume", "levels", "frame", "usage"};

inline std::size_t feature_group(std::size_t j) {
  if (j < kFrameOffset) return j;
  return j < kUsageOffset ? 3 : 4;
}

/// Sums each one-hot block into one attribution: (gfa, volume, levels, frame, usage).
inline std::array<double, 5> grouped_phi(std::span<const double> phi) {
  std::array<double, 5> g{};
  for (std::size_t j = 0; j < phi.size() && j < kFeatureCount; ++j) g[feature_group(j)] += phi[j];
  return g;
}

// -------------------------------------------------------- global importance

enum class ShapMethod { Exact, Sampled };

struct GlobalImportance {
  std::vector<std::string> features;
  std::vector<std::vector<double>> per_output;  // [output][feature] mean |phi|
  std::vector<double> overall;                  // mean across outputs
  std::vector<std::size_t> ranking;             // feature indices, most important first
  std::vector<std::vector<double>> grouped_per_output;  // [output][group] mean |Σ group phi|
  std::vector<double> grouped_overall;
};

inline std::vector<std::size_t> rank_descending(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  return idx;
}

struct GlobalImportanceOptions {
  ShapMethod method = ShapMethod::Exact;
  std::size_t n_permutations = 256;
  std::uint64_t seed = 0;
};

inline GlobalImportance global_importance(const TrainedModel& model, const Dataset& eval_set, const BackgroundSet& bg,
                                          const GlobalImportanceOptions& opt = {}) {
  if (eval_set.empty()) throw Error(ErrorCode::EmptyDataset, "evaluation set is empty");
  auto f = model_function(model);
  GlobalImportance g;
  g.features.assign(feature_names().begin(), feature_names().end());
  g.per_output.assign(kOutputCount, std::vector<double>(kFeatureCount, 0.0));
  g.grouped_per_output.assign(kOutputCount, std::vector<double>(kFeatureGroups.size(), 0.0));
  std::size_t row = 0;
  for (const auto& s : eval_set.records) {
    auto x = encode_record(s.building);
    auto e = opt.method == ShapMethod::Exact
                 ? shap_exact_all(f, std::span<const double>(x), bg)
                 : shap_sampled_all(f, std::span<const double>(x), bg, opt.n_permutations, mix_seed(opt.seed, row));
    for (std::size_t o = 0; o < kOutputCount; ++o) {
      for (std::size_t j = 0; j < kFeatureCount; ++j) g.per_output[o][j] += std::abs(e.outputs[o].phi[j]);
      auto grouped = grouped_phi(e.outputs[o].phi);
      for (std::size_t k = 0; k < grouped.size(); ++k) g.grouped_per_output[o][k] += std::abs(grouped[k]);
    }
    ++row;
  }
  const auto n = static_cast<double>(eval_set.size());
  g.overall.assign(kFeatureCount, 0.0);
  g.grouped_overall.assign(kFeatureGroups.size(), 0.0);
  for (std::size_t o = 0; o < kOutputCount; ++o) {
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      g.per_output[o][j] /= n;
      g.overall[j] += g.per_output[o][j] / static_cast<double>(kOutputCount);
    }
    for (std::size_t k = 0; k < kFeatureGroups.size(); ++k) {
      g.grouped_per_output[o][k] /= n;
      g.grouped_overall[k] += g.grouped_per_output[o][k] / static_cast<double>(kOutputCount);
    }
  }
  g.ranking = rank_descending(g.overall);
  return g;
}

// ------------------------------------------------------------------ export

inline void write_explanation_csv(const ShapExplanation& e, std::ostream& out) {
  out << "feature,output,phi\n";
  const auto& names = feature_names();
  for (std::size_t o = 0; o < e.outputs.size(); ++o)
    for (std::size_t j = 0; j < e.outputs[o].phi.size(); ++j)
      out << (j < names.size() ? names[j] : "x" + std::to_string(j)) << ','
          << (o < kOutputNames.size() ? std::string(kOutputNames[o]) : std::to_string(o)) << ','
          << detail::format_double(e.outputs[o].phi[j]) << '\n';
}

/// Horizontal text bars, one block per output, features in given order.
inline void write_bar_chart(std::span<const std::string> labels, std::span<const double> values, std::ostream& out,
                            int width = 40) {
  double max_abs = 0.0;
  for (double v : values) max_abs = std::max(max_abs, std::abs(v));
  std::size_t label_w = 0;
  for (const auto& l : labels) label_w = std::max(label_w, l.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    int len = max_abs > 0 ? static_cast<int>(std::lround(std::abs(values[i]) / max_abs * width)) : 0;
    char num[32];
    std::snprintf(num, sizeof num, "%+12.4f", values[i]);
    out << labels[i] << std::string(label_w - labels[i].size() + 1, ' ') << num << ' '
        << std::string(static_cast<std::size_t>(len), values[i] < 0 ? '-' : '#') << '\n';
  }
}

inline void write_explanation_text(const ShapExplanation& e, std::ostream& out, bool grouped) {
  for (std::size_t o = 0; o < e.outputs.size(); ++o) {
    const auto& a = e.outputs[o];
    char head[160];
    std::snprintf(head, sizeof head, "%s: prediction %.4f = baseline %.4f + sum(phi) %.4f\n",
                  o < kOutputNames.size() ? std::string(kOutputNames[o]).c_str() : "output", a.prediction,
                  a.baseline, a.sum_phi());
    out << head;
    if (grouped) {
      auto g = grouped_phi(a.phi);
      std::vector<std::string> labels(kFeatureGroups.begin(), kFeatureGroups.end());
      write_bar_chart(labels, g, out);
    } else {
      std::vector<std::string> labels(feature_names().begin(), feature_names().end());
      write_bar_chart(labels, a.phi, out);
    }
    out << '\n';
  }
}

}  // namespace circularity

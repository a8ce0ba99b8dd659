#pragma once

// Copeland ranking over pairwise metric comparisons.
//
// For every unordered model pair and every selected metric the better model
// scores +1 and the worse -1 (0 on equal values). A model's Copeland score is
// the sum over all pairs and metrics. Within a pair, the model with the
// larger pair sum records a win and the other a loss.
//
// Ranking: descending score, then more wins, then lower rmse. Models equal on
// all three share the better ordinal and are flagged as tied.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "circularity/errors.hpp"
#include "circularity/metrics.hpp"

namespace circularity {

struct ComparisonMatrix {
  std::vector<std::string> models;
  std::vector<MetricReport> reports;
  std::vector<Metric> metrics{kAllMetrics.begin(), kAllMetrics.end()};
};

struct CopelandEntry {
  std::string model;
  int score = 0;
  int wins = 0;
  int losses = 0;
  int rank = 0;
  bool tied = false;       // shares its rank with another model
  bool score_tie = false;  // equal Copeland score to another model, separated by a later key
};

/// Entries in input order.
struct CopelandResult {
  std::vector<CopelandEntry> entries;

  /// Entries sorted by rank (then name).
  std::vector<CopelandEntry> ranked() const {
    auto out = entries;
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
      return a.rank != b.rank ? a.rank < b.rank : a.model < b.model;
    });
    return out;
  }
};

/// +1 if a is better than b on the metric, -1 if worse, 0 when equal or
/// either value is NaN.
inline int compare_on(Metric m, double a, double b) {
  if (std::isnan(a) || std::isnan(b) || a == b) return 0;
  bool a_better = higher_is_better(m) ? a > b : a < b;
  return a_better ? 1 : -1;
}

inline CopelandResult copeland_rank(const ComparisonMatrix& matrix) {
  const auto n = matrix.models.size();
  if (n < 2 || matrix.reports.size() != n)
    throw Error(ErrorCode::FewerThanTwoModels, "Copeland ranking needs at least two models with one report each");
  for (const auto& r : matrix.reports)
    if (r.scope != matrix.reports[0].scope || r.n_rows != matrix.reports[0].n_rows)
      throw Error(ErrorCode::InconsistentScopes, "all reports must share scope and row count");
  if (matrix.metrics.empty()) throw Error(ErrorCode::InvalidArgument, "no metrics selected");

  CopelandResult result;
  result.entries.resize(n);
  for (std::size_t i = 0; i < n; ++i) result.entries[i].model = matrix.models[i];

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      int pair = 0;
      for (auto m : matrix.metrics) pair += compare_on(m, matrix.reports[i].get(m), matrix.reports[j].get(m));
      result.entries[i].score += pair;
      result.entries[j].score -= pair;
      if (pair > 0) {
        ++result.entries[i].wins;
        ++result.entries[j].losses;
      } else if (pair < 0) {
        ++result.entries[j].wins;
        ++result.entries[i].losses;
      }
    }
  }

  auto rmse_of = [&](std::size_t i) {
    double v = matrix.reports[i].rmse;
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };
  // 0: a before b; equal keys share a rank.
  auto key_less = [&](std::size_t a, std::size_t b) {
    const auto& ea = result.entries[a];
    const auto& eb = result.entries[b];
    if (ea.score != eb.score) return ea.score > eb.score;
    if (ea.wins != eb.wins) return ea.wins > eb.wins;
    return rmse_of(a) < rmse_of(b);
  };
  auto key_equal = [&](std::size_t a, std::size_t b) { return !key_less(a, b) && !key_less(b, a); };

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (key_less(a, b)) return true;
    if (key_less(b, a)) return false;
    return matrix.models[a] < matrix.models[b];
  });
  for (std::size_t pos = 0; pos < n; ++pos) {
    auto idx = order[pos];
    if (pos > 0 && key_equal(order[pos - 1], idx)) {
      result.entries[idx].rank = result.entries[order[pos - 1]].rank;
      result.entries[idx].tied = true;
      result.entries[order[pos - 1]].tied = true;
    } else {
      result.entries[idx].rank = static_cast<int>(pos) + 1;
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && result.entries[i].score == result.entries[j].score) result.entries[i].score_tie = true;
  return result;
}

/// Reads a metric fixture: header `model,rmse,mae,mape,si,u95,r2,nse` (any
/// column order, all seven required) and one row per model.
inline ComparisonMatrix load_metric_fixture(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::MissingColumn, "empty fixture", 1);
  auto header = detail::split_csv_line(line);
  auto find_col = [&](std::string_view name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorCode::MissingColumn, "column '" + std::string(name) + "'", 1);
    return static_cast<std::size_t>(it - header.begin());
  };
  std::vector<std::string> header_copy(header.begin(), header.end());
  auto model_col = find_col("model");
  std::array<std::size_t, 7> cols{};
  for (std::size_t k = 0; k < kAllMetrics.size(); ++k) cols[k] = find_col(to_string(kAllMetrics[k]));

  ComparisonMatrix m;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() < header_copy.size()) throw Error(ErrorCode::MissingColumn, "short row", line_no);
    MetricReport r;
    r.scope = Scope::Aggregate;
    for (std::size_t k = 0; k < kAllMetrics.size(); ++k) {
      auto v = detail::parse_double(cells[cols[k]]);
      if (!v) throw Error(ErrorCode::NonNumeric, std::string(to_string(kAllMetrics[k])), line_no);
      r.set(kAllMetrics[k], *v);
    }
    m.models.emplace_back(cells[model_col]);
    m.reports.push_back(r);
  }
  return m;
}

inline ComparisonMatrix load_metric_fixture(std::string_view text) {
  std::istringstream in{std::string(text)};
  return load_metric_fixture(in);
}

/// Aligned table: Models, Copeland scores, Wins, Losses, Rank (input order).
inline void write_copeland_table(const CopelandResult& r, std::ostream& out) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-18s %16s %6s %8s %6s\n", "Models", "Copeland scores", "Wins", "Losses", "Rank");
  out << buf;
  for (const auto& e : r.entries) {
    std::snprintf(buf, sizeof buf, "%-18s %16d %6d %8d %5d%s\n", e.model.c_str(), e.score, e.wins, e.losses, e.rank,
                  e.tied ? "*" : " ");
    out << buf;
  }
  if (std::any_of(r.entries.begin(), r.entries.end(), [](const auto& e) { return e.tied; }))
    out << "* shared rank\n";
}

inline void write_copeland_csv(const CopelandResult& r, std::ostream& out) {
  out << "model,copeland_score,wins,losses,rank,tied\n";
  for (const auto& e : r.entries)
    out << e.model << ',' << e.score << ',' << e.wins << ',' << e.losses << ',' << e.rank << ',' << (e.tied ? 1 : 0)
        << '\n';
}

}  // namespace circularity

#pragma once

// The seven-metric regression report.
//
//   r2_uncentered = 1 - Σ(D-P)² / ΣD²
//   nse      = 1 - Σ(D-P)² / Σ(D-D̄)²
//   rmse     = √(Σ(D-P)²/n)
//   mae      = Σ|D-P|/n
//   mape     = mean |(D-P)/D| over rows with |D| >= 1e-9
//   si       = rmse / D̄
//   u95      = 1.96·√max(0, SD² - rmse²), SD the population std of D
//
// The aggregate scope first averages the three outputs row-wise, so D and P
// are per-building mean quantities.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "circularity/data.hpp"
#include "circularity/errors.hpp"

namespace circularity {

enum class Scope { Recycle, Reuse, Landfill, Aggregate };

constexpr std::string_view to_string(Scope s) {
  switch (s) {
    case Scope::Recycle: return "recycle";
    case Scope::Reuse: return "reuse";
    case Scope::Landfill: return "landfill";
    case Scope::Aggregate: return "aggregate";
  }
  return "?";
}

// Table column order: RMSE, MAE, MAPE, SI, U95, R2, NSE.
enum class Metric { Rmse, Mae, Mape, Si, U95, R2Uncentered, Nse };

inline constexpr std::array<Metric, 7> kAllMetrics = {Metric::Rmse, Metric::Mae,     Metric::Mape, Metric::Si,
                                                      Metric::U95,  Metric::R2Uncentered, Metric::Nse};

constexpr std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::Rmse: return "rmse";
    case Metric::Mae: return "mae";
    case Metric::Mape: return "mape";
    case Metric::Si: return "si";
    case Metric::U95: return "u95";
    case Metric::R2Uncentered: return "r2";
    case Metric::Nse: return "nse";
  }
  return "?";
}

constexpr bool higher_is_better(Metric m) { return m == Metric::R2Uncentered || m == Metric::Nse; }

inline std::optional<Metric> parse_metric(std::string_view s) {
  for (auto m : kAllMetrics)
    if (to_string(m) == s) return m;
  if (s == "r2_uncentered") return Metric::R2Uncentered;
  return std::nullopt;
}

inline constexpr double kMapeZeroThreshold = 1e-9;

struct MetricReport {
  double r2_uncentered = 0.0;
  double nse = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
  double mape = 0.0;
  double si = 0.0;
  double u95 = 0.0;

  // Alternatives reported alongside, never substituted.
  double r2_centered = 0.0;   // 1 - SSres/SStot (numerically the NSE formula)
  double u95_standard = 0.0;  // 1.96·√(SD² + rmse²)

  std::size_t n_rows = 0;
  std::size_t mape_excluded = 0;
  Scope scope = Scope::Aggregate;

  // Set when the corresponding value is NaN because its formula is undefined.
  bool nse_undefined = false;      // Σ(D-D̄)² = 0
  bool r2_undefined = false;       // ΣD² = 0
  bool mape_all_excluded = false;  // every |D| < 1e-9
  bool si_zero_mean = false;       // D̄ = 0
  bool u95_clamped = false;        // SD² < rmse² under the printed formula

  double get(Metric m) const {
    switch (m) {
      case Metric::Rmse: return rmse;
      case Metric::Mae: return mae;
      case Metric::Mape: return mape;
      case Metric::Si: return si;
      case Metric::U95: return u95;
      case Metric::R2Uncentered: return r2_uncentered;
      case Metric::Nse: return nse;
    }
    return std::numeric_limits<double>::quiet_NaN();
  }

  void set(Metric m, double v) {
    switch (m) {
      case Metric::Rmse: rmse = v; break;
      case Metric::Mae: mae = v; break;
      case Metric::Mape: mape = v; break;
      case Metric::Si: si = v; break;
      case Metric::U95: u95 = v; break;
      case Metric::R2Uncentered: r2_uncentered = v; break;
      case Metric::Nse: nse = v; break;
    }
  }
};

/// Metrics of one measured/predicted series pair.
inline MetricReport series_metrics(std::span<const double> measured, std::span<const double> predicted) {
  if (measured.size() != predicted.size())
    throw Error(ErrorCode::LengthMismatch, std::to_string(measured.size()) + " measured vs " +
                                               std::to_string(predicted.size()) + " predicted values");
  if (measured.empty()) throw Error(ErrorCode::EmptyInput, "metrics need at least one row");
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  const auto n = measured.size();
  const double dn = static_cast<double>(n);

  long double sum_d = 0.0L;
  for (double d : measured) sum_d += d;
  const double mean_d = static_cast<double>(sum_d / dn);

  long double sse = 0.0L, sae = 0.0L, sum_d2 = 0.0L, sst = 0.0L, sape = 0.0L;
  std::size_t mape_rows = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = measured[i];
    const double e = d - predicted[i];
    sse += static_cast<long double>(e) * e;
    sae += std::abs(e);
    sum_d2 += static_cast<long double>(d) * d;
    sst += static_cast<long double>(d - mean_d) * (d - mean_d);
    if (std::abs(d) >= kMapeZeroThreshold) {
      sape += std::abs(e / d);
      ++mape_rows;
    }
  }

  MetricReport r;
  r.n_rows = n;
  r.mape_excluded = n - mape_rows;
  r.rmse = std::sqrt(static_cast<double>(sse / dn));
  r.mae = static_cast<double>(sae / dn);

  if (sum_d2 > 0) {
    r.r2_uncentered = static_cast<double>(1.0L - sse / sum_d2);
  } else {
    r.r2_uncentered = nan;
    r.r2_undefined = true;
  }
  if (sst > 0) {
    r.nse = static_cast<double>(1.0L - sse / sst);
  } else {
    r.nse = nan;
    r.nse_undefined = true;
  }
  r.r2_centered = r.nse;

  if (mape_rows > 0) {
    r.mape = static_cast<double>(sape / static_cast<long double>(mape_rows));
  } else {
    r.mape = nan;
    r.mape_all_excluded = true;
  }
  if (mean_d != 0.0) {
    r.si = r.rmse / mean_d;
  } else {
    r.si = nan;
    r.si_zero_mean = true;
  }

  const double sd2 = static_cast<double>(sst / dn);
  const double diff = sd2 - r.rmse * r.rmse;
  r.u95_clamped = diff < 0.0;
  r.u95 = 1.96 * std::sqrt(std::max(0.0, diff));
  r.u95_standard = 1.96 * std::sqrt(sd2 + r.rmse * r.rmse);
  return r;
}

inline std::vector<double> scope_series(std::span<const TargetTriple> rows, Scope scope) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& t : rows) {
    if (scope == Scope::Aggregate)
      out.push_back((t.recycle + t.reuse + t.landfill) / 3.0);
    else
      out.push_back(t[static_cast<std::size_t>(scope)]);
  }
  return out;
}

inline MetricReport compute_metrics(std::span<const TargetTriple> actual, std::span<const TargetTriple> predicted,
                                    Scope scope) {
  if (actual.size() != predicted.size())
    throw Error(ErrorCode::LengthMismatch, std::to_string(actual.size()) + " actual vs " +
                                               std::to_string(predicted.size()) + " predicted rows");
  auto d = scope_series(actual, scope);
  auto p = scope_series(predicted, scope);
  auto r = series_metrics(d, p);
  r.scope = scope;
  return r;
}

namespace detail {

inline std::string fmt_metric(double v) {
  if (std::isnan(v)) return "NaN";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace detail

/// Aligned table with one row per (label, report), columns in table order.
inline void write_metric_table(std::span<const std::string> labels, std::span<const MetricReport> reports,
                               std::ostream& out) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-18s %10s %10s %10s %10s %10s %10s %10s\n", "Models", "RMSE", "MAE", "MAPE", "SI",
                "U95", "R2", "NSE");
  out << buf;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    std::snprintf(buf, sizeof buf, "%-18s %10s %10s %10s %10s %10s %10s %10s\n", labels[i].c_str(),
                  detail::fmt_metric(r.rmse).c_str(), detail::fmt_metric(r.mae).c_str(),
                  detail::fmt_metric(r.mape).c_str(), detail::fmt_metric(r.si).c_str(),
                  detail::fmt_metric(r.u95).c_str(), detail::fmt_metric(r.r2_uncentered).c_str(),
                  detail::fmt_metric(r.nse).c_str());
    out << buf;
  }
}

inline void write_metric_csv(std::span<const std::string> labels, std::span<const MetricReport> reports,
                             std::ostream& out) {
  out << "model,scope,n_rows,rmse,mae,mape,si,u95,r2,nse,r2_centered,u95_standard,mape_excluded\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    out << labels[i] << ',' << to_string(r.scope) << ',' << r.n_rows;
    for (double v : {r.rmse, r.mae, r.mape, r.si, r.u95, r.r2_uncentered, r.nse, r.r2_centered, r.u95_standard})
      out << ',' << detail::format_double(v);
    out << ',' << r.mape_excluded << '\n';
  }
}

}  // namespace circularity

#pragma once

// Dataset schema, one-hot encoding, CSV ingestion, train/test splitting and
// the seeded synthetic generator.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "circularity/errors.hpp"
#include "circularity/rng.hpp"

namespace circularity {

enum class FrameType { Concrete, Masonry, Steel, Timber };
enum class UsageType { Agricultural, Education, Factory, Hospital, Offices, Residential, Retail };

inline constexpr std::size_t kFrameCount = 4;
inline constexpr std::size_t kUsageCount = 7;
inline constexpr std::size_t kFeatureCount = 3 + kFrameCount + kUsageCount;
inline constexpr std::size_t kOutputCount = 3;

inline constexpr std::array<std::string_view, kFrameCount> kFrameNames = {"Concrete", "Masonry",
                                                                          "Steel", "Timber"};
inline constexpr std::array<std::string_view, kUsageCount> kUsageNames = {
    "Agricultural", "Education", "Factory", "Hospital", "Offices", "Residential", "Retail"};
inline constexpr std::array<std::string_view, kOutputCount> kOutputNames = {"recycle", "reuse",
                                                                            "landfill"};

inline constexpr std::array<FrameType, kFrameCount> kAllFrames = {
    FrameType::Concrete, FrameType::Masonry, FrameType::Steel, FrameType::Timber};
inline constexpr std::array<UsageType, kUsageCount> kAllUsages = {
    UsageType::Agricultural, UsageType::Education, UsageType::Factory,  UsageType::Hospital,
    UsageType::Offices,      UsageType::Residential, UsageType::Retail};

constexpr std::string_view to_string(FrameType f) { return kFrameNames[static_cast<std::size_t>(f)]; }
constexpr std::string_view to_string(UsageType u) { return kUsageNames[static_cast<std::size_t>(u)]; }

inline std::optional<FrameType> parse_frame(std::string_view s) {
  for (std::size_t i = 0; i < kFrameCount; ++i)
    if (kFrameNames[i] == s) return kAllFrames[i];
  return std::nullopt;
}

inline std::optional<UsageType> parse_usage(std::string_view s) {
  for (std::size_t i = 0; i < kUsageCount; ++i)
    if (kUsageNames[i] == s) return kAllUsages[i];
  return std::nullopt;
}

struct BuildingRecord {
  double gfa = 1.0;     // m²
  double volume = 1.0;  // m³
  int levels = 1;
  FrameType frame_type = FrameType::Concrete;
  UsageType usage_type = UsageType::Residential;

  bool operator==(const BuildingRecord&) const = default;
};

/// Recyclable, reusable and landfill quantities in m³.
struct TargetTriple {
  double recycle = 0.0;
  double reuse = 0.0;
  double landfill = 0.0;

  double operator[](std::size_t i) const { return i == 0 ? recycle : (i == 1 ? reuse : landfill); }
  double& operator[](std::size_t i) { return i == 0 ? recycle : (i == 1 ? reuse : landfill); }
  std::array<double, kOutputCount> as_array() const { return {recycle, reuse, landfill}; }
  static TargetTriple from_array(const std::array<double, kOutputCount>& a) { return {a[0], a[1], a[2]}; }

  bool operator==(const TargetTriple&) const = default;
};

/// [gfa, volume, levels, frame one-hot x4, usage one-hot x7].
using FeatureVector = std::array<double, kFeatureCount>;

inline constexpr std::size_t kFrameOffset = 3;
inline constexpr std::size_t kUsageOffset = kFrameOffset + kFrameCount;

inline const std::array<std::string, kFeatureCount>& feature_names() {
  static const std::array<std::string, kFeatureCount> names = [] {
    std::array<std::string, kFeatureCount> n;
    n[0] = "gfa";
    n[1] = "volume";
    n[2] = "levels";
    for (std::size_t i = 0; i < kFrameCount; ++i)
      n[kFrameOffset + i] = "FRAME_TYPE_" + std::string(kFrameNames[i]);
    for (std::size_t i = 0; i < kUsageCount; ++i)
      n[kUsageOffset + i] = "USAGE_TYPE_" + std::string(kUsageNames[i]);
    return n;
  }();
  return names;
}

// FNV-1a over the ordered feature names. Serialized models carry it so a
// model trained against a different column layout is refused at load time.
inline std::uint64_t schema_fingerprint() {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& name : feature_names()) {
    for (unsigned char c : name) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= static_cast<unsigned char>(',');
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string fingerprint_hex(std::uint64_t fp) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fp));
  return buf;
}

inline void validate(const BuildingRecord& r) {
  if (!(r.gfa > 0.0) || !std::isfinite(r.gfa)) throw Error(ErrorCode::ViolatedBound, "gfa must be > 0");
  if (!(r.volume > 0.0) || !std::isfinite(r.volume))
    throw Error(ErrorCode::ViolatedBound, "volume must be > 0");
  if (r.levels < 1) throw Error(ErrorCode::ViolatedBound, "levels must be >= 1");
}

inline FeatureVector encode_record(const BuildingRecord& r) {
  FeatureVector x{};
  x[0] = r.gfa;
  x[1] = r.volume;
  x[2] = static_cast<double>(r.levels);
  x[kFrameOffset + static_cast<std::size_t>(r.frame_type)] = 1.0;
  x[kUsageOffset + static_cast<std::size_t>(r.usage_type)] = 1.0;
  return x;
}

/// Inverse of encode_record; nullopt when either one-hot block is malformed.
inline std::optional<BuildingRecord> decode_features(const FeatureVector& x) {
  auto hot = [&](std::size_t off, std::size_t n) -> std::optional<std::size_t> {
    std::optional<std::size_t> found;
    for (std::size_t i = 0; i < n; ++i) {
      if (x[off + i] == 1.0) {
        if (found) return std::nullopt;
        found = i;
      } else if (x[off + i] != 0.0) {
        return std::nullopt;
      }
    }
    return found;
  };
  auto f = hot(kFrameOffset, kFrameCount);
  auto u = hot(kUsageOffset, kUsageCount);
  if (!f || !u) return std::nullopt;
  BuildingRecord r;
  r.gfa = x[0];
  r.volume = x[1];
  r.levels = static_cast<int>(x[2]);
  r.frame_type = kAllFrames[*f];
  r.usage_type = kAllUsages[*u];
  return r;
}

enum class Provenance { Csv, Synthetic };

struct Sample {
  BuildingRecord building;
  TargetTriple target;

  bool operator==(const Sample&) const = default;
};

struct Dataset {
  std::vector<Sample> records;
  Provenance provenance = Provenance::Csv;
  std::optional<std::uint64_t> seed;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }

  std::vector<FeatureVector> features() const {
    std::vector<FeatureVector> out;
    out.reserve(records.size());
    for (const auto& s : records) out.push_back(encode_record(s.building));
    return out;
  }

  std::vector<TargetTriple> targets() const {
    std::vector<TargetTriple> out;
    out.reserve(records.size());
    for (const auto& s : records) out.push_back(s.target);
    return out;
  }
};

inline constexpr std::string_view kCsvHeader =
    "gfa,volume,levels,frame_type,usage_type,recycle,reuse,landfill";

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    cells.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  for (auto& c : cells) {
    while (!c.empty() && (c.front() == ' ' || c.front() == '\t')) c.remove_prefix(1);
    while (!c.empty() && (c.back() == ' ' || c.back() == '\t' || c.back() == '\r')) c.remove_suffix(1);
  }
  return cells;
}

inline std::optional<double> parse_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v))
    return std::nullopt;
  return v;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Reads the documented CSV schema. Columns may appear in any order; extra
/// columns are ignored. Blank lines are skipped.
inline Dataset load_csv(std::istream& in) {
  static constexpr std::array<std::string_view, 8> kColumns = {
      "gfa", "volume", "levels", "frame_type", "usage_type", "recycle", "reuse", "landfill"};
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw Error(ErrorCode::MissingColumn, "empty input, header expected", 1);
  ++line_no;
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
  auto header = detail::split_csv_line(line);
  std::array<std::size_t, 8> col{};
  for (std::size_t c = 0; c < kColumns.size(); ++c) {
    auto it = std::find(header.begin(), header.end(), kColumns[c]);
    if (it == header.end())
      throw Error(ErrorCode::MissingColumn, "column '" + std::string(kColumns[c]) + "' not in header", 1);
    col[c] = static_cast<std::size_t>(it - header.begin());
  }

  Dataset d;
  d.provenance = Provenance::Csv;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() < header.size())
      throw Error(ErrorCode::MissingColumn,
                  "expected " + std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()),
                  line_no);
    auto num = [&](std::size_t c) {
      auto v = detail::parse_double(cells[col[c]]);
      if (!v)
        throw Error(ErrorCode::NonNumeric,
                    std::string(kColumns[c]) + " = '" + std::string(cells[col[c]]) + "'", line_no);
      return *v;
    };
    Sample s;
    s.building.gfa = num(0);
    s.building.volume = num(1);
    double levels = num(2);
    if (levels != std::floor(levels))
      throw Error(ErrorCode::NonNumeric, "levels must be an integer", line_no);
    auto frame = parse_frame(cells[col[3]]);
    if (!frame)
      throw Error(ErrorCode::UnknownCategory, "frame_type '" + std::string(cells[col[3]]) + "'", line_no);
    auto usage = parse_usage(cells[col[4]]);
    if (!usage)
      throw Error(ErrorCode::UnknownCategory, "usage_type '" + std::string(cells[col[4]]) + "'", line_no);
    s.building.frame_type = *frame;
    s.building.usage_type = *usage;
    s.target = {num(5), num(6), num(7)};

    if (!(s.building.gfa > 0)) throw Error(ErrorCode::ViolatedBound, "gfa must be > 0", line_no);
    if (!(s.building.volume > 0)) throw Error(ErrorCode::ViolatedBound, "volume must be > 0", line_no);
    if (levels < 1 || levels > 1e6) throw Error(ErrorCode::ViolatedBound, "levels must be >= 1", line_no);
    s.building.levels = static_cast<int>(levels);
    for (std::size_t o = 0; o < kOutputCount; ++o)
      if (s.target[o] < 0)
        throw Error(ErrorCode::ViolatedBound, std::string(kOutputNames[o]) + " must be >= 0", line_no);
    d.records.push_back(s);
  }
  return d;
}

inline Dataset load_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  return load_csv(in);
}

inline void write_csv(const Dataset& d, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (const auto& s : d.records) {
    out << detail::format_double(s.building.gfa) << ',' << detail::format_double(s.building.volume) << ','
        << s.building.levels << ',' << to_string(s.building.frame_type) << ','
        << to_string(s.building.usage_type) << ',' << detail::format_double(s.target.recycle) << ','
        << detail::format_double(s.target.reuse) << ',' << detail::format_double(s.target.landfill) << '\n';
  }
}

/// Seeded shuffle, then the first round(train_fraction * n) rows (half-up)
/// become the training part.
inline std::pair<Dataset, Dataset> split_dataset(const Dataset& d, double train_fraction, std::uint64_t seed) {
  if (d.empty()) throw Error(ErrorCode::EmptyDataset, "cannot split an empty dataset");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw Error(ErrorCode::InvalidArgument, "train_fraction must lie in (0, 1)");
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

  auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(d.size()) + 0.5));
  Dataset train{{}, d.provenance, d.seed};
  Dataset test{{}, d.provenance, d.seed};
  train.records.reserve(n_train);
  test.records.reserve(d.size() - n_train);
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_train ? train : test).records.push_back(d.records[order[i]]);
  return {std::move(train), std::move(test)};
}

struct Bounds {
  double lo;
  double hi;
  double clamp(double v) const { return std::clamp(v, lo, hi); }
};

/// Per-frame output per m² of GFA.
struct CircularityRates {
  double recycle;
  double reuse;
  double landfill;
};

// Calibration targets are the descriptive statistics of the 2280-building
// UK demolition dataset (means / std / min / max). Categorical priors, rate
// multipliers and usage modifiers are invented.
struct GeneratorConfig {
  std::size_t n = 2280;
  std::uint64_t seed = 7;
  std::array<double, kFrameCount> frame_probs = {0.30, 0.40, 0.20, 0.10};
  std::array<double, kUsageCount> usage_probs = {0.05, 0.12, 0.15, 0.05, 0.18, 0.35, 0.10};
  // Mean ratios recycle/gfa = 500.07/1962.75, reuse/gfa = 108.87/1962.75,
  // landfill/gfa = 74.76/1962.75, scaled per frame.
  std::array<CircularityRates, kFrameCount> frame_rates = {{
      {0.2548 * 1.20, 0.0555 * 0.60, 0.0381 * 1.10},  // Concrete
      {0.2548 * 1.00, 0.0555 * 1.00, 0.0381 * 1.00},  // Masonry
      {0.2548 * 0.85, 0.0555 * 1.60, 0.0381 * 0.80},  // Steel
      {0.2548 * 0.70, 0.0555 * 1.40, 0.0381 * 1.30},  // Timber
  }};
  std::array<double, kUsageCount> usage_modifiers = {-0.10, 0.05, -0.05, 0.10, 0.0, 0.0, 0.05};
  double noise_sigma = 0.15;
  // Lognormal GFA matched to mean 1962.75 and std 2684.70.
  double gfa_log_mu = 7.0552;
  double gfa_log_sigma = 1.0270;
  double extra_levels_mean = 1.0;  // levels = 1 + Poisson(extra_levels_mean)
  double storey_height_mean = 3.5;
  double storey_height_std = 0.4;
  Bounds storey_height{2.0, 6.0};
  Bounds gfa_bounds{4.80, 10051.00};
  Bounds volume_bounds{9.60, 76380.00};
  Bounds levels_bounds{1.0, 7.0};
  Bounds recycle_bounds{0.98, 4453.63};
  Bounds reuse_bounds{0.11, 1936.34};
  Bounds landfill_bounds{0.00, 1229.50};

  void validate() const {
    if (n < 1) throw Error(ErrorCode::InvalidArgument, "generator n must be >= 1");
    auto check_probs = [](std::span<const double> p, const char* what) {
      double sum = 0.0;
      for (double v : p) {
        if (!(v >= 0.0)) throw Error(ErrorCode::InvalidArgument, std::string(what) + " must be >= 0");
        sum += v;
      }
      if (std::abs(sum - 1.0) > 1e-12)
        throw Error(ErrorCode::InvalidArgument, std::string(what) + " must sum to 1");
    };
    check_probs(frame_probs, "frame_probs");
    check_probs(usage_probs, "usage_probs");
    for (const auto& r : frame_rates)
      if (r.recycle < 0 || r.reuse < 0 || r.landfill < 0)
        throw Error(ErrorCode::InvalidArgument, "circularity rates must be >= 0");
    for (double m : usage_modifiers)
      if (m <= -1.0) throw Error(ErrorCode::InvalidArgument, "usage modifiers must exceed -1");
    if (noise_sigma < 0 || gfa_log_sigma < 0 || storey_height_std < 0)
      throw Error(ErrorCode::InvalidArgument, "scale parameters must be >= 0");
  }
};

/// Noise-free target law: rate(frame) * gfa * (1 + usage_modifier), clipped.
inline TargetTriple expected_targets(const GeneratorConfig& cfg, const BuildingRecord& b, double noise = 1.0) {
  const auto& rate = cfg.frame_rates[static_cast<std::size_t>(b.frame_type)];
  double scale = b.gfa * (1.0 + cfg.usage_modifiers[static_cast<std::size_t>(b.usage_type)]) * noise;
  return {cfg.recycle_bounds.clamp(rate.recycle * scale), cfg.reuse_bounds.clamp(rate.reuse * scale),
          cfg.landfill_bounds.clamp(rate.landfill * scale)};
}

inline Dataset generate_synthetic(const GeneratorConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  std::normal_distribution<double> std_normal(0.0, 1.0);
  std::discrete_distribution<std::size_t> frame_dist(cfg.frame_probs.begin(), cfg.frame_probs.end());
  std::discrete_distribution<std::size_t> usage_dist(cfg.usage_probs.begin(), cfg.usage_probs.end());
  std::poisson_distribution<int> extra_levels(cfg.extra_levels_mean > 0 ? cfg.extra_levels_mean : 1e-12);

  Dataset d;
  d.provenance = Provenance::Synthetic;
  d.seed = cfg.seed;
  d.records.reserve(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    Sample s;
    auto& b = s.building;
    b.gfa = cfg.gfa_bounds.clamp(std::exp(cfg.gfa_log_mu + cfg.gfa_log_sigma * std_normal(rng)));
    b.levels = static_cast<int>(cfg.levels_bounds.clamp(1.0 + extra_levels(rng)));
    double height = cfg.storey_height.clamp(cfg.storey_height_mean + cfg.storey_height_std * std_normal(rng));
    b.volume = cfg.volume_bounds.clamp(b.gfa * height);
    b.frame_type = kAllFrames[frame_dist(rng)];
    b.usage_type = kAllUsages[usage_dist(rng)];
    // Mean-one lognormal multiplicative noise.
    double z = std_normal(rng);
    double eps = cfg.noise_sigma > 0 ? std::exp(cfg.noise_sigma * z - 0.5 * cfg.noise_sigma * cfg.noise_sigma) : 1.0;
    s.target = expected_targets(cfg, b, eps);
    d.records.push_back(s);
  }
  return d;
}

struct ColumnStats {
  double mean = 0.0;
  double std = 0.0;  // population
  double min = 0.0;
  double max = 0.0;
};

struct DescriptiveStats {
  static constexpr std::array<std::string_view, 6> kColumns = {"gfa",     "volume", "levels",
                                                               "recycle", "reuse",  "landfill"};
  std::array<ColumnStats, 6> columns;
  std::size_t n = 0;
};

inline ColumnStats column_stats(std::span<const double> v) {
  if (v.empty()) throw Error(ErrorCode::EmptyDataset, "no values");
  ColumnStats s;
  s.min = *std::min_element(v.begin(), v.end());
  s.max = *std::max_element(v.begin(), v.end());
  long double sum = 0.0L;
  for (double x : v) sum += x;
  s.mean = static_cast<double>(sum / static_cast<long double>(v.size()));
  long double ss = 0.0L;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(static_cast<double>(ss / static_cast<long double>(v.size())));
  // Rounding can push a constant column's mean one ulp outside [min, max].
  s.mean = std::clamp(s.mean, s.min, s.max);
  return s;
}

inline DescriptiveStats summarize(const Dataset& d) {
  if (d.empty()) throw Error(ErrorCode::EmptyDataset, "cannot summarize an empty dataset");
  DescriptiveStats out;
  out.n = d.size();
  std::array<std::vector<double>, 6> cols;
  for (auto& c : cols) c.reserve(d.size());
  for (const auto& s : d.records) {
    cols[0].push_back(s.building.gfa);
    cols[1].push_back(s.building.volume);
    cols[2].push_back(s.building.levels);
    cols[3].push_back(s.target.recycle);
    cols[4].push_back(s.target.reuse);
    cols[5].push_back(s.target.landfill);
  }
  for (std::size_t c = 0; c < cols.size(); ++c) out.columns[c] = column_stats(cols[c]);
  return out;
}

/// Aligned text table in the layout of a descriptive-analysis report.
inline void write_stats_table(const DescriptiveStats& s, std::ostream& out) {
  static constexpr std::array<std::string_view, 6> kLabels = {
      "GFA", "Volume", "Number of levels", "Recyclable material", "Reusable materials", "Landfill materials"};
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-22s %12s %12s %12s %12s\n", "Factor", "Mean", "Std", "Min", "Max");
  out << buf;
  for (std::size_t c = 0; c < 6; ++c) {
    const auto& col = s.columns[c];
    std::snprintf(buf, sizeof buf, "%-22s %12.2f %12.2f %12.2f %12.2f\n", std::string(kLabels[c]).c_str(),
                  col.mean, col.std, col.min, col.max);
    out << buf;
  }
  out << "n = " << s.n << '\n';
}

}  // namespace circularity

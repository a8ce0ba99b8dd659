#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "circularity/data.hpp"
#include "circularity/rng.hpp"

namespace testutil {

using namespace circularity;

/// Random records with continuous geometry and arbitrary targets, so ties
/// in feature values (and hence split thresholds) are unlikely.
inline Dataset random_dataset(std::size_t n, std::uint64_t seed, bool smooth_targets = false) {
  Rng rng(seed);
  std::uniform_real_distribution<double> area(10.0, 5000.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Dataset d;
  d.provenance = Provenance::Csv;
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    s.building.gfa = area(rng);
    s.building.volume = s.building.gfa * (2.5 + 2.0 * u(rng));
    s.building.levels = 1 + static_cast<int>(uniform_index(rng, 7));
    s.building.frame_type = kAllFrames[uniform_index(rng, kFrameCount)];
    s.building.usage_type = kAllUsages[uniform_index(rng, kUsageCount)];
    if (smooth_targets) {
      double f = 1.0 + 0.2 * static_cast<double>(s.building.frame_type);
      s.target = {0.25 * s.building.gfa * f, 0.05 * s.building.gfa + 3.0 * s.building.levels,
                  0.04 * s.building.gfa / f};
    } else {
      s.target = {1000.0 * u(rng), 200.0 * u(rng), 100.0 * u(rng)};
    }
    d.records.push_back(s);
  }
  return d;
}

inline FeatureVector random_features(Rng& rng) {
  BuildingRecord r;
  std::uniform_real_distribution<double> area(5.0, 10000.0);
  r.gfa = area(rng);
  r.volume = r.gfa * 3.2;
  r.levels = 1 + static_cast<int>(uniform_index(rng, 7));
  r.frame_type = kAllFrames[uniform_index(rng, kFrameCount)];
  r.usage_type = kAllUsages[uniform_index(rng, kUsageCount)];
  return encode_record(r);
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("circularity_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testutil

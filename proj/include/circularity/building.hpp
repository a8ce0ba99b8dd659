#pragma once

// Local building-model files: a storey table from which GFA, volume and level
// count are derived. Schema in docs/building-file.md.

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "circularity/data.hpp"
#include "circularity/errors.hpp"

namespace circularity {

struct Storey {
  std::string label;
  double floor_area = 0.0;  // m²
  double height = 0.0;      // m
};

struct BuildingModelFile {
  std::string name;
  std::vector<Storey> storeys;
  std::optional<FrameType> frame_type;
  std::optional<UsageType> usage_type;
};

struct BuildingGeometry {
  double gfa = 0.0;
  double volume = 0.0;
  int levels = 0;
};

/// gfa = Σ floor_area, volume = Σ floor_area·height, levels = storey count.
inline BuildingGeometry ingest_building(const BuildingModelFile& file) {
  if (file.storeys.empty()) throw Error(ErrorCode::NoStoreys, "building '" + file.name + "' has no storeys");
  BuildingGeometry g;
  for (std::size_t i = 0; i < file.storeys.size(); ++i) {
    const auto& s = file.storeys[i];
    auto label = s.label.empty() ? "#" + std::to_string(i + 1) : s.label;
    if (!(s.floor_area > 0.0) || !std::isfinite(s.floor_area))
      throw Error(ErrorCode::NonPositiveDimension, "storey '" + label + "' floor_area must be > 0");
    if (!(s.height > 0.0) || !std::isfinite(s.height))
      throw Error(ErrorCode::NonPositiveDimension, "storey '" + label + "' height must be > 0");
    g.gfa += s.floor_area;
    g.volume += s.floor_area * s.height;
  }
  g.levels = static_cast<int>(file.storeys.size());
  return g;
}

/// Parses the JSON building schema. Structural problems (wrong types,
/// unknown enum strings) raise CorruptFile / UnknownCategory; dimension
/// checks are left to ingest_building.
inline BuildingModelFile building_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object()) throw Error(ErrorCode::CorruptFile, "building must be an object");
    BuildingModelFile b;
    b.name = j.value("name", std::string());
    if (!j.contains("storeys") || !j.at("storeys").is_array())
      throw Error(ErrorCode::CorruptFile, "building needs a 'storeys' array");
    for (const auto& s : j.at("storeys")) {
      Storey st;
      st.label = s.value("label", std::string());
      st.floor_area = s.at("floor_area").get<double>();
      st.height = s.at("height").get<double>();
      b.storeys.push_back(std::move(st));
    }
    if (j.contains("frame_type")) {
      auto f = parse_frame(j.at("frame_type").get<std::string>());
      if (!f) throw Error(ErrorCode::UnknownCategory, "frame_type '" + j.at("frame_type").get<std::string>() + "'");
      b.frame_type = *f;
    }
    if (j.contains("usage_type")) {
      auto u = parse_usage(j.at("usage_type").get<std::string>());
      if (!u) throw Error(ErrorCode::UnknownCategory, "usage_type '" + j.at("usage_type").get<std::string>() + "'");
      b.usage_type = *u;
    }
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptFile, std::string("building file: ") + e.what());
  }
}

inline BuildingModelFile load_building(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open building file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptFile, std::string("building file: ") + e.what());
  }
  return building_from_json(j);
}

}  // namespace circularity

#pragma once

// Versioned JSON model files. The grammar is documented in
// docs/model-format.md; doubles are written in shortest round-trip form so a
// reloaded model predicts bit-identically.

#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "circularity/data.hpp"
#include "circularity/errors.hpp"
#include "circularity/learners.hpp"

namespace circularity {

inline constexpr int kModelFormatMajor = 1;
inline constexpr int kModelFormatMinor = 0;
inline constexpr std::string_view kModelFormatTag = "circularity-model";

namespace detail {

using nlohmann::json;

template <std::size_t K>
json tree_to_json(const RegressionTree<K>& t) {
  json nodes = json::array();
  for (const auto& n : t.nodes) {
    json row = json::array({n.feature, n.threshold, n.left, n.right, n.n_samples});
    for (double v : n.value) row.push_back(v);
    nodes.push_back(std::move(row));
  }
  return nodes;
}

[[noreturn]] inline void corrupt(const std::string& what) { throw Error(ErrorCode::CorruptFile, what); }

template <std::size_t K>
RegressionTree<K> tree_from_json(const json& j) {
  RegressionTree<K> t;
  if (!j.is_array() || j.empty()) corrupt("tree must be a non-empty node array");
  const auto count = static_cast<std::int64_t>(j.size());
  for (const auto& row : j) {
    if (!row.is_array() || row.size() != 5 + K) corrupt("tree node has the wrong arity");
    TreeNode<K> n;
    n.feature = row[0].get<std::int32_t>();
    n.threshold = row[1].get<double>();
    n.left = row[2].get<std::int32_t>();
    n.right = row[3].get<std::int32_t>();
    n.n_samples = row[4].get<std::int64_t>();
    for (std::size_t k = 0; k < K; ++k) n.value[k] = row[5 + k].get<double>();
    t.nodes.push_back(n);
  }
  // Preorder: children strictly after their parent, so traversal terminates.
  for (std::int64_t i = 0; i < count; ++i) {
    const auto& n = t.nodes[static_cast<std::size_t>(i)];
    if (n.is_leaf()) {
      if (n.feature != -1) corrupt("invalid leaf marker");
      continue;
    }
    if (n.feature >= static_cast<std::int32_t>(kFeatureCount)) corrupt("feature index out of range");
    if (n.left <= i || n.right <= i || n.left >= count || n.right >= count) corrupt("child index out of range");
  }
  return t;
}

inline json boost_params_json(const BoostParams& p) {
  return {{"max_depth", p.max_depth},         {"reg_alpha", p.alpha},
          {"reg_lambda", p.lambda},           {"subsample", p.subsample},
          {"n_estimators", p.n_estimators},   {"learning_rate", p.learning_rate},
          {"min_samples_leaf", p.min_samples_leaf}};
}

inline BoostParams boost_params_from_json(const json& j) {
  BoostParams p;
  p.max_depth = j.at("max_depth").get<int>();
  p.alpha = j.at("reg_alpha").get<double>();
  p.lambda = j.at("reg_lambda").get<double>();
  p.subsample = j.at("subsample").get<double>();
  p.n_estimators = j.at("n_estimators").get<int>();
  p.learning_rate = j.at("learning_rate").get<double>();
  p.min_samples_leaf = j.at("min_samples_leaf").get<int>();
  return p;
}

inline json tree_params_json(const TreeParams& p) {
  return {{"max_depth", p.max_depth}, {"min_samples_split", p.min_samples_split}, {"min_samples_leaf", p.min_samples_leaf}};
}

inline TreeParams tree_params_from_json(const json& j) {
  return {j.at("max_depth").get<int>(), j.at("min_samples_split").get<int>(), j.at("min_samples_leaf").get<int>()};
}

inline void ensemble_to_json(const BoostedEnsemble& m, json& params, json& body) {
  params = boost_params_json(m.params);
  body["base_score"] = m.base_score;
  json outputs = json::array();
  for (std::size_t o = 0; o < kOutputCount; ++o) {
    json stages = json::array();
    for (const auto& t : m.stages[o]) stages.push_back(tree_to_json(t));
    outputs.push_back(std::move(stages));
  }
  body["stages"] = std::move(outputs);
}

inline void ensemble_from_json(BoostedEnsemble& m, const json& params, const json& body) {
  m.params = boost_params_from_json(params);
  m.base_score = body.at("base_score").get<std::array<double, kOutputCount>>();
  const auto& outputs = body.at("stages");
  if (!outputs.is_array() || outputs.size() != kOutputCount) corrupt("expected one stage list per output");
  for (std::size_t o = 0; o < kOutputCount; ++o)
    for (const auto& t : outputs[o]) m.stages[o].push_back(tree_from_json<1>(t));
}

inline std::string provenance_name(Provenance p) { return p == Provenance::Csv ? "csv" : "synthetic"; }

}  // namespace detail

inline nlohmann::json model_to_json(const TrainedModel& model) {
  using detail::json;
  json params;
  json body = json::object();
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, DecisionTreeModel>) {
          params = detail::tree_params_json(m.params);
          body["tree"] = detail::tree_to_json(m.tree);
        } else if constexpr (std::is_same_v<T, KnnModel>) {
          params = {{"n_neighbors", m.params.k},
                    {"weights", m.params.weighting == KnnWeighting::Uniform ? "uniform" : "distance"},
                    {"p", m.params.p}};
          body["scale"] = m.scale;
          json pts = json::array();
          for (const auto& p : m.points) pts.push_back(p);
          body["points"] = std::move(pts);
          json ys = json::array();
          for (const auto& y : m.targets) ys.push_back(y.as_array());
          body["targets"] = std::move(ys);
        } else if constexpr (std::is_same_v<T, ForestModel>) {
          params = detail::tree_params_json(m.params.tree);
          params["n_trees"] = m.params.n_trees;
          params["features_per_split"] = m.params.features_per_split;
          params["bootstrap"] = m.params.bootstrap ? 1 : 0;
          body["seed"] = m.seed;
          json trees = json::array();
          for (const auto& t : m.trees) trees.push_back(detail::tree_to_json(t));
          body["trees"] = std::move(trees);
        } else if constexpr (std::is_same_v<T, LevelWiseBoostModel>) {
          detail::ensemble_to_json(m, params, body);
        } else {
          detail::ensemble_to_json(m, params, body);
          params["goss_a"] = m.goss.a;
          params["goss_b"] = m.goss.b;
          params["num_leaves"] = m.goss.max_leaves;
        }
      },
      model.state);

  const auto& md = model.metadata;
  json meta = {{"seed", md.seed},
               {"trained_at", md.trained_at},
               {"provenance", detail::provenance_name(md.provenance)},
               {"n_train", md.n_train}};
  meta["data_seed"] = md.data_seed ? json(*md.data_seed) : json(nullptr);

  return {{"format", kModelFormatTag},
          {"version", std::to_string(kModelFormatMajor) + "." + std::to_string(kModelFormatMinor)},
          {"fingerprint", fingerprint_hex(model.fingerprint)},
          {"kind", to_string(model.kind())},
          {"metadata", std::move(meta)},
          {"params", std::move(params)},
          {"model", std::move(body)}};
}

inline void save_model(const TrainedModel& model, std::ostream& out) {
  out << model_to_json(model).dump() << '\n';
  if (!out) throw Error(ErrorCode::Io, "failed to write model");
}

inline void save_model(const TrainedModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
  save_model(model, out);
}

inline TrainedModel model_from_json(const nlohmann::json& j) {
  using detail::json;
  try {
    if (!j.is_object() || j.value("format", "") != kModelFormatTag) detail::corrupt("not a model file");
    auto version = j.at("version").get<std::string>();
    auto dot = version.find('.');
    int major = 0;
    try {
      major = std::stoi(version.substr(0, dot));
    } catch (const std::exception&) {
      detail::corrupt("unreadable version '" + version + "'");
    }
    if (major != kModelFormatMajor)
      throw Error(ErrorCode::VersionMismatch,
                  "file version " + version + ", reader supports " + std::to_string(kModelFormatMajor) + ".x");
    if (j.at("fingerprint").get<std::string>() != fingerprint_hex(schema_fingerprint()))
      throw Error(ErrorCode::SchemaMismatch, "model was trained on a different feature layout");

    auto kind = parse_learner(j.at("kind").get<std::string>());
    if (!kind) detail::corrupt("unknown learner kind");
    const auto& params = j.at("params");
    const auto& body = j.at("model");

    TrainedModel model;
    model.fingerprint = schema_fingerprint();
    const auto& meta = j.at("metadata");
    model.metadata.seed = meta.at("seed").get<std::uint64_t>();
    model.metadata.trained_at = meta.at("trained_at").get<std::string>();
    model.metadata.provenance = meta.at("provenance").get<std::string>() == "csv" ? Provenance::Csv : Provenance::Synthetic;
    model.metadata.n_train = meta.at("n_train").get<std::size_t>();
    if (!meta.at("data_seed").is_null()) model.metadata.data_seed = meta.at("data_seed").get<std::uint64_t>();

    switch (*kind) {
      case LearnerKind::DecisionTree: {
        DecisionTreeModel m{detail::tree_params_from_json(params), detail::tree_from_json<kOutputCount>(body.at("tree"))};
        model.state = std::move(m);
        break;
      }
      case LearnerKind::Knn: {
        KnnModel m;
        m.params.k = params.at("n_neighbors").get<int>();
        m.params.weighting = params.at("weights").get<std::string>() == "distance" ? KnnWeighting::Distance : KnnWeighting::Uniform;
        m.params.p = params.at("p").get<double>();
        m.scale = body.at("scale").get<FeatureVector>();
        m.points = body.at("points").get<std::vector<FeatureVector>>();
        for (const auto& y : body.at("targets"))
          m.targets.push_back(TargetTriple::from_array(y.get<std::array<double, kOutputCount>>()));
        if (m.points.size() != m.targets.size() || m.params.k < 1 ||
            static_cast<std::size_t>(m.params.k) > m.points.size())
          detail::corrupt("inconsistent KNN payload");
        model.state = std::move(m);
        break;
      }
      case LearnerKind::RandomForest: {
        ForestModel m;
        m.params.tree = detail::tree_params_from_json(params);
        m.params.n_trees = params.at("n_trees").get<int>();
        m.params.features_per_split = params.at("features_per_split").get<std::size_t>();
        m.params.bootstrap = params.at("bootstrap").get<int>() != 0;
        m.seed = body.at("seed").get<std::uint64_t>();
        for (const auto& t : body.at("trees")) m.trees.push_back(detail::tree_from_json<kOutputCount>(t));
        if (m.trees.empty()) detail::corrupt("forest has no trees");
        model.state = std::move(m);
        break;
      }
      case LearnerKind::GbtLevelWise: {
        LevelWiseBoostModel m;
        detail::ensemble_from_json(m, params, body);
        model.state = std::move(m);
        break;
      }
      case LearnerKind::GbtLeafWise: {
        LeafWiseBoostModel m;
        detail::ensemble_from_json(m, params, body);
        m.goss.a = params.at("goss_a").get<double>();
        m.goss.b = params.at("goss_b").get<double>();
        m.goss.max_leaves = params.at("num_leaves").get<std::size_t>();
        model.state = std::move(m);
        break;
      }
    }
    return model;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptFile, e.what());
  }
}

inline TrainedModel load_model(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptFile, e.what());
  }
  return model_from_json(j);
}

inline TrainedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open model file '" + path + "'");
  return load_model(in);
}

}  // namespace circularity

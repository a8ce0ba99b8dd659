#pragma once

// Prediction / explanation HTTP service.
//
//   GET  /healthz        -> 200 "ok"
//   GET  /v1/model/info  -> learner kind, fingerprint, training metadata
//   POST /v1/predict     -> recycle_m3, reuse_m3, landfill_m3 + resolved features
//   POST /v1/explain     -> per-output attributions (14 features + 5 groups)
//
// Handlers are plain functions of (request body) -> (status, JSON body) so
// they can be exercised without a socket; mount() wires them into httplib.
// Errors: {"error": {"code": <snake_case>, "message": ...}} with 400 for
// malformed input, 422 for building-file violations, 503 for /v1/explain
// without a background set.

#include <chrono>
#include <ctime>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "circularity/building.hpp"
#include "circularity/data.hpp"
#include "circularity/errors.hpp"
#include "circularity/learners.hpp"
#include "circularity/model_io.hpp"
#include "circularity/shap.hpp"

// Last: <resolv.h> (via httplib) defines a `_res` macro that breaks Eigen.
#include <httplib.h>

namespace circularity {

struct HttpReply {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string model_path;
  std::string background_path;  // dataset CSV; empty disables /v1/explain
  std::size_t background_size = kDefaultBackgroundSize;
  std::uint64_t seed = 0;
  std::string request_log_path;
};

/// Inline features or a building-file reference, plus categories.
struct PredictRequest {
  std::optional<BuildingGeometry> inline_features;
  std::optional<BuildingModelFile> building;
  std::optional<std::string> building_path;
  std::optional<FrameType> frame_type;
  std::optional<UsageType> usage_type;
};

namespace detail {

struct RequestError {
  int status;
  ErrorCode code;
  std::string message;
};

inline HttpReply error_reply(int status, std::string_view code, const std::string& message) {
  nlohmann::json j{{"error", {{"code", code}, {"message", message}}}};
  return {status, j.dump()};
}

inline int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoStoreys:
    case ErrorCode::NonPositiveDimension:
    case ErrorCode::CorruptFile:
    case ErrorCode::Io: return 422;
    case ErrorCode::EmptyBackground: return 503;
    default: return 400;
  }
}

inline nlohmann::json features_json(const BuildingRecord& r) {
  return {{"gfa", r.gfa},
          {"volume", r.volume},
          {"levels", r.levels},
          {"frame_type", to_string(r.frame_type)},
          {"usage_type", to_string(r.usage_type)}};
}

}  // namespace detail

inline PredictRequest parse_predict_request(std::string_view body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("request body is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "request body must be a JSON object");
  PredictRequest req;
  auto number = [&](const char* key) {
    if (!j.contains(key)) throw Error(ErrorCode::InvalidArgument, std::string("missing field '") + key + "'");
    if (!j.at(key).is_number()) throw Error(ErrorCode::InvalidArgument, std::string("field '") + key + "' must be numeric");
    return j.at(key).get<double>();
  };
  const bool has_inline = j.contains("gfa") || j.contains("volume") || j.contains("levels");
  const int sources = (has_inline ? 1 : 0) + (j.contains("building") ? 1 : 0) + (j.contains("building_file") ? 1 : 0);
  if (sources != 1)
    throw Error(ErrorCode::InvalidArgument, "provide exactly one of {gfa, volume, levels}, 'building' or 'building_file'");
  if (has_inline) {
    BuildingGeometry g;
    g.gfa = number("gfa");
    g.volume = number("volume");
    double levels = number("levels");
    if (levels != std::floor(levels) || levels < 1 || levels > 1e6)
      throw Error(ErrorCode::InvalidArgument, "levels must be an integer >= 1");
    g.levels = static_cast<int>(levels);
    if (!(g.gfa > 0) || !(g.volume > 0)) throw Error(ErrorCode::ViolatedBound, "gfa and volume must be > 0");
    req.inline_features = g;
  } else if (j.contains("building")) {
    req.building = building_from_json(j.at("building"));
  } else {
    if (!j.at("building_file").is_string()) throw Error(ErrorCode::InvalidArgument, "'building_file' must be a path string");
    req.building_path = j.at("building_file").get<std::string>();
  }
  auto category = [&](const char* key) -> std::optional<std::string> {
    if (!j.contains(key)) return std::nullopt;
    if (!j.at(key).is_string()) throw Error(ErrorCode::InvalidArgument, std::string("'") + key + "' must be a string");
    return j.at(key).get<std::string>();
  };
  if (auto f = category("frame_type")) {
    req.frame_type = parse_frame(*f);
    if (!req.frame_type) throw Error(ErrorCode::UnknownCategory, "frame_type '" + *f + "'");
  }
  if (auto u = category("usage_type")) {
    req.usage_type = parse_usage(*u);
    if (!req.usage_type) throw Error(ErrorCode::UnknownCategory, "usage_type '" + *u + "'");
  }
  return req;
}

/// Resolves geometry (ingesting a building file when referenced) and
/// categories; request categories override building-file defaults.
inline BuildingRecord resolve_request(const PredictRequest& req) {
  BuildingRecord r;
  std::optional<FrameType> frame = req.frame_type;
  std::optional<UsageType> usage = req.usage_type;
  BuildingGeometry g;
  if (req.inline_features) {
    g = *req.inline_features;
  } else {
    BuildingModelFile file = req.building ? *req.building : load_building(*req.building_path);
    g = ingest_building(file);
    if (!frame) frame = file.frame_type;
    if (!usage) usage = file.usage_type;
  }
  if (!frame) throw Error(ErrorCode::InvalidArgument, "missing field 'frame_type'");
  if (!usage) throw Error(ErrorCode::InvalidArgument, "missing field 'usage_type'");
  r.gfa = g.gfa;
  r.volume = g.volume;
  r.levels = g.levels;
  r.frame_type = *frame;
  r.usage_type = *usage;
  return r;
}

class PredictionService {
 public:
  PredictionService(TrainedModel model, std::optional<BackgroundSet> background)
      : model_(std::move(model)), background_(std::move(background)) {}

  const TrainedModel& model() const { return model_; }

  HttpReply health() const { return {200, "ok", "text/plain"}; }

  HttpReply model_info() const {
    const auto& md = model_.metadata;
    nlohmann::json j{{"kind", to_string(model_.kind())},
                     {"name", display_name(model_.kind())},
                     {"fingerprint", fingerprint_hex(model_.fingerprint)},
                     {"features", feature_names()},
                     {"outputs", {"recycle_m3", "reuse_m3", "landfill_m3"}},
                     {"training", {{"seed", md.seed},
                                   {"trained_at", md.trained_at},
                                   {"provenance", md.provenance == Provenance::Csv ? "csv" : "synthetic"},
                                   {"n_train", md.n_train}}},
                     {"explain_available", background_.has_value()}};
    return {200, j.dump()};
  }

  HttpReply predict(std::string_view body) const {
    return guarded([&] {
      auto record = resolve_request(parse_predict_request(body));
      auto y = circularity::predict(model_, encode_record(record));
      nlohmann::json j{{"recycle_m3", y.recycle},
                       {"reuse_m3", y.reuse},
                       {"landfill_m3", y.landfill},
                       {"model", {{"kind", to_string(model_.kind())}, {"fingerprint", fingerprint_hex(model_.fingerprint)}}},
                       {"features", detail::features_json(record)}};
      return HttpReply{200, j.dump()};
    });
  }

  HttpReply explain(std::string_view body) const {
    return guarded([&] {
      auto record = resolve_request(parse_predict_request(body));
      if (!background_)
        return detail::error_reply(503, code_name(ErrorCode::EmptyBackground), "no background set configured");
      auto x = encode_record(record);
      auto e = explain_instance(model_, x, *background_);
      nlohmann::json outputs = nlohmann::json::array();
      for (std::size_t o = 0; o < kOutputCount; ++o) {
        const auto& a = e.outputs[o];
        nlohmann::json attributions = nlohmann::json::array();
        for (std::size_t j = 0; j < kFeatureCount; ++j)
          attributions.push_back({{"feature", feature_names()[j]}, {"phi", a.phi[j]}});
        nlohmann::json grouped = nlohmann::json::array();
        auto g = grouped_phi(a.phi);
        for (std::size_t k = 0; k < g.size(); ++k) grouped.push_back({{"group", kFeatureGroups[k]}, {"phi", g[k]}});
        outputs.push_back({{"output", kOutputNames[o]},
                           {"baseline", a.baseline},
                           {"prediction", a.prediction},
                           {"residual", a.prediction - a.baseline - a.sum_phi()},
                           {"attributions", std::move(attributions)},
                           {"grouped", std::move(grouped)}});
      }
      nlohmann::json j{{"outputs", std::move(outputs)},
                       {"background_size", background_->size()},
                       {"features", detail::features_json(record)}};
      return HttpReply{200, j.dump()};
    });
  }

  /// Registers all routes; the service must outlive the server.
  void mount(httplib::Server& server) const {
    auto send = [](httplib::Response& res, const HttpReply& r) {
      res.status = r.status;
      res.set_content(r.body, r.content_type);
    };
    server.Get("/healthz", [this, send](const httplib::Request&, httplib::Response& res) { send(res, health()); });
    server.Get("/v1/model/info",
               [this, send](const httplib::Request&, httplib::Response& res) { send(res, model_info()); });
    server.Post("/v1/predict",
                [this, send](const httplib::Request& req, httplib::Response& res) { send(res, predict(req.body)); });
    server.Post("/v1/explain",
                [this, send](const httplib::Request& req, httplib::Response& res) { send(res, explain(req.body)); });
  }

 private:
  template <class Fn>
  HttpReply guarded(Fn&& fn) const {
    try {
      return fn();
    } catch (const Error& e) {
      return detail::error_reply(detail::status_for(e.code()), code_name(e.code()), e.what());
    } catch (const std::exception& e) {
      return detail::error_reply(500, "internal_error", e.what());
    }
  }

  TrainedModel model_;
  std::optional<BackgroundSet> background_;
};

/// Appends one line per request: time, method, path, status.
class RequestLog {
 public:
  explicit RequestLog(const std::string& path) : out_(path, std::ios::app) {
    if (!out_) throw Error(ErrorCode::Io, "cannot open request log '" + path + "'");
  }
  void record(const httplib::Request& req, const httplib::Response& res) {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char ts[32];
    std::strftime(ts, sizeof ts, "%Y-%m-%dT%H:%M:%SZ", &tm);
    std::lock_guard lock(mu_);
    out_ << ts << ' ' << req.method << ' ' << req.path << ' ' << res.status << '\n';
    out_.flush();
  }

 private:
  std::mutex mu_;
  std::ofstream out_;
};

/// Loads the model (and background) named in `config`; throws if the model
/// cannot be loaded, so a misconfigured service never starts.
inline PredictionService make_service(const ServiceConfig& config) {
  auto model = load_model(config.model_path);
  std::optional<BackgroundSet> bg;
  if (!config.background_path.empty()) {
    std::ifstream in(config.background_path);
    if (!in) throw Error(ErrorCode::Io, "cannot open background data '" + config.background_path + "'");
    bg = make_background(load_csv(in), config.background_size, config.seed);
  }
  return PredictionService(std::move(model), std::move(bg));
}

}  // namespace circularity

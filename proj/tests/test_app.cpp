#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "circularity/building.hpp"
#include "circularity/learners.hpp"
#include "circularity/model_io.hpp"
#include "test_util.hpp"
// httplib last (see service.hpp).
#include "circularity/cli.hpp"
#include "circularity/service.hpp"

using namespace circularity;
using nlohmann::json;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "circularity_cli");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string source(const std::string& rel) { return std::string(CIRCULARITY_SOURCE_DIR) + "/" + rel; }

BuildingModelFile storeys(std::vector<std::pair<double, double>> s) {
  BuildingModelFile b;
  b.name = "t";
  for (auto [a, h] : s) b.storeys.push_back({"", a, h});
  return b;
}

ErrorCode ingest_error(const BuildingModelFile& b) {
  try {
    ingest_building(b);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE();
  return ErrorCode::Io;
}

json request_for(const BuildingRecord& r) {
  return {{"gfa", r.gfa},
          {"volume", r.volume},
          {"levels", r.levels},
          {"frame_type", std::string(to_string(r.frame_type))},
          {"usage_type", std::string(to_string(r.usage_type))}};
}

BuildingRecord random_record(Rng& rng) {
  BuildingRecord r;
  r.gfa = 5 + 9000 * uniform01(rng);
  r.volume = r.gfa * (2.5 + 2 * uniform01(rng));
  r.levels = 1 + static_cast<int>(uniform_index(rng, 7));
  r.frame_type = kAllFrames[uniform_index(rng, kFrameCount)];
  r.usage_type = kAllUsages[uniform_index(rng, kUsageCount)];
  return r;
}

Dataset read_csv_file(const std::string& path) {
  std::ifstream in(path);
  return load_csv(in);
}

std::string error_code_of(const HttpReply& r) { return json::parse(r.body).at("error").at("code").get<std::string>(); }

}  // namespace

// ------------------------------------------------------------ ingestion

TEST(Ingest, TwoStoreys) {
  auto g = ingest_building(storeys({{100, 3}, {100, 3}}));
  EXPECT_EQ(g.gfa, 200.0);
  EXPECT_EQ(g.volume, 600.0);
  EXPECT_EQ(g.levels, 2);
}

TEST(Ingest, SmallestBuilding) {
  auto g = ingest_building(storeys({{4.8, 2}}));
  EXPECT_DOUBLE_EQ(g.gfa, 4.8);
  EXPECT_DOUBLE_EQ(g.volume, 9.6);
  EXPECT_EQ(g.levels, 1);
}

TEST(Ingest, Violations) {
  EXPECT_EQ(ingest_error(storeys({{100, 3}, {50, 0}})), ErrorCode::NonPositiveDimension);
  EXPECT_EQ(ingest_error(storeys({{-1, 3}})), ErrorCode::NonPositiveDimension);
  EXPECT_EQ(ingest_error(storeys({})), ErrorCode::NoStoreys);
}

TEST(Ingest, SplittingAStoreyKeepsTotals) {
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    std::vector<std::pair<double, double>> s;
    std::size_t n = 1 + uniform_index(rng, 6);
    for (std::size_t i = 0; i < n; ++i) s.push_back({1 + 500 * uniform01(rng), 2 + 3 * uniform01(rng)});
    auto whole = ingest_building(storeys(s));
    auto k = uniform_index(rng, n);
    auto split = s;
    split[k].first /= 2;
    split.insert(split.begin() + static_cast<std::ptrdiff_t>(k), split[k]);
    auto parts = ingest_building(storeys(split));
    EXPECT_NEAR(parts.gfa, whole.gfa, 1e-9 * whole.gfa);
    EXPECT_NEAR(parts.volume, whole.volume, 1e-9 * whole.volume);
    EXPECT_EQ(parts.levels, whole.levels + 1);
  }
}

TEST(Ingest, ShippedExampleFile) {
  auto b = load_building(source("data/examples/two_storey.json"));
  auto g = ingest_building(b);
  EXPECT_EQ(g.gfa, 200.0);
  EXPECT_EQ(g.volume, 600.0);
  EXPECT_EQ(g.levels, 2);
  EXPECT_EQ(b.frame_type, FrameType::Steel);
  EXPECT_EQ(b.usage_type, UsageType::Offices);
}

TEST(Ingest, FileErrors) {
  auto code = [](const char* text) {
    try {
      building_from_json(json::parse(text));
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  EXPECT_EQ(code(R"({"name":"x"})"), ErrorCode::CorruptFile);
  EXPECT_EQ(code(R"({"storeys":[{"floor_area":"big","height":3}]})"), ErrorCode::CorruptFile);
  EXPECT_EQ(code(R"({"storeys":[],"frame_type":"Brick"})"), ErrorCode::UnknownCategory);
  EXPECT_THROW(load_building("/nonexistent/building.json"), Error);
}

// -------------------------------------------------------------- service

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    data = testutil::random_dataset(120, 42, true);
    model = train_knn(data, KnnParams{.k = 1});
    bg = make_background(data, 4, 1);
  }
  Dataset data;
  TrainedModel model;
  BackgroundSet bg;
};

TEST_F(ServiceTest, KnnOneReturnsTrainingTargets) {
  PredictionService svc(model, bg);
  for (std::size_t i = 0; i < 10; ++i) {
    const auto& s = data.records[i * 7];
    auto reply = svc.predict(request_for(s.building).dump());
    ASSERT_EQ(reply.status, 200) << reply.body;
    auto j = json::parse(reply.body);
    EXPECT_EQ(j.at("recycle_m3").get<double>(), s.target.recycle);
    EXPECT_EQ(j.at("reuse_m3").get<double>(), s.target.reuse);
    EXPECT_EQ(j.at("landfill_m3").get<double>(), s.target.landfill);
    EXPECT_EQ(j.at("model").at("kind"), "knn");
    EXPECT_EQ(j.at("features").at("levels"), s.building.levels);
  }
}

TEST_F(ServiceTest, BadInputIs400) {
  PredictionService svc(model, bg);
  auto base = request_for(data.records[0].building);
  auto brick = base;
  brick["frame_type"] = "Brick";
  auto r = svc.predict(brick.dump());
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(error_code_of(r), code_name(ErrorCode::UnknownCategory));

  EXPECT_EQ(svc.predict("{not json").status, 400);
  EXPECT_EQ(svc.predict("[1,2]").status, 400);
  auto missing = base;
  missing.erase("volume");
  EXPECT_EQ(svc.predict(missing.dump()).status, 400);
  auto both = base;
  both["building"] = json::parse(R"({"storeys":[{"floor_area":1,"height":1}]})");
  EXPECT_EQ(svc.predict(both.dump()).status, 400);
  auto frac = base;
  frac["levels"] = 1.5;
  EXPECT_EQ(svc.predict(frac.dump()).status, 400);
  auto neg = base;
  neg["gfa"] = -3;
  EXPECT_EQ(svc.predict(neg.dump()).status, 400);
  auto no_usage = base;
  no_usage.erase("usage_type");
  EXPECT_EQ(svc.predict(no_usage.dump()).status, 400);
}

TEST_F(ServiceTest, BuildingFileViolationIs422) {
  PredictionService svc(model, bg);
  json req{{"building", {{"storeys", {{{"floor_area", 100}, {"height", 0}}}}}},
           {"frame_type", "Steel"},
           {"usage_type", "Offices"}};
  auto r = svc.predict(req.dump());
  EXPECT_EQ(r.status, 422);
  EXPECT_EQ(error_code_of(r), code_name(ErrorCode::NonPositiveDimension));
  json empty{{"building", {{"storeys", json::array()}}}, {"frame_type", "Steel"}, {"usage_type", "Offices"}};
  EXPECT_EQ(svc.predict(empty.dump()).status, 422);
  json missing_file{{"building_file", "/nonexistent.json"}, {"frame_type", "Steel"}, {"usage_type", "Offices"}};
  EXPECT_EQ(svc.predict(missing_file.dump()).status, 422);
}

TEST_F(ServiceTest, BuildingFileResolvesLikeInline) {
  PredictionService svc(model, bg);
  auto by_file = svc.predict(json{{"building_file", source("data/examples/two_storey.json")}}.dump());
  ASSERT_EQ(by_file.status, 200) << by_file.body;
  BuildingRecord r{200, 600, 2, FrameType::Steel, UsageType::Offices};
  auto inline_reply = svc.predict(request_for(r).dump());
  auto a = json::parse(by_file.body), b = json::parse(inline_reply.body);
  EXPECT_EQ(a.at("recycle_m3"), b.at("recycle_m3"));
  EXPECT_EQ(a.at("features"), b.at("features"));
  // Request categories override the file defaults.
  auto over = svc.predict(
      json{{"building_file", source("data/examples/two_storey.json")}, {"usage_type", "Retail"}}.dump());
  EXPECT_EQ(json::parse(over.body).at("features").at("usage_type"), "Retail");
}

TEST_F(ServiceTest, ExplainPayload) {
  auto xgb = train_gbt_levelwise(data, BoostParams{.max_depth = 3, .n_estimators = 10}, 0);
  PredictionService svc(xgb, bg);
  auto req = request_for(data.records[3].building);
  auto reply = svc.explain(req.dump());
  ASSERT_EQ(reply.status, 200) << reply.body;
  auto j = json::parse(reply.body);
  auto pred = json::parse(svc.predict(req.dump()).body);
  ASSERT_EQ(j.at("outputs").size(), 3u);
  EXPECT_EQ(j.at("background_size"), 4);
  const char* keys[] = {"recycle_m3", "reuse_m3", "landfill_m3"};
  for (std::size_t o = 0; o < 3; ++o) {
    const auto& out = j.at("outputs")[o];
    ASSERT_EQ(out.at("attributions").size(), 14u);
    ASSERT_EQ(out.at("grouped").size(), 5u);
    EXPECT_EQ(out.at("grouped")[3].at("group"), "frame");
    double sum = 0, gsum = 0;
    for (const auto& a : out.at("attributions")) sum += a.at("phi").get<double>();
    for (const auto& g : out.at("grouped")) gsum += g.at("phi").get<double>();
    EXPECT_EQ(out.at("prediction").get<double>(), pred.at(keys[o]).get<double>());
    EXPECT_NEAR(sum, out.at("prediction").get<double>() - out.at("baseline").get<double>(), 1e-9);
    EXPECT_NEAR(gsum, sum, 1e-9);
    EXPECT_LE(std::abs(out.at("residual").get<double>()), 1e-9);
  }
}

TEST_F(ServiceTest, ExplainWithoutBackgroundIs503) {
  PredictionService svc(model, std::nullopt);
  auto r = svc.explain(request_for(data.records[0].building).dump());
  EXPECT_EQ(r.status, 503);
  EXPECT_EQ(error_code_of(r), code_name(ErrorCode::EmptyBackground));
  // Input validation still comes first.
  EXPECT_EQ(svc.explain("{}").status, 400);
  EXPECT_FALSE(json::parse(svc.model_info().body).at("explain_available").get<bool>());
}

TEST_F(ServiceTest, StatelessUnderShuffling) {
  PredictionService svc(train_random_forest(data, ForestParams{.n_trees = 5}, 1), bg);
  Rng rng(9);
  std::vector<std::string> bodies;
  for (int i = 0; i < 40; ++i) bodies.push_back(request_for(random_record(rng)).dump());
  std::map<std::string, std::string> first;
  for (const auto& b : bodies) first[b] = svc.predict(b).body;
  for (int round = 0; round < 3; ++round) {
    std::shuffle(bodies.begin(), bodies.end(), rng);
    for (const auto& b : bodies) EXPECT_EQ(svc.predict(b).body, first[b]);
  }
}

TEST_F(ServiceTest, ModelInfoAndHealth) {
  PredictionService svc(model, bg);
  EXPECT_EQ(svc.health().body, "ok");
  auto j = json::parse(svc.model_info().body);
  EXPECT_EQ(j.at("kind"), "knn");
  EXPECT_EQ(j.at("fingerprint"), fingerprint_hex(model.fingerprint));
  EXPECT_EQ(j.at("features").size(), 14u);
  EXPECT_TRUE(j.at("explain_available").get<bool>());
}

TEST_F(ServiceTest, HttpRoundTrip) {
  PredictionService svc(model, bg);
  httplib::Server server;
  svc.mount(server);
  int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);
  auto h = client.Get("/healthz");
  ASSERT_TRUE(h);
  EXPECT_EQ(h->status, 200);
  EXPECT_EQ(h->body, "ok");
  const auto& s = data.records[5];
  auto p = client.Post("/v1/predict", request_for(s.building).dump(), "application/json");
  ASSERT_TRUE(p);
  EXPECT_EQ(p->status, 200);
  EXPECT_EQ(json::parse(p->body).at("recycle_m3").get<double>(), s.target.recycle);
  auto bad = client.Post("/v1/predict", R"({"gfa":1,"volume":1,"levels":1,"frame_type":"Brick","usage_type":"Retail"})",
                         "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  auto info = client.Get("/v1/model/info");
  ASSERT_TRUE(info);
  EXPECT_EQ(json::parse(info->body).at("kind"), "knn");
  server.stop();
  th.join();
}

TEST(Service, MisconfiguredServiceRefusesToStart) {
  ServiceConfig cfg;
  cfg.model_path = "/nonexistent/model.json";
  EXPECT_THROW(make_service(cfg), Error);
}

// ------------------------------------------------------------------ CLI

TEST(Cli, UsageErrorsExitOne) {
  auto r = run({"train", "--bogus"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, UserErrorsExitOne) {
  auto dir = testutil::scratch_dir("cli_user");
  auto r = run({"summarize", (dir / "missing.csv").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
  std::ofstream(dir / "bad.csv") << "gfa,volume,levels,frame_type,usage_type,recycle,reuse,landfill\n"
                                    "1,2,1,Brick,Retail,1,1,1\n";
  EXPECT_EQ(run({"summarize", (dir / "bad.csv").string()}).code, 1);
  EXPECT_EQ(run({"train", "--algo", "svm", "--data", (dir / "bad.csv").string(), "--out", "x"}).code, 1);
  EXPECT_EQ(run({"rank", "--fixtures", source("data/ranking_fixture.csv"), "--data", "x.csv"}).code, 1);
}

TEST(Cli, GenDataThenSummarize) {
  auto dir = testutil::scratch_dir("cli_gen");
  auto csv = (dir / "d.csv").string();
  auto g = run({"--seed", "7", "gen-data", "--n", "2280", "--out", csv});
  ASSERT_EQ(g.code, 0) << g.err;
  EXPECT_EQ(read_csv_file(csv).size(), 2280u);
  auto s = run({"summarize", csv});
  ASSERT_EQ(s.code, 0) << s.err;
  for (const char* col : {"GFA", "Volume", "Number of levels", "Recyclable", "Landfill"}) EXPECT_NE(s.out.find(col), std::string::npos);
  // Same seed, same bytes.
  auto csv2 = (dir / "d2.csv").string();
  run({"--seed", "7", "gen-data", "--n", "2280", "--out", csv2});
  std::stringstream a, b;
  a << std::ifstream(csv).rdbuf();
  b << std::ifstream(csv2).rdbuf();
  EXPECT_EQ(a.str(), b.str());
}

TEST(Cli, RankFixturesReproducesTable) {
  auto r = run({"rank", "--fixtures", source("data/ranking_fixture.csv"), "--csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("XGBoost + BO,22,4,0,1,0"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("RF + BO,9,3,1,2,0"), std::string::npos);
  EXPECT_NE(r.out.find("DT + BO,9,2,2,3,0"), std::string::npos);
  EXPECT_NE(r.out.find("LightGBM + BO,-14,1,3,4,0"), std::string::npos);
  EXPECT_NE(r.out.find("KNN + BO,-26,0,4,5,0"), std::string::npos);
  auto t = run({"rank", "--fixtures", source("data/ranking_fixture.csv")});
  EXPECT_NE(t.out.find("Copeland scores"), std::string::npos);
}

TEST(Cli, TrainEvalPredictMatchesService) {
  auto dir = testutil::scratch_dir("cli_train");
  auto csv = (dir / "d.csv").string(), model = (dir / "m.json").string(), test = (dir / "t.csv").string();
  ASSERT_EQ(run({"--seed", "3", "gen-data", "--n", "300", "--out", csv}).code, 0);
  auto t = run({"--seed", "3", "train", "--algo", "xgb", "--data", csv, "--out", model, "--param", "n_estimators=40",
                "--train-fraction", "0.8", "--test-out", test});
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_EQ(read_csv_file(test).size(), 60u);
  auto e = run({"eval", "--model", model, "--data", test});
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_NE(e.out.find("aggregate"), std::string::npos);

  auto p = run({"predict", "--model", model, "--gfa", "200", "--volume", "600", "--levels", "2", "--frame", "Steel",
                "--usage", "Offices"});
  ASSERT_EQ(p.code, 0) << p.err;
  std::istringstream in(p.out);
  std::string name;
  double cli_vals[3];
  for (double& v : cli_vals) in >> name >> v;
  PredictionService svc(load_model(model), std::nullopt);
  auto reply = json::parse(svc.predict(request_for({200, 600, 2, FrameType::Steel, UsageType::Offices}).dump()).body);
  EXPECT_EQ(std::bit_cast<std::uint64_t>(cli_vals[0]), std::bit_cast<std::uint64_t>(reply.at("recycle_m3").get<double>()));
  EXPECT_EQ(std::bit_cast<std::uint64_t>(cli_vals[1]), std::bit_cast<std::uint64_t>(reply.at("reuse_m3").get<double>()));
  EXPECT_EQ(std::bit_cast<std::uint64_t>(cli_vals[2]),
            std::bit_cast<std::uint64_t>(reply.at("landfill_m3").get<double>()));

  auto pj = run({"predict", "--model", model, "--building", source("data/examples/two_storey.json"), "--json"});
  ASSERT_EQ(pj.code, 0) << pj.err;
  EXPECT_EQ(json::parse(pj.out).at("recycle_m3").get<double>(), cli_vals[0]);

  auto bad = run({"predict", "--model", model, "--gfa", "200", "--volume", "600", "--levels", "2", "--frame", "Brick",
                  "--usage", "Offices"});
  EXPECT_EQ(bad.code, 1);
  auto serve = run({"serve", "--model", model, "--background", csv, "--check"});
  EXPECT_EQ(serve.code, 0) << serve.err;
}

TEST(Cli, TuneAndExplain) {
  auto dir = testutil::scratch_dir("cli_tune");
  auto csv = (dir / "d.csv").string(), model = (dir / "m.json").string(), hist = (dir / "h.csv").string();
  ASSERT_EQ(run({"--seed", "4", "gen-data", "--n", "150", "--out", csv}).code, 0);
  auto t = run({"--seed", "4", "tune", "--algo", "dt", "--data", csv, "--budget", "10", "--out", model, "--history",
                hist});
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_NE(t.out.find("trials 10"), std::string::npos) << t.out;
  std::ifstream h(hist);
  std::string line;
  int lines = 0;
  while (std::getline(h, line)) ++lines;
  EXPECT_EQ(lines, 11);
  EXPECT_EQ(run({"tune", "--algo", "dt", "--data", csv, "--budget", "3"}).code, 1);

  auto x = run({"explain", "--model", model, "--background", csv, "--background-size", "4", "--gfa", "300",
                "--volume", "900", "--levels", "2", "--frame", "Concrete", "--usage", "Residential", "--csv"});
  ASSERT_EQ(x.code, 0) << x.err;
  EXPECT_EQ(std::count(x.out.begin(), x.out.end(), '\n'), 1 + 3 * 14);
  auto g = run({"explain", "--model", model, "--background", csv, "--background-size", "4", "--global", csv,
                "--method", "sampled", "--permutations", "8"});
  ASSERT_EQ(g.code, 0) << g.err;
  EXPECT_NE(g.out.find("mean |phi|"), std::string::npos);
}

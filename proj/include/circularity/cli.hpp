#pragma once

// Command-line front end. run_cli() is the whole program; tools/ only wraps
// it so tests can drive every subcommand in-process.
//
// Exit codes: 0 success, 1 user error (bad flags, bad input files, domain
// errors), 2 internal error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "circularity/building.hpp"
#include "circularity/copeland.hpp"
#include "circularity/data.hpp"
#include "circularity/errors.hpp"
#include "circularity/hpo.hpp"
#include "circularity/learners.hpp"
#include "circularity/metrics.hpp"
#include "circularity/model_io.hpp"
#include "circularity/service.hpp"
#include "circularity/shap.hpp"

// After Eigen: <resolv.h> (via httplib) defines a `_res` macro.
#include <CLI11.hpp>
#include <httplib.h>

namespace circularity {

namespace cli {

inline Dataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  return load_csv(in);
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
  return out;
}

/// Hyperparameter names accepted by each learner.
inline const std::set<std::string>& known_params(LearnerKind kind) {
  static const std::map<LearnerKind, std::set<std::string>> names = {
      {LearnerKind::DecisionTree, {"max_depth", "min_samples_split", "min_samples_leaf"}},
      {LearnerKind::Knn, {"n_neighbors", "weights", "p"}},
      {LearnerKind::RandomForest,
       {"max_depth", "min_samples_split", "min_samples_leaf", "n_trees", "features_per_split", "bootstrap"}},
      {LearnerKind::GbtLevelWise,
       {"max_depth", "reg_alpha", "reg_lambda", "subsample", "n_estimators", "learning_rate", "min_samples_leaf"}},
      {LearnerKind::GbtLeafWise,
       {"max_depth", "reg_alpha", "reg_lambda", "subsample", "n_estimators", "learning_rate", "min_samples_leaf",
        "goss_a", "goss_b", "num_leaves"}},
  };
  return names.at(kind);
}

inline ParamMap parse_params(LearnerKind kind, const std::vector<std::string>& items) {
  ParamMap out;
  for (const auto& item : items) {
    auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0)
      throw Error(ErrorCode::InvalidArgument, "--param expects name=value, got '" + item + "'");
    auto name = item.substr(0, eq);
    if (!known_params(kind).contains(name))
      throw Error(ErrorCode::InvalidArgument,
                  "unknown parameter '" + name + "' for " + std::string(to_string(kind)));
    out[name] = parse_param_value(std::string_view(item).substr(eq + 1));
  }
  return out;
}

inline LearnerKind learner_or_throw(const std::string& s) {
  auto k = parse_learner(s);
  if (!k) throw Error(ErrorCode::InvalidArgument, "unknown algorithm '" + s + "' (dt, knn, rf, xgb, lgbm)");
  return *k;
}

inline std::string fmt17(double v) { return detail::format_double(v); }

inline std::string format_params(const ParamMap& p) {
  std::string s;
  for (const auto& [k, v] : p) {
    if (!s.empty()) s += ' ';
    s += k + '=' + format_param_value(v);
  }
  return s;
}

/// Building features from flags: inline numbers or a building file.
struct InstanceFlags {
  std::optional<double> gfa, volume;
  std::optional<int> levels;
  std::string building;
  std::string frame, usage;

  void add_to(CLI::App* app) {
    app->add_option("--gfa", gfa, "gross floor area, m2");
    app->add_option("--volume", volume, "volume, m3");
    app->add_option("--levels", levels, "number of levels");
    app->add_option("--building", building, "building file (JSON) instead of --gfa/--volume/--levels");
    app->add_option("--frame", frame, "frame type: Concrete, Masonry, Steel, Timber");
    app->add_option("--usage", usage, "usage type: Agricultural, Education, Factory, Hospital, Offices, Residential, Retail");
  }

  /// Same resolution path as the HTTP service.
  BuildingRecord resolve() const {
    nlohmann::json j = nlohmann::json::object();
    const bool has_inline = gfa || volume || levels;
    if (has_inline) {
      if (!gfa || !volume || !levels) throw Error(ErrorCode::InvalidArgument, "--gfa, --volume and --levels go together");
      j["gfa"] = *gfa;
      j["volume"] = *volume;
      j["levels"] = *levels;
    }
    if (!building.empty()) j["building_file"] = building;
    if (!frame.empty()) j["frame_type"] = frame;
    if (!usage.empty()) j["usage_type"] = usage;
    return resolve_request(parse_predict_request(j.dump()));
  }
};

}  // namespace cli

/// Runs one CLI invocation. Never throws.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Demolition-waste circularity toolkit: generate, train, tune, evaluate, rank, explain, serve."};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "master seed for every random choice")->capture_default_str();

  std::function<void()> action;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "write a seeded synthetic dataset");
  std::size_t gen_n = 2280;
  double gen_noise = GeneratorConfig{}.noise_sigma;
  std::string gen_out;
  gen->add_option("--n", gen_n, "record count")->capture_default_str();
  gen->add_option("--noise-sigma", gen_noise, "lognormal noise scale")->capture_default_str();
  gen->add_option("--out", gen_out, "output CSV")->required();
  gen->callback([&] {
    action = [&] {
      GeneratorConfig cfg;
      cfg.n = gen_n;
      cfg.seed = seed;
      cfg.noise_sigma = gen_noise;
      auto d = generate_synthetic(cfg);
      auto f = cli::open_out(gen_out);
      write_csv(d, f);
      out << "wrote " << d.size() << " records to " << gen_out << '\n';
    };
  });

  // summarize
  auto* sum = app.add_subcommand("summarize", "descriptive statistics of a dataset");
  std::string sum_data;
  sum->add_option("data", sum_data, "dataset CSV")->required();
  sum->callback([&] { action = [&] { write_stats_table(summarize(cli::read_dataset(sum_data)), out); }; });

  // train
  auto* train = app.add_subcommand("train", "fit one learner and save it");
  std::string train_algo, train_data, train_out, train_test_out;
  std::vector<std::string> train_params;
  std::optional<double> train_fraction;
  train->add_option("--algo", train_algo, "dt | knn | rf | xgb | lgbm")->required();
  train->add_option("--data", train_data, "training CSV")->required();
  train->add_option("--out", train_out, "model file to write")->required();
  train->add_option("--param", train_params, "hyperparameter name=value (repeatable)");
  train->add_option("--train-fraction", train_fraction, "split the data first and train on this fraction");
  train->add_option("--test-out", train_test_out, "write the held-out rows here (with --train-fraction)");
  train->callback([&] {
    action = [&] {
      auto kind = cli::learner_or_throw(train_algo);
      auto params = cli::parse_params(kind, train_params);
      auto d = cli::read_dataset(train_data);
      if (train_fraction) {
        auto [tr, te] = split_dataset(d, *train_fraction, mix_seed(seed, 0));
        if (!train_test_out.empty()) {
          auto f = cli::open_out(train_test_out);
          write_csv(te, f);
        }
        d = std::move(tr);
      }
      auto model = train_model(kind, d, params, seed);
      save_model(model, train_out);
      out << "trained " << display_name(kind) << " on " << d.size() << " rows -> " << train_out << '\n';
    };
  });

  // tune
  auto* tun = app.add_subcommand("tune", "Bayesian hyperparameter search (GP + expected improvement)");
  std::string tune_algo, tune_data, tune_space, tune_out, tune_history;
  std::vector<std::string> tune_fixed;
  std::size_t tune_budget = 50;
  TuneOptions tune_opts;
  tun->add_option("--algo", tune_algo, "dt | knn | rf | xgb | lgbm")->required();
  tun->add_option("--data", tune_data, "training CSV")->required();
  tun->add_option("--budget", tune_budget, "maximum objective evaluations")->capture_default_str();
  tun->add_option("--space", tune_space, "search space JSON (default: built-in ranges)");
  tun->add_option("--param", tune_fixed, "fixed hyperparameter name=value (repeatable)");
  tun->add_option("--patience", tune_opts.patience, "stop after this many non-improving proposals")->capture_default_str();
  tun->add_option("--init", tune_opts.init_design, "initial Latin-hypercube points")->capture_default_str();
  tun->add_option("--out", tune_out, "retrain on all data with the best parameters and save");
  tun->add_option("--history", tune_history, "write the trial history CSV");
  tun->callback([&] {
    action = [&] {
      auto kind = cli::learner_or_throw(tune_algo);
      auto fixed = cli::parse_params(kind, tune_fixed);
      auto space = tune_space.empty() ? builtin_search_space(kind) : load_search_space(tune_space);
      auto d = cli::read_dataset(tune_data);
      auto r = tune_learner(kind, space, d, tune_budget, seed, tune_opts, fixed);
      out << "trials " << r.history.size() << " (" << (r.stop == StopReason::Plateau ? "plateau" : "budget")
          << ")\nbest rmse " << cli::fmt17(r.best.objective) << "\nbest " << cli::format_params(r.best.params)
          << '\n';
      if (!tune_history.empty()) {
        auto f = cli::open_out(tune_history);
        write_history_csv(space, r, f);
      }
      if (!tune_out.empty()) {
        ParamMap merged = fixed;
        for (const auto& [k, v] : r.best.params) merged[k] = v;
        save_model(train_model(kind, d, merged, seed), tune_out);
        out << "saved " << tune_out << '\n';
      }
    };
  });

  // eval
  auto* ev = app.add_subcommand("eval", "metrics of a saved model on a dataset");
  std::string eval_model, eval_data;
  bool eval_csv = false;
  ev->add_option("--model", eval_model, "model file")->required();
  ev->add_option("--data", eval_data, "evaluation CSV")->required();
  ev->add_flag("--csv", eval_csv, "machine-readable output");
  ev->callback([&] {
    action = [&] {
      auto model = load_model(eval_model);
      auto d = cli::read_dataset(eval_data);
      if (d.empty()) throw Error(ErrorCode::EmptyDataset, "no rows in '" + eval_data + "'");
      auto actual = d.targets();
      std::vector<TargetTriple> pred;
      for (const auto& x : d.features()) pred.push_back(predict(model, x));
      std::vector<std::string> labels;
      std::vector<MetricReport> reports;
      for (auto s : {Scope::Recycle, Scope::Reuse, Scope::Landfill, Scope::Aggregate}) {
        labels.emplace_back(to_string(s));
        reports.push_back(compute_metrics(actual, pred, s));
      }
      if (eval_csv)
        write_metric_csv(labels, reports, out);
      else
        write_metric_table(labels, reports, out);
    };
  });

  // rank
  auto* rk = app.add_subcommand("rank", "Copeland ranking over the seven metrics");
  std::string rank_fixtures, rank_data;
  std::vector<std::string> rank_models;
  bool rank_csv = false;
  rk->add_option("--fixtures", rank_fixtures, "CSV: model,rmse,mae,mape,si,u95,r2,nse");
  rk->add_option("--model", rank_models, "model files to evaluate on --data (repeatable)");
  rk->add_option("--data", rank_data, "evaluation CSV for --model");
  rk->add_flag("--csv", rank_csv, "machine-readable output");
  rk->callback([&] {
    action = [&] {
      ComparisonMatrix m;
      if (!rank_fixtures.empty()) {
        if (!rank_models.empty() || !rank_data.empty())
          throw Error(ErrorCode::InvalidArgument, "use --fixtures or --model/--data, not both");
        std::ifstream in(rank_fixtures);
        if (!in) throw Error(ErrorCode::Io, "cannot open '" + rank_fixtures + "'");
        m = load_metric_fixture(in);
      } else {
        if (rank_models.empty() || rank_data.empty())
          throw Error(ErrorCode::InvalidArgument, "rank needs --fixtures, or --model (x2+) with --data");
        auto d = cli::read_dataset(rank_data);
        auto actual = d.targets();
        auto x = d.features();
        for (const auto& path : rank_models) {
          auto model = load_model(path);
          std::vector<TargetTriple> pred;
          for (const auto& row : x) pred.push_back(predict(model, row));
          m.models.push_back(path);
          m.reports.push_back(compute_metrics(actual, pred, Scope::Aggregate));
        }
      }
      auto r = copeland_rank(m);
      if (rank_csv)
        write_copeland_csv(r, out);
      else
        write_copeland_table(r, out);
    };
  });

  // explain
  auto* ex = app.add_subcommand("explain", "Shapley attributions for one building or a dataset");
  std::string ex_model, ex_background, ex_global, ex_method = "exact";
  std::size_t ex_bg_size = kDefaultBackgroundSize, ex_perms = 256;
  bool ex_grouped = false, ex_csv = false;
  cli::InstanceFlags ex_inst;
  ex->add_option("--model", ex_model, "model file")->required();
  ex->add_option("--background", ex_background, "dataset CSV sampled for the background set")->required();
  ex->add_option("--background-size", ex_bg_size, "background rows")->capture_default_str();
  ex->add_option("--method", ex_method, "exact | sampled")->capture_default_str();
  ex->add_option("--permutations", ex_perms, "permutations for --method sampled")->capture_default_str();
  ex->add_option("--global", ex_global, "dataset CSV: mean |phi| over every row instead of one building");
  ex->add_flag("--grouped", ex_grouped, "sum one-hot blocks into frame / usage");
  ex->add_flag("--csv", ex_csv, "machine-readable output");
  ex_inst.add_to(ex);
  ex->callback([&] {
    action = [&] {
      if (ex_method != "exact" && ex_method != "sampled")
        throw Error(ErrorCode::InvalidArgument, "--method must be exact or sampled");
      auto model = load_model(ex_model);
      auto bg = make_background(cli::read_dataset(ex_background), ex_bg_size, mix_seed(seed, 1));
      if (!ex_global.empty()) {
        GlobalImportanceOptions opt;
        opt.method = ex_method == "exact" ? ShapMethod::Exact : ShapMethod::Sampled;
        opt.n_permutations = ex_perms;
        opt.seed = mix_seed(seed, 2);
        auto g = global_importance(model, cli::read_dataset(ex_global), bg, opt);
        if (ex_csv) {
          out << "feature,recycle,reuse,landfill,overall\n";
          for (auto j : g.ranking)
            out << g.features[j] << ',' << cli::fmt17(g.per_output[0][j]) << ',' << cli::fmt17(g.per_output[1][j])
                << ',' << cli::fmt17(g.per_output[2][j]) << ',' << cli::fmt17(g.overall[j]) << '\n';
          return;
        }
        std::vector<std::string> labels;
        std::vector<double> values;
        if (ex_grouped) {
          auto order = rank_descending(g.grouped_overall);
          for (auto k : order) {
            labels.emplace_back(kFeatureGroups[k]);
            values.push_back(g.grouped_overall[k]);
          }
        } else {
          for (auto j : g.ranking) {
            labels.push_back(g.features[j]);
            values.push_back(g.overall[j]);
          }
        }
        out << "mean |phi| across outputs\n";
        write_bar_chart(labels, values, out);
        return;
      }
      auto x = encode_record(ex_inst.resolve());
      auto f = model_function(model);
      auto e = ex_method == "exact" ? shap_exact_all(f, std::span<const double>(x), bg)
                                    : shap_sampled_all(f, std::span<const double>(x), bg, ex_perms, mix_seed(seed, 2));
      if (ex_csv)
        write_explanation_csv(e, out);
      else
        write_explanation_text(e, out, ex_grouped);
    };
  });

  // predict
  auto* pr = app.add_subcommand("predict", "predict the three waste streams for one building");
  std::string pr_model;
  bool pr_json = false;
  cli::InstanceFlags pr_inst;
  pr->add_option("--model", pr_model, "model file")->required();
  pr->add_flag("--json", pr_json, "print the same JSON body as POST /v1/predict");
  pr_inst.add_to(pr);
  pr->callback([&] {
    action = [&] {
      auto model = load_model(pr_model);
      auto record = pr_inst.resolve();
      if (pr_json) {
        // Route through the service handler so both surfaces share one code path.
        nlohmann::json req = detail::features_json(record);
        PredictionService svc(std::move(model), std::nullopt);
        auto reply = svc.predict(req.dump());
        out << reply.body << '\n';
        return;
      }
      auto y = predict(model, encode_record(record));
      out << "recycle_m3 " << cli::fmt17(y.recycle) << "\nreuse_m3 " << cli::fmt17(y.reuse) << "\nlandfill_m3 "
          << cli::fmt17(y.landfill) << '\n';
    };
  });

  // serve
  auto* sv = app.add_subcommand("serve", "HTTP prediction / explanation service");
  ServiceConfig cfg;
  bool sv_check = false;
  sv->add_option("--model", cfg.model_path, "model file")->required();
  sv->add_option("--background", cfg.background_path, "dataset CSV enabling /v1/explain");
  sv->add_option("--background-size", cfg.background_size, "background rows")->capture_default_str();
  sv->add_option("--host", cfg.host, "bind address")->capture_default_str();
  sv->add_option("--port", cfg.port, "port (0 picks a free one)")->capture_default_str();
  sv->add_option("--log", cfg.request_log_path, "append one line per request here");
  sv->add_flag("--check", sv_check, "load the configuration and exit without listening");
  sv->callback([&] {
    action = [&] {
      cfg.seed = mix_seed(seed, 1);
      auto svc = make_service(cfg);
      out << "model " << to_string(svc.model().kind()) << ' ' << fingerprint_hex(svc.model().fingerprint) << '\n';
      if (sv_check) return;
      httplib::Server server;
      svc.mount(server);
      std::unique_ptr<RequestLog> log;
      if (!cfg.request_log_path.empty()) {
        log = std::make_unique<RequestLog>(cfg.request_log_path);
        server.set_logger([&log](const httplib::Request& q, const httplib::Response& r) { log->record(q, r); });
      }
      int port = cfg.port;
      if (port == 0) {
        port = server.bind_to_any_port(cfg.host);
      } else if (!server.bind_to_port(cfg.host, port)) {
        throw Error(ErrorCode::Io, "cannot bind " + cfg.host + ':' + std::to_string(port));
      }
      if (port < 0) throw Error(ErrorCode::Io, "cannot bind " + cfg.host);
      out << "listening on http://" << cfg.host << ':' << port << std::endl;
      server.listen_after_bind();
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (app.exit(e, out, err) == 0) return 0;  // --help
    err << '\n' << app.help();
    return 1;
  }

  try {
    if (action) action();
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 2;
  } catch (...) {
    err << "internal error\n";
    return 2;
  }
}

}  // namespace circularity

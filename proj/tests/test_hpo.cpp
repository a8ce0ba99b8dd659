#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "circularity/hpo.hpp"
#include "test_util.hpp"

using namespace circularity;

namespace {

double branin(double x1, double x2) {
  const double pi = std::numbers::pi;
  const double b = 5.1 / (4 * pi * pi), c = 5 / pi, t = 1 / (8 * pi);
  return std::pow(x2 - b * x1 * x1 + c * x1 - 6, 2) + 10 * (1 - t) * std::cos(x1) + 10;
}

SearchSpace branin_space() { return SearchSpace{{{"x1", ContinuousRange{-5, 10}}, {"x2", ContinuousRange{0, 15}}}}; }

double branin_of(const ParamMap& p) { return branin(std::get<double>(p.at("x1")), std::get<double>(p.at("x2"))); }

double random_search_best(std::uint64_t seed, std::size_t n) {
  Rng rng(mix_seed(seed, 77));
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    double x1 = -5 + 15 * uniform01(rng), x2 = 15 * uniform01(rng);
    best = std::min(best, branin(x1, x2));
  }
  return best;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<Trial> ok_trials(const SearchSpace& space, const std::vector<std::vector<double>>& pts,
                             const std::function<double(const std::vector<double>&)>& f) {
  std::vector<Trial> out;
  for (const auto& p : pts) {
    Trial t;
    t.params = space.decode(p);
    t.objective = f(space.encode(t.params));
    out.push_back(t);
  }
  return out;
}

// Closed-form GP posterior mean with fixed kernel, by Gaussian elimination.
double gp_mean_oracle(const std::vector<double>& xs, const std::vector<double>& ys, double x, double ls, double sv,
                      double jitter) {
  const auto n = xs.size();
  double mean = 0, var = 0;
  for (double y : ys) mean += y;
  mean /= static_cast<double>(n);
  for (double y : ys) var += (y - mean) * (y - mean);
  const double scale = std::sqrt(var / static_cast<double>(n));
  auto k = [&](double a, double b) { return sv * std::exp(-0.5 * (a - b) * (a - b) / (ls * ls)); };
  std::vector<std::vector<double>> A(n, std::vector<double>(n + 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) A[i][j] = k(xs[i], xs[j]) + (i == j ? jitter : 0.0);
    A[i][n] = (ys[i] - mean) / scale;
  }
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t r = c + 1; r < n; ++r) {
      double m = A[r][c] / A[c][c];
      for (std::size_t j = c; j <= n; ++j) A[r][j] -= m * A[c][j];
    }
  std::vector<double> alpha(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = A[i][n];
    for (std::size_t j = i + 1; j < n; ++j) s -= A[i][j] * alpha[j];
    alpha[i] = s / A[i][i];
  }
  double m = 0;
  for (std::size_t i = 0; i < n; ++i) m += k(x, xs[i]) * alpha[i];
  return mean + scale * m;
}

}  // namespace

// ------------------------------------------------------------------ EI

TEST(ExpectedImprovement, DegenerateSigma) {
  EXPECT_EQ(expected_improvement(5, 0, 3), 0.0);
  EXPECT_EQ(expected_improvement(3, 0, 5), 2.0);
  EXPECT_THROW(expected_improvement(0, -1e-9, 0), Error);
  try {
    expected_improvement(0, -1, 0);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NegativeSigma);
  }
}

TEST(ExpectedImprovement, MonteCarloOracle) {
  std::mt19937_64 gen(12345);
  std::normal_distribution<double> n01;
  const int samples = 10'000'000;
  double acc = 0;
  for (int i = 0; i < samples; ++i) acc += std::max(0.0, 0.0 - n01(gen));
  const double mc = acc / samples;
  EXPECT_NEAR(expected_improvement(0, 1, 0), mc, 1e-3);
  EXPECT_NEAR(expected_improvement(0, 1, 0), 1.0 / std::sqrt(2 * std::numbers::pi), 1e-15);
  EXPECT_NEAR(expected_improvement(7.5, 1, 7.5), 0.39894, 1e-3);
}

TEST(ExpectedImprovement, NonNegativeAndMonotone) {
  Rng rng(1);
  auto u = [&](double lo, double hi) { return lo + (hi - lo) * uniform01(rng); };
  for (int i = 0; i < 100000; ++i) {
    double mu = u(-10, 10), sigma = u(0, 5), fb = u(-10, 10);
    if (i % 10 == 0) sigma = 0;
    double ei = expected_improvement(mu, sigma, fb);
    ASSERT_GE(ei, 0.0);
    double d = u(0, 2);
    ASSERT_LE(expected_improvement(mu + d, sigma, fb), ei + 1e-12) << mu << ' ' << sigma << ' ' << fb;
    if (mu >= fb) ASSERT_GE(expected_improvement(mu, sigma + d, fb), ei - 1e-12);
  }
}

// ------------------------------------------------------------------ GP

TEST(Gp, SinglePointInterpolates) {
  auto s = fit_gp({{0.3, 0.7}}, {4.25}, GpOptions{});
  EXPECT_NEAR(s.posterior(std::vector<double>{0.3, 0.7}).mean, 4.25, 1e-6);
}

TEST(Gp, VarianceSmallerAtObservedPoint) {
  GpOptions opt;
  opt.jitter = 1e-8;
  auto s = fit_gp({{0.2, 0.2}, {0.8, 0.5}, {0.4, 0.9}}, {1.0, 3.0, 2.0}, opt);
  for (const auto& obs : s.points()) {
    double near = s.posterior(obs).stddev;
    double far = s.posterior(std::vector<double>{1.0, 0.0}).stddev;
    EXPECT_LE(near, far);
    EXPECT_LT(near, 1e-2);
  }
}

TEST(Gp, LinearFunctionMatchesClosedForm) {
  std::vector<double> xs{0, 0.25, 0.5, 0.75, 1.0}, ys;
  for (double x : xs) ys.push_back(2 * x + 1);
  std::vector<std::vector<double>> pts;
  for (double x : xs) pts.push_back({x});
  GpOptions opt;
  opt.fixed_kernel = RbfKernel{0.5, 1.0};
  auto s = fit_gp(pts, ys, opt);
  EXPECT_EQ(s.jitter(), opt.jitter);
  for (double m : {0.125, 0.375, 0.625, 0.875}) {
    double got = s.posterior(std::vector<double>{m}).mean;
    EXPECT_NEAR(got, 2 * m + 1, 0.1);
    EXPECT_NEAR(got, gp_mean_oracle(xs, ys, m, 0.5, 1.0, opt.jitter), 1e-9);
  }
}

TEST(Gp, GridPicksMaximumLikelihood) {
  std::vector<std::vector<double>> pts{{0.1}, {0.3}, {0.5}, {0.7}, {0.9}};
  std::vector<double> ys{0.0, 1.0, 0.2, 0.9, 0.1};
  auto s = fit_gp(pts, ys, GpOptions{});
  GpOptions opt;
  for (double ls : opt.length_scales)
    for (double sv : opt.signal_variances) {
      GpOptions fixed;
      fixed.fixed_kernel = RbfKernel{ls, sv};
      EXPECT_GE(s.log_marginal_likelihood(), fit_gp(pts, ys, fixed).log_marginal_likelihood() - 1e-12);
    }
}

TEST(Gp, Errors) {
  EXPECT_THROW(fit_gp({}, {}, GpOptions{}), Error);
  SearchSpace space = branin_space();
  std::vector<Trial> failed(2);
  failed[0].status = failed[1].status = TrialStatus::Failed;
  try {
    fit_surrogate(space, failed);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoSuccessfulTrials);
  }
  // Duplicate points with no jitter budget cannot be factorized.
  GpOptions opt;
  opt.jitter = 0;
  opt.max_jitter = 0;
  opt.fixed_kernel = RbfKernel{0.5, 1.0};
  try {
    fit_gp({{0.5}, {0.5}}, {1.0, 2.0}, opt);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularKernel);
  }
  // ...but jitter escalation rescues them.
  GpOptions esc;
  esc.fixed_kernel = RbfKernel{0.5, 1.0};
  EXPECT_NO_THROW(fit_gp({{0.5}, {0.5}}, {1.0, 2.0}, esc));
}

// ------------------------------------------------------------ proposals

TEST(Propose, AlwaysFeasible) {
  for (auto kind : kAllLearners) {
    auto space = builtin_search_space(kind);
    if (kind == LearnerKind::GbtLevelWise) space = with_learning_rate(space);
    Rng rng(3);
    std::vector<std::vector<double>> pts(6, std::vector<double>(space.encoded_dims()));
    for (auto& p : pts)
      for (auto& v : p) v = uniform01(rng);
    auto trials = ok_trials(space, pts, [](const std::vector<double>& u) {
      double s = 0;
      for (double v : u) s += (v - 0.3) * (v - 0.3);
      return s;
    });
    auto sur = fit_surrogate(space, trials);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      auto p = propose_next(sur, space, seed, 256);
      ASSERT_TRUE(space.contains(p)) << to_string(kind) << " seed " << seed;
    }
  }
}

TEST(Propose, AllZeroEiTakesLexicographicallyFirst) {
  SearchSpace space{{{"a", IntegerRange{0, 4}}, {"b", ContinuousRange{0, 1}}, {"c", Categories{{"x", "y", "z"}}}}};
  GpOptions opt;
  opt.fixed_kernel = RbfKernel{0.5, 0.0};  // zero prior variance: certain everywhere
  Trial t;
  t.params = {{"a", std::int64_t{2}}, {"b", 0.5}, {"c", std::string("y")}};
  t.objective = 1.0;
  std::vector<Trial> h{t};
  auto sur = fit_surrogate(space, h, opt);
  for (std::uint64_t seed : {0u, 1u, 99u}) {
    auto cands = detail::halton_candidates(2048, space.encoded_dims(), seed);
    std::vector<double> first;
    for (const auto& c : cands) {
      auto p = space.encode(space.decode(c));
      EXPECT_EQ(sur.expected_improvement_at(p), 0.0);
      if (first.empty() || p < first) first = p;
    }
    EXPECT_EQ(space.encode(propose_next(sur, space, seed)), first);
  }
}

TEST(Propose, QuadraticBracket) {
  SearchSpace space{{{"x", ContinuousRange{0, 1}}}};
  auto f = [](double x) { return (x - 0.55) * (x - 0.55); };
  std::vector<Trial> h;
  for (double x : {0.2, 0.5, 0.85}) {
    Trial t;
    t.params = {{"x", x}};
    t.objective = f(x);
    h.push_back(t);
  }
  auto sur = fit_surrogate(space, h);
  double grid_best = 0, grid_x = 0;
  for (int i = 0; i <= 10000; ++i) {
    double x = i / 10000.0;
    double ei = sur.expected_improvement_at(std::vector<double>{x});
    if (ei > grid_best) grid_best = ei, grid_x = x;
  }
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    double x = std::get<double>(propose_next(sur, space, seed).at("x"));
    EXPECT_GT(x, 0.2);
    EXPECT_LT(x, 0.85);
    EXPECT_GE(sur.expected_improvement_at(std::vector<double>{x}), 0.95 * grid_best) << "grid argmax " << grid_x;
  }
}

// ---------------------------------------------------------------- tune

TEST(Tune, BudgetEqualsInitDesign) {
  auto space = branin_space();
  auto r = tune(space, branin_of, 8, 5);
  ASSERT_EQ(r.history.size(), 8u);
  EXPECT_EQ(r.stop, StopReason::Budget);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& t : r.history) best = std::min(best, t.objective);
  EXPECT_EQ(r.best.objective, best);
}

TEST(Tune, ConstantObjectivePlateausAfterPatience) {
  auto r = tune(branin_space(), [](const ParamMap&) { return 3.0; }, 100, 1);
  EXPECT_EQ(r.stop, StopReason::Plateau);
  EXPECT_EQ(r.history.size(), 8u + 10u);
}

TEST(Tune, LatinHypercubeStratifies) {
  SearchSpace space{{{"u", ContinuousRange{0, 1}}, {"v", ContinuousRange{0, 1}}}};
  auto r = tune(space, [](const ParamMap&) { return 1.0; }, 8, 3);
  std::vector<int> su(8, 0), sv(8, 0);
  for (const auto& t : r.history) {
    ++su[static_cast<int>(std::get<double>(t.params.at("u")) * 8)];
    ++sv[static_cast<int>(std::get<double>(t.params.at("v")) * 8)];
  }
  for (int i = 0; i < 8; ++i) {
    EXPECT_EQ(su[i], 1);
    EXPECT_EQ(sv[i], 1);
  }
}

TEST(Tune, BudgetTooSmall) {
  try {
    tune(branin_space(), branin_of, 7, 0);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BudgetTooSmall);
  }
}

TEST(Tune, FailuresAreRecordedNotFatal) {
  auto space = branin_space();
  auto r = tune(
      space,
      [](const ParamMap& p) {
        if (std::get<double>(p.at("x1")) > 2.5) throw Error(ErrorCode::InvalidArgument, "boom");
        if (std::get<double>(p.at("x2")) > 13.0) return std::numeric_limits<double>::quiet_NaN();
        return branin_of(p);
      },
      20, 4, TuneOptions{.patience = 100});
  EXPECT_EQ(r.history.size(), 20u);
  std::size_t failed = 0;
  for (const auto& t : r.history)
    if (t.status == TrialStatus::Failed) {
      ++failed;
      EXPECT_FALSE(t.error.empty());
    }
  EXPECT_GT(failed, 0u);
  EXPECT_EQ(r.best.status, TrialStatus::Ok);
  EXPECT_LE(std::get<double>(r.best.params.at("x1")), 2.5);

  try {
    tune(space, [](const ParamMap&) -> double { throw std::runtime_error("x"); }, 10, 1);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoSuccessfulTrials);
  }
}

TEST(Tune, NeverLeavesSpaceAndBestIsMinimum) {
  for (auto kind : kAllLearners) {
    auto space = builtin_search_space(kind);
    std::size_t outside = 0;
    auto r = tune(
        space,
        [&](const ParamMap& p) {
          if (!space.contains(p)) ++outside;
          double s = 0;
          for (double v : space.encode(p)) s += (v - 0.4) * (v - 0.4);
          return s;
        },
        16, 11, TuneOptions{.n_candidates = 256});
    EXPECT_EQ(outside, 0u) << to_string(kind);
    double m = std::numeric_limits<double>::infinity();
    for (const auto& t : r.history) m = std::min(m, t.objective);
    EXPECT_EQ(r.best.objective, m);
  }
}

TEST(Tune, LearnerTuningIsDeterministic) {
  auto d = testutil::random_dataset(120, 8, true);
  auto space = builtin_search_space(LearnerKind::DecisionTree);
  auto a = tune_learner(LearnerKind::DecisionTree, space, d, 10, 21);
  auto b = tune_learner(LearnerKind::DecisionTree, space, d, 10, 21);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].params, b.history[i].params);
    EXPECT_EQ(a.history[i].objective, b.history[i].objective);
  }
  std::ostringstream ha, hb;
  write_history_csv(space, a, ha);
  write_history_csv(space, b, hb);
  EXPECT_EQ(ha.str(), hb.str());
  EXPECT_EQ(ha.str().substr(0, 55), "trial,max_depth,min_samples_split,min_samples_leaf,obje");
}

TEST(Tune, BraninBeatsRandomSearchMedian) {
  std::vector<double> random_bests, bo_bests;
  for (std::uint64_t seed = 0; seed < 20; ++seed) random_bests.push_back(random_search_best(seed, 40));
  const double random_median = median(random_bests);
  TuneOptions opt;
  opt.patience = 1000;
  opt.n_candidates = 1024;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto r = tune(branin_space(), branin_of, 40, seed, opt);
    ASSERT_EQ(r.history.size(), 40u);
    bo_bests.push_back(r.best.objective);
  }
  EXPECT_LE(median(bo_bests), random_median);
  std::size_t wins = 0;
  for (double b : bo_bests) wins += b <= random_median;
  EXPECT_GE(wins, 15u) << "BO median " << median(bo_bests) << " random median " << random_median;
}

// -------------------------------------------------------- search spaces

TEST(SearchSpaceFile, JsonRoundTrip) {
  for (auto kind : kAllLearners) {
    auto s = builtin_search_space(kind);
    auto j = search_space_to_json(kind, s);
    EXPECT_EQ(search_space_to_json(kind, search_space_from_json(j)), j);
  }
}

TEST(SearchSpaceFile, ShippedFilesMatchBuiltins) {
  const std::string dir = std::string(CIRCULARITY_SOURCE_DIR) + "/data/search_spaces/";
  for (auto kind : kAllLearners) {
    auto loaded = load_search_space(dir + std::string(to_string(kind)) + ".json");
    EXPECT_EQ(search_space_to_json(kind, loaded), search_space_to_json(kind, builtin_search_space(kind)))
        << to_string(kind);
  }
}

TEST(SearchSpaceFile, Invalid) {
  auto bad = [](const char* text) {
    try {
      search_space_from_json(nlohmann::json::parse(text));
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  EXPECT_EQ(bad(R"({"params":[{"name":"a","type":"integer","low":5,"high":5}]})"), ErrorCode::InvalidArgument);
  EXPECT_EQ(bad(R"({"params":[{"name":"a","type":"categorical","values":["x"]}]})"), ErrorCode::InvalidArgument);
  EXPECT_EQ(bad(R"({"params":[{"name":"a","type":"continuous","low":0,"high":1},
                               {"name":"a","type":"continuous","low":0,"high":1}]})"),
            ErrorCode::InvalidArgument);
  EXPECT_EQ(bad(R"({"params":[{"name":"a","type":"ordinal"}]})"), ErrorCode::InvalidArgument);
  EXPECT_EQ(bad(R"({"params":[{"name":"a","type":"integer"}]})"), ErrorCode::CorruptFile);
  EXPECT_EQ(bad(R"({"params":[]})"), ErrorCode::InvalidArgument);
}

TEST(SearchSpaceFile, DecodeSnapsAndEncodeInverts) {
  auto s = builtin_search_space(LearnerKind::Knn);
  auto p = s.decode(std::vector<double>{0.5, 0.2, 0.9, 1.3});
  EXPECT_EQ(std::get<std::int64_t>(p.at("n_neighbors")), 6);  // 1 + 0.5*9 = 5.5 rounds away from zero
  EXPECT_EQ(std::get<std::string>(p.at("weights")), "distance");
  EXPECT_EQ(std::get<std::int64_t>(p.at("p")), 5);
  EXPECT_EQ(s.decode(s.encode(p)), p);
}

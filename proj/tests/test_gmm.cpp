#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "protost/error.hpp"
#include "protost/gmm.hpp"

using namespace protost;

namespace {

FeatureSet planted(const std::vector<GaussianComponent>& comps, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> w;
  for (const auto& c : comps) w.push_back(c.weight);
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  std::normal_distribution<double> g(0.0, 1.0);
  FeatureSet fs(comps[0].mean.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = comps[pick(rng)];
    std::vector<double> x(fs.dim);
    for (std::size_t k = 0; k < fs.dim; ++k) x[k] = c.mean[k] + std::sqrt(c.var[k]) * g(rng);
    fs.push_back(std::span<const double>(x));
  }
  return fs;
}

}  // namespace

TEST(LogDensity, StandardNormalAtMean) {
  GaussianComponent c{1.0, {0.0, 0.0}, {1.0, 1.0}};
  std::vector<double> x{0.0, 0.0};
  EXPECT_NEAR(component_log_density(c, x), std::log(1.0 / (2.0 * M_PI)), 1e-12);
}

TEST(LogDensity, MixtureMatchesLongDoubleSum) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-3, 3), v(0.2, 3.0), w(0.1, 1.0);
  ClassGmm gmm{0, 3, {}};
  double total = 0;
  for (int k = 0; k < 4; ++k) {
    GaussianComponent c{w(rng), {u(rng), u(rng), u(rng)}, {v(rng), v(rng), v(rng)}};
    total += c.weight;
    gmm.components.push_back(c);
  }
  std::vector<oracle::LdComponent> ld;
  for (auto& c : gmm.components) {
    c.weight /= total;
    ld.push_back({c.weight, {c.mean.begin(), c.mean.end()}, {c.var.begin(), c.var.end()}});
  }
  for (int q = 0; q < 1000; ++q) {
    std::vector<double> x{u(rng), u(rng), u(rng)};
    long double ref = oracle::mixture_log_density(ld, {x.begin(), x.end()});
    EXPECT_NEAR(log_mixture_density(gmm, x), double(ref), 1e-10);
  }
}

TEST(LogDensity, FarQueriesStayFinite) {
  ClassGmm gmm{0, 1, {{0.5, {0.0}, {1e-6}}, {0.5, {1.0}, {1e-6}}}};
  std::vector<double> x{1000.0};
  double v = log_mixture_density(gmm, x);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_LT(v, -1e9);
}

TEST(LogSumExp, ShiftInvariance) {
  std::vector<double> a{-1000, -1001, -1002};
  std::vector<double> b{0, -1, -2};
  EXPECT_NEAR(log_sum_exp(a) + 1000, log_sum_exp(b), 1e-12);
}

TEST(FitGmm, RecoversPlantedMixture) {
  std::vector<GaussianComponent> truth{{0.5, {0, 0}, {1, 1}}, {0.3, {12, 0}, {1, 2}}, {0.2, {0, 12}, {2, 1}}};
  auto data = planted(truth, 6000, 4);
  EmConfig cfg;
  cfg.components = 3;
  cfg.seed = 1;
  auto fit = fit_gmm_detailed(data, cfg);
  auto perm = oracle::best_matching(3, [&](std::size_t i, std::size_t j) {
    double d = 0;
    for (int k = 0; k < 2; ++k) d += std::pow(truth[i].mean[k] - fit.model.components[j].mean[k], 2);
    return d;
  });
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& est = fit.model.components[perm[i]];
    for (int k = 0; k < 2; ++k) EXPECT_NEAR(est.mean[k], truth[i].mean[k], 0.1);
    EXPECT_NEAR(est.weight, truth[i].weight, 0.03);
  }
}

TEST(FitGmm, LogLikelihoodNonDecreasing) {
  std::vector<GaussianComponent> truth{{0.6, {0, 0}, {1, 1}}, {0.4, {2, 1}, {0.5, 2}}};
  auto data = planted(truth, 3000, 6);
  EmConfig cfg;
  cfg.components = 4;
  cfg.tol = 1e-12;
  cfg.max_iter = 200;
  auto fit = fit_gmm_detailed(data, cfg);
  for (std::size_t t = 1; t < fit.log_likelihood.size(); ++t)
    EXPECT_GE(fit.log_likelihood[t], fit.log_likelihood[t - 1] - 1e-9 * std::abs(fit.log_likelihood[t - 1]));
}

// With K = 1 the fit is the sample mean and (biased) sample variance.
TEST(FitGmm, SingleComponentIsClosedForm) {
  auto data = planted({{1.0, {2, -1}, {3, 0.5}}}, 500, 2);
  EmConfig cfg;
  cfg.components = 1;
  auto g = fit_gmm(data, cfg);
  for (std::size_t k = 0; k < 2; ++k) {
    long double m = 0, v = 0;
    for (std::size_t i = 0; i < data.size(); ++i) m += data.row(i)[k];
    m /= data.size();
    for (std::size_t i = 0; i < data.size(); ++i) v += (data.row(i)[k] - m) * (data.row(i)[k] - m);
    v /= data.size();
    EXPECT_NEAR(g.components[0].mean[k], double(m), 1e-10);
    EXPECT_NEAR(g.components[0].var[k], double(v), 1e-9);
  }
  EXPECT_DOUBLE_EQ(g.components[0].weight, 1.0);
}

TEST(FitGmm, VarianceFloorHolds) {
  FeatureSet fs(2);
  for (int i = 0; i < 100; ++i) fs.push_back(std::span<const double>(std::vector<double>{1.0, double(i % 2)}));
  EmConfig cfg;
  cfg.components = 2;
  cfg.var_floor = 1e-6;
  auto g = fit_gmm(fs, cfg);
  for (const auto& c : g.components)
    for (double v : c.var) EXPECT_GE(v, 1e-6);
  EXPECT_NO_THROW(g.validate(1e-6));
}

TEST(FitGmm, DeterministicPerSeed) {
  auto data = planted({{0.5, {0, 0}, {1, 1}}, {0.5, {4, 4}, {1, 1}}}, 800, 3);
  EmConfig cfg;
  cfg.components = 3;
  cfg.seed = 99;
  EXPECT_EQ(fit_gmm(data, cfg), fit_gmm(data, cfg));
}

TEST(FitGmm, TooFewPointsIsInsufficientData) {
  FeatureSet fs(2);
  fs.values = {0, 0, 1, 1};
  EmConfig cfg;
  cfg.components = 3;
  try {
    fit_gmm(fs, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInsufficientData);
  }
}

TEST(Subsample, UniformWithoutReplacement) {
  auto idx = subsample_indices(1000, 100, 5);
  ASSERT_EQ(idx.size(), 100u);
  EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
  EXPECT_EQ(std::adjacent_find(idx.begin(), idx.end()), idx.end());
  EXPECT_EQ(subsample_indices(50, 100, 5).size(), 50u);
}

// Each index is kept with probability cap/n; check the count in the first
// half against a 5-sigma binomial band over many draws.
TEST(Subsample, NoPositionBias) {
  const std::size_t n = 400, cap = 100, draws = 400;
  std::size_t first_half = 0;
  for (std::size_t s = 0; s < draws; ++s)
    for (auto i : subsample_indices(n, cap, s)) first_half += i < n / 2;
  double mean = draws * cap * 0.5;
  double sd = std::sqrt(draws * cap * 0.25);
  EXPECT_NEAR(double(first_half), mean, 5 * sd);
}

#include "protost/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "protost/clustering.hpp"
#include "protost/error.hpp"

namespace protost {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // log(2*pi)

void check_dim(std::size_t got, std::size_t want) {
  require(got == want, ErrorKind::kShape,
          "feature has dim " + std::to_string(got) + ", model expects " + std::to_string(want));
}

// Per-component constants reused across every sample of an E-step.
struct ComponentCache {
  double log_norm = 0.0;  // log weight - 0.5 * sum log var - d/2 log 2pi
  std::vector<double> inv_var;
};

ComponentCache make_cache(const GaussianComponent& c) {
  ComponentCache cache;
  double log_det = 0.0;
  cache.inv_var.resize(c.var.size());
  for (std::size_t j = 0; j < c.var.size(); ++j) {
    log_det += std::log(c.var[j]);
    cache.inv_var[j] = 1.0 / c.var[j];
  }
  cache.log_norm = std::log(c.weight) - 0.5 * log_det - 0.5 * double(c.var.size()) * kLog2Pi;
  return cache;
}

double weighted_log_density(const GaussianComponent& c, const ComponentCache& cache, std::span<const double> f) {
  double q = 0.0;
  for (std::size_t j = 0; j < f.size(); ++j) {
    double d = f[j] - c.mean[j];
    q += d * d * cache.inv_var[j];
  }
  return cache.log_norm - 0.5 * q;
}

}  // namespace

void ClassGmm::validate(double var_floor) const {
  require(!components.empty(), ErrorKind::kValidation, "mixture has no components");
  double total = 0.0;
  for (const auto& c : components) {
    require(c.mean.size() == dim && c.var.size() == dim, ErrorKind::kShape, "component dim mismatch");
    require(std::isfinite(c.weight) && c.weight > 0.0, ErrorKind::kValidation, "mixture weight must be positive");
    for (double m : c.mean) require(std::isfinite(m), ErrorKind::kValidation, "non-finite component mean");
    for (double v : c.var)
      require(std::isfinite(v) && v > 0.0 && v >= var_floor, ErrorKind::kValidation, "variance below floor");
    total += c.weight;
  }
  require(std::abs(total - 1.0) <= 1e-9, ErrorKind::kValidation, "mixture weights do not sum to one");
}

std::size_t MapsModel::present_count() const {
  return static_cast<std::size_t>(std::count_if(classes.begin(), classes.end(), [](const auto& g) { return g.has_value(); }));
}

void MapsModel::validate() const {
  for (std::size_t c = 0; c < classes.size(); ++c) {
    if (!classes[c]) continue;
    require(classes[c]->dim == dim, ErrorKind::kShape, "class mixture dim differs from model dim");
    require(classes[c]->class_id == static_cast<int>(c), ErrorKind::kValidation, "class id out of place");
    classes[c]->validate();
  }
}

double log_sum_exp(std::span<const double> xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

double component_log_density(const GaussianComponent& comp, std::span<const double> f) {
  check_dim(f.size(), comp.mean.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < f.size(); ++j) {
    double d = f[j] - comp.mean[j];
    acc += d * d / comp.var[j] + std::log(comp.var[j]);
  }
  return -0.5 * acc - 0.5 * double(f.size()) * kLog2Pi;
}

double log_mixture_density(const ClassGmm& gmm, std::span<const double> f) {
  check_dim(f.size(), gmm.dim);
  std::vector<double> terms;
  terms.reserve(gmm.components.size());
  for (const auto& c : gmm.components) terms.push_back(std::log(c.weight) + component_log_density(c, f));
  return log_sum_exp(terms);
}

double log_mixture_density(const ClassGmm& gmm, std::span<const float> f) {
  std::vector<double> g(f.begin(), f.end());
  return log_mixture_density(gmm, std::span<const double>(g));
}

std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t cap, std::uint64_t seed) {
  require(cap >= 1, ErrorKind::kConfig, "subsample cap must be at least 1");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (n <= cap) return idx;
  // Partial Fisher-Yates: the first `cap` slots become a uniform sample.
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < cap; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  return idx;
}

FeatureSet subsample(const FeatureSet& features, std::size_t cap, std::uint64_t seed) {
  if (features.size() <= cap) {
    require(cap >= 1, ErrorKind::kConfig, "subsample cap must be at least 1");
    return features;
  }
  FeatureSet out(features.dim);
  out.values.reserve(cap * features.dim);
  for (std::size_t i : subsample_indices(features.size(), cap, seed)) out.push_back(features.row(i));
  return out;
}

GmmFit fit_gmm_detailed(const FeatureSet& features, const EmConfig& cfg, int class_id) {
  const std::size_t n = features.size();
  const std::size_t d = features.dim;
  const std::size_t K = cfg.components;
  require(K >= 1, ErrorKind::kConfig, "mixture needs at least one component");
  require(n >= K, ErrorKind::kInsufficientData,
          std::to_string(n) + " features for " + std::to_string(K) + " components");
  for (double v : features.values) require(std::isfinite(v), ErrorKind::kValidation, "non-finite feature");

  GmmFit fit;
  ClassGmm& gmm = fit.model;
  gmm.class_id = class_id;
  gmm.dim = d;
  gmm.components.resize(K);

  // Warm start: hard k-means partition -> occupancy weights, cluster moments.
  {
    KMeansOptions km;
    km.clusters = K;
    km.seed = cfg.seed;
    auto part = kmeans_fit(features, km);
    std::vector<double> count(K, 0.0), sum(K * d, 0.0), sq(K * d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t k = part.assignment[i];
      count[k] += 1.0;
      for (std::size_t j = 0; j < d; ++j) sum[k * d + j] += features.row(i)[j];
    }
    for (std::size_t k = 0; k < K; ++k) {
      auto& comp = gmm.components[k];
      comp.mean.assign(d, 0.0);
      comp.var.assign(d, cfg.var_floor);
      if (count[k] == 0.0) {
        auto c = part.prototypes.center(k);
        comp.mean.assign(c.begin(), c.end());
        comp.weight = 1.0 / double(n);
        continue;
      }
      comp.weight = count[k] / double(n);
      for (std::size_t j = 0; j < d; ++j) comp.mean[j] = sum[k * d + j] / count[k];
    }
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t k = part.assignment[i];
      for (std::size_t j = 0; j < d; ++j) {
        double diff = features.row(i)[j] - gmm.components[k].mean[j];
        sq[k * d + j] += diff * diff;
      }
    }
    double wsum = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      if (count[k] > 0.0)
        for (std::size_t j = 0; j < d; ++j)
          gmm.components[k].var[j] = std::max(sq[k * d + j] / count[k], cfg.var_floor);
      wsum += gmm.components[k].weight;
    }
    for (auto& comp : gmm.components) comp.weight /= wsum;
  }

  std::vector<double> resp(n * K);
  std::vector<double> terms(K);
  std::vector<ComponentCache> cache(K);

  for (int it = 0; it < std::max(cfg.max_iter, 1); ++it) {
    // E-step in log space.
    for (std::size_t k = 0; k < K; ++k) cache[k] = make_cache(gmm.components[k]);
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      auto x = features.row(i);
      for (std::size_t k = 0; k < K; ++k) terms[k] = weighted_log_density(gmm.components[k], cache[k], x);
      double lse = log_sum_exp(terms);
      ll += lse;
      for (std::size_t k = 0; k < K; ++k) resp[i * K + k] = std::exp(terms[k] - lse);
    }
    require(std::isfinite(ll), ErrorKind::kNumeric, "EM log-likelihood became non-finite");
    fit.log_likelihood.push_back(ll);
    fit.iterations = it + 1;
    if (fit.log_likelihood.size() >= 2) {
      double prev = fit.log_likelihood[fit.log_likelihood.size() - 2];
      if (std::abs(ll - prev) <= cfg.tol * std::abs(prev)) {
        fit.converged = true;
        break;
      }
    }

    // M-step, accumulated in fixed sample order.
    double wsum = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      auto& comp = gmm.components[k];
      double nk = 0.0;
      std::vector<double> mean(d, 0.0), var(d, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        double r = resp[i * K + k];
        nk += r;
        auto x = features.row(i);
        for (std::size_t j = 0; j < d; ++j) mean[j] += r * x[j];
      }
      if (!(nk > 0.0)) {
        // Component lost all mass; keep its shape and give it a negligible weight.
        comp.weight = 1e-300;
        wsum += comp.weight;
        continue;
      }
      for (std::size_t j = 0; j < d; ++j) mean[j] /= nk;
      for (std::size_t i = 0; i < n; ++i) {
        double r = resp[i * K + k];
        auto x = features.row(i);
        for (std::size_t j = 0; j < d; ++j) {
          double diff = x[j] - mean[j];
          var[j] += r * diff * diff;
        }
      }
      for (std::size_t j = 0; j < d; ++j) var[j] = std::max(var[j] / nk, cfg.var_floor);
      comp.mean = std::move(mean);
      comp.var = std::move(var);
      comp.weight = nk / double(n);
      wsum += comp.weight;
    }
    if (wsum != 1.0)
      for (auto& comp : gmm.components) comp.weight /= wsum;
  }
  return fit;
}

}  // namespace protost

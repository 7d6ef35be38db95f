#pragma once

// Per-class diagonal-covariance Gaussian mixtures ("multiple anisotropic
// prototypes") fitted by expectation-maximization.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "protost/dataio.hpp"

namespace protost {

struct GaussianComponent {
  double weight = 1.0;
  std::vector<double> mean;
  std::vector<double> var;  // diagonal of the covariance

  friend bool operator==(const GaussianComponent&, const GaussianComponent&) = default;
};

struct ClassGmm {
  int class_id = 0;
  std::size_t dim = 0;
  std::vector<GaussianComponent> components;

  /// Weights sum to one, variances respect `var_floor`, everything finite.
  void validate(double var_floor = 0.0) const;

  friend bool operator==(const ClassGmm&, const ClassGmm&) = default;
};

/// One optional mixture per class id; a missing entry marks a class that had
/// too few trusted source features to fit.
struct MapsModel {
  std::size_t dim = 0;
  std::vector<std::optional<ClassGmm>> classes;

  int num_classes() const { return static_cast<int>(classes.size()); }
  bool present(int c) const { return classes[static_cast<std::size_t>(c)].has_value(); }
  std::size_t present_count() const;

  void validate() const;

  friend bool operator==(const MapsModel&, const MapsModel&) = default;
};

struct EmConfig {
  std::size_t components = 8;
  double var_floor = 1e-6;
  double tol = 1e-6;  // relative change of the total log-likelihood
  int max_iter = 100;
  std::size_t cap = 300000;
  std::uint64_t seed = 0;
};

/// log N(f | mean, diag(var)).
double component_log_density(const GaussianComponent& comp, std::span<const double> f);

/// log sum_k weight_k N_k(f), evaluated with log-sum-exp.
double log_mixture_density(const ClassGmm& gmm, std::span<const double> f);
double log_mixture_density(const ClassGmm& gmm, std::span<const float> f);

double log_sum_exp(std::span<const double> xs);

struct GmmFit {
  ClassGmm model;
  // Total data log-likelihood evaluated at the start of each EM iteration.
  std::vector<double> log_likelihood;
  int iterations = 0;
  bool converged = false;
};

/// Fits a K-component mixture; initialised from k-means with J = K.
/// Does not subsample: callers cap the input with subsample() first.
GmmFit fit_gmm_detailed(const FeatureSet& features, const EmConfig& cfg, int class_id = 0);

inline ClassGmm fit_gmm(const FeatureSet& features, const EmConfig& cfg, int class_id = 0) {
  return fit_gmm_detailed(features, cfg, class_id).model;
}

/// Uniform subset of `cap` rows without replacement (original order kept), or
/// the input itself when it is already small enough.
FeatureSet subsample(const FeatureSet& features, std::size_t cap, std::uint64_t seed);

/// Indices chosen by subsample(); exposed for tests.
std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t cap, std::uint64_t seed);

}  // namespace protost

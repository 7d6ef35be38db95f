#include "protost/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "protost/error.hpp"

namespace protost {

void PrototypeSet::validate() const {
  require(dim > 0 && count() >= 1, ErrorKind::kValidation, "prototype set needs at least one centre");
  require(centers.size() == count() * dim, ErrorKind::kLength, "prototype centre storage is ragged");
  for (double v : centers) require(std::isfinite(v), ErrorKind::kValidation, "non-finite prototype centre");
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

std::size_t nearest_index(std::span<const double> f, const PrototypeSet& protos) {
  require(f.size() == protos.dim, ErrorKind::kShape,
          "query has dim " + std::to_string(f.size()) + ", prototypes have " + std::to_string(protos.dim));
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < protos.count(); ++j) {
    double d = squared_distance(f, protos.center(j));
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

double nearest_distance(std::span<const double> f, const PrototypeSet& protos) {
  require(protos.count() > 0, ErrorKind::kEmptyModel, "prototype set is empty");
  return std::sqrt(squared_distance(f, protos.center(nearest_index(f, protos))));
}

double nearest_distance(std::span<const float> f, const PrototypeSet& protos) {
  std::vector<double> g(f.begin(), f.end());
  return nearest_distance(std::span<const double>(g), protos);
}

namespace {

PrototypeSet seed_plus_plus(const FeatureSet& points, std::size_t k, std::mt19937_64& rng) {
  const std::size_t n = points.size();
  PrototypeSet protos{points.dim, {}};
  protos.centers.reserve(k * points.dim);

  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  auto first = points.row(pick(rng));
  protos.centers.insert(protos.centers.end(), first.begin(), first.end());

  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(points.row(i), protos.center(0));

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (protos.count() < k) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t chosen = 0;
    if (total > 0.0) {
      double target = unit(rng) * total;
      double acc = 0.0;
      chosen = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target && d2[i] > 0.0) {
          chosen = i;
          break;
        }
      }
    } else {
      // Every point coincides with a centre already; duplicates are unavoidable.
      chosen = pick(rng);
    }
    auto c = points.row(chosen);
    protos.centers.insert(protos.centers.end(), c.begin(), c.end());
    auto newest = protos.center(protos.count() - 1);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(points.row(i), newest));
  }
  return protos;
}

}  // namespace

KMeansResult kmeans_fit(const FeatureSet& points, const KMeansOptions& opts) {
  require(!points.empty(), ErrorKind::kEmptyInput, "k-means on an empty point set");
  require(opts.clusters >= 1, ErrorKind::kConfig, "k-means needs at least one cluster");
  const std::size_t n = points.size();
  const std::size_t k = opts.clusters;
  const std::size_t d = points.dim;
  require(n >= k, ErrorKind::kInsufficientData,
          std::to_string(n) + " points for " + std::to_string(k) + " clusters");

  std::mt19937_64 rng(opts.seed);
  KMeansResult res;
  res.prototypes = seed_plus_plus(points, k, rng);
  res.assignment.assign(n, 0);
  std::vector<double> cost(n);

  auto& centers = res.prototypes.centers;
  std::vector<double> sums(k * d);
  std::vector<std::size_t> counts(k);

  for (int it = 0; it < std::max(opts.max_iter, 1); ++it) {
    double objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t j = nearest_index(points.row(i), res.prototypes);
      res.assignment[i] = j;
      cost[i] = squared_distance(points.row(i), res.prototypes.center(j));
      objective += cost[i];
    }
    res.objective.push_back(objective);
    res.iterations = it + 1;

    if (res.objective.size() >= 2) {
      double prev = res.objective[res.objective.size() - 2];
      if (prev <= 0.0 || (prev - objective) / prev < opts.tol) break;
    } else if (objective == 0.0) {
      break;
    }
    if (it + 1 == opts.max_iter) break;

    // Update in fixed point order so seeded runs reproduce bit-for-bit.
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t j = res.assignment[i];
      auto row = points.row(i);
      for (std::size_t q = 0; q < d; ++q) sums[j * d + q] += row[q];
      ++counts[j];
    }
    std::vector<bool> taken(n, false);
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] == 0) continue;
      for (std::size_t q = 0; q < d; ++q) centers[j * d + q] = sums[j * d + q] / double(counts[j]);
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] != 0) continue;
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i]) continue;
        double di = squared_distance(points.row(i), res.prototypes.center(res.assignment[i]));
        if (di > far_d) {
          far_d = di;
          far = i;
        }
      }
      taken[far] = true;
      auto row = points.row(far);
      std::copy(row.begin(), row.end(), centers.begin() + j * d);
    }
  }
  return res;
}

}  // namespace protost

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "protost/dataio.hpp"

namespace protost {

/// Cluster centres of unlabeled features; used as target-domain prototypes.
struct PrototypeSet {
  std::size_t dim = 0;
  std::vector<double> centers;  // count() rows of length dim

  std::size_t count() const { return dim == 0 ? 0 : centers.size() / dim; }
  std::span<const double> center(std::size_t j) const { return {centers.data() + j * dim, dim}; }

  void validate() const;

  friend bool operator==(const PrototypeSet&, const PrototypeSet&) = default;
};

struct KMeansOptions {
  std::size_t clusters = 64;
  std::uint64_t seed = 0;
  int max_iter = 100;
  double tol = 1e-6;  // relative objective improvement
};

struct KMeansResult {
  PrototypeSet prototypes;
  std::vector<std::size_t> assignment;
  // Sum of squared distances after each assignment step.
  std::vector<double> objective;
  int iterations = 0;
};

/// Lloyd's algorithm with k-means++ seeding. An emptied cluster is re-seeded
/// at the point currently farthest from its centre.
KMeansResult kmeans_fit(const FeatureSet& points, const KMeansOptions& opts);

inline PrototypeSet kmeans(const FeatureSet& points, const KMeansOptions& opts) {
  return kmeans_fit(points, opts).prototypes;
}

double squared_distance(std::span<const double> a, std::span<const double> b);

/// Minimum Euclidean distance from f to any prototype.
double nearest_distance(std::span<const double> f, const PrototypeSet& protos);
double nearest_distance(std::span<const float> f, const PrototypeSet& protos);

/// Index of the closest prototype (lowest index on ties).
std::size_t nearest_index(std::span<const double> f, const PrototypeSet& protos);

}  // namespace protost

#pragma once

// Pseudo-label assignment for target pixels.
//
// Three assigners share one output type:
//   maps  - argmax of per-class mixture log-density, kept if it clears delta
//   cas   - nearest class centroid, kept if within a Euclidean radius
//   conf  - argmax softmax probability, kept if it clears a confidence level.
//           This is the plain confidence rule, not the instance-adaptive
//           threshold search it is usually compared against.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "protost/dataio.hpp"
#include "protost/gmm.hpp"

namespace protost {

struct PseudoLabelMap {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<std::int32_t> labels;  // class id or kIgnoreLabel
  double threshold = 0.0;
  int classes = 0;

  std::size_t pixels() const { return std::size_t(height) * width; }
  LabelMap as_label_map() const;

  friend bool operator==(const PseudoLabelMap&, const PseudoLabelMap&) = default;
};

struct CentroidModel {
  std::size_t dim = 0;
  std::vector<std::optional<std::vector<double>>> centroids;

  int num_classes() const { return static_cast<int>(centroids.size()); }

  friend bool operator==(const CentroidModel&, const CentroidModel&) = default;
};

/// One labeled source image: latent features, softmax output and ground truth.
struct SourceSample {
  FeatureMap features;
  ProbMap prediction;
  LabelMap truth;
};

/// Features at pixels where both the predicted argmax and the label equal c.
FeatureSet collect_class_features(const FeatureMap& feat, const ProbMap& pred, const LabelMap& gt, int c);

struct MapsConfig {
  EmConfig em;
  std::size_t min_samples = 50;  // classes need max(K, min_samples) features
};

/// Fits one mixture per class over its trusted source features. Classes that
/// fall below the sample floor stay absent.
MapsModel build_maps(std::span<const SourceSample> batches, int classes, const MapsConfig& cfg);

/// Per-class means of the same trusted features (the single-centroid baseline).
CentroidModel build_centroids(std::span<const SourceSample> batches, int classes);

/// Best present class and its log-density for one feature vector.
struct ClassScore {
  int label = kIgnoreLabel;
  double score = 0.0;
};
ClassScore best_maps_class(const MapsModel& model, std::span<const double> f);

/// Nearest present centroid and the Euclidean distance to it.
ClassScore nearest_centroid(const CentroidModel& model, std::span<const double> f);

PseudoLabelMap assign_maps_pla(const MapsModel& model, const FeatureMap& feat, double delta);
PseudoLabelMap assign_cas_pla(const CentroidModel& model, const FeatureMap& feat, double dist_threshold);
PseudoLabelMap assign_conf_pla(const ProbMap& pred, double conf_threshold);

/// Fraction of pixels that carry a label.
double pl_ratio(const PseudoLabelMap& pl);
double pl_ratio(std::span<const PseudoLabelMap> pls);

}  // namespace protost

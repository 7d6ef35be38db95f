#pragma once

// Source transferability maps: per-pixel weights that shrink the loss of
// source pixels lying far from every target prototype, with a per-class floor
// derived from how uncertain the source model is on that class in the target
// domain.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "protost/clustering.hpp"
#include "protost/dataio.hpp"

namespace protost {

struct DistanceMap {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<double> distances;

  std::size_t pixels() const { return std::size_t(height) * width; }
};

struct EntropyStats {
  std::vector<double> mean_entropy;  // nats; 0 for classes without pixels
  std::vector<double> normalized;    // min-max scaled over present classes, 1.0 when absent
  std::vector<std::size_t> counts;

  int classes() const { return static_cast<int>(counts.size()); }
};

struct TransferabilityMap {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<double> weights;  // (0, 1]; exactly 0 on ignore pixels

  std::size_t pixels() const { return std::size_t(height) * width; }

  friend bool operator==(const TransferabilityMap&, const TransferabilityMap&) = default;
};

inline constexpr double kMinMeanDistance = 1e-12;

/// Shannon entropy (nats) of one probability row.
double entropy(std::span<const double> p);

/// Per-class mean prediction entropy grouped by (pseudo) labels.
EntropyStats class_entropy(std::span<const ProbMap> preds, std::span<const LabelMap> labels);

DistanceMap distance_map(const FeatureMap& feat, const PrototypeSet& protos);

struct MeanDistance {
  double value = 0.0;
  bool degenerate = false;  // true when the raw mean was below kMinMeanDistance
};

/// Mean over every pixel of every map.
MeanDistance mean_distance(std::span<const DistanceMap> dmaps);

/// Mean over pixels whose label is not ignore.
MeanDistance mean_distance(std::span<const DistanceMap> dmaps, std::span<const LabelMap> labels);

/// w = min(2^(-D^2 / d_mean^2) + e'_c, 1) per labeled pixel, 0 on ignore pixels.
double transferability_weight(double distance, double d_mean, double entropy_floor);

TransferabilityMap transferability_map(const DistanceMap& dmap, const LabelMap& gt, const EntropyStats& stats,
                                       double d_mean);

/// WMAP file: magic "WMAP", u8 version, u32 H, u32 W, then H*W float32.
void save_transferability_map(const TransferabilityMap& tm, const std::filesystem::path& path);
TransferabilityMap load_transferability_map(const std::filesystem::path& path);

}  // namespace protost

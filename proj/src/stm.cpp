#include "protost/stm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "binary_io.hpp"
#include "protost/error.hpp"

namespace protost {

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

EntropyStats class_entropy(std::span<const ProbMap> preds, std::span<const LabelMap> labels) {
  require(preds.size() == labels.size(), ErrorKind::kShape, "predictions and labels must pair up");
  require(!preds.empty(), ErrorKind::kEmptyInput, "no target predictions");
  const auto C = preds.front().classes;
  EntropyStats stats;
  stats.mean_entropy.assign(C, 0.0);
  stats.normalized.assign(C, 1.0);
  stats.counts.assign(C, 0);

  for (std::size_t m = 0; m < preds.size(); ++m) {
    const auto& pm = preds[m];
    const auto& lm = labels[m];
    require(pm.classes == C, ErrorKind::kShape, "class count differs between predictions");
    require(pm.height == lm.height && pm.width == lm.width, ErrorKind::kShape, "prediction/label resolution mismatch");
    for (std::size_t i = 0; i < pm.pixels(); ++i) {
      int c = lm.labels[i];
      if (c == kIgnoreLabel) continue;
      require(c >= 0 && c < static_cast<int>(C), ErrorKind::kUnknownClass, "label outside prediction classes");
      stats.mean_entropy[std::size_t(c)] += entropy(pm.pixel(i));
      ++stats.counts[std::size_t(c)];
    }
  }

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t c = 0; c < C; ++c) {
    if (stats.counts[c] == 0) continue;
    stats.mean_entropy[c] /= double(stats.counts[c]);
    lo = std::min(lo, stats.mean_entropy[c]);
    hi = std::max(hi, stats.mean_entropy[c]);
    any = true;
  }
  require(any, ErrorKind::kEmptyInput, "no labeled target pixels to group entropy by");
  for (std::size_t c = 0; c < C; ++c) {
    if (stats.counts[c] == 0) continue;
    stats.normalized[c] = hi > lo ? (stats.mean_entropy[c] - lo) / (hi - lo) : 0.0;
  }
  return stats;
}

DistanceMap distance_map(const FeatureMap& feat, const PrototypeSet& protos) {
  require(feat.dim == protos.dim, ErrorKind::kShape,
          "feature dim " + std::to_string(feat.dim) + " vs prototype dim " + std::to_string(protos.dim));
  DistanceMap out{feat.height, feat.width, std::vector<double>(feat.pixels())};
  for (std::size_t i = 0; i < feat.pixels(); ++i) out.distances[i] = nearest_distance(feat.pixel(i), protos);
  return out;
}

namespace {

MeanDistance finish_mean(double sum, std::size_t n) {
  require(n > 0, ErrorKind::kEmptyInput, "no pixels to average distances over");
  double m = sum / double(n);
  if (m < kMinMeanDistance) return {kMinMeanDistance, true};
  return {m, false};
}

}  // namespace

MeanDistance mean_distance(std::span<const DistanceMap> dmaps) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& dm : dmaps)
    for (double d : dm.distances) {
      sum += d;
      ++n;
    }
  return finish_mean(sum, n);
}

MeanDistance mean_distance(std::span<const DistanceMap> dmaps, std::span<const LabelMap> labels) {
  require(dmaps.size() == labels.size(), ErrorKind::kShape, "distance maps and labels must pair up");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t m = 0; m < dmaps.size(); ++m) {
    require(dmaps[m].pixels() == labels[m].pixels(), ErrorKind::kShape, "distance/label resolution mismatch");
    for (std::size_t i = 0; i < dmaps[m].pixels(); ++i) {
      if (labels[m].labels[i] == kIgnoreLabel) continue;
      sum += dmaps[m].distances[i];
      ++n;
    }
  }
  return finish_mean(sum, n);
}

double transferability_weight(double distance, double d_mean, double entropy_floor) {
  // exp(-x * ln 2) == 2^-x; exp2 keeps the half-life point exact.
  // The floor keeps far pixels strictly positive even after float32 storage.
  double r = distance / d_mean;
  double w = std::min(std::exp2(-r * r) + entropy_floor, 1.0);
  return std::max(w, double(std::numeric_limits<float>::min()));
}

TransferabilityMap transferability_map(const DistanceMap& dmap, const LabelMap& gt, const EntropyStats& stats,
                                       double d_mean) {
  require(dmap.height == gt.height && dmap.width == gt.width, ErrorKind::kShape, "distance/label resolution mismatch");
  require(d_mean > 0.0 && std::isfinite(d_mean), ErrorKind::kValidation, "mean distance must be positive");
  TransferabilityMap tm{gt.height, gt.width, std::vector<double>(gt.pixels(), 0.0)};
  for (std::size_t i = 0; i < gt.pixels(); ++i) {
    int c = gt.labels[i];
    if (c == kIgnoreLabel) continue;
    require(c >= 0 && c < stats.classes(), ErrorKind::kUnknownClass,
            "label " + std::to_string(c) + " has no entropy statistics");
    tm.weights[i] = transferability_weight(dmap.distances[i], d_mean, stats.normalized[std::size_t(c)]);
  }
  return tm;
}

void save_transferability_map(const TransferabilityMap& tm, const std::filesystem::path& path) {
  require(tm.weights.size() == tm.pixels(), ErrorKind::kLength, "weight map length does not match H*W");
  detail::ByteWriter w;
  w.magic("WMAP");
  w.u8(kMapFormatVersion);
  w.u32(tm.height);
  w.u32(tm.width);
  for (double v : tm.weights) w.f32(static_cast<float>(v));
  w.write_to(path);
}

TransferabilityMap load_transferability_map(const std::filesystem::path& path) {
  detail::ByteReader r(path);
  r.expect_magic("WMAP");
  r.expect_version(kMapFormatVersion);
  TransferabilityMap tm;
  tm.height = r.header_u32();
  tm.width = r.header_u32();
  r.expect_payload_words(std::uint64_t(tm.height) * tm.width);
  tm.weights.resize(tm.pixels());
  for (auto& v : tm.weights) {
    v = r.f32();
    require(std::isfinite(v) && v >= 0.0 && v <= 1.0, ErrorKind::kValidation, r.path() + ": weight outside [0, 1]");
  }
  return tm;
}

}  // namespace protost

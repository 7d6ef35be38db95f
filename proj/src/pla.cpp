#include "protost/pla.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "protost/clustering.hpp"
#include "protost/error.hpp"

namespace protost {

namespace {

void check_same_grid(std::uint32_t h1, std::uint32_t w1, std::uint32_t h2, std::uint32_t w2, const char* what) {
  require(h1 == h2 && w1 == w2, ErrorKind::kShape,
          std::string(what) + ": " + std::to_string(h1) + "x" + std::to_string(w1) + " vs " +
              std::to_string(h2) + "x" + std::to_string(w2));
}

std::vector<double> widen(std::span<const float> f) { return {f.begin(), f.end()}; }

PseudoLabelMap empty_pl(std::uint32_t h, std::uint32_t w, double threshold, int classes) {
  PseudoLabelMap pl;
  pl.height = h;
  pl.width = w;
  pl.labels.assign(std::size_t(h) * w, kIgnoreLabel);
  pl.threshold = threshold;
  pl.classes = classes;
  return pl;
}

}  // namespace

LabelMap PseudoLabelMap::as_label_map() const {
  LabelMap lm(height, width);
  lm.labels = labels;
  return lm;
}

FeatureSet collect_class_features(const FeatureMap& feat, const ProbMap& pred, const LabelMap& gt, int c) {
  check_same_grid(feat.height, feat.width, pred.height, pred.width, "features vs prediction");
  check_same_grid(feat.height, feat.width, gt.height, gt.width, "features vs labels");
  require(c >= 0 && c < static_cast<int>(pred.classes), ErrorKind::kUnknownClass,
          "class " + std::to_string(c) + " outside prediction classes");
  FeatureSet out(feat.dim);
  for (std::size_t i = 0; i < feat.pixels(); ++i)
    if (gt.labels[i] == c && argmax(pred, i) == c) out.push_back(feat.pixel(i));
  return out;
}

MapsModel build_maps(std::span<const SourceSample> batches, int classes, const MapsConfig& cfg) {
  require(!batches.empty(), ErrorKind::kEmptyInput, "build_maps needs at least one source sample");
  require(classes >= 1, ErrorKind::kConfig, "class count must be positive");
  const std::size_t dim = batches.front().features.dim;

  MapsModel model;
  model.dim = dim;
  model.classes.resize(static_cast<std::size_t>(classes));
  std::size_t collected = 0;
  for (int c = 0; c < classes; ++c) {
    FeatureSet pool(dim);
    for (const auto& b : batches) {
      require(b.features.dim == dim, ErrorKind::kShape, "source feature dims differ between samples");
      require(static_cast<int>(b.prediction.classes) == classes, ErrorKind::kShape, "prediction class count mismatch");
      auto part = collect_class_features(b.features, b.prediction, b.truth, c);
      pool.values.insert(pool.values.end(), part.values.begin(), part.values.end());
    }
    collected += pool.size();
    if (pool.size() < std::max(cfg.em.components, cfg.min_samples)) continue;
    EmConfig em = cfg.em;
    em.seed = cfg.em.seed + 0x9E3779B97F4A7C15ULL * std::uint64_t(c + 1);
    model.classes[std::size_t(c)] = fit_gmm(subsample(pool, em.cap, em.seed), em, c);
  }
  require(collected > 0, ErrorKind::kEmptyModel, "no correctly classified source features for any class");
  return model;
}

CentroidModel build_centroids(std::span<const SourceSample> batches, int classes) {
  require(!batches.empty(), ErrorKind::kEmptyInput, "build_centroids needs at least one source sample");
  const std::size_t dim = batches.front().features.dim;
  CentroidModel model;
  model.dim = dim;
  model.centroids.resize(static_cast<std::size_t>(classes));
  bool any = false;
  for (int c = 0; c < classes; ++c) {
    std::vector<double> sum(dim, 0.0);
    std::size_t n = 0;
    for (const auto& b : batches) {
      auto part = collect_class_features(b.features, b.prediction, b.truth, c);
      for (std::size_t i = 0; i < part.size(); ++i)
        for (std::size_t j = 0; j < dim; ++j) sum[j] += part.row(i)[j];
      n += part.size();
    }
    if (n == 0) continue;
    for (double& v : sum) v /= double(n);
    model.centroids[std::size_t(c)] = std::move(sum);
    any = true;
  }
  require(any, ErrorKind::kEmptyModel, "no correctly classified source features for any class");
  return model;
}

ClassScore best_maps_class(const MapsModel& model, std::span<const double> f) {
  ClassScore best{kIgnoreLabel, -std::numeric_limits<double>::infinity()};
  for (int c = 0; c < model.num_classes(); ++c) {
    if (!model.present(c)) continue;
    double p = log_mixture_density(*model.classes[std::size_t(c)], f);
    if (best.label == kIgnoreLabel || p > best.score) best = {c, p};
  }
  return best;
}

ClassScore nearest_centroid(const CentroidModel& model, std::span<const double> f) {
  require(f.size() == model.dim, ErrorKind::kShape, "feature dim differs from centroid dim");
  ClassScore best{kIgnoreLabel, std::numeric_limits<double>::infinity()};
  for (int c = 0; c < model.num_classes(); ++c) {
    const auto& cen = model.centroids[std::size_t(c)];
    if (!cen) continue;
    double d = std::sqrt(squared_distance(f, *cen));
    if (best.label == kIgnoreLabel || d < best.score) best = {c, d};
  }
  return best;
}

PseudoLabelMap assign_maps_pla(const MapsModel& model, const FeatureMap& feat, double delta) {
  require(model.present_count() > 0, ErrorKind::kEmptyModel, "MAPs model has no fitted class");
  require(feat.dim == model.dim, ErrorKind::kShape,
          "feature dim " + std::to_string(feat.dim) + " vs model dim " + std::to_string(model.dim));
  auto pl = empty_pl(feat.height, feat.width, delta, model.num_classes());
  for (std::size_t i = 0; i < feat.pixels(); ++i) {
    auto f = widen(feat.pixel(i));
    auto best = best_maps_class(model, f);
    if (best.score >= delta) pl.labels[i] = best.label;
  }
  return pl;
}

PseudoLabelMap assign_cas_pla(const CentroidModel& model, const FeatureMap& feat, double dist_threshold) {
  require(feat.dim == model.dim, ErrorKind::kShape, "feature dim differs from centroid dim");
  bool any = false;
  for (const auto& c : model.centroids) any = any || c.has_value();
  require(any, ErrorKind::kEmptyModel, "centroid model has no class");
  auto pl = empty_pl(feat.height, feat.width, dist_threshold, model.num_classes());
  for (std::size_t i = 0; i < feat.pixels(); ++i) {
    auto f = widen(feat.pixel(i));
    auto best = nearest_centroid(model, f);
    if (best.score <= dist_threshold) pl.labels[i] = best.label;
  }
  return pl;
}

PseudoLabelMap assign_conf_pla(const ProbMap& pred, double conf_threshold) {
  require(conf_threshold > 0.0 && conf_threshold <= 1.0, ErrorKind::kConfig,
          "confidence threshold must lie in (0, 1]");
  auto pl = empty_pl(pred.height, pred.width, conf_threshold, static_cast<int>(pred.classes));
  for (std::size_t i = 0; i < pred.pixels(); ++i) {
    int c = argmax(pred, i);
    if (pred.pixel(i)[std::size_t(c)] >= conf_threshold) pl.labels[i] = c;
  }
  return pl;
}

double pl_ratio(const PseudoLabelMap& pl) {
  if (pl.labels.empty()) return 0.0;
  std::size_t n = 0;
  for (auto l : pl.labels) n += (l != kIgnoreLabel);
  return double(n) / double(pl.labels.size());
}

double pl_ratio(std::span<const PseudoLabelMap> pls) {
  std::size_t n = 0, total = 0;
  for (const auto& pl : pls) {
    for (auto l : pl.labels) n += (l != kIgnoreLabel);
    total += pl.labels.size();
  }
  return total == 0 ? 0.0 : double(n) / double(total);
}

}  // namespace protost

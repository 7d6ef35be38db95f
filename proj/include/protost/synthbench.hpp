#pragma once

// Planted domain-shift worlds. Each map is tiled into square blocks; every
// block takes one class and one of that class's clusters, and each pixel in
// it draws a feature from that cluster's axis-aligned Gaussian. Target maps
// run the same process and then pass the features through a rotation (first
// two axes, about the origin) followed by a translation.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "protost/dataio.hpp"

namespace protost {

struct ClusterSpec {
  std::vector<double> mean;
  std::vector<double> stddev;  // per axis
  double weight = 1.0;
};

struct ClassSpec {
  std::vector<ClusterSpec> clusters;
  double frequency = 1.0;  // relative share of blocks
};

struct DomainShift {
  std::vector<double> translation;  // empty = no translation
  double rotation = 0.0;            // radians

  bool identity() const;
};

/// Source-only blocks whose features sit far from all target mass.
struct HardRegionSpec {
  int label = 0;
  ClusterSpec cluster;
  double fraction = 0.1;  // probability that a source block is replaced
};

struct WorldSpec {
  std::string name = "custom";
  std::uint32_t dim = 2;
  std::vector<ClassSpec> classes;
  DomainShift shift;
  std::map<int, DomainShift> class_shift;  // overrides `shift` for a class
  std::vector<HardRegionSpec> hard_regions;
  std::uint32_t height = 32;
  std::uint32_t width = 32;
  std::uint32_t block = 8;
  std::uint32_t source_maps = 16;
  std::uint32_t target_maps = 16;
  std::uint64_t seed = 1;

  int num_classes() const { return static_cast<int>(classes.size()); }
  void validate() const;
};

struct World {
  std::vector<FeatureMap> source_features;
  std::vector<LabelMap> source_labels;
  std::vector<FeatureMap> target_features;
  std::vector<LabelMap> target_labels;  // hidden ground truth
  // 1 where a source pixel came from a hard region; used for diagnostics.
  std::vector<std::vector<std::uint8_t>> source_hard_mask;
};

World generate_world(const WorldSpec& spec);

std::string world_spec_to_json(const WorldSpec& spec);
WorldSpec world_spec_from_json(const std::string& text);

/// Bundled worlds.
///   figure1  - class A is two clusters flanking the single cluster of class B
///   aniso    - two classes whose variances differ 10:1
///   hard     - three classes plus far-away source-only hard regions
///   shifted  - three classes rotated and translated between domains
WorldSpec preset_world(const std::string& name);
std::vector<std::string> preset_names();

/// Writes source_NNN / target_NNN .fmap/.lmap pairs plus manifest.json.
void write_world(const World& world, const WorldSpec& spec, const std::filesystem::path& dir);
World read_world(const std::filesystem::path& dir, WorldSpec* spec = nullptr);

struct EvalReport {
  int classes = 0;
  double accuracy = 0.0;  // correct / labeled predictions
  double coverage = 0.0;  // labeled predictions / evaluated pixels
  double miou = 0.0;
  std::vector<double> iou;       // NaN for classes absent from the ground truth
  std::vector<bool> present;     // class occurs in the ground truth
  std::vector<std::uint64_t> confusion;  // truth-major C x C
  std::vector<std::uint64_t> ignored;    // per truth class, predictions left unlabeled
};

/// Ignored predictions count as false negatives for IoU and are left out of
/// the accuracy denominator. Ground-truth ignore pixels are skipped.
EvalReport evaluate(std::span<const LabelMap> preds, std::span<const LabelMap> truth, int classes);
EvalReport evaluate(const LabelMap& pred, const LabelMap& truth, int classes);

std::string eval_report_csv(const EvalReport& r, const std::string& tag);
std::string eval_report_text(const EvalReport& r);

}  // namespace protost

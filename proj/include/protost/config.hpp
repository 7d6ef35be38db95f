#pragma once

// Pipeline configuration: an INI file whose sections mirror the blocks below.
// Unknown keys are rejected so typos surface instead of silently defaulting.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "protost/model_io.hpp"

namespace protost {

enum class FeatureSource { kLatent, kInput };

struct PipelineConfig {
  struct World {
    std::string preset = "figure1";
    std::string spec_file;  // JSON world spec; overrides preset when set
    std::string dir;        // existing FMAP/LMAP set; skips generation when set
  } world;

  struct Paths {
    std::string out = "out";
  } paths;

  struct Model {
    std::uint32_t hidden = 16;
    Encoding encoding = Encoding::kText;
  } model;

  struct Gmm {
    std::size_t components = 8;
    double delta = 0.0;
    std::size_t cap = 300000;
    double var_floor = 1e-6;
    double tol = 1e-6;
    int max_iter = 100;
    std::size_t min_samples = 50;
  } gmm;

  struct KMeans {
    std::size_t clusters = 64;
    double tol = 1e-6;
    int max_iter = 100;
  } kmeans;

  struct Loss {
    double alpha = 0.1;
    double beta = 1.0;
    double lambda = 20.0;
    double ema = 0.999;
    double noise_scale = 0.1;
    double cutout_fraction = 0.1;
  } loss;

  struct Optim {
    double lr = 0.05;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    double poly_power = 0.9;
    int warmup_iterations = 1000;
    std::size_t warmup_batch = 8;
    int self_iterations = 1000;
    std::size_t self_batch = 4;
  } optim;

  struct Pla {
    FeatureSource feature_source = FeatureSource::kLatent;
    std::vector<double> maps_deltas{0.0};
    std::vector<double> cas_thresholds{1.0};
    std::vector<double> conf_thresholds{0.9};
  } pla;

  struct Stm {
    bool enabled = true;
    FeatureSource feature_source = FeatureSource::kLatent;
  } stm;

  struct Sweep {
    std::vector<double> deltas{0.0, 50.0, 100.0, 150.0};
    std::vector<std::size_t> ks{1, 2, 4, 8};
  } sweep;

  // Derived seeds default to base + a fixed offset so one --seed moves all.
  struct Seeds {
    std::uint64_t base = 0;
    std::optional<std::uint64_t> world, init, warmup, em, kmeans, train;

    std::uint64_t world_seed() const { return world.value_or(base + 1); }
    std::uint64_t init_seed() const { return init.value_or(base + 2); }
    std::uint64_t warmup_seed() const { return warmup.value_or(base + 3); }
    std::uint64_t em_seed() const { return em.value_or(base + 4); }
    std::uint64_t kmeans_seed() const { return kmeans.value_or(base + 5); }
    std::uint64_t train_seed() const { return train.value_or(base + 6); }
  } seeds;

  /// Throws a config error listing every out-of-range field.
  void validate() const;
};

/// Applies "section.key=value" pairs from an INI file.
PipelineConfig load_config(const std::filesystem::path& path);

/// Applies one "section.key=value" override.
void apply_override(PipelineConfig& cfg, const std::string& assignment);

/// Canonical INI text of every field; load_config(render) reproduces cfg.
std::string render_config(const PipelineConfig& cfg);

}  // namespace protost

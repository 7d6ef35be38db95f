#pragma once

// A desk-scale per-pixel segmentor: a one-hidden-layer tanh encoder followed
// by a linear softmax classifier, trained with momentum SGD under a poly
// learning-rate schedule. The hidden activations form the latent space the
// prototype machinery works in.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "protost/dataio.hpp"
#include "protost/losses.hpp"
#include "protost/pla.hpp"
#include "protost/stm.hpp"

namespace protost {

struct ToyParams {
  std::uint32_t input_dim = 0;
  std::uint32_t hidden = 0;
  std::uint32_t classes = 0;
  std::vector<double> w1;  // hidden x input_dim
  std::vector<double> b1;  // hidden
  std::vector<double> w2;  // classes x hidden
  std::vector<double> b2;  // classes

  static ToyParams zeros(std::uint32_t input_dim, std::uint32_t hidden, std::uint32_t classes);
  bool same_shape(const ToyParams& o) const {
    return input_dim == o.input_dim && hidden == o.hidden && classes == o.classes;
  }
  void validate() const;

  friend bool operator==(const ToyParams&, const ToyParams&) = default;
};

struct OptimizerSettings {
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double poly_power = 0.9;

  friend bool operator==(const OptimizerSettings&, const OptimizerSettings&) = default;
};

struct ToyModel {
  ToyParams params;
  OptimizerSettings optim;

  friend bool operator==(const ToyModel&, const ToyModel&) = default;
};

/// Xavier-uniform weights, zero biases. Logs a warning when hidden < classes.
ToyModel make_toy_model(std::uint32_t input_dim, std::uint32_t hidden, std::uint32_t classes, std::uint64_t seed,
                        const OptimizerSettings& optim = {});

struct Prediction {
  ProbMap probs;
  FeatureMap hidden;  // encoder output, the latent feature map
};

Prediction predict(const ToyModel& model, const FeatureMap& input);
Prediction predict(const ToyParams& params, const FeatureMap& input);

/// Parameter gradient of a loss whose logit gradient is `logit_grad` (one
/// C-row per pixel of `input`).
ToyParams backprop(const ToyParams& params, const FeatureMap& input, std::span<const double> logit_grad);

/// velocity = momentum * velocity + grad + wd * params;  params -= lr * velocity
void sgd_update(ToyParams& params, ToyParams& velocity, const ToyParams& grad, double lr,
                const OptimizerSettings& optim);

/// lr * (1 - step / total)^power, and 0 from `total` on.
double poly_lr(double base_lr, int step, int total, double power);

/// teacher <- m * teacher + (1 - m) * student, parameter-wise.
ToyParams ema_update(const ToyParams& teacher, const ToyParams& student, double m);

/// Feature-space jitter: additive N(0, noise_scale^2) noise plus one zeroed
/// rectangular block covering about `cutout_fraction` of the pixels.
FeatureMap augment(const FeatureMap& feat, std::uint64_t seed, double noise_scale, double cutout_fraction = 0.0);

struct TrainConfig {
  int iterations = 2000;
  std::size_t batch_size = 4;  // whole maps per step
  std::uint64_t seed = 0;
  double lambda = 20.0;
  double ema = 0.999;
  double alpha = 0.1;
  double beta = 1.0;
  double noise_scale = 0.1;
  double cutout_fraction = 0.1;

  void validate() const;
};

struct LabeledMap {
  FeatureMap features;
  LabelMap labels;
};

struct WeightedSourceMap {
  FeatureMap features;
  LabelMap labels;
  TransferabilityMap weights;
};

struct PseudoLabeledMap {
  FeatureMap features;
  PseudoLabelMap labels;
};

struct StepLog {
  int step = 0;
  double lr = 0.0;
  double ce = 0.0;
  double sce = 0.0;
  double consist = 0.0;
  double total = 0.0;
};

struct TrainResult {
  ToyModel model;
  ToyParams teacher;
  std::vector<StepLog> log;
};

/// Supervised source training with mean-reduced cross-entropy.
TrainResult train_warmup(const ToyModel& model, std::span<const LabeledMap> source, const TrainConfig& cfg);

/// Self-training: STM-weighted source CE + SCE on target pseudo labels +
/// lambda * KL(teacher || student) on an augmented target view, followed by an
/// EMA update of the teacher after every step. Each term is averaged over its
/// batch pixels.
TrainResult train_self(const ToyModel& model, std::span<const WeightedSourceMap> source,
                       std::span<const PseudoLabeledMap> target, const TrainConfig& cfg,
                       std::optional<ToyParams> initial_teacher = std::nullopt);

}  // namespace protost

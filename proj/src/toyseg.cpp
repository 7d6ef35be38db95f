#include "protost/toyseg.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <random>
#include <string>

#include "protost/error.hpp"

namespace protost {

namespace {

// Applies f(a, b) over every parameter array of two same-shaped models.
template <typename F>
void zip_params(ToyParams& a, const ToyParams& b, F f) {
  auto run = [&](std::vector<double>& x, const std::vector<double>& y) {
    for (std::size_t i = 0; i < x.size(); ++i) f(x[i], y[i]);
  };
  run(a.w1, b.w1);
  run(a.b1, b.b1);
  run(a.w2, b.w2);
  run(a.b2, b.b2);
}

struct Forward {
  std::vector<double> hidden;  // pixels x hidden
  ProbMap probs;
};

Forward forward(const ToyParams& p, const FeatureMap& in) {
  require(in.dim == p.input_dim, ErrorKind::kShape,
          "input dim " + std::to_string(in.dim) + " vs model input dim " + std::to_string(p.input_dim));
  const std::size_t n = in.pixels();
  const std::uint32_t H = p.hidden, C = p.classes, D = p.input_dim;
  Forward f;
  f.hidden.resize(n * H);
  f.probs = ProbMap(in.height, in.width, C);
  std::vector<double> z(C);
  for (std::size_t i = 0; i < n; ++i) {
    auto x = in.pixel(i);
    double* h = f.hidden.data() + i * H;
    for (std::uint32_t j = 0; j < H; ++j) {
      double a = p.b1[j];
      const double* w = p.w1.data() + std::size_t(j) * D;
      for (std::uint32_t k = 0; k < D; ++k) a += w[k] * x[k];
      h[j] = std::tanh(a);
    }
    double zmax = -std::numeric_limits<double>::infinity();
    for (std::uint32_t c = 0; c < C; ++c) {
      double a = p.b2[c];
      const double* w = p.w2.data() + std::size_t(c) * H;
      for (std::uint32_t j = 0; j < H; ++j) a += w[j] * h[j];
      z[c] = a;
      zmax = std::max(zmax, a);
    }
    double s = 0.0;
    auto out = f.probs.pixel(i);
    for (std::uint32_t c = 0; c < C; ++c) {
      out[c] = std::exp(z[c] - zmax);
      s += out[c];
    }
    for (std::uint32_t c = 0; c < C; ++c) out[c] /= s;
  }
  return f;
}

void accumulate_backprop(const ToyParams& p, const FeatureMap& in, const std::vector<double>& hidden,
                         std::span<const double> g, double scale, ToyParams& grad) {
  const std::uint32_t H = p.hidden, C = p.classes, D = p.input_dim;
  require(g.size() == in.pixels() * C, ErrorKind::kShape, "logit gradient size does not match the input map");
  std::vector<double> da(H);
  for (std::size_t i = 0; i < in.pixels(); ++i) {
    const double* gi = g.data() + i * C;
    bool zero = true;
    for (std::uint32_t c = 0; c < C; ++c) zero = zero && gi[c] == 0.0;
    if (zero) continue;
    const double* h = hidden.data() + i * H;
    auto x = in.pixel(i);
    std::fill(da.begin(), da.end(), 0.0);
    for (std::uint32_t c = 0; c < C; ++c) {
      double gc = scale * gi[c];
      grad.b2[c] += gc;
      double* w2g = grad.w2.data() + std::size_t(c) * H;
      const double* w2 = p.w2.data() + std::size_t(c) * H;
      for (std::uint32_t j = 0; j < H; ++j) {
        w2g[j] += gc * h[j];
        da[j] += w2[j] * gc;
      }
    }
    for (std::uint32_t j = 0; j < H; ++j) {
      double a = da[j] * (1.0 - h[j] * h[j]);
      grad.b1[j] += a;
      double* w1g = grad.w1.data() + std::size_t(j) * D;
      for (std::uint32_t k = 0; k < D; ++k) w1g[k] += a * x[k];
    }
  }
}

FeatureMap hidden_map(const FeatureMap& in, const std::vector<double>& hidden, std::uint32_t H) {
  FeatureMap out(in.height, in.width, H);
  for (std::size_t i = 0; i < hidden.size(); ++i) out.data[i] = static_cast<float>(hidden[i]);
  return out;
}

}  // namespace

ToyParams ToyParams::zeros(std::uint32_t input_dim, std::uint32_t hidden, std::uint32_t classes) {
  ToyParams p;
  p.input_dim = input_dim;
  p.hidden = hidden;
  p.classes = classes;
  p.w1.assign(std::size_t(hidden) * input_dim, 0.0);
  p.b1.assign(hidden, 0.0);
  p.w2.assign(std::size_t(classes) * hidden, 0.0);
  p.b2.assign(classes, 0.0);
  return p;
}

void ToyParams::validate() const {
  require(input_dim > 0 && hidden > 0 && classes > 0, ErrorKind::kValidation, "toy model dimensions must be positive");
  require(w1.size() == std::size_t(hidden) * input_dim && b1.size() == hidden &&
              w2.size() == std::size_t(classes) * hidden && b2.size() == classes,
          ErrorKind::kShape, "toy model parameter arrays have the wrong size");
  for (const auto* v : {&w1, &b1, &w2, &b2})
    for (double x : *v) require(std::isfinite(x), ErrorKind::kNumeric, "non-finite toy model parameter");
}

ToyModel make_toy_model(std::uint32_t input_dim, std::uint32_t hidden, std::uint32_t classes, std::uint64_t seed,
                        const OptimizerSettings& optim) {
  if (hidden < classes)
    std::cerr << "warning: hidden width " << hidden << " is below the class count " << classes << "\n";
  ToyModel m{ToyParams::zeros(input_dim, hidden, classes), optim};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u1(-1.0, 1.0);
  double a1 = std::sqrt(6.0 / double(input_dim + hidden));
  double a2 = std::sqrt(6.0 / double(hidden + classes));
  for (auto& w : m.params.w1) w = a1 * u1(rng);
  for (auto& w : m.params.w2) w = a2 * u1(rng);
  return m;
}

Prediction predict(const ToyParams& params, const FeatureMap& input) {
  auto f = forward(params, input);
  return {std::move(f.probs), hidden_map(input, f.hidden, params.hidden)};
}

Prediction predict(const ToyModel& model, const FeatureMap& input) { return predict(model.params, input); }

ToyParams backprop(const ToyParams& params, const FeatureMap& input, std::span<const double> logit_grad) {
  auto f = forward(params, input);
  auto grad = ToyParams::zeros(params.input_dim, params.hidden, params.classes);
  accumulate_backprop(params, input, f.hidden, logit_grad, 1.0, grad);
  return grad;
}

void sgd_update(ToyParams& params, ToyParams& velocity, const ToyParams& grad, double lr,
                const OptimizerSettings& optim) {
  require(params.same_shape(grad) && params.same_shape(velocity), ErrorKind::kShape, "optimizer state shape mismatch");
  zip_params(velocity, grad, [&](double& v, double g) { v = optim.momentum * v + g; });
  // Weight decay enters through the velocity so that it sees momentum too.
  zip_params(velocity, params, [&](double& v, double p) { v += optim.weight_decay * p; });
  zip_params(params, velocity, [&](double& p, double v) { p -= lr * v; });
}

double poly_lr(double base_lr, int step, int total, double power) {
  if (total <= 0 || step >= total) return 0.0;
  return base_lr * std::pow(1.0 - double(step) / double(total), power);
}

ToyParams ema_update(const ToyParams& teacher, const ToyParams& student, double m) {
  require(teacher.same_shape(student), ErrorKind::kShape, "teacher and student shapes differ");
  require(m >= 0.0 && m <= 1.0, ErrorKind::kConfig, "EMA coefficient must lie in [0, 1]");
  ToyParams out = teacher;
  zip_params(out, student, [&](double& t, double s) { t = m * t + (1.0 - m) * s; });
  return out;
}

FeatureMap augment(const FeatureMap& feat, std::uint64_t seed, double noise_scale, double cutout_fraction) {
  require(noise_scale >= 0.0, ErrorKind::kConfig, "noise scale must be non-negative");
  require(cutout_fraction >= 0.0 && cutout_fraction <= 1.0, ErrorKind::kConfig, "cutout fraction must lie in [0, 1]");
  FeatureMap out = feat;
  std::mt19937_64 rng(seed);
  if (noise_scale > 0.0) {
    std::normal_distribution<double> noise(0.0, noise_scale);
    for (auto& v : out.data) v = static_cast<float>(double(v) + noise(rng));
  }
  if (cutout_fraction > 0.0 && feat.pixels() > 0) {
    double side = std::sqrt(cutout_fraction);
    auto bh = static_cast<std::uint32_t>(std::lround(side * feat.height));
    auto bw = static_cast<std::uint32_t>(std::lround(side * feat.width));
    if (bh > 0 && bw > 0) {
      std::uniform_int_distribution<std::uint32_t> y0(0, feat.height - bh);
      std::uniform_int_distribution<std::uint32_t> x0(0, feat.width - bw);
      std::uint32_t top = y0(rng), left = x0(rng);
      for (std::uint32_t y = top; y < top + bh; ++y)
        for (std::uint32_t x = left; x < left + bw; ++x) {
          auto px = out.pixel(std::size_t(y) * feat.width + x);
          std::fill(px.begin(), px.end(), 0.0f);
        }
    }
  }
  return out;
}

void TrainConfig::validate() const {
  require(iterations >= 0, ErrorKind::kConfig, "iterations must be non-negative");
  require(batch_size >= 1, ErrorKind::kConfig, "batch size must be positive");
  require(lambda >= 0.0, ErrorKind::kConfig, "lambda must be non-negative");
  require(ema >= 0.0 && ema <= 1.0, ErrorKind::kConfig, "EMA coefficient must lie in [0, 1]");
  require(alpha >= 0.0 && beta >= 0.0, ErrorKind::kConfig, "SCE coefficients must be non-negative");
  require(noise_scale >= 0.0, ErrorKind::kConfig, "noise scale must be non-negative");
}

namespace {

constexpr std::uint64_t kTargetStream = 0xA5A5A5A5DEADBEEFULL;

std::vector<std::size_t> draw_batch(std::mt19937_64& rng, std::size_t pool, std::size_t count) {
  std::uniform_int_distribution<std::size_t> pick(0, pool - 1);
  std::vector<std::size_t> idx(count);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

}  // namespace

TrainResult train_self(const ToyModel& model, std::span<const WeightedSourceMap> source,
                       std::span<const PseudoLabeledMap> target, const TrainConfig& cfg,
                       std::optional<ToyParams> initial_teacher) {
  cfg.validate();
  model.params.validate();
  require(!source.empty() || !target.empty(), ErrorKind::kEmptyInput, "self-training needs source or target maps");
  for (const auto& s : source)
    require(s.weights.pixels() == s.labels.pixels() && s.weights.weights.size() == s.labels.pixels(),
            ErrorKind::kConfig, "a source map is missing its transferability map");
  for (const auto& t : target)
    require(t.labels.pixels() == t.features.pixels() && t.labels.labels.size() == t.features.pixels(),
            ErrorKind::kConfig, "a target map is missing its pseudo labels");

  TrainResult res{model, initial_teacher.value_or(model.params), {}};
  require(res.teacher.same_shape(model.params), ErrorKind::kShape, "teacher shape differs from the model");
  ToyParams& params = res.model.params;
  const auto& optim = res.model.optim;
  auto velocity = ToyParams::zeros(params.input_dim, params.hidden, params.classes);

  std::mt19937_64 src_rng(cfg.seed);
  std::mt19937_64 tgt_rng(cfg.seed ^ kTargetStream);

  for (int step = 0; step < cfg.iterations; ++step) {
    double lr = poly_lr(optim.lr, step, cfg.iterations, optim.poly_power);
    auto grad = ToyParams::zeros(params.input_dim, params.hidden, params.classes);
    StepLog log{step, lr, 0, 0, 0, 0};

    if (!source.empty()) {
      auto idx = draw_batch(src_rng, source.size(), cfg.batch_size);
      std::size_t pixels = 0;
      for (auto i : idx) pixels += source[i].features.pixels();
      double scale = 1.0 / double(pixels);
      for (auto i : idx) {
        const auto& s = source[i];
        auto f = forward(params, s.features);
        auto ce = weighted_ce(f.probs, s.labels, s.weights);
        log.ce += ce.ce * scale;
        accumulate_backprop(params, s.features, f.hidden, ce.gradient, scale, grad);
      }
    }

    if (!target.empty()) {
      auto idx = draw_batch(tgt_rng, target.size(), cfg.batch_size);
      std::size_t pixels = 0;
      for (auto i : idx) pixels += target[i].features.pixels();
      double scale = 1.0 / double(pixels);
      for (std::size_t b = 0; b < idx.size(); ++b) {
        const auto& t = target[idx[b]];
        auto f = forward(params, t.features);
        auto s = sce(f.probs, t.labels, cfg.alpha, cfg.beta);
        log.sce += s.sce * scale;
        accumulate_backprop(params, t.features, f.hidden, s.gradient, scale, grad);
        if (cfg.lambda > 0.0) {
          std::uint64_t aug_seed = cfg.seed * 0x100000001B3ULL + std::uint64_t(step) * 131 + b;
          auto view = augment(t.features, aug_seed, cfg.noise_scale, cfg.cutout_fraction);
          auto fs = forward(params, view);
          auto ft = forward(res.teacher, view);
          auto k = kld_consistency(fs.probs, ft.probs);
          log.consist += k.consist * scale;
          accumulate_backprop(params, view, fs.hidden, k.gradient, cfg.lambda * scale, grad);
        }
      }
    }

    log.total = log.ce + log.sce + cfg.lambda * log.consist;
    sgd_update(params, velocity, grad, lr, optim);
    res.teacher = ema_update(res.teacher, params, cfg.ema);
    res.log.push_back(log);
  }
  for (double v : params.w1) require(std::isfinite(v), ErrorKind::kNumeric, "training diverged");
  return res;
}

TrainResult train_warmup(const ToyModel& model, std::span<const LabeledMap> source, const TrainConfig& cfg) {
  require(!source.empty(), ErrorKind::kEmptyInput, "warmup needs at least one source map");
  std::vector<WeightedSourceMap> weighted;
  weighted.reserve(source.size());
  for (const auto& s : source) {
    TransferabilityMap ones{s.labels.height, s.labels.width, std::vector<double>(s.labels.pixels(), 1.0)};
    weighted.push_back({s.features, s.labels, std::move(ones)});
  }
  TrainConfig plain = cfg;
  plain.lambda = 0.0;
  return train_self(model, weighted, {}, plain);
}

}  // namespace protost

#include "protost/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "protost/error.hpp"

namespace protost {

namespace {

double safe_log(double p) { return std::log(std::max(p, kProbFloor)); }

void check_grid(const ProbMap& pred, std::uint32_t h, std::uint32_t w, const char* what) {
  require(pred.height == h && pred.width == w, ErrorKind::kShape,
          std::string(what) + " is " + std::to_string(h) + "x" + std::to_string(w) + ", prediction is " +
              std::to_string(pred.height) + "x" + std::to_string(pred.width));
  require(pred.probs.size() == pred.pixels() * pred.classes, ErrorKind::kLength, "prediction storage is ragged");
}

int checked_label(std::int32_t l, std::uint32_t classes) {
  require(l == kIgnoreLabel || (l >= 0 && std::uint32_t(l) < classes), ErrorKind::kUnknownClass,
          "label " + std::to_string(l) + " outside [0, " + std::to_string(classes) + ")");
  return l;
}

void apply_reduction(LossValue& v, Reduction reduction) {
  if (reduction == Reduction::kSum || v.height == 0 || v.width == 0) return;
  double scale = 1.0 / (double(v.height) * v.width);
  v.total *= scale;
  v.ce *= scale;
  v.sce *= scale;
  v.consist *= scale;
  for (double& g : v.gradient) g *= scale;
}

}  // namespace

LossValue weighted_ce(const ProbMap& pred, const LabelMap& gt, const TransferabilityMap& w, Reduction reduction) {
  check_grid(pred, gt.height, gt.width, "label map");
  require(w.height == gt.height && w.width == gt.width, ErrorKind::kShape, "weight map resolution differs from labels");
  const auto C = pred.classes;
  auto out = LossValue::zeros(pred.height, pred.width, C);
  for (std::size_t i = 0; i < pred.pixels(); ++i) {
    int c = checked_label(gt.labels[i], C);
    if (c == kIgnoreLabel) continue;
    double wi = w.weights[i];
    require(std::isfinite(wi) && wi >= 0.0, ErrorKind::kValidation, "negative or non-finite pixel weight");
    if (wi == 0.0) continue;
    auto p = pred.pixel(i);
    out.ce -= wi * safe_log(p[std::size_t(c)]);
    double* g = out.gradient.data() + i * C;
    for (std::uint32_t k = 0; k < C; ++k) g[k] = wi * (p[k] - (int(k) == c ? 1.0 : 0.0));
  }
  out.total = out.ce;
  apply_reduction(out, reduction);
  return out;
}

LossValue cross_entropy(const ProbMap& pred, const LabelMap& gt, Reduction reduction) {
  TransferabilityMap ones{gt.height, gt.width, std::vector<double>(gt.pixels(), 1.0)};
  return weighted_ce(pred, gt, ones, reduction);
}

LossValue sce(const ProbMap& pred, const PseudoLabelMap& pl, double alpha, double beta, Reduction reduction) {
  check_grid(pred, pl.height, pl.width, "pseudo-label map");
  const auto C = pred.classes;
  const double log_floor = std::log(kLabelFloor);
  auto out = LossValue::zeros(pred.height, pred.width, C);
  std::vector<double> log_y(C);
  for (std::size_t i = 0; i < pred.pixels(); ++i) {
    int r = checked_label(pl.labels[i], C);
    if (r == kIgnoreLabel) continue;
    auto p = pred.pixel(i);
    double forward = -safe_log(p[std::size_t(r)]);
    double mean_log_y = 0.0;
    for (std::uint32_t c = 0; c < C; ++c) {
      log_y[c] = int(c) == r ? 0.0 : log_floor;
      mean_log_y += p[c] * log_y[c];
    }
    out.sce += alpha * forward - beta * mean_log_y;
    double* g = out.gradient.data() + i * C;
    for (std::uint32_t k = 0; k < C; ++k) {
      double fwd = alpha * (p[k] - (int(k) == r ? 1.0 : 0.0));
      double rev = -beta * p[k] * (log_y[k] - mean_log_y);
      g[k] = fwd + rev;
    }
  }
  out.total = out.sce;
  apply_reduction(out, reduction);
  return out;
}

LossValue kld_consistency(const ProbMap& student, const ProbMap& teacher, Reduction reduction) {
  check_grid(student, teacher.height, teacher.width, "teacher map");
  require(student.classes == teacher.classes, ErrorKind::kShape, "student and teacher class counts differ");
  const auto C = student.classes;
  auto out = LossValue::zeros(student.height, student.width, C);
  std::vector<double> t(C);
  for (std::size_t i = 0; i < student.pixels(); ++i) {
    auto tp = teacher.pixel(i);
    double s = 0.0;
    for (std::uint32_t c = 0; c < C; ++c) {
      require(std::isfinite(tp[c]) && tp[c] >= 0.0, ErrorKind::kValidation, "negative teacher probability");
      s += tp[c];
    }
    require(std::abs(s - 1.0) <= 1e-6, ErrorKind::kValidation,
            "teacher row " + std::to_string(i) + " sums to " + std::to_string(s));
    double z = 0.0;
    for (std::uint32_t c = 0; c < C; ++c) {
      t[c] = std::max(tp[c], kProbFloor);
      z += t[c];
    }
    auto p = student.pixel(i);
    double kl = 0.0;
    double* g = out.gradient.data() + i * C;
    for (std::uint32_t c = 0; c < C; ++c) {
      t[c] /= z;
      kl += t[c] * (std::log(t[c]) - safe_log(p[c]));
    }
    for (std::uint32_t c = 0; c < C; ++c) g[c] = p[c] - t[c];
    out.consist += kl;
  }
  out.total = out.consist;
  apply_reduction(out, reduction);
  return out;
}

LossValue total_loss(const LossValue& ce, const LossValue& sce_term, const LossValue& consist, double lambda) {
  require(lambda >= 0.0, ErrorKind::kConfig, "consistency weight must be non-negative");
  LossValue out;
  out.ce = ce.total;
  out.sce = sce_term.total;
  out.consist = consist.total;
  out.total = out.ce + out.sce + lambda * out.consist;

  // Target block: sce and consistency live on the same target pixels.
  LossValue target;
  if (!sce_term.gradient.empty() && !consist.gradient.empty()) {
    require(sce_term.gradient.size() == consist.gradient.size() && sce_term.classes == consist.classes,
            ErrorKind::kShape, "sce and consistency gradients cover different pixels");
  }
  const LossValue& shape_src = !sce_term.gradient.empty() ? sce_term : consist;
  target.height = shape_src.height;
  target.width = shape_src.width;
  target.classes = shape_src.classes;
  target.gradient.assign(shape_src.gradient.size(), 0.0);
  for (std::size_t j = 0; j < sce_term.gradient.size(); ++j) target.gradient[j] += sce_term.gradient[j];
  for (std::size_t j = 0; j < consist.gradient.size(); ++j) target.gradient[j] += lambda * consist.gradient[j];

  if (ce.gradient.empty()) {
    out.height = target.height;
    out.width = target.width;
    out.classes = target.classes;
    out.gradient = std::move(target.gradient);
    return out;
  }
  out.classes = ce.classes;
  out.gradient = ce.gradient;
  if (target.gradient.empty()) {
    out.height = ce.height;
    out.width = ce.width;
    return out;
  }
  require(ce.classes == target.classes, ErrorKind::kShape, "source and target gradients have different class counts");
  out.gradient.insert(out.gradient.end(), target.gradient.begin(), target.gradient.end());
  if (ce.width == target.width) {
    out.height = ce.height + target.height;
    out.width = ce.width;
  } else {
    out.height = static_cast<std::uint32_t>(out.gradient.size() / out.classes);
    out.width = 1;
  }
  return out;
}

}  // namespace protost

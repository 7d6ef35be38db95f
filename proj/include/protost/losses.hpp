#pragma once

// Training losses over softmax outputs. Every gradient is taken with respect
// to the pre-softmax logits, one C-vector per pixel.

#include <cstdint>
#include <vector>

#include "protost/dataio.hpp"
#include "protost/pla.hpp"
#include "protost/stm.hpp"

namespace protost {

inline constexpr double kProbFloor = 1e-12;
inline constexpr double kLabelFloor = 1e-4;

enum class Reduction { kSum, kMean };

struct LossValue {
  double total = 0.0;
  double ce = 0.0;
  double sce = 0.0;
  double consist = 0.0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t classes = 0;
  std::vector<double> gradient;  // height*width rows of `classes` entries

  static LossValue zeros(std::uint32_t h, std::uint32_t w, std::uint32_t c) {
    LossValue v;
    v.height = h;
    v.width = w;
    v.classes = c;
    v.gradient.assign(std::size_t(h) * w * c, 0.0);
    return v;
  }
};

/// sum_i -w_i log p_{i,y_i} over labeled pixels.
LossValue weighted_ce(const ProbMap& pred, const LabelMap& gt, const TransferabilityMap& w,
                      Reduction reduction = Reduction::kSum);

/// Unit-weight cross-entropy on labeled pixels.
LossValue cross_entropy(const ProbMap& pred, const LabelMap& gt, Reduction reduction = Reduction::kSum);

/// Symmetric cross-entropy against a one-hot label clamped to [1e-4, 1]:
/// alpha * (-log p_r) + beta * (-sum_c p_c log y_c). Ignored pixels are masked.
LossValue sce(const ProbMap& pred, const PseudoLabelMap& pl, double alpha = 0.1, double beta = 1.0,
              Reduction reduction = Reduction::kSum);

/// sum_i KL(teacher_i || student_i). The teacher is a constant: the gradient
/// flows into the student logits only.
LossValue kld_consistency(const ProbMap& student, const ProbMap& teacher, Reduction reduction = Reduction::kSum);

/// ce + sce + lambda * consist. The source gradient block (from `ce`) comes
/// first, followed by the target block (sce + lambda * consist), since the two
/// sets of terms are evaluated on disjoint pixels.
LossValue total_loss(const LossValue& ce, const LossValue& sce, const LossValue& consist, double lambda = 20.0);

}  // namespace protost

#pragma once

#include <array>
#include <span>

#include "mtqa/datamodel.hpp"
#include "mtqa/tensor.hpp"

namespace mtqa {

using Probs = std::array<double, 3>;

/// Probability floor applied before every log.
inline constexpr double kProbFloor = 1e-12;

double cross_entropy(const Probs& probs, Label label);
/// KL(teacher || student); the teacher side is a constant target.
double kl_consistency(const Probs& teacher, const Probs& student);
/// Mean squared difference over the feature dimension.
double roi_feature_mse(std::span<const double> teacher_masked, std::span<const double> student_full);
double entropy_term(const Probs& probs);
/// w(t) = exp(-5 (1 - min(t, T)/T)^2)
double ramp_up(int epoch, int horizon);

struct LossWeights {
  double lambda = 1.0;  // KL consistency
  double beta = 1.0;    // ROI feature consistency
  double gamma = 1.0;   // conditional entropy
  int rampup_epochs = 5;

  void validate() const;
};

struct LossBreakdown {
  double cls = 0, cls_roi = 0, con = 0, con_roi = 0, ent = 0;
  double ramp = 0;
  double total = 0;
};

/// Forward results of one training batch. Rows of every full-image matrix are
/// batch order with the labeled slices first; student_masked_probs holds only
/// the labeled rows. Teacher matrices may be left empty when their weight is 0.
struct BatchForwards {
  Matrix student_full_probs;
  Matrix student_full_features;
  Matrix student_masked_probs;
  Matrix teacher_full_probs;
  Matrix teacher_masked_features;
};

/// Gradients of the total loss w.r.t. the student's outputs. Teacher outputs
/// are constants and receive none.
struct LossGradients {
  Matrix student_full_logits;
  Matrix student_full_features;
  Matrix student_masked_logits;
};

/// labels.size() is the labeled count of the batch.
LossBreakdown composite_loss(const BatchForwards& fw, std::span<const Label> labels, const LossWeights& weights,
                             int epoch, LossGradients* grads = nullptr);

}  // namespace mtqa

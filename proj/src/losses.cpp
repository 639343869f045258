#include "mtqa/losses.hpp"

#include <algorithm>
#include <cmath>

namespace mtqa {
namespace {

double flog(double p) { return std::log(std::max(p, kProbFloor)); }

Probs row_probs(const Matrix& m, int r) { return {m(r, 0), m(r, 1), m(r, 2)}; }

// Chains d(loss)/d(probs) through the softmax Jacobian: g_u = q * (g_q - <g_q, q>).
void softmax_chain(const Probs& q, const Probs& g_q, double scale, std::span<double> g_logits) {
  double dot = 0;
  for (int k = 0; k < 3; ++k) dot += g_q[k] * q[k];
  for (int k = 0; k < 3; ++k) g_logits[static_cast<std::size_t>(k)] += scale * q[k] * (g_q[k] - dot);
}

Probs cross_entropy_grad(const Probs& q, Label label) {
  Probs g{};
  const int y = index_of(label);
  if (q[y] > kProbFloor) g[y] = -1.0 / q[y];
  return g;
}

Probs kl_grad_student(const Probs& p, const Probs& q) {
  Probs g{};
  for (int k = 0; k < 3; ++k)
    if (q[k] > kProbFloor) g[k] = -p[k] / q[k];
  return g;
}

Probs entropy_grad(const Probs& q) {
  Probs g{};
  for (int k = 0; k < 3; ++k) g[k] = -(flog(q[k]) + (q[k] > kProbFloor ? 1.0 : 0.0));
  return g;
}

}  // namespace

double cross_entropy(const Probs& probs, Label label) { return -flog(probs[index_of(label)]); }

double kl_consistency(const Probs& teacher, const Probs& student) {
  double s = 0;
  for (int k = 0; k < 3; ++k)
    if (teacher[k] > 0) s += teacher[k] * (flog(teacher[k]) - flog(student[k]));
  return s;
}

double roi_feature_mse(std::span<const double> teacher_masked, std::span<const double> student_full) {
  if (teacher_masked.size() != student_full.size()) throw ShapeError("roi_feature_mse: feature dimensions differ");
  if (teacher_masked.empty()) throw ShapeError("roi_feature_mse: empty feature vectors");
  double s = 0;
  for (std::size_t i = 0; i < teacher_masked.size(); ++i) {
    const double d = teacher_masked[i] - student_full[i];
    s += d * d;
  }
  return s / static_cast<double>(teacher_masked.size());
}

double entropy_term(const Probs& probs) {
  double s = 0;
  for (double p : probs) s -= p * flog(p);
  return s;
}

double ramp_up(int epoch, int horizon) {
  if (horizon < 1) throw ConfigError("ramp-up horizon must be >= 1");
  if (epoch < 0) throw ConfigError("epoch must be >= 0");
  const double x = 1.0 - static_cast<double>(std::min(epoch, horizon)) / horizon;
  return std::exp(-5.0 * x * x);
}

void LossWeights::validate() const {
  if (!(lambda >= 0 && beta >= 0 && gamma >= 0)) throw ConfigError("loss weights must be >= 0");
  if (rampup_epochs < 1) throw ConfigError("rampup_epochs must be >= 1");
}

LossBreakdown composite_loss(const BatchForwards& fw, std::span<const Label> labels, const LossWeights& weights,
                             int epoch, LossGradients* grads) {
  weights.validate();
  const int batch = fw.student_full_probs.rows;
  const int n_lab = static_cast<int>(labels.size());
  if (batch == 0) throw DataError("composite_loss: empty batch");
  if (n_lab > batch) throw DataError("composite_loss: more labels than batch rows");
  if (fw.student_full_probs.cols != 3) throw ShapeError("composite_loss: student probs must have 3 columns");
  if (fw.student_masked_probs.rows != n_lab) {
    throw DataError("composite_loss: missing student forwards on masked labeled images");
  }
  // Terms are reported whenever their inputs are present; a positive weight requires them.
  const bool need_con = fw.teacher_full_probs.rows == batch;
  const bool need_con_roi = fw.teacher_masked_features.rows == batch && fw.student_full_features.rows == batch;
  if (weights.lambda > 0 && !need_con) {
    throw DataError("composite_loss: missing teacher forwards on full images");
  }
  if (weights.beta > 0 && !need_con_roi) {
    throw DataError("composite_loss: missing teacher forwards on masked images");
  }

  LossBreakdown out;
  out.ramp = ramp_up(epoch, weights.rampup_epochs);
  const double inv_b = 1.0 / batch;
  const double inv_l = n_lab > 0 ? 1.0 / n_lab : 0.0;

  if (grads) {
    grads->student_full_logits = Matrix(batch, 3);
    grads->student_full_features = Matrix(batch, fw.student_full_features.cols);
    grads->student_masked_logits = Matrix(n_lab, 3);
  }

  for (int i = 0; i < n_lab; ++i) {
    const Probs q = row_probs(fw.student_full_probs, i);
    const Probs qm = row_probs(fw.student_masked_probs, i);
    out.cls += cross_entropy(q, labels[static_cast<std::size_t>(i)]) * inv_l;
    out.cls_roi += cross_entropy(qm, labels[static_cast<std::size_t>(i)]) * inv_l;
    if (grads) {
      softmax_chain(q, cross_entropy_grad(q, labels[static_cast<std::size_t>(i)]), inv_l,
                    grads->student_full_logits.row(i));
      softmax_chain(qm, cross_entropy_grad(qm, labels[static_cast<std::size_t>(i)]), inv_l,
                    grads->student_masked_logits.row(i));
    }
  }

  const double w_con = out.ramp * weights.lambda;
  const double w_roi = out.ramp * weights.beta;
  const double w_ent = out.ramp * weights.gamma;
  const int feat = fw.student_full_features.cols;
  for (int i = 0; i < batch; ++i) {
    const Probs q = row_probs(fw.student_full_probs, i);
    out.ent += entropy_term(q) * inv_b;
    if (grads && w_ent > 0) softmax_chain(q, entropy_grad(q), w_ent * inv_b, grads->student_full_logits.row(i));
    if (need_con) {
      const Probs p = row_probs(fw.teacher_full_probs, i);
      out.con += kl_consistency(p, q) * inv_b;
      if (grads && w_con > 0) softmax_chain(q, kl_grad_student(p, q), w_con * inv_b, grads->student_full_logits.row(i));
    }
    if (need_con_roi) {
      const auto zt = fw.teacher_masked_features.row(i);
      const auto zs = fw.student_full_features.row(i);
      out.con_roi += roi_feature_mse(zt, zs) * inv_b;
      if (grads && w_roi > 0) {
        auto g = grads->student_full_features.row(i);
        const double scale = w_roi * inv_b * 2.0 / feat;
        for (int f = 0; f < feat; ++f) g[static_cast<std::size_t>(f)] += scale * (zs[static_cast<std::size_t>(f)] - zt[static_cast<std::size_t>(f)]);
      }
    }
  }
  out.total = out.cls + out.cls_roi + out.ramp * (weights.lambda * out.con + weights.beta * out.con_roi +
                                                   weights.gamma * out.ent);
  return out;
}

}  // namespace mtqa

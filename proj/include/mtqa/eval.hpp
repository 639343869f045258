#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mtqa/datamodel.hpp"
#include "mtqa/losses.hpp"
#include "mtqa/tensor.hpp"

namespace mtqa {

struct EvalReport {
  double accuracy = 0;
  std::optional<double> auc_n;  // absent when the set lacks N or non-N examples
  long n_examples = 0;
  std::array<long, 3> per_class_counts{};  // true-label counts, D/N/W
};

/// Fraction of exact matches. Throws on empty or mismatched input.
double accuracy(std::span<const Label> predicted, std::span<const Label> truth);

/// One-vs-rest AUC for class N (positives) scored by P_N; Mann-Whitney with ties counted 0.5.
/// Throws DataError naming the missing side when there are no positives or no negatives.
double auc_n(std::span<const double> scores_pn, std::span<const Label> truth);

struct RocPoint {
  double fpr = 0;
  double tpr = 0;
  double threshold = 0;
};
/// ROC points for class N, from (0,0) to (1,1), one point per distinct score.
std::vector<RocPoint> roc_curve_n(std::span<const double> scores_pn, std::span<const Label> truth);

/// Argmax; ties go to the lowest class index.
Label predict_label(const Probs& probs);

EvalReport evaluate_predictions(const Matrix& probs, std::span<const Label> truth);

struct MetricStats {
  double mean = 0;
  double std = 0;  // sample (n-1) standard deviation; 0 for a single value
  int count = 0;
};

struct RunAggregate {
  MetricStats accuracy;
  MetricStats auc_n;  // over runs that report an AUC
  bool single_run = false;  // std reported as 0 by convention
};

MetricStats mean_std(std::span<const double> values);
RunAggregate aggregate_runs(std::span<const EvalReport> reports);

}  // namespace mtqa

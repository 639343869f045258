#include "mtqa/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>

namespace mtqa {

double accuracy(std::span<const Label> predicted, std::span<const Label> truth) {
  if (predicted.size() != truth.size()) throw ShapeError("accuracy: prediction and label counts differ");
  if (truth.empty()) throw DataError("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double auc_n(std::span<const double> scores_pn, std::span<const Label> truth) {
  if (scores_pn.size() != truth.size()) throw ShapeError("auc_n: score and label counts differ");
  std::vector<std::size_t> idx(truth.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores_pn[a] < scores_pn[b]; });
  // Average ranks over tied groups; the positive rank sum gives the Mann-Whitney U.
  double pos_rank_sum = 0;
  long pos = 0, neg = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores_pn[idx[j]] == scores_pn[idx[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (truth[idx[k]] == Label::N) {
        pos_rank_sum += avg_rank;
        ++pos;
      } else {
        ++neg;
      }
    }
    i = j;
  }
  if (pos == 0) throw DataError("auc_n: no positive (N) examples");
  if (neg == 0) throw DataError("auc_n: no negative (D/W) examples");
  const double u = pos_rank_sum - 0.5 * static_cast<double>(pos) * static_cast<double>(pos + 1);
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

std::vector<RocPoint> roc_curve_n(std::span<const double> scores_pn, std::span<const Label> truth) {
  if (scores_pn.size() != truth.size()) throw ShapeError("roc_curve_n: score and label counts differ");
  std::vector<std::size_t> idx(truth.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores_pn[a] > scores_pn[b]; });
  long pos = 0, neg = 0;
  for (auto l : truth) (l == Label::N ? pos : neg)++;
  if (pos == 0 || neg == 0) throw DataError("roc_curve_n: need both N and non-N examples");
  std::vector<RocPoint> out{{0.0, 0.0, std::numeric_limits<double>::infinity()}};
  long tp = 0, fp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores_pn[idx[j]] == scores_pn[idx[i]]) {
      (truth[idx[j]] == Label::N ? tp : fp)++;
      ++j;
    }
    out.push_back({static_cast<double>(fp) / neg, static_cast<double>(tp) / pos, scores_pn[idx[i]]});
    i = j;
  }
  return out;
}

Label predict_label(const Probs& probs) {
  int best = 0;
  for (int k = 1; k < 3; ++k)
    if (probs[k] > probs[best]) best = k;
  return static_cast<Label>(best);
}

EvalReport evaluate_predictions(const Matrix& probs, std::span<const Label> truth) {
  if (probs.rows != static_cast<int>(truth.size()) || probs.cols != 3) {
    throw ShapeError("evaluate_predictions: probability matrix does not match labels");
  }
  EvalReport r;
  r.n_examples = static_cast<long>(truth.size());
  std::vector<Label> pred(truth.size());
  std::vector<double> pn(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int row = static_cast<int>(i);
    pred[i] = predict_label({probs(row, 0), probs(row, 1), probs(row, 2)});
    pn[i] = probs(row, 1);
    ++r.per_class_counts[static_cast<std::size_t>(index_of(truth[i]))];
  }
  r.accuracy = accuracy(pred, truth);
  if (r.per_class_counts[1] > 0 && r.per_class_counts[1] < r.n_examples) r.auc_n = auc_n(pn, truth);
  return r;
}

MetricStats mean_std(std::span<const double> values) {
  MetricStats s;
  s.count = static_cast<int>(values.size());
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

RunAggregate aggregate_runs(std::span<const EvalReport> reports) {
  if (reports.empty()) throw DataError("aggregate_runs: no reports");
  std::vector<double> acc, auc;
  for (const auto& r : reports) {
    acc.push_back(r.accuracy);
    if (r.auc_n) auc.push_back(*r.auc_n);
  }
  RunAggregate a;
  a.accuracy = mean_std(acc);
  a.auc_n = mean_std(auc);
  a.single_run = reports.size() == 1;
  if (a.single_run) std::cerr << "warning: single run, standard deviation reported as 0\n";
  return a;
}

}  // namespace mtqa

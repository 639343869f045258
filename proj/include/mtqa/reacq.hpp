#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mtqa/datamodel.hpp"
#include "mtqa/losses.hpp"

namespace mtqa {

struct ReacqConfig {
  int n_acq = 20;
  double q_frac = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
  int n_re() const;
};

/// round(q * n_acq), nearest integer with ties rounded up.
int reacq_count(double q_frac, int n_acq);

struct ReacqResult {
  std::vector<double> scores;
  std::vector<int> selected;  // ascending score, ties by ascending index
  int missed = 0;             // true-N slices not selected
};

/// s = 1 - P_N
double iqa_score(const Probs& probs);

/// Indices of the n_re smallest scores, ties broken by ascending slice index.
std::vector<int> select_reacquire(std::span<const double> scores, int n_re);

int count_missed(std::span<const Label> truth, std::span<const int> selected);

ReacqResult simulate_stack(std::span<const Probs> slice_probs, std::span<const Label> truth,
                           const ReacqConfig& config);
ReacqResult random_baseline(std::span<const Label> truth, const ReacqConfig& config, std::mt19937_64& rng);

/// One stack's model probabilities and ground truth, in slice order.
struct StackPrediction {
  std::string stack_id;
  std::vector<Probs> probs;
  std::vector<Label> truth;
};

struct ReacqCurvePoint {
  double q = 0;
  double mean_missed = 0;    // model, averaged over stacks
  double std_missed = 0;     // sample std over stacks
  double random_mean_missed = 0;  // averaged over stacks and trials
};

std::vector<ReacqCurvePoint> simulate_curve(std::span<const StackPrediction> stacks, std::span<const double> qs,
                                            int trials, std::uint64_t seed);

}  // namespace mtqa

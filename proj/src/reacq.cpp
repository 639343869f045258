#include "mtqa/reacq.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mtqa/eval.hpp"

namespace mtqa {

void ReacqConfig::validate() const {
  if (n_acq < 0) throw ConfigError("n_acq must be >= 0");
  if (!(q_frac >= 0.0 && q_frac <= 1.0)) throw ConfigError("q must lie in [0,1]");
}

int reacq_count(double q_frac, int n_acq) {
  if (!(q_frac >= 0.0 && q_frac <= 1.0)) throw ConfigError("q must lie in [0,1]");
  // The small slack keeps decimal inputs such as 0.15 * 30 on the tie.
  const int n = static_cast<int>(std::floor(q_frac * n_acq + 0.5 + 1e-9));
  return std::clamp(n, 0, n_acq);
}

int ReacqConfig::n_re() const { return reacq_count(q_frac, n_acq); }

double iqa_score(const Probs& probs) { return 1.0 - probs[static_cast<std::size_t>(index_of(Label::N))]; }

std::vector<int> select_reacquire(std::span<const double> scores, int n_re) {
  if (n_re < 0 || static_cast<std::size_t>(n_re) > scores.size()) {
    throw ConfigError("cannot reacquire " + std::to_string(n_re) + " of " + std::to_string(scores.size()) + " slices");
  }
  std::vector<int> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return scores[static_cast<std::size_t>(a)] < scores[static_cast<std::size_t>(b)]; });
  idx.resize(static_cast<std::size_t>(n_re));
  return idx;
}

int count_missed(std::span<const Label> truth, std::span<const int> selected) {
  std::vector<bool> chosen(truth.size(), false);
  for (int i : selected) chosen.at(static_cast<std::size_t>(i)) = true;
  int missed = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) missed += truth[i] == Label::N && !chosen[i];
  return missed;
}

ReacqResult simulate_stack(std::span<const Probs> slice_probs, std::span<const Label> truth,
                           const ReacqConfig& config) {
  config.validate();
  if (slice_probs.size() != static_cast<std::size_t>(config.n_acq) || truth.size() != slice_probs.size()) {
    throw ShapeError("simulate_stack: expected " + std::to_string(config.n_acq) + " slices, got " +
                     std::to_string(slice_probs.size()) + " probabilities and " + std::to_string(truth.size()) +
                     " labels");
  }
  ReacqResult r;
  r.scores.reserve(slice_probs.size());
  for (const auto& p : slice_probs) r.scores.push_back(iqa_score(p));
  r.selected = select_reacquire(r.scores, config.n_re());
  r.missed = count_missed(truth, r.selected);
  return r;
}

ReacqResult random_baseline(std::span<const Label> truth, const ReacqConfig& config, std::mt19937_64& rng) {
  config.validate();
  if (truth.size() != static_cast<std::size_t>(config.n_acq)) throw ShapeError("random_baseline: label count != n_acq");
  std::vector<int> idx(truth.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  ReacqResult r;
  idx.resize(static_cast<std::size_t>(config.n_re()));
  r.selected = std::move(idx);
  r.missed = count_missed(truth, r.selected);
  return r;
}

std::vector<ReacqCurvePoint> simulate_curve(std::span<const StackPrediction> stacks, std::span<const double> qs,
                                            int trials, std::uint64_t seed) {
  if (trials < 0) throw ConfigError("trials must be >= 0");
  std::vector<ReacqCurvePoint> out;
  for (std::size_t qi = 0; qi < qs.size(); ++qi) {
    ReacqCurvePoint pt;
    pt.q = qs[qi];
    std::vector<double> missed;
    double random_total = 0;
    for (std::size_t s = 0; s < stacks.size(); ++s) {
      const auto& st = stacks[s];
      ReacqConfig cfg{static_cast<int>(st.probs.size()), qs[qi], seed};
      missed.push_back(simulate_stack(st.probs, st.truth, cfg).missed);
      std::mt19937_64 rng(seed * 7919ULL + s * 104729ULL + qi);
      double acc = 0;
      for (int t = 0; t < trials; ++t) acc += random_baseline(st.truth, cfg, rng).missed;
      random_total += trials > 0 ? acc / trials : 0.0;
    }
    const auto stats = mean_std(missed);
    pt.mean_missed = stats.mean;
    pt.std_missed = stats.std;
    pt.random_mean_missed = stacks.empty() ? 0.0 : random_total / static_cast<double>(stacks.size());
    out.push_back(pt);
  }
  return out;
}

}  // namespace mtqa

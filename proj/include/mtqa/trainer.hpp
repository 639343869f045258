#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mtqa/backbone.hpp"
#include "mtqa/checkpoint.hpp"
#include "mtqa/eval.hpp"
#include "mtqa/losses.hpp"
#include "mtqa/perturb.hpp"

namespace mtqa {

struct TrainConfig {
  double alpha = 0.994;
  LossWeights weights;
  int batch_size = 64;
  int labeled_per_batch = 16;
  int epochs = 60;
  // 0: one pass over the larger pool per epoch (by its per-batch quota).
  int steps_per_epoch = 0;
  double lr0 = 5e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  int runs = 1;
  PerturbConfig perturb;
  ArchSpec arch;
  // Reported for every labeled/unlabeled pool; falls back to stderr when unset.
  std::function<void(const std::string&)> warn;

  void validate() const;
  bool unsupervised_terms_off() const {
    return weights.lambda == 0 && weights.beta == 0 && weights.gamma == 0;
  }

  /// Desk scale: 64x64 inputs, 16-32-64-64 CNN, batches of 64 with 16 labeled.
  static TrainConfig desk();
  /// Batch composition of the original protocol (384 with 96 labeled).
  static TrainConfig paper();
  /// Smoke-test scale: 32x32 inputs, 8-16-16 CNN, batches of 16 with 4 labeled.
  static TrainConfig tiny();
};

struct Batch {
  std::vector<const LabeledSlice*> labeled;
  std::vector<const Slice*> unlabeled;

  std::size_t size() const { return labeled.size() + unlabeled.size(); }
  const Slice& slice(std::size_t i) const {
    return i < labeled.size() ? labeled[i]->slice : *unlabeled[i - labeled.size()];
  }
};

/// Draws batches with a fixed labeled quota; each pool is walked in a fresh
/// random order per pass.
class BatchSampler {
 public:
  BatchSampler(const Dataset& dataset, const TrainConfig& config);
  Batch next(Rng& rng);
  bool with_replacement() const { return with_replacement_; }
  int unlabeled_quota() const { return unlabeled_quota_; }

 private:
  std::size_t take(std::vector<std::size_t>& order, std::size_t& cursor, std::size_t pool, Rng& rng);

  const Dataset& dataset_;
  int labeled_quota_;
  int unlabeled_quota_;
  bool with_replacement_ = false;
  std::vector<std::size_t> lab_order_, unl_order_;
  std::size_t lab_cursor_ = 0, unl_cursor_ = 0;
};

Batch sample_batch(const Dataset& dataset, const TrainConfig& config, Rng& rng);

/// Draws and applies one perturbation from config.perturb.
std::pair<Slice, Perturbation> perturb(const Slice& slice, const PerturbConfig& config, Rng& rng);

/// lr0 * 0.5 * (1 + cos(pi * step / total_steps))
double cosine_lr(long step, long total_steps, double lr0);

struct AdamState {
  ModelParams m, v;
  long t = 0;
};

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr, double beta1,
               double beta2, double eps);

struct TrainState {
  ModelParams student, teacher;
  AdamState adam;
  long step = 0;
  long total_steps = 1;
};

/// Student initialized from the seed; teacher an exact copy.
TrainState init_state(const TrainConfig& config, long total_steps);

using RoiMasks = std::map<std::string, Mask>;

struct StepResult {
  LossBreakdown loss;
  double lr = 0;
};

/// Inputs and forward passes of one training step, before the loss.
struct StepForwards {
  BatchForwards forwards;
  std::vector<Label> labels;
  BatchOutput student;  // concatenated [full, masked-labeled] student rows
  ForwardCache cache;
};

/// Draws the step's perturbations from `rng` and runs the student and teacher.
/// Teacher passes whose weight is 0 are skipped unless `all_teacher_terms`.
StepForwards step_forwards(const TrainState& state, const Batch& batch, const RoiMasks& rois,
                           const TrainConfig& config, Rng& rng, Backend backend = Backend::Parallel,
                           bool all_teacher_terms = false);

/// One optimizer step: perturbation draws, composite loss, Adam on the student
/// at the cosine rate, EMA teacher update. Throws NumericError naming the term
/// if the loss is not finite.
StepResult train_step(TrainState& state, const Batch& batch, const RoiMasks& rois, const TrainConfig& config,
                      int epoch, Rng& rng, Backend backend = Backend::Parallel);

struct EpochRecord {
  int epoch = 0;
  LossBreakdown loss;  // mean over the epoch's steps
  double lr = 0;       // rate of the epoch's last step
  std::optional<EvalReport> val_student, val_teacher;
};

nlohmann::json to_json(const EpochRecord& r);
nlohmann::json to_json(const EvalReport& r);
nlohmann::json to_json(const LossBreakdown& l);

struct TrainResult {
  TrainState final_state;
  TrainState best_state;  // full state at the epoch of best_teacher
  ModelParams best_teacher;
  int best_epoch = -1;
  double best_val_accuracy = -1;
  std::vector<EpochRecord> log;
};

/// Class probabilities of every slice, batched, without perturbation.
Matrix predict_probs(const ArchSpec& arch, const ModelParams& params, const std::vector<const Slice*>& slices);
EvalReport evaluate_model(const ArchSpec& arch, const ModelParams& params, const Dataset& labeled_set);

int resolve_steps_per_epoch(const Dataset& train, const TrainConfig& config);

/// Runs config.epochs epochs with validation after each; keeps the teacher with
/// the best validation accuracy. `on_epoch` sees every record as it is produced.
TrainResult train(const Dataset& train_set, const Dataset& val_set, const RoiMasks& rois, const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

Checkpoint make_checkpoint(const TrainState& state, const TrainConfig& config, int epoch);
/// Restores student, teacher and optimizer state written by make_checkpoint().
TrainState state_from_checkpoint(const Checkpoint& ckpt);

}  // namespace mtqa

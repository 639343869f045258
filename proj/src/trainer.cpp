#include "mtqa/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>
#include <numeric>

#include "mtqa/roi.hpp"

namespace mtqa {

void TrainConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0,1]");
  weights.validate();
  if (labeled_per_batch <= 0 || labeled_per_batch > batch_size) {
    throw ConfigError("labeled_per_batch must satisfy 0 < labeled_per_batch <= batch_size");
  }
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (steps_per_epoch < 0) throw ConfigError("steps_per_epoch must be >= 0");
  if (!(lr0 > 0)) throw ConfigError("lr0 must be > 0");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1 && adam_eps > 0)) {
    throw ConfigError("invalid Adam coefficients");
  }
  if (runs < 1) throw ConfigError("runs must be >= 1");
  perturb.validate();
  arch.validate();
}

TrainConfig TrainConfig::desk() { return TrainConfig{}; }

TrainConfig TrainConfig::paper() {
  TrainConfig c;
  c.batch_size = 384;
  c.labeled_per_batch = 96;
  c.runs = 5;
  return c;
}

TrainConfig TrainConfig::tiny() {
  TrainConfig c;
  c.batch_size = 16;
  c.labeled_per_batch = 4;
  c.epochs = 2;
  c.arch.input_size = 32;
  c.arch.widths = {8, 16, 16};
  return c;
}

BatchSampler::BatchSampler(const Dataset& dataset, const TrainConfig& config)
    : dataset_(dataset), labeled_quota_(config.labeled_per_batch) {
  if (dataset.labeled.empty()) throw DataError("training set has no labeled slices");
  if (dataset.unlabeled.empty()) {
    if (!config.unsupervised_terms_off()) {
      throw DataError("unlabeled pool is empty but lambda, beta or gamma is nonzero");
    }
    unlabeled_quota_ = 0;
  } else {
    unlabeled_quota_ = config.batch_size - config.labeled_per_batch;
  }
  if (dataset.labeled.size() < static_cast<std::size_t>(labeled_quota_)) {
    with_replacement_ = true;
    const std::string msg = "labeled pool (" + std::to_string(dataset.labeled.size()) +
                            ") is smaller than labeled_per_batch (" + std::to_string(labeled_quota_) +
                            "); sampling with replacement";
    if (config.warn) config.warn(msg);
    else std::cerr << "warning: " << msg << '\n';
  }
}

std::size_t BatchSampler::take(std::vector<std::size_t>& order, std::size_t& cursor, std::size_t pool, Rng& rng) {
  if (cursor >= order.size()) {
    order.resize(pool);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    cursor = 0;
  }
  return order[cursor++];
}

Batch BatchSampler::next(Rng& rng) {
  Batch b;
  b.labeled.reserve(static_cast<std::size_t>(labeled_quota_));
  b.unlabeled.reserve(static_cast<std::size_t>(unlabeled_quota_));
  const std::size_t nl = dataset_.labeled.size();
  for (int i = 0; i < labeled_quota_; ++i) {
    const std::size_t k = with_replacement_ ? std::uniform_int_distribution<std::size_t>(0, nl - 1)(rng)
                                            : take(lab_order_, lab_cursor_, nl, rng);
    b.labeled.push_back(&dataset_.labeled[k]);
  }
  for (int i = 0; i < unlabeled_quota_; ++i) {
    b.unlabeled.push_back(&dataset_.unlabeled[take(unl_order_, unl_cursor_, dataset_.unlabeled.size(), rng)]);
  }
  return b;
}

Batch sample_batch(const Dataset& dataset, const TrainConfig& config, Rng& rng) {
  BatchSampler s(dataset, config);
  return s.next(rng);
}

std::pair<Slice, Perturbation> perturb(const Slice& slice, const PerturbConfig& config, Rng& rng) {
  const Perturbation p = draw_perturbation(config, slice.pixels.rows(), rng);
  Slice out{apply_perturbation(slice.pixels, p), slice.stack_id, slice.slice_index};
  return {std::move(out), p};
}

double cosine_lr(long step, long total_steps, double lr0) {
  if (total_steps <= 0 || step < 0 || step > total_steps) throw ConfigError("cosine_lr: step out of range");
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(total_steps)));
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr, double beta1,
               double beta2, double eps) {
  if (!params.same_layout(grads) || !params.same_layout(state.m) || !params.same_layout(state.v)) {
    throw ShapeError("adam_step: layouts differ");
  }
  ++state.t;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t a = 0; a < params.arrays().size(); ++a) {
    auto& p = params.at(a).values;
    const auto& g = grads.at(a).values;
    auto& m = state.m.at(a).values;
    auto& v = state.v.at(a).values;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
  }
}

TrainState init_state(const TrainConfig& config, long total_steps) {
  TrainState s;
  std::seed_seq seq{static_cast<std::uint32_t>(config.seed & 0xffffffffu),
                    static_cast<std::uint32_t>(config.seed >> 32), 1u};
  std::uint64_t init_seed = 0;
  seq.generate(reinterpret_cast<std::uint32_t*>(&init_seed), reinterpret_cast<std::uint32_t*>(&init_seed) + 2);
  s.student = init_params(config.arch, init_seed);
  s.teacher = clone_params(s.student);
  s.adam.m = s.student.zeros_like();
  s.adam.v = s.student.zeros_like();
  s.total_steps = std::max(1L, total_steps);
  return s;
}

namespace {

const Mask& roi_for(const RoiMasks& rois, const Slice& s) {
  auto it = rois.find(s.stack_id);
  if (it == rois.end()) throw DataError("no ROI mask for stack " + s.stack_id);
  return it->second;
}

Matrix take_rows(const Matrix& m, int begin, int end) {
  Matrix out(end - begin, m.cols);
  std::copy(m.data.begin() + static_cast<std::ptrdiff_t>(begin) * m.cols,
            m.data.begin() + static_cast<std::ptrdiff_t>(end) * m.cols, out.data.begin());
  return out;
}

void check_loss(const LossBreakdown& l) {
  const std::pair<const char*, double> terms[] = {{"cls", l.cls},         {"cls_roi", l.cls_roi}, {"con", l.con},
                                                  {"con_roi", l.con_roi}, {"ent", l.ent},         {"total", l.total}};
  for (const auto& [name, v] : terms) {
    if (!std::isfinite(v)) throw NumericError("non-finite loss term " + std::string(name) + " = " + std::to_string(v));
  }
}

}  // namespace

StepForwards step_forwards(const TrainState& state, const Batch& batch, const RoiMasks& rois,
                           const TrainConfig& config, Rng& rng, Backend backend, bool all_teacher_terms) {
  const int n_lab = static_cast<int>(batch.labeled.size());
  const int n_all = static_cast<int>(batch.size());
  if (n_all == 0) throw DataError("train_step: empty batch");
  const bool need_teacher_full = all_teacher_terms || config.weights.lambda > 0;
  const bool need_teacher_masked = all_teacher_terms || config.weights.beta > 0;

  // Independent draws for every forward pass, in a fixed order regardless of weights.
  std::vector<Image> student_in(static_cast<std::size_t>(n_all + n_lab));
  std::vector<Image> teacher_full(static_cast<std::size_t>(n_all)), teacher_masked(static_cast<std::size_t>(n_all));
  for (int i = 0; i < n_all; ++i) {
    const Slice& s = batch.slice(static_cast<std::size_t>(i));
    const Mask& roi = roi_for(rois, s);
    const Image masked = apply_mask(s, roi).pixels;
    const int size = s.pixels.rows();
    const Perturbation p_sf = draw_perturbation(config.perturb, size, rng);
    student_in[static_cast<std::size_t>(i)] = apply_perturbation(s.pixels, p_sf);
    if (i < n_lab) {
      const Perturbation p_sm = draw_perturbation(config.perturb, size, rng);
      student_in[static_cast<std::size_t>(n_all + i)] = apply_perturbation(masked, p_sm);
    }
    const Perturbation p_tf = draw_perturbation(config.perturb, size, rng);
    const Perturbation p_tm = draw_perturbation(config.perturb, size, rng);
    if (need_teacher_full) teacher_full[static_cast<std::size_t>(i)] = apply_perturbation(s.pixels, p_tf);
    if (need_teacher_masked) teacher_masked[static_cast<std::size_t>(i)] = apply_perturbation(masked, p_tm);
  }

  StepForwards out;
  std::vector<const Image*> ptrs;
  for (const auto& im : student_in) ptrs.push_back(&im);
  out.student = forward_batch(config.arch, state.student, to_tensor(ptrs), &out.cache, backend);

  BatchForwards& fw = out.forwards;
  fw.student_full_probs = take_rows(out.student.probs, 0, n_all);
  fw.student_full_features = take_rows(out.student.features, 0, n_all);
  fw.student_masked_probs = take_rows(out.student.probs, n_all, n_all + n_lab);
  if (need_teacher_full || need_teacher_masked) {
    ptrs.clear();
    if (need_teacher_full)
      for (const auto& im : teacher_full) ptrs.push_back(&im);
    if (need_teacher_masked)
      for (const auto& im : teacher_masked) ptrs.push_back(&im);
    const BatchOutput tout = forward_batch(config.arch, state.teacher, to_tensor(ptrs), nullptr, backend);
    int row = 0;
    if (need_teacher_full) {
      fw.teacher_full_probs = take_rows(tout.probs, 0, n_all);
      row = n_all;
    }
    if (need_teacher_masked) fw.teacher_masked_features = take_rows(tout.features, row, row + n_all);
  }
  out.labels.reserve(static_cast<std::size_t>(n_lab));
  for (const auto* l : batch.labeled) out.labels.push_back(l->label);
  return out;
}

StepResult train_step(TrainState& state, const Batch& batch, const RoiMasks& rois, const TrainConfig& config,
                      int epoch, Rng& rng, Backend backend) {
  const int n_lab = static_cast<int>(batch.labeled.size());
  const int n_all = static_cast<int>(batch.size());
  StepForwards sf = step_forwards(state, batch, rois, config, rng, backend);
  const BatchForwards& fw = sf.forwards;
  const BatchOutput& sout = sf.student;
  const ForwardCache& cache = sf.cache;
  const std::vector<Label>& labels = sf.labels;
  LossGradients lg;
  StepResult result;
  result.loss = composite_loss(fw, labels, config.weights, epoch, &lg);
  check_loss(result.loss);

  Matrix g_logits(n_all + n_lab, 3);
  Matrix g_feat(n_all + n_lab, sout.features.cols);
  std::copy(lg.student_full_logits.data.begin(), lg.student_full_logits.data.end(), g_logits.data.begin());
  std::copy(lg.student_masked_logits.data.begin(), lg.student_masked_logits.data.end(),
            g_logits.data.begin() + static_cast<std::ptrdiff_t>(n_all) * 3);
  std::copy(lg.student_full_features.data.begin(), lg.student_full_features.data.end(), g_feat.data.begin());

  ModelParams grads = state.student.zeros_like();
  backward_batch(config.arch, state.student, cache, g_logits, &g_feat, grads, backend);

  result.lr = cosine_lr(std::min(state.step, state.total_steps), state.total_steps, config.lr0);
  adam_step(state.student, grads, state.adam, result.lr, config.adam_beta1, config.adam_beta2, config.adam_eps);
  if (!state.student.all_finite()) throw NumericError("non-finite student parameters after Adam step");
  ema_update(state.teacher, state.student, config.alpha);
  ++state.step;
  return result;
}

nlohmann::json to_json(const LossBreakdown& l) {
  return {{"cls", l.cls}, {"cls_roi", l.cls_roi}, {"con", l.con}, {"con_roi", l.con_roi},
          {"ent", l.ent}, {"ramp", l.ramp},       {"total", l.total}};
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j{{"accuracy", r.accuracy},
                   {"n_examples", r.n_examples},
                   {"per_class_counts", {{"D", r.per_class_counts[0]}, {"N", r.per_class_counts[1]}, {"W", r.per_class_counts[2]}}}};
  j["auc_n"] = r.auc_n ? nlohmann::json(*r.auc_n) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json to_json(const EpochRecord& r) {
  nlohmann::json j{{"epoch", r.epoch}, {"loss", to_json(r.loss)}, {"lr", r.lr}, {"ramp", r.loss.ramp}};
  j["val_student"] = r.val_student ? to_json(*r.val_student) : nlohmann::json(nullptr);
  j["val_teacher"] = r.val_teacher ? to_json(*r.val_teacher) : nlohmann::json(nullptr);
  return j;
}

Matrix predict_probs(const ArchSpec& arch, const ModelParams& params, const std::vector<const Slice*>& slices) {
  constexpr std::size_t kChunk = 128;
  Matrix out(static_cast<int>(slices.size()), 3);
  for (std::size_t begin = 0; begin < slices.size(); begin += kChunk) {
    const std::size_t end = std::min(slices.size(), begin + kChunk);
    std::vector<const Image*> imgs;
    for (std::size_t i = begin; i < end; ++i) imgs.push_back(&slices[i]->pixels);
    const BatchOutput b = forward_batch(arch, params, to_tensor(imgs));
    std::copy(b.probs.data.begin(), b.probs.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(begin) * 3);
  }
  return out;
}

EvalReport evaluate_model(const ArchSpec& arch, const ModelParams& params, const Dataset& labeled_set) {
  std::vector<const Slice*> slices;
  std::vector<Label> truth;
  for (const auto& l : labeled_set.labeled) {
    slices.push_back(&l.slice);
    truth.push_back(l.label);
  }
  return evaluate_predictions(predict_probs(arch, params, slices), truth);
}

int resolve_steps_per_epoch(const Dataset& train, const TrainConfig& config) {
  if (config.steps_per_epoch > 0) return config.steps_per_epoch;
  const auto ceil_div = [](std::size_t a, std::size_t b) { return static_cast<int>((a + b - 1) / b); };
  int steps = ceil_div(train.labeled.size(), static_cast<std::size_t>(config.labeled_per_batch));
  const int unl_quota = config.batch_size - config.labeled_per_batch;
  if (!train.unlabeled.empty() && unl_quota > 0) {
    steps = std::max(steps, ceil_div(train.unlabeled.size(), static_cast<std::size_t>(unl_quota)));
  }
  return std::max(1, steps);
}

TrainResult train(const Dataset& train_set, const Dataset& val_set, const RoiMasks& rois, const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  if (train_set.image_size() != config.arch.input_size) {
    throw ConfigError("training images are " + std::to_string(train_set.image_size()) + " px but the model expects " +
                      std::to_string(config.arch.input_size));
  }
  const int spe = resolve_steps_per_epoch(train_set, config);
  TrainResult result;
  result.final_state = init_state(config, static_cast<long>(config.epochs) * spe);
  result.best_teacher = result.final_state.teacher;
  result.best_state = result.final_state;
  if (config.epochs == 0) return result;

  std::seed_seq seq{static_cast<std::uint32_t>(config.seed & 0xffffffffu),
                    static_cast<std::uint32_t>(config.seed >> 32), 2u};
  Rng rng(seq);
  BatchSampler sampler(train_set, config);
  auto& state = result.final_state;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    for (int s = 0; s < spe; ++s) {
      const Batch batch = sampler.next(rng);
      const StepResult step = train_step(state, batch, rois, config, epoch, rng);
      rec.loss.cls += step.loss.cls / spe;
      rec.loss.cls_roi += step.loss.cls_roi / spe;
      rec.loss.con += step.loss.con / spe;
      rec.loss.con_roi += step.loss.con_roi / spe;
      rec.loss.ent += step.loss.ent / spe;
      rec.loss.total += step.loss.total / spe;
      rec.loss.ramp = step.loss.ramp;
      rec.lr = step.lr;
    }
    if (!val_set.labeled.empty()) {
      rec.val_student = evaluate_model(config.arch, state.student, val_set);
      rec.val_teacher = evaluate_model(config.arch, state.teacher, val_set);
      if (rec.val_teacher->accuracy > result.best_val_accuracy) {
        result.best_val_accuracy = rec.val_teacher->accuracy;
        result.best_epoch = epoch;
        result.best_teacher = state.teacher;
        result.best_state = state;
      }
    } else {
      result.best_epoch = epoch;
      result.best_teacher = state.teacher;
      result.best_state = state;
    }
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

Checkpoint make_checkpoint(const TrainState& state, const TrainConfig& config, int epoch) {
  Checkpoint c;
  c.metadata = {{"format", "mtqa-checkpoint"}, {"arch", config.arch.id()}, {"epoch", epoch},
                {"seed", config.seed},         {"step", state.step},        {"total_steps", state.total_steps},
                {"adam_t", state.adam.t},      {"alpha", config.alpha}};
  c.groups.emplace("student", state.student);
  c.groups.emplace("teacher", state.teacher);
  c.groups.emplace("adam_m", state.adam.m);
  c.groups.emplace("adam_v", state.adam.v);
  return c;
}

TrainState state_from_checkpoint(const Checkpoint& ckpt) {
  TrainState s;
  s.student = ckpt.group("student");
  s.teacher = ckpt.group("teacher");
  s.adam.m = ckpt.group("adam_m");
  s.adam.v = ckpt.group("adam_v");
  try {
    s.adam.t = ckpt.metadata.at("adam_t").get<long>();
    s.step = ckpt.metadata.at("step").get<long>();
    s.total_steps = ckpt.metadata.at("total_steps").get<long>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint metadata incomplete: ") + e.what());
  }
  if (!s.student.same_layout(s.teacher) || !s.student.same_layout(s.adam.m) || !s.student.same_layout(s.adam.v)) {
    throw DataError("checkpoint parameter groups have inconsistent layouts");
  }
  return s;
}

}  // namespace mtqa

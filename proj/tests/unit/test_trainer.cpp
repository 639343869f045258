#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "mtqa/checkpoint.hpp"
#include "mtqa/roi.hpp"
#include "mtqa/trainer.hpp"
#include "test_util.hpp"
#include "toy_model.hpp"

using namespace mtqa;

namespace {

TrainConfig small_config() {
  TrainConfig c = TrainConfig::tiny();
  c.arch.input_size = 16;
  c.arch.widths = {4, 4};
  c.arch.activation = Activation::Elu;
  c.batch_size = 8;
  c.labeled_per_batch = 3;
  c.epochs = 2;
  c.steps_per_epoch = 3;
  c.warn = [](const std::string&) {};
  return c;
}

Dataset small_dataset(std::uint64_t seed = 1, std::size_t n_labeled = 10) {
  auto sc = mtqa::testing::small_synth(seed, 3, 10, 16);
  return hide_labels(generate_synthetic(sc), n_labeled, seed);
}

RoiMasks masks_for(const Dataset& ds) {
  RoiMasks out;
  for (auto& [id, r] : compute_stack_rois(ds, RoiConfig::from_fraction(0.01, ds.image_size()))) out.emplace(id, r.mask);
  return out;
}

Dataset labeled_only(const Dataset& ds) {
  Dataset out = ds;
  out.unlabeled.clear();
  return out;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("batch composition follows the labeled quota") {
  const Dataset ds = hide_labels(generate_synthetic(mtqa::testing::small_synth(2, 4, 30, 16)), 40, 2);
  TrainConfig c = small_config();
  c.batch_size = 64;
  c.labeled_per_batch = 16;
  Rng rng(1);
  BatchSampler sampler(ds, c);
  for (int i = 0; i < 100; ++i) {
    const Batch b = sampler.next(rng);
    REQUIRE(b.labeled.size() == 16);
    REQUIRE(b.unlabeled.size() == 48);
  }
  const Batch one = sample_batch(ds, c, rng);
  CHECK(one.size() == 64);
}

TEST_CASE("each pass over a pool visits every item once") {
  const Dataset ds = small_dataset(3, 12);
  TrainConfig c = small_config();
  c.batch_size = 6;
  c.labeled_per_batch = 4;
  Rng rng(2);
  BatchSampler sampler(ds, c);
  std::multiset<const LabeledSlice*> seen;
  for (int i = 0; i < 3; ++i)
    for (const auto* l : sampler.next(rng).labeled) seen.insert(l);
  CHECK(seen.size() == 12);
  for (const auto& l : ds.labeled) CHECK(seen.count(&l) == 1);
}

TEST_CASE("supervised degeneration and its error") {
  const Dataset ds = labeled_only(small_dataset());
  TrainConfig c = small_config();
  Rng rng(3);
  CHECK_THROWS_AS(BatchSampler(ds, c), DataError);
  c.weights = LossWeights{0, 0, 0, 5};
  const Batch b = sample_batch(ds, c, rng);
  CHECK(b.labeled.size() == 3);
  CHECK(b.unlabeled.empty());
}

TEST_CASE("small labeled pool samples with replacement and warns once") {
  const Dataset ds = small_dataset(4, 2);
  TrainConfig c = small_config();
  int warnings = 0;
  c.warn = [&](const std::string&) { ++warnings; };
  Rng rng(4);
  BatchSampler sampler(ds, c);
  for (int i = 0; i < 5; ++i) CHECK(sampler.next(rng).labeled.size() == 3);
  CHECK(sampler.with_replacement());
  CHECK(warnings == 1);
}

TEST_CASE("batch sequence is reproducible per seed") {
  const Dataset ds = small_dataset();
  const TrainConfig c = small_config();
  auto sequence = [&](std::uint64_t seed) {
    Rng rng(seed);
    BatchSampler s(ds, c);
    std::vector<const Slice*> out;
    for (int i = 0; i < 10; ++i) {
      const Batch b = s.next(rng);
      for (std::size_t k = 0; k < b.size(); ++k) out.push_back(&b.slice(k));
    }
    return out;
  };
  CHECK(sequence(5) == sequence(5));
  CHECK(sequence(5) != sequence(6));
}

TEST_CASE("perturbation examples and bounds") {
  std::mt19937_64 rng(6);
  const Slice s{mtqa::testing::random_image(20, rng), "s", 0};
  Rng r(1);
  const auto [same, p0] = perturb(s, PerturbConfig::disabled(), r);
  CHECK(same == s);
  CHECK_FALSE(p0.flip);

  Perturbation flip;
  flip.flip = true;
  CHECK(apply_perturbation(apply_perturbation(s.pixels, flip), flip) == s.pixels);

  const PerturbConfig pc;
  for (int i = 0; i < 1000; ++i) {
    const auto [out, p] = perturb(s, pc, r);
    REQUIRE(std::abs(p.shift_rows) <= 2);
    REQUIRE(std::abs(p.shift_cols) <= 2);
    for (float v : out.pixels.values()) {
      REQUIRE(v >= 0.f);
      REQUIRE(v <= 1.f);
    }
  }
  Perturbation shift;
  shift.shift_rows = 1;
  const Image moved = apply_perturbation(s.pixels, shift);
  for (int c = 0; c < 20; ++c) {
    CHECK(moved(0, c) == 0.f);
    CHECK(moved(5, c) == s.pixels(4, c));
  }
}

TEST_CASE("cosine learning rate") {
  CHECK(cosine_lr(0, 100, 5e-3) == 5e-3);
  CHECK(cosine_lr(100, 100, 5e-3) == doctest::Approx(0.0).epsilon(1e-18));
  CHECK(cosine_lr(50, 100, 5e-3) == doctest::Approx(2.5e-3).epsilon(1e-14));
  CHECK_THROWS_AS(cosine_lr(101, 100, 1.0), ConfigError);
}

TEST_CASE("alpha = 1 leaves the teacher bit-identical") {
  const Dataset ds = small_dataset();
  TrainConfig c = small_config();
  c.alpha = 1.0;
  TrainState st = init_state(c, 10);
  const ModelParams teacher0 = st.teacher;
  Rng rng(7);
  BatchSampler sampler(ds, c);
  const RoiMasks rois = masks_for(ds);
  for (int i = 0; i < 3; ++i) train_step(st, sampler.next(rng), rois, c, 0, rng);
  CHECK(st.teacher == teacher0);
  CHECK_FALSE(st.student == teacher0);
  CHECK(st.step == 3);
}

TEST_CASE("supervised step equals an independent Adam step on cls + cls_roi") {
  const Dataset ds = labeled_only(small_dataset(8));
  TrainConfig c = small_config();
  c.weights = LossWeights{0, 0, 0, 5};
  c.perturb = PerturbConfig::disabled();
  const RoiMasks rois = masks_for(ds);
  TrainState st = init_state(c, 20);
  Rng rng(8);
  BatchSampler sampler(ds, c);

  ModelParams ref = st.student;
  ModelParams m = ref.zeros_like(), v = ref.zeros_like();
  for (int step = 0; step < 4; ++step) {
    const Batch batch = sampler.next(rng);
    Rng step_rng(100 + static_cast<std::uint64_t>(step));
    train_step(st, batch, rois, c, 0, step_rng, Backend::Parallel);

    // Reference path: serial kernels, explicit loss assembly, hand-written Adam.
    const int n = static_cast<int>(batch.labeled.size());
    std::vector<Image> images;
    for (const auto* l : batch.labeled) images.push_back(l->slice.pixels);
    for (const auto* l : batch.labeled) images.push_back(apply_mask(l->slice, rois.at(l->slice.stack_id)).pixels);
    std::vector<const Image*> ptrs;
    for (const auto& im : images) ptrs.push_back(&im);
    ForwardCache cache;
    const BatchOutput out = forward_batch(c.arch, ref, to_tensor(ptrs), &cache, Backend::Reference);
    Matrix g(2 * n, 3);
    for (int i = 0; i < 2 * n; ++i) {
      const int label = index_of(batch.labeled[static_cast<std::size_t>(i % n)]->label);
      for (int k = 0; k < 3; ++k) g(i, k) = (out.probs(i, k) - (k == label ? 1.0 : 0.0)) / n;
    }
    ModelParams grads = ref.zeros_like();
    backward_batch(c.arch, ref, cache, g, nullptr, grads, Backend::Reference);
    const double lr = cosine_lr(step, 20, c.lr0);
    const double t = step + 1;
    for (std::size_t a = 0; a < ref.arrays().size(); ++a)
      for (std::size_t i = 0; i < ref.at(a).values.size(); ++i) {
        const double gi = grads.at(a).values[i];
        double& mi = m.at(a).values[i];
        double& vi = v.at(a).values[i];
        mi = 0.9 * mi + 0.1 * gi;
        vi = 0.999 * vi + 0.001 * gi * gi;
        const double mh = mi / (1 - std::pow(0.9, t)), vh = vi / (1 - std::pow(0.999, t));
        ref.at(a).values[i] -= lr * mh / (std::sqrt(vh) + 1e-8);
      }
    CHECK(st.student.max_abs_diff(ref) <= 1e-9);
  }
}

TEST_CASE("loss decreases when overfitting a fixed labeled batch") {
  const Dataset ds = small_dataset(9, 16);
  TrainConfig c = small_config();
  c.batch_size = 16;
  c.labeled_per_batch = 16;
  c.weights = LossWeights{0, 0, 0, 5};
  c.perturb = PerturbConfig::disabled();
  const Dataset lab = labeled_only(ds);
  const RoiMasks rois = masks_for(ds);
  Rng rng(9);
  const Batch fixed = sample_batch(lab, c, rng);
  c.arch.widths = {8, 16};
  c.lr0 = 1e-2;
  TrainState st = init_state(c, 1000);
  double first = 0, last = 0;
  for (int i = 0; i < 50; ++i) {
    const double loss = train_step(st, fixed, rois, c, 0, rng).loss.total;
    if (i == 0) first = loss;
    last = loss;
  }
  CHECK(last < 0.6 * first);
}

TEST_CASE("teacher follows the closed-form moving average") {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> d;
  const double alpha = 0.994;
  const double theta0 = d(rng);
  ModelParams teacher({ParamArray{"w", {1}, {theta0}}});
  std::vector<double> students;
  for (int n = 1; n <= 200; ++n) {
    students.push_back(d(rng));
    ema_update(teacher, ModelParams({ParamArray{"w", {1}, {students.back()}}}), alpha);
    double expected = std::pow(alpha, n) * theta0;
    for (int i = 0; i < n; ++i) expected += (1 - alpha) * std::pow(alpha, i) * students[static_cast<std::size_t>(n - 1 - i)];
    REQUIRE(teacher.at(0).values[0] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("without perturbations a teacher equal to the student has zero consistency loss") {
  const Dataset ds = small_dataset(11);
  TrainConfig c = small_config();
  c.alpha = 0.0;
  c.perturb = PerturbConfig::disabled();
  const RoiMasks rois = masks_for(ds);
  TrainState st = init_state(c, 10);
  Rng rng(11);
  BatchSampler sampler(ds, c);
  for (int i = 0; i < 5; ++i) {
    REQUIRE(st.teacher == st.student);
    CHECK(train_step(st, sampler.next(rng), rois, c, 0, rng).loss.con == 0.0);
  }
}

TEST_CASE("non-finite inputs abort the step") {
  Dataset ds = small_dataset(12);
  const RoiMasks rois = masks_for(ds);
  ds.labeled[0].slice.pixels(2, 2) = std::nanf("");
  TrainConfig c = small_config();
  c.perturb = PerturbConfig::disabled();
  c.labeled_per_batch = static_cast<int>(ds.labeled.size());
  c.batch_size = c.labeled_per_batch + 2;
  TrainState st = init_state(c, 10);
  Rng rng(12);
  CHECK_THROWS_AS(train_step(st, sample_batch(ds, c, rng), rois, c, 0, rng), NumericError);
}

TEST_CASE("zero epochs returns the initialized models") {
  const Dataset ds = small_dataset();
  TrainConfig c = small_config();
  c.epochs = 0;
  const TrainResult r = train(ds, Dataset{}, masks_for(ds), c);
  CHECK(r.log.empty());
  CHECK(r.final_state.student == init_state(c, 1).student);
  CHECK(r.final_state.teacher == r.final_state.student);
}

TEST_CASE("training is deterministic per seed") {
  const Dataset ds = small_dataset(13);
  const Dataset val = generate_synthetic(mtqa::testing::small_synth(14, 1, 10, 16));
  const TrainConfig c = small_config();
  const RoiMasks rois = masks_for(ds);
  const TrainResult a = train(ds, val, rois, c), b = train(ds, val, rois, c);
  REQUIRE(a.log.size() == 2);
  for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(to_json(a.log[i]).dump() == to_json(b.log[i]).dump());
  CHECK(a.final_state.student == b.final_state.student);
  CHECK(a.best_teacher == b.best_teacher);
  TrainConfig other = c;
  other.seed = 1;
  CHECK_FALSE(train(ds, val, rois, other).final_state.student == a.final_state.student);
}

TEST_CASE("train state survives a checkpoint round trip") {
  mtqa::testing::TempDir dir;
  const Dataset ds = small_dataset(15);
  const TrainConfig c = small_config();
  const TrainResult r = train(ds, Dataset{}, masks_for(ds), c);
  save_checkpoint(dir / "s.ckpt", make_checkpoint(r.final_state, c, 1));
  const Checkpoint ck = load_checkpoint(dir / "s.ckpt");
  const TrainState back = state_from_checkpoint(ck);
  CHECK(back.student == r.final_state.student);
  CHECK(back.teacher == r.final_state.teacher);
  CHECK(back.adam.m == r.final_state.adam.m);
  CHECK(back.adam.v == r.final_state.adam.v);
  CHECK(back.adam.t == r.final_state.adam.t);
  CHECK(back.step == r.final_state.step);
  CHECK(ck.arch() == c.arch);
  CHECK(ck.metadata.at("seed") == c.seed);
}

TEST_CASE("config validation") {
  TrainConfig c = small_config();
  c.labeled_per_batch = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.labeled_per_batch = c.batch_size + 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.alpha = -0.1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.lr0 = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(TrainConfig::paper().batch_size == 384);
  CHECK(TrainConfig::paper().labeled_per_batch == 96);
  CHECK(TrainConfig::desk().batch_size == 64);
  CHECK(TrainConfig::desk().labeled_per_batch == 16);
  CHECK(TrainConfig{}.alpha == 0.994);
}

}  // TEST_SUITE

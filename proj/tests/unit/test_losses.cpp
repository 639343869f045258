#include <cmath>
#include <random>

#include "doctest.h"
#include "mtqa/losses.hpp"
#include "toy_model.hpp"

using namespace mtqa;

namespace {

Probs random_simplex(std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  Probs p{e(rng), e(rng), e(rng)};
  const double s = p[0] + p[1] + p[2];
  for (auto& v : p) v /= s;
  return p;
}

Matrix probs_matrix(const std::vector<Probs>& rows) {
  Matrix m(static_cast<int>(rows.size()), 3);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int k = 0; k < 3; ++k) m(static_cast<int>(i), k) = rows[i][static_cast<std::size_t>(k)];
  return m;
}

BatchForwards random_forwards(std::mt19937_64& rng, int n_all, int n_lab, int f) {
  std::vector<Probs> sf, sm, tf;
  for (int i = 0; i < n_all; ++i) sf.push_back(random_simplex(rng)), tf.push_back(random_simplex(rng));
  for (int i = 0; i < n_lab; ++i) sm.push_back(random_simplex(rng));
  std::normal_distribution<double> d;
  BatchForwards fw;
  fw.student_full_probs = probs_matrix(sf);
  fw.student_masked_probs = probs_matrix(sm);
  fw.teacher_full_probs = probs_matrix(tf);
  fw.student_full_features = Matrix(n_all, f);
  fw.teacher_masked_features = Matrix(n_all, f);
  for (auto& v : fw.student_full_features.data) v = d(rng);
  for (auto& v : fw.teacher_masked_features.data) v = d(rng);
  return fw;
}

std::vector<Label> random_labels(std::mt19937_64& rng, int n) {
  std::vector<Label> out;
  for (int i = 0; i < n; ++i) out.push_back(static_cast<Label>(rng() % 3));
  return out;
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("cross entropy examples") {
  CHECK(cross_entropy({1, 0, 0}, Label::D) == 0.0);
  CHECK(cross_entropy({1.0 / 3, 1.0 / 3, 1.0 / 3}, Label::W) == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  CHECK(cross_entropy({0, 1, 0}, Label::D) == doctest::Approx(-std::log(1e-12)).epsilon(1e-14));
  CHECK(cross_entropy({0, 1, 0}, Label::D) == doctest::Approx(27.631021115928547));
}

TEST_CASE("KL consistency examples and Gibbs inequality") {
  CHECK(kl_consistency({0.2, 0.3, 0.5}, {0.2, 0.3, 0.5}) == 0.0);
  CHECK(kl_consistency({1, 0, 0}, {1.0 / 3, 1.0 / 3, 1.0 / 3}) == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) REQUIRE(kl_consistency(random_simplex(rng), random_simplex(rng)) >= 0.0);
}

TEST_CASE("ROI feature MSE examples") {
  const std::vector<double> a{1, 0}, z{0, 0};
  CHECK(roi_feature_mse(a, a) == 0.0);
  CHECK(roi_feature_mse(a, z) == 0.5);
  const std::vector<double> u{0.3, -1.2, 4.0}, v{1.1, 0.7, -2.0};
  CHECK(roi_feature_mse(u, v) == roi_feature_mse(v, u));
  CHECK_THROWS_AS(roi_feature_mse(u, a), ShapeError);
}

TEST_CASE("entropy examples") {
  CHECK(entropy_term({0, 1, 0}) == 0.0);
  CHECK(entropy_term({1.0 / 3, 1.0 / 3, 1.0 / 3}) == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  CHECK(entropy_term({0.5, 0.5, 0}) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("ramp-up schedule") {
  CHECK(ramp_up(0, 5) == doctest::Approx(std::exp(-5.0)).epsilon(1e-14));
  CHECK(ramp_up(5, 5) == 1.0);
  CHECK(ramp_up(10, 5) == 1.0);
  double prev = 0;
  for (int t = 0; t <= 20; ++t) {
    const double w = ramp_up(t, 5);
    CHECK(w > 0.0);
    CHECK(w <= 1.0);
    CHECK(w >= prev);
    prev = w;
  }
  CHECK(ramp_up(2, 5) == doctest::Approx(std::exp(-5.0 * 0.36)).epsilon(1e-14));
  CHECK_THROWS_AS(ramp_up(0, 0), ConfigError);
}

TEST_CASE("composite loss with zero weights is the supervised sum") {
  std::mt19937_64 rng(2);
  const BatchForwards fw = random_forwards(rng, 6, 3, 4);
  const auto labels = random_labels(rng, 3);
  const LossBreakdown b = composite_loss(fw, labels, LossWeights{0, 0, 0, 5}, 1);
  CHECK(b.total == b.cls + b.cls_roi);
}

TEST_CASE("composite loss on a single labeled uniform slice matches a scalar recomputation") {
  const Probs u{1.0 / 3, 1.0 / 3, 1.0 / 3};
  BatchForwards fw;
  fw.student_full_probs = probs_matrix({u});
  fw.student_masked_probs = probs_matrix({{0.2, 0.7, 0.1}});
  fw.teacher_full_probs = probs_matrix({{0.6, 0.3, 0.1}});
  fw.student_full_features = Matrix(1, 2);
  fw.student_full_features.data = {0.5, -0.5};
  fw.teacher_masked_features = Matrix(1, 2);
  fw.teacher_masked_features.data = {1.5, 0.5};
  const std::vector<Label> labels{Label::N};
  const LossWeights w{0.7, 1.3, 0.4, 5};
  const LossBreakdown b = composite_loss(fw, labels, w, 2);
  const double ln3 = std::log(3.0);
  CHECK(b.cls == doctest::Approx(ln3).epsilon(1e-14));
  CHECK(b.cls_roi == doctest::Approx(-std::log(0.7)).epsilon(1e-14));
  const double kl = 0.6 * std::log(0.6 * 3) + 0.3 * std::log(0.3 * 3) + 0.1 * std::log(0.1 * 3);
  CHECK(b.con == doctest::Approx(kl).epsilon(1e-13));
  CHECK(b.con_roi == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(b.ent == doctest::Approx(ln3).epsilon(1e-14));
  const double ramp = std::exp(-5.0 * 0.36);
  CHECK(b.ramp == doctest::Approx(ramp).epsilon(1e-14));
  CHECK(b.total == doctest::Approx(ln3 - std::log(0.7) + ramp * (0.7 * kl + 1.3 * 1.0 + 0.4 * ln3)).epsilon(1e-13));
}

TEST_CASE("identical teacher and student forwards give zero KL consistency") {
  const toy::Problem p = toy::make_problem(3);
  BatchForwards fw;
  const BatchOutput s = forward_batch(p.arch, p.student, p.teacher_full);
  fw.student_full_probs = s.probs;
  fw.student_full_features = s.features;
  fw.teacher_full_probs = forward_batch(p.arch, clone_params(p.student), p.teacher_full).probs;
  fw.teacher_masked_features = s.features;
  const LossBreakdown b = composite_loss(fw, {}, LossWeights{}, 0);
  CHECK(b.con == 0.0);
  CHECK(b.con_roi == 0.0);
  CHECK(b.cls == 0.0);
}

TEST_CASE("every term is non-negative and total obeys the breakdown identity") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 300; ++t) {
    const int n_all = 1 + static_cast<int>(rng() % 8);
    const int n_lab = static_cast<int>(rng() % static_cast<unsigned>(n_all + 1));
    const BatchForwards fw = random_forwards(rng, n_all, n_lab, 3);
    const auto labels = random_labels(rng, n_lab);
    const LossWeights w{std::uniform_real_distribution<double>(0, 2)(rng), 0.5, 1.5, 5};
    const int epoch = static_cast<int>(rng() % 8);
    const LossBreakdown b = composite_loss(fw, labels, w, epoch);
    CHECK(b.cls >= 0);
    CHECK(b.cls_roi >= 0);
    CHECK(b.con >= 0);
    CHECK(b.con_roi >= 0);
    CHECK(b.ent >= 0);
    CHECK(b.total == doctest::Approx(b.cls + b.cls_roi + b.ramp * (w.lambda * b.con + w.beta * b.con_roi + w.gamma * b.ent))
                         .epsilon(1e-12));
    if (n_lab == 0) {
      CHECK(b.cls == 0);
      CHECK(b.cls_roi == 0);
    }
  }
}

TEST_CASE("zeroing one coefficient removes exactly its ramp-scaled term") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    const BatchForwards fw = random_forwards(rng, 6, 2, 5);
    const auto labels = random_labels(rng, 2);
    const int epoch = static_cast<int>(rng() % 7);
    const LossWeights full{1, 1, 1, 5};
    const LossBreakdown b = composite_loss(fw, labels, full, epoch);
    const LossBreakdown nl = composite_loss(fw, labels, LossWeights{0, 1, 1, 5}, epoch);
    const LossBreakdown nb = composite_loss(fw, labels, LossWeights{1, 0, 1, 5}, epoch);
    const LossBreakdown ng = composite_loss(fw, labels, LossWeights{1, 1, 0, 5}, epoch);
    CHECK(std::abs((b.total - nl.total) - b.ramp * b.con) <= 1e-9);
    CHECK(std::abs((b.total - nb.total) - b.ramp * b.con_roi) <= 1e-9);
    CHECK(std::abs((b.total - ng.total) - b.ramp * b.ent) <= 1e-9);
  }
}

TEST_CASE("composite loss errors") {
  std::mt19937_64 rng(6);
  CHECK_THROWS_AS(composite_loss(BatchForwards{}, {}, LossWeights{}, 0), DataError);
  BatchForwards fw = random_forwards(rng, 4, 2, 3);
  const auto labels = random_labels(rng, 2);
  BatchForwards no_masked = fw;
  no_masked.student_masked_probs = Matrix();
  CHECK_THROWS_AS(composite_loss(no_masked, labels, LossWeights{}, 0), DataError);
  BatchForwards no_teacher = fw;
  no_teacher.teacher_masked_features = Matrix();
  CHECK_THROWS_AS(composite_loss(no_teacher, labels, LossWeights{}, 0), DataError);
  CHECK_NOTHROW(composite_loss(no_teacher, labels, LossWeights{1, 0, 1, 5}, 0));
}

TEST_CASE("logit gradients through the softmax match finite differences") {
  // Rows parameterized by logits; the loss gradient w.r.t. logits uses the softmax Jacobian.
  std::mt19937_64 rng(7);
  std::normal_distribution<double> d;
  const int n_all = 3, n_lab = 2;
  Matrix logits(n_all + n_lab, 3);
  for (auto& v : logits.data) v = d(rng);
  BatchForwards base = random_forwards(rng, n_all, n_lab, 2);
  const auto labels = random_labels(rng, n_lab);
  auto eval = [&](const Matrix& lg, LossGradients* g) {
    Matrix probs(lg.rows, 3);
    softmax_rows(lg, probs);
    BatchForwards fw = base;
    fw.student_full_probs = toy::rows(probs, 0, n_all);
    fw.student_masked_probs = toy::rows(probs, n_all, n_all + n_lab);
    return composite_loss(fw, labels, LossWeights{0.8, 1.1, 0.9, 5}, 3, g).total;
  };
  LossGradients g;
  eval(logits, &g);
  const double h = 1e-6;
  for (int r = 0; r < n_all + n_lab; ++r)
    for (int k = 0; k < 3; ++k) {
      Matrix plus = logits, minus = logits;
      plus(r, k) += h;
      minus(r, k) -= h;
      const double numeric = (eval(plus, nullptr) - eval(minus, nullptr)) / (2 * h);
      const double analytic = r < n_all ? g.student_full_logits(r, k) : g.student_masked_logits(r - n_all, k);
      CHECK(analytic == doctest::Approx(numeric).epsilon(1e-6));
    }
}

}  // TEST_SUITE

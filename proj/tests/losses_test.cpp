// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "distilkit/error.hpp"
#include "distilkit/losses.hpp"
#include "distilkit/ops.hpp"
#include "support.hpp"

namespace distilkit {
namespace {

double value(Var v) { return v.value().item(); }

TEST(CeLoss, Examples) {
  Tape tape;
  EXPECT_LE(value(ce_loss(tape.leaf(Tensor::matrix({{1, 0, 0, 0}})), std::vector<std::size_t>{0})), 1e-11);
  Var uniform = tape.leaf(Tensor({3, 4}, 0.25));
  EXPECT_NEAR(value(ce_loss(uniform, std::vector<std::size_t>{0, 2, 3})), std::log(4.0), 1e-15);
  const double a = value(ce_loss(tape.leaf(Tensor::matrix({{0.2, 0.8}})), std::vector<std::size_t>{1}));
  const double b = value(ce_loss(tape.leaf(Tensor::matrix({{0.6, 0.4}})), std::vector<std::size_t>{1}));
  EXPECT_NEAR(value(ce_loss(tape.leaf(Tensor::matrix({{0.2, 0.8}, {0.6, 0.4}})), std::vector<std::size_t>{1, 1})),
              (a + b) / 2, 1e-15);
}

TEST(CeLoss, ClippedAtZeroProbabilityAndShapes) {
  Tape tape;
  const double l = value(ce_loss(tape.leaf(Tensor::matrix({{0, 1}})), std::vector<std::size_t>{0}));
  EXPECT_NEAR(l, -std::log(kProbFloor), 1e-9);
  EXPECT_THROW(ce_loss(tape.leaf(Tensor::matrix({{0.5, 0.5}})), std::vector<std::size_t>{0, 1}), ShapeError);
  EXPECT_THROW(ce_loss(tape.leaf(Tensor::matrix({{0.5, 0.5}})), std::vector<std::size_t>{2}), ValidationError);
  EXPECT_THROW(ce_loss(tape.leaf(Tensor::matrix({{0.5, 0.5}})), Tensor({1, 3})), ShapeError);
}

TEST(BceLoss, Examples) {
  Tape tape;
  const Tensor y = Tensor::matrix({{0, 0, 1, 0, 0, 0, 0}});
  EXPECT_LE(value(bce_loss(tape.leaf(y), y)), 1e-11);
  EXPECT_NEAR(value(bce_loss(tape.leaf(Tensor({1, 7}, 0.5)), y)), std::log(2.0), 1e-15);
  const Tensor p = Tensor::matrix({{0.1, 0.7, 0.3}});
  const Tensor t = Tensor::matrix({{0, 1, 0}});
  const Tensor p2 = Tensor::matrix({{0.1, 0.7, 0.3}, {0.1, 0.7, 0.3}});
  const Tensor t2 = Tensor::matrix({{0, 1, 0}, {0, 1, 0}});
  EXPECT_NEAR(value(bce_loss(tape.leaf(p), t)), value(bce_loss(tape.leaf(p2), t2)), 1e-15);
  const double want = -(std::log(0.9) + std::log(0.7) + std::log(0.7)) / 3.0;
  EXPECT_NEAR(value(bce_loss(tape.leaf(p), t)), want, 1e-15);
}

TEST(KlKdLoss, ZeroForEqualLogitsAndNonNegative) {
  SeededRng rng(3);
  for (int i = 0; i < 100; ++i) {
    Tape tape;
    const Tensor a = testing::random_matrix(3, 4, rng), b = testing::random_matrix(3, 4, rng);
    EXPECT_EQ(value(kl_kd_loss(tape.constant(a), tape.leaf(a), 4.0)), 0.0);
    EXPECT_GE(value(kl_kd_loss(tape.constant(a), tape.leaf(b), 1.0 + i % 7)), 0.0);
  }
}

TEST(KlKdLoss, TeacherGetsNoGradient) {
  Tape tape;
  Var t = tape.leaf(Tensor::matrix({{1, 2, 0}}));
  Var s = tape.leaf(Tensor::matrix({{0, 1, 3}}));
  tape.backward(kl_kd_loss(t, s, 2.0));
  const Tensor gt = tape.grad(t), gs = tape.grad(s);
  for (double g : gt.data()) EXPECT_EQ(g, 0.0);
  double norm = 0;
  for (double g : gs.data()) norm += std::abs(g);
  EXPECT_GT(norm, 0.0);
}

TEST(KlKdLoss, Rejections) {
  Tape tape;
  Var a = tape.leaf(Tensor::matrix({{1, 2}}));
  EXPECT_THROW(kl_kd_loss(a, a, 0.0), ValidationError);
  EXPECT_THROW(kl_kd_loss(a, tape.leaf(Tensor::matrix({{1, 2, 3}})), 1.0), ShapeError);
}

TEST(Interpolations, Arithmetic) {
  EXPECT_DOUBLE_EQ(kd_loss(1.0, 0.5, 0.6), 0.8);
  EXPECT_EQ(kd_loss(1.3, 0.5, 1.0), 1.3);
  EXPECT_EQ(kd_loss(1.3, 0.5, 0.0), 0.5);
  EXPECT_THROW(kd_loss(1.0, 1.0, 1.5), ValidationError);
  EXPECT_DOUBLE_EQ(mtkd_loss(2.0, 1.0, 0.6), 1.6);
  EXPECT_THROW(mtkd_loss(2.0, 1.0, -0.1), ValidationError);
  const AnnealSchedule s{10};
  EXPECT_EQ(mtkd_ta_loss(2.0, 1.0, s, 0), 1.0);
  EXPECT_EQ(mtkd_ta_loss(2.0, 1.0, s, 10), 2.0);
  EXPECT_DOUBLE_EQ(mtkd_ta_loss(2.0, 1.0, s, 5), 1.5);
  EXPECT_THROW(AnnealSchedule{0}.validate(), ValidationError);
}

TEST(Interpolations, MonotoneInWeight) {
  double prev = -1;
  for (int i = 0; i <= 10; ++i) {
    const double v = kd_loss(2.0, 0.5, i / 10.0);
    EXPECT_GE(v, prev);
    prev = v;
  }
  prev = -1;
  const AnnealSchedule s{20};
  for (std::uint64_t step = 0; step <= 25; ++step) {
    const double v = mtkd_ta_loss(2.0, 0.5, s, step);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(AnnealSchedule, Lambda) {
  const AnnealSchedule s{8};
  EXPECT_EQ(s.lambda(0), 0.0);
  EXPECT_EQ(s.lambda(2), 0.25);
  EXPECT_EQ(s.lambda(8), 1.0);
  EXPECT_EQ(s.lambda(100), 1.0);
}

TEST(MtlLoss, SumOverAttachedTasks) {
  using T = TaskId;
  const std::vector<T> one{T::offense};
  EXPECT_EQ(mtl_loss({{T::offense, 1.0}}, one), 1.0);
  const std::vector<T> all{T::offense, T::emotion, T::sentiment, T::sexism};
  const std::vector<T> shuffled{T::sexism, T::offense, T::sentiment, T::emotion};
  const std::map<T, double> losses{{T::offense, 1.0}, {T::emotion, 2.0}, {T::sentiment, 0.5}, {T::sexism, 0.5}};
  EXPECT_EQ(mtl_loss(losses, all), 4.0);
  EXPECT_EQ(mtl_loss(losses, shuffled), 4.0);
  EXPECT_THROW(mtl_loss({{T::offense, 1.0}}, all), ValidationError);
}

TEST(MtkdKlLoss, ComposesSingleTaskTerms) {
  SeededRng rng(5);
  Tape tape;
  const Tensor ta = testing::random_matrix(3, 4, rng), sa = testing::random_matrix(3, 4, rng);
  const Tensor tb = testing::random_matrix(2, 7, rng), sb = testing::random_matrix(2, 7, rng);
  DistillConfig dc;
  dc.temperature = 2.0;
  dc.per_task_temperature[TaskId::emotion] = 7.0;
  const double a = value(kl_kd_loss(tape.constant(ta), tape.leaf(sa), 2.0));
  const double b = value(kl_kd_loss(tape.constant(tb), tape.leaf(sb), 7.0));
  const double single = value(mtkd_kl_loss({{TaskId::offense, tape.constant(ta)}}, {{TaskId::offense, tape.leaf(sa)}}, dc));
  EXPECT_EQ(single, a);
  const double both = value(mtkd_kl_loss({{TaskId::offense, tape.constant(ta)}, {TaskId::emotion, tape.constant(tb)}},
                                         {{TaskId::offense, tape.leaf(sa)}, {TaskId::emotion, tape.leaf(sb)}}, dc));
  EXPECT_NEAR(both, a + b, 1e-12);
  const double same = value(mtkd_kl_loss({{TaskId::offense, tape.constant(sa)}, {TaskId::emotion, tape.constant(sb)}},
                                         {{TaskId::offense, tape.leaf(sa)}, {TaskId::emotion, tape.leaf(sb)}}, dc));
  EXPECT_EQ(same, 0.0);
}

TEST(MtkdKlLoss, BatchSizeOverrideAndTaskMismatch) {
  SeededRng rng(6);
  Tape tape;
  const Tensor t = testing::random_matrix(4, 3, rng), s = testing::random_matrix(4, 3, rng);
  DistillConfig dc;
  const double by_rows = value(mtkd_kl_loss({{TaskId::offense, tape.constant(t)}}, {{TaskId::offense, tape.leaf(s)}}, dc));
  const double by_eight = value(mtkd_kl_loss({{TaskId::offense, tape.constant(t)}}, {{TaskId::offense, tape.leaf(s)}}, dc,
                                             {{TaskId::offense, 8}}));
  EXPECT_NEAR(by_eight, by_rows / 2, 1e-15);
  EXPECT_THROW(mtkd_kl_loss({{TaskId::offense, tape.constant(t)}}, {{TaskId::sexism, tape.leaf(s)}}, dc), ValidationError);
}

TEST(DistillConfig, Validation) {
  DistillConfig dc;
  EXPECT_EQ(dc.temperature, 4.0);
  EXPECT_EQ(dc.alpha, 0.6);
  dc.per_task_temperature[TaskId::emotion] = 7.0;
  EXPECT_EQ(dc.temperature_for(TaskId::emotion), 7.0);
  EXPECT_EQ(dc.temperature_for(TaskId::offense), 4.0);
  dc.alpha = 1.2;
  EXPECT_THROW(dc.validate(), ValidationError);
  dc.alpha = 0.5;
  dc.temperature = -1;
  EXPECT_THROW(dc.validate(), ValidationError);
}

TEST(SupervisedLoss, DispatchesOnKind) {
  Tape tape;
  const Tensor z = Tensor::matrix({{1.0, -0.5, 0.2}});
  const Tensor y = Tensor::matrix({{0, 1, 0}});
  Var p = ops::softmax(tape.leaf(z));
  EXPECT_EQ(value(supervised_loss(tape.leaf(z), y, LossKind::categorical_ce)), value(ce_loss(p, y)));
  EXPECT_EQ(value(supervised_loss(tape.leaf(z), y, LossKind::elementwise_bce)), value(bce_loss(p, y)));
}

}  // namespace
}  // namespace distilkit

// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "distilkit/adamw.hpp"
#include "distilkit/error.hpp"
#include "distilkit/gradcheck.hpp"
#include "distilkit/hash.hpp"
#include "distilkit/ops.hpp"
#include "distilkit/rng.hpp"
#include "support.hpp"

namespace distilkit {
namespace {

using testing::random_matrix;

TEST(Tensor, ShapeAndData) {
  Tensor t = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(t.shape(), (Shape{2, 3}));
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(t.at(1, 2), 6.0);
  EXPECT_EQ(t.row(1)[0], 4.0);
  EXPECT_EQ(Tensor::scalar(2.5).item(), 2.5);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  EXPECT_THROW(t.item(), ShapeError);
}

TEST(Tensor, ReshapeKeepsData) {
  Tensor t({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  t.reshape({3, 2});
  EXPECT_EQ(t.at(2, 1), 6.0);
  EXPECT_THROW(t.reshape({4, 2}), ShapeError);
}

TEST(Tensor, FiniteCheck) {
  Tensor t({2}, std::vector<double>{1.0, 2.0});
  EXPECT_TRUE(t.all_finite());
  t[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(t.all_finite());
}

TEST(Ops, MatmulIdentity) {
  Tape tape;
  Var a = tape.leaf(Tensor::matrix({{1, 2}, {3, 4}}));
  Var i = tape.leaf(Tensor::matrix({{1, 0}, {0, 1}}));
  EXPECT_EQ(ops::matmul(a, i).value(), a.value());
}

TEST(Ops, MatmulMatchesNaiveOnOddShapes) {
  SeededRng rng(4);
  for (auto [m, k, n] : {std::array<std::size_t, 3>{1, 1, 1}, {5, 7, 3}, {9, 13, 17}, {4, 8, 8}, {33, 2, 65}}) {
    Tape tape;
    const Tensor a = random_matrix(m, k, rng);
    const Tensor b = random_matrix(k, n, rng);
    const Tensor c = ops::matmul(tape.leaf(a), tape.leaf(b)).value();
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t col = 0; col < n; ++col) {
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s += a.at(r, j) * b.at(j, col);
        EXPECT_NEAR(c.at(r, col), s, 1e-12);
      }
    }
  }
}

TEST(Ops, SumOverAxis) {
  Tape tape;
  Var a = tape.leaf(Tensor::matrix({{1, 2}, {3, 4}}));
  EXPECT_EQ(ops::sum(a, 0).value().values(), (std::vector<double>{4, 6}));
  EXPECT_EQ(ops::sum(a, 1).value().values(), (std::vector<double>{3, 7}));
}

TEST(Ops, LayerNormOfConstantRowIsBeta) {
  Tape tape;
  Var x = tape.leaf(Tensor::matrix({{1, 1, 1}}));
  Var gamma = tape.leaf(Tensor::vector({1, 1, 1}));
  Var beta = tape.leaf(Tensor::vector({0, 0, 0}));
  const Tensor y = ops::layer_norm(x, gamma, beta, 1e-5).value();
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(Ops, LayerNormMatchesOracle) {
  Tape tape;
  const std::vector<double> row{0.5, -1.0, 2.0, 3.5};
  Var x = tape.leaf(Tensor({1, 4}, row));
  Var gamma = tape.leaf(Tensor::vector({1, 2, 1, 0.5}));
  Var beta = tape.leaf(Tensor::vector({0, 0.1, 0, -1}));
  const Tensor y = ops::layer_norm(x, gamma, beta, 1e-5).value();
  double mean = 0, var = 0;
  for (double v : row) mean += v / 4;
  for (double v : row) var += (v - mean) * (v - mean) / 4;
  const double g[] = {1, 2, 1, 0.5}, b[] = {0, 0.1, 0, -1};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(y[i], (row[i] - mean) / std::sqrt(var + 1e-5) * g[i] + b[i], 1e-12);
}

TEST(Ops, ShapeErrorNamesOpAndShapes) {
  Tape tape;
  Var a = tape.leaf(Tensor({2, 3}));
  Var b = tape.leaf(Tensor({2, 3}));
  try {
    ops::matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("matmul"), std::string::npos);
    EXPECT_NE(msg.find("[2,3]"), std::string::npos) << msg;
  }
  EXPECT_THROW(ops::add(a, tape.leaf(Tensor({3, 2}))), ShapeError);
}

TEST(Ops, LogRejectsNonPositive) {
  Tape tape;
  EXPECT_THROW(ops::log(tape.leaf(Tensor::vector({1.0, 0.0}))), NumericalError);
}

TEST(Ops, GeluAndRelu) {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({-1.0, 0.0, 2.0}));
  const Tensor r = ops::relu(x).value();
  EXPECT_EQ(r.values(), (std::vector<double>{0.0, 0.0, 2.0}));
  const Tensor g = ops::gelu(x).value();
  EXPECT_NEAR(g[0], -1.0 * 0.5 * (1 + std::erf(-1.0 / std::sqrt(2.0))), 1e-15);
  EXPECT_NEAR(g[2], 2.0 * 0.5 * (1 + std::erf(2.0 / std::sqrt(2.0))), 1e-15);
}

TEST(Ops, DropoutEvalIdentityAndDeterminism) {
  Tape tape;
  Var x = tape.leaf(Tensor({4, 5}, 1.0));
  SeededRng a(3), b(3);
  const Tensor da = ops::dropout(x, 0.5, a).value();
  const Tensor db = ops::dropout(x, 0.5, b).value();
  EXPECT_EQ(da, db);
  for (double v : da.data()) EXPECT_TRUE(v == 0.0 || v == 2.0);
  SeededRng c(3);
  EXPECT_EQ(ops::dropout(x, 0.0, c).value(), x.value());
}

TEST(Ops, SegmentAttentionMatchesDenseOracle) {
  SeededRng rng(8);
  const std::size_t d = 4, heads = 2;
  const Tensor q = random_matrix(5, d, rng), k = random_matrix(5, d, rng), v = random_matrix(5, d, rng);
  const std::vector<ops::AttentionSegment> segs{{0, 2, 0, 2}, {2, 3, 2, 3}};
  Tape tape;
  const Tensor out = ops::segment_attention(tape.leaf(q), tape.leaf(k), tape.leaf(v), segs, heads).value();
  const std::size_t dh = d / heads;
  for (const auto& s : segs) {
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = s.q_begin; i < s.q_begin + s.q_len; ++i) {
        std::vector<double> w;
        double mx = -1e300, z = 0;
        for (std::size_t j = s.k_begin; j < s.k_begin + s.k_len; ++j) {
          double dot = 0;
          for (std::size_t c = 0; c < dh; ++c) dot += q.at(i, h * dh + c) * k.at(j, h * dh + c);
          w.push_back(dot);
          mx = std::max(mx, dot);
        }
        for (double& x : w) z += (x = std::exp(x - mx));
        for (std::size_t c = 0; c < dh; ++c) {
          double want = 0;
          for (std::size_t j = 0; j < w.size(); ++j) want += w[j] / z * v.at(s.k_begin + j, h * dh + c);
          EXPECT_NEAR(out.at(i, h * dh + c), want, 1e-12);
        }
      }
    }
  }
}

TEST(Tape, LinearGradient) {
  Tape tape;
  Var w = tape.leaf(Tensor::vector({0.3, -1.0, 2.0}));
  Var x = tape.constant(Tensor::vector({1, 2, 3}));
  Var loss = ops::sum_all(ops::mul(w, x));
  tape.backward(loss);
  EXPECT_EQ(tape.grad(w).values(), (std::vector<double>{1, 2, 3}));
}

TEST(Tape, QuadraticGradient) {
  Tape tape;
  Var w = tape.leaf(Tensor::scalar(5.0));
  Var d = ops::add_scalar(w, -2.0);
  tape.backward(ops::mul(d, d));
  EXPECT_EQ(tape.grad(w).item(), 6.0);
}

TEST(Tape, RejectsNonScalarLoss) {
  Tape tape;
  Var w = tape.leaf(Tensor::vector({1, 2}));
  EXPECT_THROW(tape.backward(w), ShapeError);
}

TEST(Tape, UnreachableAndConstantInputs) {
  Tape tape;
  Var used = tape.leaf(Tensor::vector({1, 2}));
  Var unused = tape.leaf(Tensor::vector({3, 4}));
  Var frozen = tape.constant(Tensor::vector({5, 6}));
  Var loss = ops::sum_all(ops::mul(used, frozen));
  tape.backward(loss);
  EXPECT_EQ(tape.grad(unused).values(), (std::vector<double>{0, 0}));
  EXPECT_EQ(tape.grad(frozen).values(), (std::vector<double>{0, 0}));
  EXPECT_FALSE(frozen.requires_grad());
  EXPECT_EQ(tape.grad(used).values(), (std::vector<double>{5, 6}));
}

TEST(Tape, EachNodeVisitedOnce) {
  Tape tape;
  Var x = tape.leaf(Tensor::scalar(3.0));
  Var y = ops::mul(x, x);
  Var z = ops::add(y, y);  // y reached twice, visited once
  tape.backward(z);
  EXPECT_EQ(tape.grad(x).item(), 12.0);
  EXPECT_EQ(tape.backward_visits(), 2u);
}

TEST(Rng, SameSeedSameSequence) {
  SeededRng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto va = a.next_u64();
    EXPECT_EQ(va, b.next_u64());
    differs = differs || va != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, XoshiroReferenceOutput) {
  // Replays splitmix64 seeding and xoshiro256** by hand.
  std::uint64_t sm = 7;
  auto splitmix = [&sm] {
    std::uint64_t z = (sm += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t s[4] = {splitmix(), splitmix(), splitmix(), splitmix()};
  auto rotl = [](std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
  SeededRng rng(7);
  for (int i = 0; i < 16; ++i) {
    const std::uint64_t want = rotl(s[1] * 5, 7) * 9;
    const std::uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    EXPECT_EQ(rng.next_u64(), want);
  }
}

TEST(Rng, RangesAndSampling) {
  SeededRng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(rng.uniform_int(7), 7u);
  }
  auto sample = rng.sample_without_replacement(20, 20);
  std::sort(sample.begin(), sample.end());
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(sample[i], i);
  EXPECT_THROW(rng.sample_without_replacement(3, 4), ValidationError);
  EXPECT_NE(SeededRng::derive(1, {2, 3}), SeededRng::derive(1, {3, 2}));
}

TEST(AdamW, ZeroGradientNoDecayIsIdentity) {
  AdamW opt({.learning_rate = 0.1, .weight_decay = 0.0});
  ParamMap p{{"w", Tensor::vector({1.0, -2.0})}};
  const ParamMap before = p;
  opt.step(p, {{"w", Tensor::vector({0.0, 0.0})}});
  EXPECT_EQ(p, before);
  EXPECT_EQ(opt.step_count(), 1u);
}

TEST(AdamW, FirstStepMovesByLearningRate) {
  AdamW opt({.learning_rate = 0.1, .weight_decay = 0.0});
  ParamMap p{{"w", Tensor::scalar(0.5)}};
  opt.step(p, {{"w", Tensor::scalar(1.0)}});
  // m_hat = 1, v_hat = 1, so the step is lr / (1 + eps).
  EXPECT_NEAR(p.at("w").item(), 0.5 - 0.1 / (1.0 + 1e-8), 1e-15);
}

TEST(AdamW, PureDecay) {
  AdamW opt({.learning_rate = 0.1, .weight_decay = 0.01});
  ParamMap p{{"w", Tensor::vector({2.0, -4.0})}};
  opt.step(p, {{"w", Tensor::vector({0.0, 0.0})}});
  EXPECT_DOUBLE_EQ(p.at("w")[0], 2.0 * (1 - 0.1 * 0.01));
  EXPECT_DOUBLE_EQ(p.at("w")[1], -4.0 * (1 - 0.1 * 0.01));
}

TEST(AdamW, MatchesHandRolledRecurrence) {
  AdamWConfig cfg{.learning_rate = 0.01, .weight_decay = 0.1};
  AdamW opt(cfg);
  ParamMap p{{"w", Tensor::scalar(1.0)}};
  double w = 1.0, m = 0.0, v = 0.0;
  const double grads[] = {0.5, -1.0, 2.0, 0.25};
  for (int t = 1; t <= 4; ++t) {
    const double g = grads[t - 1];
    opt.step(p, {{"w", Tensor::scalar(g)}});
    w *= 1 - cfg.learning_rate * cfg.weight_decay;
    m = cfg.beta1 * m + (1 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1 - cfg.beta2) * g * g;
    const double mh = m / (1 - std::pow(cfg.beta1, t));
    const double vh = v / (1 - std::pow(cfg.beta2, t));
    w -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.epsilon);
    EXPECT_NEAR(p.at("w").item(), w, 1e-15);
  }
  EXPECT_EQ(opt.first_moment().at("w").shape(), p.at("w").shape());
}

TEST(AdamW, MissingGradientNamedAndNothingChanged) {
  AdamW opt({});
  ParamMap p{{"a", Tensor::scalar(1.0)}, {"b", Tensor::scalar(2.0)}};
  const ParamMap before = p;
  try {
    opt.step(p, {{"a", Tensor::scalar(1.0)}});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("b"), std::string::npos);
  }
  EXPECT_EQ(p, before);
  EXPECT_EQ(opt.step_count(), 0u);
}

TEST(GradCheck, SumOfSquares) {
  const auto r = check_gradients([](Tape&, Var x) { return ops::sum_all(ops::mul(x, x)); }, Tensor::vector({1, 2}), 1e-6);
  ASSERT_EQ(r.coordinates.size(), 2u);
  EXPECT_NEAR(r.coordinates[0].analytic, 2.0, 1e-12);
  EXPECT_NEAR(r.coordinates[1].analytic, 4.0, 1e-12);
  EXPECT_TRUE(r.passed);
}

TEST(GradCheck, DeadBranch) {
  const std::vector<Tensor> pts{Tensor::vector({1, 2}), Tensor::vector({3})};
  const auto r = check_gradients(
      MultiScalarFn([](Tape&, std::span<const Var> x) { return ops::sum_all(ops::exp(x[0])); }), pts, 1e-6);
  EXPECT_TRUE(r.passed);
  for (const auto& c : r.coordinates) {
    if (c.input == 1) {
      EXPECT_EQ(c.analytic, 0.0);
      EXPECT_EQ(c.numeric, 0.0);
    }
  }
}

// Every differentiable op against central differences.
TEST(GradCheck, EveryOp) {
  SeededRng rng(12);
  const Tensor a = random_matrix(3, 4, rng), b = random_matrix(3, 4, rng), w = random_matrix(4, 2, rng);
  Tensor pos = a;
  for (double& v : pos.data()) v = std::abs(v) + 0.5;
  auto check = [](const ScalarFn& fn, const Tensor& p) {
    const auto r = check_gradients(fn, p, 1e-3);
    EXPECT_TRUE(r.passed) << r.max_relative_error;
  };
  check([&](Tape& t, Var x) { return ops::sum_all(ops::mul(ops::add(x, t.constant(b)), ops::sub(x, t.constant(b)))); }, a);
  check([&](Tape& t, Var x) { return ops::sum_all(ops::exp(ops::matmul(x, t.constant(w)))); }, a);
  check([](Tape&, Var x) { return ops::sum_all(ops::log(x)); }, pos);
  check([](Tape&, Var x) { return ops::mean_all(ops::mul(ops::gelu(x), x)); }, a);
  check([](Tape&, Var x) { return ops::sum_all(ops::mul(ops::log_softmax(x), ops::softmax(x))); }, a);
  check([&](Tape& t, Var x) { return ops::sum_all(ops::mul(ops::sum(x, 0), ops::sum(t.constant(b), 0))); }, a);
  check([&](Tape& t, Var x) {
    Var y = ops::layer_norm(x, t.constant(Tensor::vector({1, 2, 3, 4})), t.constant(Tensor::vector({0, 1, 0, 1})));
    return ops::sum_all(ops::mul(y, t.constant(b)));
  }, a);
  check([&](Tape& t, Var x) {
    Var y = ops::bmm(ops::reshape(x, {1, 3, 4}), t.constant(Tensor({1, 3, 4}, b.values())), true);
    return ops::sum_all(ops::mul(y, y));
  }, a);
  const std::vector<std::uint8_t> mask{1, 1, 0, 1, 0, 0};
  check([&](Tape& t, Var x) {
    Var s = ops::masked_softmax(ops::reshape(x, {2, 2, 3}), mask, 1);
    return ops::sum_all(ops::mul(s, t.constant(Tensor({2, 2, 3}, b.values()))));
  }, a);
  const std::vector<ops::AttentionSegment> segs{{0, 2, 0, 2}, {2, 1, 1, 2}};
  check([&](Tape& t, Var x) {
    Var o = ops::segment_attention(x, ops::scale(x, 0.5), t.constant(b), segs, 2);
    return ops::sum_all(ops::mul(o, o));
  }, a);
  const std::vector<std::int32_t> ids{2, 0, 2};
  const std::vector<std::size_t> rows{1, 1, 0};
  check([&](Tape& t, Var x) {
    Var e = ops::embedding(x, ids);
    Var g = ops::gather_rows(x, rows);
    return ops::sum_all(ops::mul(ops::add(e, g), t.constant(b)));
  }, a);
  check([&](Tape& t, Var x) {
    Var h = ops::merge_heads(ops::split_heads(ops::add_bias(x, t.constant(Tensor::vector({1, 2, 3, 4}))), 3, 1, 2), 3, 1, 2);
    return ops::sum_all(ops::mul(h, ops::scale(ops::add_scalar(x, 1.0), 2.0)));
  }, a);
}

TEST(Hash, Fnv1aKnownValues) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

}  // namespace
}  // namespace distilkit

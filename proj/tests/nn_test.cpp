/*
 * Copyright 2026 The hcnn Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "hcnn/nn/layers.hpp"
#include "hcnn/nn/optim.hpp"
#include "hcnn/rng.hpp"

namespace hcnn::nn {
namespace {

Parameter random_param(const std::string& name, Shape shape, Rng& rng, double bound = 1.0) {
  Parameter p(name, std::move(shape));
  for (auto& v : p.value.values()) v = rng.uniform(-bound, bound);
  return p;
}

Tensor random_tensor(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

double sum(const Tensor& t) { return std::accumulate(t.values().begin(), t.values().end(), 0.0); }

double weighted_sum(const Tensor& t, const Tensor& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) s += t[i] * w[i];
  return s;
}

TEST(EmbeddingTest, Lookup) {
  Parameter table("e", {4, 2});
  table.value = Tensor({4, 2}, {0, 1, 2, 3, 4, 5, 6, 7});
  EXPECT_EQ(embedding_forward(std::vector<std::int32_t>{0, 0}, table), Tensor({2, 2}, {0, 1, 0, 1}));
  EXPECT_EQ(embedding_forward(std::vector<std::int32_t>{2, 3}, table), Tensor({2, 2}, {4, 5, 6, 7}));
  EXPECT_THROW(embedding_forward(std::vector<std::int32_t>{4}, table), IndexOutOfRange);
  EXPECT_THROW(embedding_forward(std::vector<std::int32_t>{-1}, table), IndexOutOfRange);
}

TEST(EmbeddingTest, BackwardAccumulatesRepeats) {
  Rng rng(1);
  auto table = random_param("e", {3, 2}, rng);
  const std::vector<std::int32_t> idx{1, 2, 1};
  embedding_backward(idx, Tensor({3, 2}, 1.0), table);
  EXPECT_EQ(table.grad, Tensor({3, 2}, {0, 0, 2, 2, 1, 1}));

  std::vector<Parameter*> ps{&table};
  const double err = grad_check(
      ps, [&] { return sum(embedding_forward(idx, table)); },
      [&] { embedding_backward(idx, Tensor({3, 2}, 1.0), table); });
  EXPECT_LT(err, 1e-7);
}

TEST(ConvTest, HandExample) {
  Parameter f("f", {1, 1, 2}), b("b", {1});
  f.value.fill(1.0);
  const Tensor in({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(conv1d_forward(in, f, b), Tensor({2, 1}, {3, 7}));
}

TEST(ConvTest, ZeroFiltersAndShapes) {
  Rng rng(2);
  Parameter f("f", {3, 2, 4}), b("b", {3});
  const auto out = conv1d_forward(random_tensor({6, 4}, rng), f, b);
  EXPECT_EQ(out, Tensor({5, 3}, 0.0));
  EXPECT_THROW(conv1d_forward(random_tensor({1, 4}, rng), f, b), DocumentTooShort);
  EXPECT_THROW(conv1d_forward(random_tensor({6, 3}, rng), f, b), ShapeMismatch);
}

TEST(ConvTest, MatchesDefinition) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t L = 3 + rng.below(6), d = 1 + rng.below(4), h = 1 + rng.below(3), m = 1 + rng.below(4);
    const auto in = random_tensor({L, d}, rng);
    auto f = random_param("f", {m, h, d}, rng);
    auto b = random_param("b", {m}, rng);
    const auto out = conv1d_forward(in, f, b);
    for (std::size_t t = 0; t + h <= L; ++t)
      for (std::size_t j = 0; j < m; ++j) {
        double z = b.value[j];
        for (std::size_t i = 0; i < h; ++i)
          for (std::size_t k = 0; k < d; ++k) z += f.value.at(j, i, k) * in.at(t + i, k);
        EXPECT_NEAR(out.at(t, j), z, 1e-12);
      }
  }
}

TEST(ConvTest, SumLossGradientIsSumOfWindows) {
  Rng rng(4);
  const auto in = random_tensor({5, 3}, rng);
  auto f = random_param("f", {2, 2, 3}, rng);
  auto b = random_param("b", {2}, rng);
  const Tensor ones({4, 2}, 1.0);
  f.zero_grad();
  b.zero_grad();
  conv1d_backward(in, f, b, ones, nullptr);
  for (std::size_t j = 0; j < 2; ++j)
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t k = 0; k < 3; ++k) {
        double expected = 0.0;
        for (std::size_t t = 0; t < 4; ++t) expected += in.at(t + i, k);
        EXPECT_NEAR(f.grad.at(j, i, k), expected, 1e-12);
      }
  std::vector<Parameter*> ps{&f, &b};
  const double err = grad_check(
      ps, [&] { return sum(conv1d_forward(in, f, b)); }, [&] { conv1d_backward(in, f, b, ones, nullptr); });
  EXPECT_LT(err, 1e-6);
}

TEST(ConvTest, InputGradientMatchesFiniteDifferences) {
  Rng rng(5);
  auto in = random_param("x", {6, 3}, rng);
  auto f = random_param("f", {2, 3, 3}, rng);
  auto b = random_param("b", {2}, rng);
  const auto w = random_tensor({4, 2}, rng);
  std::vector<Parameter*> ps{&in, &f, &b};
  const double err = grad_check(
      ps, [&] { return weighted_sum(conv1d_forward(in.value, f, b), w); },
      [&] {
        Tensor gi;
        conv1d_backward(in.value, f, b, w, &gi);
        for (std::size_t i = 0; i < gi.size(); ++i) in.grad[i] += gi[i];
      });
  EXPECT_LT(err, 1e-6);
}

TEST(PoolTest, Examples) {
  const auto r = max_over_time_pool(Tensor({2, 2}, {1, 5, 3, 2}));
  EXPECT_EQ(r.values, Tensor({2}, {3, 5}));
  EXPECT_EQ(r.argmax, (std::vector<std::size_t>{1, 0}));
  const auto single = max_over_time_pool(Tensor({1, 3}, {4, -1, 2}));
  EXPECT_EQ(single.values, Tensor({3}, {4, -1, 2}));
  const auto tie = max_over_time_pool(Tensor({3, 1}, {2, 2, 2}));
  EXPECT_EQ(tie.argmax[0], 0u);
}

TEST(PoolTest, BackwardRoutesToArgmaxAndConservesMass) {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t T = 1 + rng.below(8), m = 1 + rng.below(5);
    const auto in = random_tensor({T, m}, rng);
    const auto up = random_tensor({m}, rng);
    const auto r = max_over_time_pool(in);
    const auto g = max_pool_backward(up, r.argmax, T);
    EXPECT_NEAR(sum(g), sum(up), 1e-12);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t j = 0; j < m; ++j) EXPECT_EQ(g.at(t, j), t == r.argmax[j] ? up[j] : 0.0);
  }
}

TEST(PoolTest, FiniteDifferenceThroughPool) {
  Rng rng(7);
  auto x = random_param("x", {5, 3}, rng);
  const auto w = random_tensor({3}, rng);
  std::vector<Parameter*> ps{&x};
  const double err = grad_check(
      ps, [&] { return weighted_sum(max_over_time_pool(x.value).values, w); },
      [&] {
        const auto r = max_over_time_pool(x.value);
        const auto g = max_pool_backward(w, r.argmax, 5);
        for (std::size_t i = 0; i < g.size(); ++i) x.grad[i] += g[i];
      });
  EXPECT_LT(err, 1e-6);
}

TEST(DenseTest, Examples) {
  Parameter w("w", {2, 2}), b("b", {2});
  w.value = Tensor({2, 2}, {1, 0, 0, 1});
  const Tensor x({2}, {-1, 2});
  EXPECT_EQ(dense_forward(x, w, b, Activation::None), x);
  EXPECT_EQ(dense_forward(x, w, b, Activation::Relu), Tensor({2}, {0, 2}));
  EXPECT_THROW(dense_forward(Tensor({3}), w, b, Activation::None), ShapeMismatch);
}

TEST(DenseTest, MatchesMatrixVectorOracle) {
  Rng rng(8);
  const auto w = random_param("w", {3, 4}, rng);
  const auto b = random_param("b", {3}, rng);
  const auto x = random_tensor({4}, rng);
  const auto y = dense_forward(x, w, b, Activation::None);
  for (std::size_t i = 0; i < 3; ++i) {
    double z = b.value[i];
    for (std::size_t j = 0; j < 4; ++j) z += w.value.at(i, j) * x[j];
    EXPECT_NEAR(y[i], z, 1e-12);
  }
}

TEST(DenseTest, LinearLayerGradientIsExact) {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(6), p = 1 + rng.below(6);
    auto x = random_param("x", {n}, rng);
    auto w = random_param("w", {p, n}, rng);
    auto b = random_param("b", {p}, rng);
    const auto up = random_tensor({p}, rng);
    std::vector<Parameter*> ps{&x, &w, &b};
    const double err = grad_check(
        ps, [&] { return weighted_sum(dense_forward(x.value, w, b, Activation::None), up); },
        [&] {
          Tensor gi;
          const auto out = dense_forward(x.value, w, b, Activation::None);
          dense_backward(x.value, out, w, b, Activation::None, up, &gi);
          for (std::size_t i = 0; i < n; ++i) x.grad[i] += gi[i];
        },
        1e-3);  // central differences are exact on an affine map, so a wide step only cuts rounding
    EXPECT_LT(err, 1e-7);
  }
}

TEST(DropoutTest, IdentityCases) {
  Rng rng(10);
  const auto x = random_tensor({50}, rng);
  EXPECT_EQ(dropout(x, 0.5, false, rng).output, x);
  EXPECT_EQ(dropout(x, 0.0, true, rng).output, x);
  EXPECT_EQ(dropout(x, 0.0, false, rng).output, x);
}

TEST(DropoutTest, Statistics) {
  Rng rng(11);
  const auto r = dropout(Tensor({10000}, 1.0), 0.5, true, rng);
  const double mean = sum(r.output) / 10000.0;
  const double zeros =
      static_cast<double>(std::count(r.output.values().begin(), r.output.values().end(), 0.0)) / 10000.0;
  EXPECT_NEAR(mean, 1.0, 0.05);
  EXPECT_NEAR(zeros, 0.5, 0.05);
  for (double v : r.output.values()) EXPECT_TRUE(v == 0.0 || v == 2.0);
}

TEST(DropoutTest, DeterministicPerSeed) {
  Rng a(12), b(12);
  const Tensor x({100}, 1.0);
  EXPECT_EQ(dropout(x, 0.3, true, a).output, dropout(x, 0.3, true, b).output);
}

TEST(SoftmaxTest, Examples) {
  const auto s = softmax_cross_entropy(Tensor({4}, 0.7), 2);
  for (double p : s.prob.values()) EXPECT_DOUBLE_EQ(p, 0.25);
  EXPECT_NEAR(s.loss, 1.386294, 1e-6);
  const auto big = softmax_cross_entropy(Tensor({2}, {1000, 0}), 0);
  EXPECT_NEAR(big.loss, 0.0, 1e-12);
  EXPECT_TRUE(big.prob.all_finite());
  EXPECT_THROW(softmax_cross_entropy(Tensor({2}), 2), IndexOutOfRange);
}

TEST(SoftmaxTest, ProbabilitiesSumToOne) {
  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    Tensor logits({1 + rng.below(10)});
    for (auto& v : logits.values()) v = rng.uniform(-50, 50);
    Tensor p;
    softmax(logits, p);
    EXPECT_NEAR(sum(p), 1.0, 1e-12);
    for (double v : p.values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(SoftmaxTest, GradientMatchesFiniteDifferences) {
  Rng rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t c = 2 + rng.below(6);
    auto z = random_param("z", {c}, rng, 3.0);
    const std::size_t gold = rng.below(c);
    std::vector<Parameter*> ps{&z};
    const double err = grad_check(
        ps, [&] { return softmax_cross_entropy(z.value, gold).loss; },
        [&] {
          const auto s = softmax_cross_entropy(z.value, gold);
          for (std::size_t i = 0; i < c; ++i) z.grad[i] += s.grad_logits[i];
        });
    EXPECT_LT(err, 1e-6);
  }
}

TEST(AdadeltaTest, FirstStepFromZeroState) {
  Parameter p("p", {1});
  p.grad[0] = 1.0;
  adadelta_step(p, 0.95, 1e-6);
  EXPECT_NEAR(p.acc_grad_sq[0], 0.05, 1e-15);
  const double delta = -std::sqrt(1e-6) / std::sqrt(0.050001);
  EXPECT_NEAR(delta, -0.0044721, 1e-7);
  EXPECT_NEAR(p.value[0], delta, 1e-15);
  EXPECT_NEAR(p.acc_delta_sq[0], 0.05 * delta * delta, 1e-18);
  EXPECT_EQ(p.grad[0], 0.0);
}

TEST(AdadeltaTest, ZeroGradientOnlyDecays) {
  Rng rng(15);
  auto p = random_param("p", {10}, rng);
  for (auto& v : p.acc_grad_sq.values()) v = rng.uniform(0, 1);
  for (auto& v : p.acc_delta_sq.values()) v = rng.uniform(0, 1);
  const auto before = p;
  adadelta_step(p, 0.95, 1e-6);
  EXPECT_EQ(p.value, before.value);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_DOUBLE_EQ(p.acc_grad_sq[i], 0.95 * before.acc_grad_sq[i]);
    EXPECT_DOUBLE_EQ(p.acc_delta_sq[i], 0.95 * before.acc_delta_sq[i]);
  }
}

TEST(AdadeltaTest, StepOpposesGradient) {
  Rng rng(16);
  for (int trial = 0; trial < 50; ++trial) {
    auto p = random_param("p", {8}, rng);
    for (auto& v : p.acc_grad_sq.values()) v = rng.uniform(0, 1);
    for (auto& v : p.acc_delta_sq.values()) v = rng.uniform(0, 1);
    const auto g = random_tensor({8}, rng);
    p.grad = g;
    const auto before = p.value;
    adadelta_step(p);
    for (std::size_t i = 0; i < 8; ++i)
      if (g[i] != 0.0) {
        EXPECT_LT((p.value[i] - before[i]) * g[i], 0.0);
      }
  }
}

TEST(GradCheckTest, EmptyFragmentIsZero) {
  std::vector<Parameter*> none;
  EXPECT_EQ(grad_check(none, [] { return 1.0; }, [] {}), 0.0);
}

TEST(GradCheckTest, DetectsWrongGradientAndNonFinite) {
  Parameter p("p", {2});
  p.value = Tensor({2}, {1.0, 2.0});
  std::vector<Parameter*> ps{&p};
  auto loss = [&] { return p.value[0] * p.value[0] + p.value[1]; };
  EXPECT_LT(grad_check(ps, loss, [&] { p.grad[0] = 2 * p.value[0]; p.grad[1] = 1; }), 1e-8);
  EXPECT_GT(grad_check(ps, loss, [&] { p.grad[0] = 3 * p.value[0]; p.grad[1] = 1; }), 0.1);
  EXPECT_THROW(grad_check(ps, [] { return std::nan(""); }, [] {}), NonFiniteValue);
}

// Embedding -> conv -> pool -> relu dense -> dense -> cross-entropy on random
// small shapes, composed directly from the layer functions.
TEST(GradCheckTest, RandomLayerStacks) {
  Rng rng(17);
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t V = 3 + rng.below(5), d = 1 + rng.below(4), h = 1 + rng.below(3), m = 1 + rng.below(4);
    const std::size_t L = h + rng.below(5), hidden = 1 + rng.below(5), c = 2 + rng.below(3);
    auto emb = random_param("emb", {V, d}, rng, 0.5);
    auto f = random_param("f", {m, h, d}, rng, 0.5);
    auto fb = random_param("fb", {m}, rng, 0.1);
    auto w1 = random_param("w1", {hidden, m}, rng, 0.8);
    auto b1 = random_param("b1", {hidden}, rng, 0.1);
    auto w2 = random_param("w2", {c, hidden}, rng, 0.8);
    auto b2 = random_param("b2", {c}, rng, 0.1);
    std::vector<std::int32_t> idx(L);
    for (auto& i : idx) i = static_cast<std::int32_t>(rng.below(V));
    const std::size_t gold = rng.below(c);

    auto run = [&](bool grads) {
      const auto x = embedding_forward(idx, emb);
      const auto conv = conv1d_forward(x, f, fb);
      const auto pool = max_over_time_pool(conv);
      const auto hid = dense_forward(pool.values, w1, b1, Activation::Relu);
      const auto out = dense_forward(hid, w2, b2, Activation::None);
      const auto s = softmax_cross_entropy(out, gold);
      if (grads) {
        Tensor g_hid, g_pool, g_x;
        dense_backward(hid, out, w2, b2, Activation::None, s.grad_logits, &g_hid);
        dense_backward(pool.values, hid, w1, b1, Activation::Relu, g_hid, &g_pool);
        const auto g_conv = max_pool_backward(g_pool, pool.argmax, conv.dim(0));
        conv1d_backward(x, f, fb, g_conv, &g_x);
        embedding_backward(idx, g_x, emb);
      }
      return s.loss;
    };
    std::vector<Parameter*> ps{&emb, &f, &fb, &w1, &b1, &w2, &b2};
    const double err = grad_check(ps, [&] { return run(false); }, [&] { run(true); });
    EXPECT_LT(err, 1e-4) << "trial " << trial;
    ++checked;
  }
  EXPECT_GE(checked, 50);
}

}  // namespace
}  // namespace hcnn::nn

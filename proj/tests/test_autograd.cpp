#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "v2ir/autograd.hpp"
#include "v2ir/grad_check.hpp"
#include "v2ir/param_store.hpp"
#include "v2ir/rng.hpp"

namespace {

using v2ir::backward;
using v2ir::constant;
using v2ir::leaf;
using v2ir::make_tensor;
using v2ir::ParamStore;
using v2ir::Rng;
using v2ir::scalar_of;
using v2ir::Shape;
using v2ir::Tensor;
using v2ir::Value;

template <class T>
Tensor<T> random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(std::move(s));
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// Definition-based sliding-window reference: walks every output coordinate
// and sums in-bounds input*weight products directly.
template <class T>
Tensor<T> conv2d_reference(const Tensor<T>& x, const Tensor<T>& w, const std::vector<T>& bias,
                           int s, int p) {
  const int N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
  const int O = w.shape[0], KH = w.shape[2], KW = w.shape[3];
  const int OH = (H + 2 * p - KH) / s + 1;
  const int OW = (W + 2 * p - KW) / s + 1;
  Tensor<T> y(Shape{N, O, OH, OW});
  for (int n = 0; n < N; ++n)
    for (int o = 0; o < O; ++o)
      for (int oh = 0; oh < OH; ++oh)
        for (int ow = 0; ow < OW; ++ow) {
          T acc = bias.empty() ? T(0) : bias[o];
          for (int c = 0; c < C; ++c)
            for (int kh = 0; kh < KH; ++kh)
              for (int kw = 0; kw < KW; ++kw) {
                const int ih = oh * s - p + kh;
                const int iw = ow * s - p + kw;
                if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                acc += x.at(n, c, ih, iw) * w.at(o, c, kh, kw);
              }
          y.at(n, o, oh, ow) = acc;
        }
  return y;
}

TEST(Conv2d, IdentityKernel) {
  Rng rng(1, "conv-id");
  auto x = constant(random_tensor<double>({2, 3, 5, 5}, rng));
  Tensor<double> w(Shape{3, 3, 1, 1});
  for (int o = 0; o < 3; ++o) w.at(o, o, 0, 0) = 1.0;
  auto y = v2ir::conv2d(x, constant(std::move(w)), constant(Tensor<double>(Shape{3})), 1, 0);
  EXPECT_EQ(y->value->shape, x->value->shape);
  for (std::size_t i = 0; i < x->value->data.size(); ++i)
    EXPECT_DOUBLE_EQ(y->value->data[i], x->value->data[i]);
}

TEST(Conv2d, ZeroWeightGivesBias) {
  Rng rng(2, "conv-zero");
  auto x = constant(random_tensor<double>({1, 2, 4, 4}, rng));
  auto y = v2ir::conv2d(x, constant(Tensor<double>(Shape{2, 2, 3, 3})),
                        constant(Tensor<double>(Shape{2}, std::vector<double>{1.5, -0.5})), 1, 1);
  for (int h = 0; h < 4; ++h)
    for (int w = 0; w < 4; ++w) {
      EXPECT_DOUBLE_EQ(y->value->at(0, 0, h, w), 1.5);
      EXPECT_DOUBLE_EQ(y->value->at(0, 1, h, w), -0.5);
    }
}

TEST(Conv2d, HandWorkedWindow) {
  auto x = constant(Tensor<double>(Shape{1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4}));
  auto w = constant(Tensor<double>(Shape{1, 1, 2, 2}, std::vector<double>{1, 0, 0, 1}));
  auto y = v2ir::conv2d(x, w, constant(Tensor<double>(Shape{1})), 1, 0);
  ASSERT_EQ(y->value->shape, (Shape{1, 1, 1, 1}));
  EXPECT_DOUBLE_EQ(y->value->data[0], 5.0);  // 1*1 + 4*1
}

TEST(Conv2d, MatchesSlidingWindowReference) {
  Rng rng(3, "conv-ref");
  for (int trial = 0; trial < 25; ++trial) {
    const int N = rng.range_int(1, 2), C = rng.range_int(1, 3), O = rng.range_int(1, 3);
    const int K = rng.range_int(1, 4), s = rng.range_int(1, 3), p = rng.range_int(0, 2);
    const int H = rng.range_int(K, K + 5), W = rng.range_int(K, K + 5);
    if ((H + 2 * p - K) / s + 1 <= 0 || (W + 2 * p - K) / s + 1 <= 0) continue;
    auto xt = random_tensor<double>({N, C, H, W}, rng);
    auto wt = random_tensor<double>({O, C, K, K}, rng);
    auto bt = random_tensor<double>({O}, rng);
    const auto ref = conv2d_reference(xt, wt, bt.data, s, p);
    auto y = v2ir::conv2d(constant(xt), constant(wt), constant(bt), s, p);
    ASSERT_EQ(y->value->shape, ref.shape);
    for (std::size_t i = 0; i < ref.data.size(); ++i)
      ASSERT_NEAR(y->value->data[i], ref.data[i], 1e-12);
  }
}

TEST(Conv2d, RejectsBadShapes) {
  auto x = constant(Tensor<double>(Shape{1, 2, 4, 4}, 1.0));
  auto w = constant(Tensor<double>(Shape{1, 3, 3, 3}, 1.0));  // wants 3 in-channels
  EXPECT_THROW(v2ir::conv2d(x, w, Value<double>{}, 1, 1), std::invalid_argument);
  auto w2 = constant(Tensor<double>(Shape{1, 2, 5, 5}, 1.0));
  EXPECT_THROW(v2ir::conv2d(x, w2, Value<double>{}, 1, 0), std::invalid_argument);
}

TEST(ConvTranspose2d, OneByOneKernelScales) {
  Rng rng(4, "convt-scale");
  auto x = constant(random_tensor<double>({1, 1, 3, 3}, rng));
  auto w = constant(Tensor<double>(Shape{1, 1, 1, 1}, std::vector<double>{2.5}));
  auto y = v2ir::conv_transpose2d(x, w, Value<double>{}, 1, 0);
  ASSERT_EQ(y->value->shape, x->value->shape);
  for (std::size_t i = 0; i < x->value->data.size(); ++i)
    EXPECT_DOUBLE_EQ(y->value->data[i], 2.5 * x->value->data[i]);
}

TEST(ConvTranspose2d, ShapeFormula) {
  auto x = constant(Tensor<double>(Shape{1, 1, 4, 4}, 1.0));
  auto w = constant(Tensor<double>(Shape{1, 1, 4, 4}, 0.1));
  auto y = v2ir::conv_transpose2d(x, w, Value<double>{}, 2, 1);
  EXPECT_EQ(y->value->shape, (Shape{1, 1, 8, 8}));  // (4-1)*2 - 2 + 4
}

TEST(ConvTranspose2d, AdjointOfConv2d) {
  // <conv2d(x; w), y> == <x, conv_transpose2d(y; w)> for the same weight
  // buffer ([O,C,KH,KW] read as [CI=O,CO=C,KH,KW]); bias excluded.
  Rng rng(5, "adjoint");
  int tested = 0;
  while (tested < 50) {
    const int N = rng.range_int(1, 2), C = rng.range_int(1, 3), O = rng.range_int(1, 3);
    const int K = rng.range_int(1, 4), s = rng.range_int(1, 3), p = rng.range_int(0, 2);
    const int H0 = rng.range_int(K, K + 6), W0 = rng.range_int(K, K + 6);
    // Snap extents so conv covers the input exactly; otherwise the map back
    // lands in a smaller space and the identity is not defined.
    const int H = H0 - (H0 + 2 * p - K) % s;
    const int W = W0 - (W0 + 2 * p - K) % s;
    if (H < K - 2 * p || H < 1 || W < 1) continue;
    const int OH = (H + 2 * p - K) / s + 1, OW = (W + 2 * p - K) / s + 1;
    if (OH <= 0 || OW <= 0) continue;
    if ((OH - 1) * s - 2 * p + K != H) continue;
    ++tested;

    auto xt = random_tensor<double>({N, C, H, W}, rng);
    auto wt = random_tensor<double>({O, C, K, K}, rng);
    auto yt = random_tensor<double>({N, O, OH, OW}, rng);

    auto ax = v2ir::conv2d(constant(xt), constant(wt), Value<double>{}, s, p);
    Tensor<double> wt_t(Shape{O, C, K, K}, wt.data);  // same buffer, adjoint layout
    auto aty = v2ir::conv_transpose2d(constant(yt), constant(std::move(wt_t)), Value<double>{},
                                      s, p);
    ASSERT_EQ(aty->value->shape, xt.shape);

    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < yt.data.size(); ++i) lhs += ax->value->data[i] * yt.data[i];
    for (std::size_t i = 0; i < xt.data.size(); ++i) rhs += xt.data[i] * aty->value->data[i];
    ASSERT_NEAR(lhs, rhs, 1e-6 * std::max(1.0, std::abs(lhs)));
  }
  EXPECT_EQ(tested, 50);
}

TEST(InstanceNorm, ConstantChannelGivesBeta) {
  auto x = constant(Tensor<double>(Shape{1, 2, 3, 3}, 4.2));
  auto g = constant(Tensor<double>(Shape{2}, 1.0));
  auto b = constant(Tensor<double>(Shape{2}, std::vector<double>{0.3, -0.7}));
  auto y = v2ir::instance_norm(x, g, b, 1e-5);
  for (int i = 0; i < 9; ++i) {
    EXPECT_NEAR(y->value->at(0, 0, i / 3, i % 3), 0.3, 1e-12);
    EXPECT_NEAR(y->value->at(0, 1, i / 3, i % 3), -0.7, 1e-12);
  }
}

TEST(InstanceNorm, StandardizesPerChannel) {
  Rng rng(6, "inorm");
  auto x = constant(random_tensor<double>({2, 3, 8, 8}, rng, -3.0, 5.0));
  auto g = constant(Tensor<double>(Shape{3}, 1.0));
  auto b = constant(Tensor<double>(Shape{3}, 0.0));
  auto y = v2ir::instance_norm(x, g, b, 1e-5);
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c) {
      double mean = 0.0, var = 0.0;
      for (int h = 0; h < 8; ++h)
        for (int w = 0; w < 8; ++w) mean += y->value->at(n, c, h, w);
      mean /= 64.0;
      for (int h = 0; h < 8; ++h)
        for (int w = 0; w < 8; ++w) {
          const double d = y->value->at(n, c, h, w) - mean;
          var += d * d;
        }
      var /= 64.0;
      EXPECT_NEAR(mean, 0.0, 1e-6);
      EXPECT_NEAR(var, 1.0, 1e-4);
    }
}

TEST(InstanceNorm, TwoPointChannel) {
  auto x = constant(Tensor<double>(Shape{1, 1, 1, 2}, std::vector<double>{1.0, 3.0}));
  auto g = constant(Tensor<double>(Shape{1}, 1.0));
  auto b = constant(Tensor<double>(Shape{1}, 0.0));
  auto y = v2ir::instance_norm(x, g, b, 1e-12);
  EXPECT_NEAR(y->value->data[0], -1.0, 1e-6);
  EXPECT_NEAR(y->value->data[1], 1.0, 1e-6);
}

TEST(Activations, PointValuesAndRanges) {
  auto x = constant(Tensor<double>(Shape{3}, std::vector<double>{-1.0, 0.0, 50.0}));
  auto sg = v2ir::sigmoid_act(x);
  EXPECT_DOUBLE_EQ(sg->value->data[1], 0.5);
  auto lr = v2ir::leaky_relu(x, 0.2);
  EXPECT_DOUBLE_EQ(lr->value->data[0], -0.2);
  EXPECT_DOUBLE_EQ(lr->value->data[2], 50.0);
  auto rl = v2ir::relu(x);
  EXPECT_DOUBLE_EQ(rl->value->data[0], 0.0);
  auto th = v2ir::tanh_act(x);
  for (double v : th->value->data) {
    EXPECT_GT(v, -1.0);
    EXPECT_LT(v, 1.0);
  }
  EXPECT_THROW(v2ir::leaky_relu(x, -0.1), std::invalid_argument);
  EXPECT_THROW(v2ir::leaky_relu(x, 1.0), std::invalid_argument);
}

TEST(Backward, LinearAndPolynomial) {
  auto xt = make_tensor<double>(Shape{3}, std::vector<double>{1.0, 2.0, -3.0});
  auto x = leaf(xt);
  backward(v2ir::sum_all(x));
  for (double g : xt->grad) EXPECT_DOUBLE_EQ(g, 1.0);

  auto pt = make_tensor<double>(Shape{2}, std::vector<double>{1.0, 2.0});
  auto p = leaf(pt);
  backward(v2ir::sum_all(v2ir::mul(p, p)));
  EXPECT_DOUBLE_EQ(pt->grad[0], 2.0);
  EXPECT_DOUBLE_EQ(pt->grad[1], 4.0);
}

TEST(Backward, OverwritesNotAccumulates) {
  auto xt = make_tensor<double>(Shape{2}, std::vector<double>{1.0, 1.0});
  auto x = leaf(xt);
  backward(v2ir::sum_all(x));
  backward(v2ir::sum_all(x));
  for (double g : xt->grad) EXPECT_DOUBLE_EQ(g, 1.0);
}

TEST(Backward, RejectsNonScalarAndNonFinite) {
  auto x = leaf(make_tensor<double>(Shape{2}, 1.0));
  EXPECT_THROW(backward(x), std::invalid_argument);
  auto y = leaf(make_tensor<double>(Shape{1}, std::numeric_limits<double>::infinity()));
  EXPECT_THROW(backward(y), v2ir::numeric_error);
}

TEST(Backward, SharedParameterAccumulatesWithinOneCall) {
  // The same tensor used through two leaves must collect both contributions.
  auto pt = make_tensor<double>(Shape{1}, std::vector<double>{3.0});
  auto a = leaf(pt);
  auto b = leaf(pt);
  backward(v2ir::sum_all(v2ir::mul(a, b)));  // d(p*p)/dp = 2p
  EXPECT_DOUBLE_EQ(pt->grad[0], 6.0);
}

TEST(GradCheckSuite, LinearIsExact) {
  ParamStore<double> params;
  Rng rng(7, "lin");
  auto w = params.add("w", random_tensor<double>({5}, rng));
  auto c = constant(random_tensor<double>({5}, rng));
  const double err = v2ir::grad_check<double>(
      [&] { return v2ir::sum_all(v2ir::mul(leaf(w), c)); }, params, 1e-5);
  EXPECT_LT(err, 1e-9);
}

TEST(GradCheckSuite, CompositeConvLeakyReluMean) {
  ParamStore<double> params;
  Rng rng(8, "conv-grad");
  auto w = params.add("w", random_tensor<double>({2, 3, 3, 3}, rng, -0.5, 0.5));
  auto b = params.add("b", random_tensor<double>({2}, rng, -0.5, 0.5));
  auto x = params.add("x", random_tensor<double>({1, 3, 8, 8}, rng));
  const double err = v2ir::grad_check<double>(
      [&] {
        return v2ir::mean_all(
            v2ir::leaky_relu(v2ir::conv2d(leaf(x), leaf(w), leaf(b), 2, 1), 0.2));
      },
      params, 1e-5);
  EXPECT_LT(err, 1e-4);
}

TEST(GradCheckSuite, EveryLayerOp) {
  Rng rng(9, "ops");
  // >= 20 random trials spread across the op set, all on small shapes.
  for (int trial = 0; trial < 24; ++trial) {
    ParamStore<double> params;
    const int which = trial % 8;
    double err = 0.0;
    switch (which) {
      case 0: {  // conv2d, random geometry
        const int s = rng.range_int(1, 2), p = rng.range_int(0, 1);
        auto x = params.add("x", random_tensor<double>({1, 2, 6, 6}, rng));
        auto w = params.add("w", random_tensor<double>({2, 2, 3, 3}, rng, -0.5, 0.5));
        auto b = params.add("b", random_tensor<double>({2}, rng, -0.5, 0.5));
        err = v2ir::grad_check<double>(
            [&] { return v2ir::mean_all(v2ir::conv2d(leaf(x), leaf(w), leaf(b), s, p)); },
            params, 1e-5);
        break;
      }
      case 1: {  // conv_transpose2d
        const int s = rng.range_int(1, 2), p = rng.range_int(0, 1);
        auto x = params.add("x", random_tensor<double>({1, 2, 4, 4}, rng));
        auto w = params.add("w", random_tensor<double>({2, 3, 3, 3}, rng, -0.5, 0.5));
        auto b = params.add("b", random_tensor<double>({3}, rng, -0.5, 0.5));
        err = v2ir::grad_check<double>(
            [&] {
              return v2ir::mean_all(v2ir::conv_transpose2d(leaf(x), leaf(w), leaf(b), s, p));
            },
            params, 1e-5);
        break;
      }
      case 2: {  // instance_norm; position-dependent head so the x-gradient
                 // is not suppressed by the standardization's invariances
        auto x = params.add("x", random_tensor<double>({2, 2, 4, 4}, rng));
        auto g = params.add("g", random_tensor<double>({2}, rng, 0.5, 1.5));
        auto b = params.add("b", random_tensor<double>({2}, rng, -0.5, 0.5));
        auto c = constant(random_tensor<double>({2, 2, 4, 4}, rng, 0.5, 1.5));
        err = v2ir::grad_check<double>(
            [&] {
              auto y = v2ir::instance_norm(leaf(x), leaf(g), leaf(b), 1e-5);
              return v2ir::mean_all(v2ir::mul(c, v2ir::mul(y, y)));
            },
            params, 1e-6);
        break;
      }
      case 3: {  // activations; keep inputs away from relu kinks
        auto x = params.add("x", random_tensor<double>({3, 5}, rng, 0.2, 2.0));
        auto xn = params.add("xn", random_tensor<double>({3, 5}, rng, -2.0, -0.2));
        err = v2ir::grad_check<double>(
            [&] {
              auto a = v2ir::relu(leaf(x));
              auto b = v2ir::leaky_relu(leaf(xn), 0.2);
              auto c = v2ir::tanh_act(leaf(x));
              auto d = v2ir::sigmoid_act(leaf(xn));
              return v2ir::mean_all(v2ir::add(v2ir::add(a, b), v2ir::add(c, d)));
            },
            params, 1e-5);
        break;
      }
      case 4: {  // concat + elementwise arithmetic
        auto a = params.add("a", random_tensor<double>({1, 2, 3, 3}, rng));
        auto b = params.add("b", random_tensor<double>({1, 3, 3, 3}, rng));
        err = v2ir::grad_check<double>(
            [&] {
              auto cat = v2ir::concat_channels(leaf(a), leaf(b));
              return v2ir::mean_all(v2ir::mul(cat, cat));
            },
            params, 1e-5);
        break;
      }
      case 5: {  // abs / clamp away from their kinks, plus scale and rsub
        auto x = params.add("x", random_tensor<double>({7}, rng, 0.3, 0.7));
        err = v2ir::grad_check<double>(
            [&] {
              auto v = v2ir::absolute(v2ir::rsub_const(1.0, v2ir::scale(leaf(x), 0.5)));
              return v2ir::sum_all(v2ir::clamp(v, 0.0, 10.0));
            },
            params, 1e-5);
        break;
      }
      case 6: {  // log of positive values
        auto x = params.add("x", random_tensor<double>({6}, rng, 0.2, 0.9));
        err = v2ir::grad_check<double>(
            [&] { return v2ir::mean_all(v2ir::log_nat(leaf(x))); }, params, 1e-6);
        break;
      }
      case 7: {  // sub + mul + mean chain
        auto a = params.add("a", random_tensor<double>({4, 4}, rng));
        auto b = params.add("b", random_tensor<double>({4, 4}, rng));
        err = v2ir::grad_check<double>(
            [&] {
              auto d = v2ir::sub(leaf(a), leaf(b));
              return v2ir::mean_all(v2ir::mul(d, d));
            },
            params, 1e-5);
        break;
      }
    }
    ASSERT_LT(err, 1e-4) << "op case " << which << " trial " << trial;
  }
}

TEST(GradCheckSuite, DetectsCorruptedGradient) {
  // A doctored backward (incoming gradient scaled by 2) must be flagged.
  ParamStore<double> params;
  Rng rng(10, "bad");
  auto w = params.add("w", random_tensor<double>({4}, rng, 0.5, 1.5));
  auto corrupt = [&]() -> Value<double> {
    auto s = v2ir::sum_all(v2ir::mul(leaf(w), leaf(w)));
    return v2ir::make_node<double>(
        make_tensor<double>(Shape{1}, std::vector<double>{s->value->data[0]}), {s},
        [](v2ir::Node<double>& self) {
          self.inputs[0]->value->grad[0] += 2.0 * self.value->grad[0];
        });
  };
  const double err = v2ir::grad_check<double>(corrupt, params, 1e-5);
  EXPECT_GT(err, 0.1);
}

TEST(Determinism, Float32TrainingStepBitExact) {
  auto run = [] {
    Rng rng(77, "step");
    ParamStore<float> params;
    auto w = params.add("w", v2ir::gaussian_init<float>({2, 1, 3, 3}, 0.0, 0.02, rng));
    auto b = params.add("b", v2ir::gaussian_init<float>({2}, 0.0, 0.02, rng));
    auto x = constant(v2ir::gaussian_init<float>({1, 1, 6, 6}, 0.0, 1.0, rng));
    for (int i = 0; i < 3; ++i) {
      auto y = v2ir::tanh_act(v2ir::conv2d(x, leaf(w), leaf(b), 1, 1));
      backward(v2ir::mean_all(v2ir::mul(y, y)));
      params.sgd_step(0.05f);
    }
    return params.value_digest();
  };
  EXPECT_EQ(run(), run());
}

TEST(Finiteness, OpsPreserveFiniteness) {
  Rng rng(11, "fin");
  auto x = constant(random_tensor<double>({1, 2, 8, 8}, rng, -5.0, 5.0));
  auto w = constant(random_tensor<double>({3, 2, 4, 4}, rng, -2.0, 2.0));
  auto y = v2ir::conv2d(x, w, Value<double>{}, 2, 1);
  auto z = v2ir::sigmoid_act(v2ir::tanh_act(y));
  EXPECT_TRUE(z->value->all_finite());
}

}  // namespace

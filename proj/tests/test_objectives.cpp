#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "v2ir/grad_check.hpp"
#include "v2ir/objectives.hpp"
#include "v2ir/rng.hpp"

namespace {

using v2ir::constant;
using v2ir::GanMode;
using v2ir::leaf;
using v2ir::LossWeights;
using v2ir::ParamStore;
using v2ir::Rng;
using v2ir::scalar_of;
using v2ir::Shape;
using v2ir::Tensor;
using v2ir::Value;

constexpr double kLn2 = 0.6931471805599453;

Value<double> prob_map(double v, Shape s = Shape{1, 1, 2, 2}) {
  return constant(Tensor<double>(std::move(s), v));
}

TEST(DLoss, PerfectDiscriminatorNearZero) {
  const double v = scalar_of(v2ir::d_loss(prob_map(1.0), prob_map(0.0)));
  EXPECT_GE(v, 0.0);
  EXPECT_LT(v, 1e-6);
}

TEST(DLoss, UninformativePointIsTwoLnTwo) {
  const double v = scalar_of(v2ir::d_loss(prob_map(0.5), prob_map(0.5)));
  EXPECT_NEAR(v, 2.0 * kLn2, 1e-9);
}

TEST(DLoss, InvariantUnderPatchPermutation) {
  Tensor<double> a(Shape{1, 1, 2, 2}, std::vector<double>{0.1, 0.4, 0.7, 0.9});
  Tensor<double> b(Shape{1, 1, 2, 2}, std::vector<double>{0.9, 0.1, 0.7, 0.4});
  Tensor<double> f(Shape{1, 1, 2, 2}, std::vector<double>{0.2, 0.3, 0.5, 0.8});
  Tensor<double> g(Shape{1, 1, 2, 2}, std::vector<double>{0.8, 0.5, 0.2, 0.3});
  EXPECT_DOUBLE_EQ(scalar_of(v2ir::d_loss(constant(a), constant(f))),
                   scalar_of(v2ir::d_loss(constant(b), constant(g))));
}

TEST(DLoss, RejectsOutOfRangeValues) {
  EXPECT_THROW(v2ir::d_loss(prob_map(1.2), prob_map(0.5)), std::invalid_argument);
  EXPECT_THROW(v2ir::d_loss(prob_map(0.5), prob_map(-0.1)), std::invalid_argument);
}

TEST(DLoss, IdealAssignmentAttainsGridInfimum) {
  // Over constant patch maps with values on a 0.01 grid, the minimum of
  // d_loss sits at (d_real, d_fake) = (1, 0).
  double best = 1e300;
  int best_i = -1, best_j = -1;
  for (int i = 0; i <= 100; ++i)
    for (int j = 0; j <= 100; ++j) {
      const double v = scalar_of(v2ir::d_loss(prob_map(i / 100.0), prob_map(j / 100.0)));
      if (v < best) {
        best = v;
        best_i = i;
        best_j = j;
      }
    }
  EXPECT_EQ(best_i, 100);
  EXPECT_EQ(best_j, 0);
}

TEST(GAdvLoss, ZeroCasesAndHalfPoint) {
  EXPECT_NEAR(scalar_of(v2ir::g_adv_loss(prob_map(0.0), GanMode::minimax)), 0.0, 1e-6);
  EXPECT_NEAR(scalar_of(v2ir::g_adv_loss(prob_map(1.0), GanMode::non_saturating)), 0.0, 1e-6);
  EXPECT_NEAR(scalar_of(v2ir::g_adv_loss(prob_map(0.5), GanMode::minimax)), -kLn2, 1e-12);
  EXPECT_NEAR(scalar_of(v2ir::g_adv_loss(prob_map(0.5), GanMode::non_saturating)), kLn2, 1e-12);
}

TEST(L1Term, EndpointsAndHomogeneity) {
  Rng rng(1, "l1");
  Tensor<double> y(Shape{2, 1, 3, 3});
  for (auto& v : y.data) v = rng.uniform(-1.0, 1.0);
  EXPECT_DOUBLE_EQ(scalar_of(v2ir::l1_term(constant(y), constant(y))), 0.0);

  EXPECT_DOUBLE_EQ(scalar_of(v2ir::l1_term(constant(Tensor<double>(Shape{4}, -1.0)),
                                           constant(Tensor<double>(Shape{4}, 1.0)))),
                   2.0);

  Tensor<double> a(Shape{5}), b(Shape{5}), ah(Shape{5}), bh(Shape{5});
  for (int i = 0; i < 5; ++i) {
    a.data[i] = rng.uniform(-1.0, 1.0);
    b.data[i] = rng.uniform(-1.0, 1.0);
    ah.data[i] = 0.5 * a.data[i];
    bh.data[i] = 0.5 * b.data[i];
  }
  EXPECT_NEAR(scalar_of(v2ir::l1_term(constant(ah), constant(bh))),
              0.5 * scalar_of(v2ir::l1_term(constant(a), constant(b))), 1e-12);
}

TEST(L1MetricPercent, DefinitionAndProperties) {
  Tensor<double> black(Shape{1, 1, 4, 4}, 0.0);
  Tensor<double> white(Shape{1, 1, 4, 4}, 1.0);
  EXPECT_DOUBLE_EQ(v2ir::l1_metric_percent(black, black), 0.0);
  EXPECT_DOUBLE_EQ(v2ir::l1_metric_percent(black, white), 100.0);
  Tensor<double> off(Shape{1, 1, 4, 4}, 0.25);
  EXPECT_DOUBLE_EQ(v2ir::l1_metric_percent(black, off), 25.0);
  // Symmetric, bounded, zero iff equal.
  Rng rng(2, "m");
  Tensor<double> u(Shape{9}), v(Shape{9});
  for (int i = 0; i < 9; ++i) {
    u.data[i] = rng.uniform(0.0, 1.0);
    v.data[i] = rng.uniform(0.0, 1.0);
  }
  EXPECT_DOUBLE_EQ(v2ir::l1_metric_percent(u, v), v2ir::l1_metric_percent(v, u));
  EXPECT_GE(v2ir::l1_metric_percent(u, v), 0.0);
  EXPECT_LE(v2ir::l1_metric_percent(u, v), 100.0);
  EXPECT_GT(v2ir::l1_metric_percent(u, v), 0.0);
  Tensor<double> w(Shape{2});
  EXPECT_THROW(v2ir::l1_metric_percent(u, w), std::invalid_argument);
}

TEST(CycleTerm, DefinitionAndLinearity) {
  Tensor<double> x(Shape{2, 2}, 0.5), x_rec(Shape{2, 2}, 0.25);
  Tensor<double> y(Shape{3}, -0.1), y_rec(Shape{3}, -0.1);
  const double v10 = scalar_of(v2ir::cycle_term(constant(x), constant(x_rec), constant(y),
                                                constant(y_rec), 10.0));
  EXPECT_NEAR(v10, 2.5, 1e-12);
  const double v20 = scalar_of(v2ir::cycle_term(constant(x), constant(x_rec), constant(y),
                                                constant(y_rec), 20.0));
  EXPECT_NEAR(v20, 2.0 * v10, 1e-12);
  const double vid = scalar_of(v2ir::cycle_term(constant(x), constant(x), constant(y),
                                                constant(y), 10.0));
  EXPECT_DOUBLE_EQ(vid, 0.0);
}

TEST(CganObjective, DirectEvaluations) {
  LossWeights w;  // non_saturating, lambda_l1 = 100
  // Perfect fooling (d_fake = 1) and exact reconstruction.
  Tensor<double> y(Shape{1, 1, 2, 2}, 0.3);
  const double near0 =
      scalar_of(v2ir::cgan_g_objective(prob_map(1.0), constant(y), constant(y), w));
  EXPECT_NEAR(near0, 0.0, 1e-6);

  // d_fake = 0.5, mean|y_hat - y| = 0.1 -> ln 2 + 100 * 0.1.
  Tensor<double> y_hat(Shape{1, 1, 2, 2}, 0.4);
  const double v =
      scalar_of(v2ir::cgan_g_objective(prob_map(0.5), constant(y_hat), constant(y), w));
  EXPECT_NEAR(v, kLn2 + 10.0, 1e-9);

  LossWeights w0 = w;
  w0.lambda_l1 = 0.0;
  const double adv_only =
      scalar_of(v2ir::cgan_g_objective(prob_map(0.5), constant(y_hat), constant(y), w0));
  EXPECT_NEAR(adv_only, kLn2, 1e-12);
}

TEST(LossGradients, AllLossesPassGradCheck) {
  Rng rng(3, "loss-grad");
  ParamStore<double> params;
  auto fill = [&](Shape s, double lo, double hi) {
    Tensor<double> t(std::move(s));
    for (auto& v : t.data) v = rng.uniform(lo, hi);
    return t;
  };
  auto dr = params.add("dr", fill({1, 1, 2, 2}, 0.15, 0.85));
  auto df = params.add("df", fill({1, 1, 2, 2}, 0.15, 0.85));
  auto yh = params.add("yh", fill({1, 1, 3, 3}, -0.8, 0.8));
  auto yt = params.add("yt", fill({1, 1, 3, 3}, -0.8, 0.8));
  auto xr = params.add("xr", fill({1, 1, 3, 3}, -0.8, 0.8));

  const double e1 = v2ir::grad_check<double>(
      [&] { return v2ir::d_loss(leaf(dr), leaf(df)); }, params, 1e-6);
  EXPECT_LT(e1, 1e-4);

  const double e2 = v2ir::grad_check<double>(
      [&] { return v2ir::g_adv_loss(leaf(df), GanMode::minimax); }, params, 1e-6);
  EXPECT_LT(e2, 1e-4);

  const double e3 = v2ir::grad_check<double>(
      [&] { return v2ir::g_adv_loss(leaf(df), GanMode::non_saturating); }, params, 1e-6);
  EXPECT_LT(e3, 1e-4);

  const double e4 = v2ir::grad_check<double>(
      [&] { return v2ir::l1_term(leaf(yh), leaf(yt)); }, params, 1e-6);
  EXPECT_LT(e4, 1e-4);

  const double e5 = v2ir::grad_check<double>(
      [&] { return v2ir::cycle_term(leaf(yh), leaf(yt), leaf(xr), leaf(yh), 10.0); }, params,
      1e-6);
  EXPECT_LT(e5, 1e-4);

  LossWeights w;
  const double e6 = v2ir::grad_check<double>(
      [&] { return v2ir::cgan_g_objective(leaf(df), leaf(yh), leaf(yt), w); }, params, 1e-6);
  EXPECT_LT(e6, 1e-4);
}

TEST(LossReportDefaults, StartFiniteAndZero) {
  v2ir::LossReport r;
  EXPECT_EQ(r.d_loss, 0.0);
  EXPECT_EQ(r.g_adv, 0.0);
  EXPECT_EQ(r.g_l1, 0.0);
  EXPECT_EQ(r.cyc_ab, 0.0);
  EXPECT_EQ(r.cyc_ba, 0.0);
}

}  // namespace

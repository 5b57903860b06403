#pragma once

#include <cmath>
#include <cstdlib>

#include "v2ir/autograd.hpp"

namespace v2ir {

enum class GanMode { minimax, non_saturating };

// The adversarial-loss weights are not dictated by the training equations;
// defaults follow the conditional / cycle-consistent conventions.
struct LossWeights {
  double lambda_l1 = 100.0;
  double lambda_cyc = 10.0;
  GanMode g_adv_mode = GanMode::non_saturating;
};

// Per-step loss summary; unused entries stay 0.
struct LossReport {
  double d_loss = 0.0;
  double g_adv = 0.0;
  double g_l1 = 0.0;
  double cyc_ab = 0.0;
  double cyc_ba = 0.0;
};

// Inputs to logarithms are kept this far from {0, 1}.
constexpr double kProbEps = 1e-7;

namespace detail {

template <class T>
void check_prob_map(const Value<T>& v, const char* who) {
  for (T x : v->value->data)
    require(x >= T(0) && x <= T(1), std::string(who) + ": values must be in [0,1]");
}

template <class T>
Value<T> mean_log_prob(const Value<T>& p) {
  return mean_all(log_nat(clamp(p, static_cast<T>(kProbEps), static_cast<T>(1.0 - kProbEps))));
}

template <class T>
Value<T> mean_abs_diff(const Value<T>& a, const Value<T>& b) {
  return mean_all(absolute(sub(a, b)));
}

}  // namespace detail

// Discriminator loss: -mean log D(real) - mean log(1 - D(fake)). Minimizing
// this maximizes the discriminator side of the adversarial objective.
template <class T>
Value<T> d_loss(const Value<T>& d_real, const Value<T>& d_fake) {
  detail::check_prob_map(d_real, "d_loss");
  detail::check_prob_map(d_fake, "d_loss");
  return scale(add(detail::mean_log_prob(d_real),
                   detail::mean_log_prob(rsub_const(T(1), d_fake))),
               T(-1));
}

// Generator adversarial term. minimax is the literal mean log(1 - D(fake));
// non_saturating is -mean log D(fake), the same optimum with usable early
// gradients.
template <class T>
Value<T> g_adv_loss(const Value<T>& d_fake, GanMode mode) {
  detail::check_prob_map(d_fake, "g_adv_loss");
  switch (mode) {
    case GanMode::minimax:
      return detail::mean_log_prob(rsub_const(T(1), d_fake));
    case GanMode::non_saturating:
      return scale(detail::mean_log_prob(d_fake), T(-1));
  }
  std::abort();  // unreachable
}

// Mean absolute difference on the generator's tanh scale.
template <class T>
Value<T> l1_term(const Value<T>& y_hat, const Value<T>& y) {
  return detail::mean_abs_diff(y_hat, y);
}

// Evaluation metric: 100 * mean |a - b| with both inputs on the [0,1] pixel
// scale. Plain number, no graph.
template <class T>
double l1_metric_percent(const Tensor<T>& y_hat, const Tensor<T>& y) {
  require(same_shape(y_hat, y), "l1_metric_percent: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < y_hat.data.size(); ++i)
    acc += std::abs(static_cast<double>(y_hat.data[i]) - static_cast<double>(y.data[i]));
  return 100.0 * acc / static_cast<double>(y_hat.numel());
}

// lambda_cyc * (mean|x - x_rec| + mean|y - y_rec|).
template <class T>
Value<T> cycle_term(const Value<T>& x, const Value<T>& x_rec, const Value<T>& y,
                    const Value<T>& y_rec, T lambda_cyc) {
  return scale(add(detail::mean_abs_diff(x, x_rec), detail::mean_abs_diff(y, y_rec)),
               lambda_cyc);
}

// Conditional-generator objective: adversarial term plus weighted L1 towards
// the ground truth.
template <class T>
Value<T> cgan_g_objective(const Value<T>& d_fake, const Value<T>& y_hat, const Value<T>& y,
                          const LossWeights& w) {
  return add(g_adv_loss(d_fake, w.g_adv_mode),
             scale(l1_term(y_hat, y), static_cast<T>(w.lambda_l1)));
}

}  // namespace v2ir

#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "v2ir/autograd.hpp"
#include "v2ir/param_store.hpp"

namespace v2ir {

// Compares backward() gradients against central finite differences for every
// coordinate of every parameter in the store. `f` must rebuild the graph from
// the current parameter values and return a scalar. Returns the maximum
// relative error, with denominator max(|analytic|, |numeric|, 1e-8).
template <class T>
double grad_check(const std::function<Value<T>()>& f, ParamStore<T>& params, double eps) {
  require(eps > 0.0, "grad_check: eps must be > 0");

  auto eval = [&f]() -> double {
    auto v = f();
    const double x = static_cast<double>(scalar_of(v));
    if (!std::isfinite(x)) throw numeric_error("grad_check: non-finite loss");
    return x;
  };

  // Parameters the loss never touches have true gradient zero; clear any
  // state a previous backward left behind so the snapshot reflects f alone.
  for (const auto& [name, t] : params) t->zero_grad();

  auto loss = f();
  if (!std::isfinite(static_cast<double>(scalar_of(loss))))
    throw numeric_error("grad_check: non-finite loss");
  backward(loss);

  std::vector<std::vector<T>> analytic;
  analytic.reserve(params.size());
  for (const auto& [name, t] : params)
    analytic.push_back(t->has_grad() ? t->grad : std::vector<T>(t->data.size(), T(0)));

  double max_rel = 0.0;
  std::size_t k = 0;
  for (const auto& [name, t] : params) {
    for (std::size_t i = 0; i < t->data.size(); ++i) {
      const T orig = t->data[i];
      t->data[i] = orig + static_cast<T>(eps);
      const double lp = eval();
      t->data[i] = orig - static_cast<T>(eps);
      const double lm = eval();
      t->data[i] = orig;
      const double fd = (lp - lm) / (2.0 * eps);
      const double an = static_cast<double>(analytic[k][i]);
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
      max_rel = std::max(max_rel, std::abs(fd - an) / denom);
    }
    ++k;
  }
  return max_rel;
}

}  // namespace v2ir

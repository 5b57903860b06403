#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "v2ir/common.hpp"
#include "v2ir/tensor.hpp"

namespace v2ir {

// Ordered, uniquely named parameter collection. Iteration order is the
// insertion order, which keeps serialization and SGD traversal stable
// across runs.
template <class T>
class ParamStore {
 public:
  TensorPtr<T> add(const std::string& name, Tensor<T> t) {
    require(index_.find(name) == index_.end(), "duplicate parameter name: " + name);
    auto ptr = std::make_shared<Tensor<T>>(std::move(t));
    index_.emplace(name, items_.size());
    items_.emplace_back(name, ptr);
    return ptr;
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  const TensorPtr<T>& get(const std::string& name) const {
    auto it = index_.find(name);
    require(it != index_.end(), "unknown parameter: " + name);
    return items_[it->second].second;
  }

  std::size_t size() const { return items_.size(); }

  std::int64_t total_values() const {
    std::int64_t n = 0;
    for (const auto& [name, t] : items_) n += t->numel();
    return n;
  }

  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  // p <- p - lr * grad for every parameter. Plain SGD, no momentum.
  void sgd_step(T lr) {
    require(lr >= T(0), "sgd_step: lr must be >= 0");
    for (auto& [name, t] : items_) {
      if (t->grad.size() != t->data.size())
        throw numeric_error("sgd_step: missing gradient for parameter " + name);
      for (std::size_t i = 0; i < t->data.size(); ++i) t->data[i] -= lr * t->grad[i];
    }
  }

  // Digest over parameter values only (not grads); used by alternation and
  // persistence checks.
  std::uint64_t value_digest() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& [name, t] : items_) {
      h = fnv1a64(name, h);
      h = fnv1a64(t->data.data(), t->data.size() * sizeof(T), h);
    }
    return h;
  }

 private:
  std::vector<std::pair<std::string, TensorPtr<T>>> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

template <class T>
void sgd_step(ParamStore<T>& params, T lr) {
  params.sgd_step(lr);
}

}  // namespace v2ir

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "emoseq/tensor.hpp"

namespace emoseq {

// Named trainable tensors with gradient accumulators and Adam moments.
// Entry order is insertion order and fixed for the life of the store, so
// optimizer sweeps are deterministic.
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor m;  // Adam first moment
    Tensor v;  // Adam second moment
    int64_t step = 0;
    bool touched = false;  // gradient received since last optimizer step
  };

  int add(const std::string& name, Tensor init) {
    if (index_.count(name)) throw ValidationError("duplicate parameter: " + name);
    Entry e;
    e.name = name;
    e.grad = Tensor(init.dims);
    e.m = Tensor(init.dims);
    e.v = Tensor(init.dims);
    e.value = std::move(init);
    entries_.push_back(std::move(e));
    index_[name] = int(entries_.size()) - 1;
    return int(entries_.size()) - 1;
  }

  int find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
  }

  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  Entry& entry(int idx) { return entries_[size_t(idx)]; }
  const Entry& entry(int idx) const { return entries_[size_t(idx)]; }

  Entry& at(const std::string& name) {
    int idx = find(name);
    if (idx < 0) throw ValidationError("unknown parameter: " + name);
    return entries_[size_t(idx)];
  }
  const Entry& at(const std::string& name) const {
    return const_cast<ParameterStore*>(this)->at(name);
  }

  const Tensor& value(const std::string& name) const { return at(name).value; }

  size_t size() const { return entries_.size(); }

  void accumulate(int idx, const Tensor& grad) {
    Entry& e = entries_[size_t(idx)];
    if (!e.grad.same_dims(grad)) {
      throw ValidationError("gradient dims " + dims_str(grad.dims) +
                            " do not match parameter " + e.name + " " +
                            dims_str(e.value.dims));
    }
    for (size_t i = 0; i < grad.size(); ++i) e.grad.data[i] += grad.data[i];
    e.touched = true;
  }

  void clear_gradients() {
    for (auto& e : entries_) {
      std::fill(e.grad.data.begin(), e.grad.data.end(), 0.0f);
      e.touched = false;
    }
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, int> index_;
};

// Bias-corrected Adam on every parameter that received a gradient since the
// last step; untouched parameters are left alone, including their moments and
// step counters. Gradients are cleared afterwards.
inline void adam_step(ParameterStore& store, float lr, float beta1, float beta2,
                      float epsilon = 1e-8f) {
  for (size_t idx = 0; idx < store.size(); ++idx) {
    auto& e = store.entry(int(idx));
    if (!e.touched) continue;
    e.step += 1;
    const double bc1 = 1.0 - std::pow(double(beta1), double(e.step));
    const double bc2 = 1.0 - std::pow(double(beta2), double(e.step));
    for (size_t i = 0; i < e.value.size(); ++i) {
      const float g = e.grad.data[i];
      e.m.data[i] = beta1 * e.m.data[i] + (1.0f - beta1) * g;
      e.v.data[i] = beta2 * e.v.data[i] + (1.0f - beta2) * g * g;
      const float mhat = float(double(e.m.data[i]) / bc1);
      const float vhat = float(double(e.v.data[i]) / bc2);
      e.value.data[i] -= lr * mhat / (std::sqrt(vhat) + epsilon);
    }
    std::fill(e.grad.data.begin(), e.grad.data.end(), 0.0f);
    e.touched = false;
  }
}

}  // namespace emoseq

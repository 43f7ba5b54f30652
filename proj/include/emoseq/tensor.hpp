#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "emoseq/common.hpp"

namespace emoseq {

inline std::string dims_str(const std::vector<int>& dims) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < dims.size(); ++i) os << (i ? "x" : "") << dims[i];
  os << "]";
  return os.str();
}

// Dense row-major float32 tensor.
struct Tensor {
  std::vector<int> dims;
  std::vector<float> data;

  Tensor() = default;

  explicit Tensor(std::vector<int> d) : dims(std::move(d)) {
    data.assign(checked_numel(dims), 0.0f);
  }

  Tensor(std::vector<int> d, std::vector<float> values)
      : dims(std::move(d)), data(std::move(values)) {
    if (data.size() != checked_numel(dims)) {
      throw ValidationError("tensor data size " + std::to_string(data.size()) +
                            " does not match dims " + dims_str(dims));
    }
  }

  static Tensor zeros(std::vector<int> d) { return Tensor(std::move(d)); }

  static Tensor full(std::vector<int> d, float value) {
    Tensor t(std::move(d));
    for (auto& x : t.data) x = value;
    return t;
  }

  static Tensor scalar(float value) { return Tensor({1}, {value}); }

  size_t size() const { return data.size(); }
  int rank() const { return int(dims.size()); }
  int dim(int i) const { return dims[size_t(i)]; }
  int last_dim() const { return dims.empty() ? 1 : dims.back(); }

  // Product of all dims except the last; the "row count" for row-wise ops.
  size_t rows() const { return dims.empty() ? 1 : size() / size_t(last_dim()); }

  bool same_dims(const Tensor& o) const { return dims == o.dims; }

  float& operator[](size_t i) { return data[i]; }
  float operator[](size_t i) const { return data[i]; }

  static size_t checked_numel(const std::vector<int>& dims) {
    size_t n = 1;
    for (int d : dims) {
      if (d <= 0) throw ValidationError("non-positive tensor dim in " + dims_str(dims));
      n *= size_t(d);
    }
    return n;
  }
};

}  // namespace emoseq

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "emoseq/optimizer.hpp"
#include "emoseq/tensor.hpp"

namespace emoseq {

enum class Op : uint8_t {
  Leaf,
  MatMul,
  Add,
  Sub,
  Mul,
  Div,
  ScalarMul,
  ConcatLast,
  SliceLast,
  Tanh,
  Sigmoid,
  Sqrt,
  Square,
  Abs,
  SumAll,
  MeanAll,
  RowSum,
  RowMean,
};

// Handle to a node on a Graph's tape.
struct Val {
  int id = -1;
};

namespace detail {

// C[M,N] += A[M,K] * B[K,N]
inline void matmul_nn_acc(const float* A, const float* B, float* C, int M, int K, int N) {
  for (int i = 0; i < M; ++i) {
    const float* a = A + size_t(i) * K;
    float* c = C + size_t(i) * N;
    for (int k = 0; k < K; ++k) {
      const float av = a[k];
      const float* b = B + size_t(k) * N;
      for (int j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

// C[M,K] += A[M,N] * B[K,N]^T
// The reduction runs in eight independent lanes (fixed association, so the
// result is deterministic) which lets the compiler vectorize the dot product.
inline void matmul_nt_acc(const float* A, const float* B, float* C, int M, int N, int K) {
  for (int i = 0; i < M; ++i) {
    const float* a = A + size_t(i) * N;
    float* c = C + size_t(i) * K;
    for (int k = 0; k < K; ++k) {
      const float* b = B + size_t(k) * N;
      float lanes[8] = {0, 0, 0, 0, 0, 0, 0, 0};
      int j = 0;
      for (; j + 8 <= N; j += 8)
        for (int l = 0; l < 8; ++l) lanes[l] += a[j + l] * b[j + l];
      float acc = ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) +
                  ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
      for (; j < N; ++j) acc += a[j] * b[j];
      c[k] += acc;
    }
  }
}

// C[K,N] += A[M,K]^T * B[M,N]
inline void matmul_tn_acc(const float* A, const float* B, float* C, int M, int K, int N) {
  for (int i = 0; i < M; ++i) {
    const float* a = A + size_t(i) * K;
    const float* b = B + size_t(i) * N;
    for (int k = 0; k < K; ++k) {
      const float av = a[k];
      float* c = C + size_t(k) * N;
      for (int j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

}  // namespace detail

// Eager tape: every operation computes its forward value immediately and
// records a node, so graph construction can branch on computed values.
// Backward visits nodes once, in reverse recording order. A Graph and its
// ParameterStore belong to a single thread.
class Graph {
 public:
  Graph() = default;
  explicit Graph(ParameterStore* store) : store_(store) {}

  // Restricts which store parameters receive gradients; others enter the
  // tape as constants. Used to freeze D while updating G/E/M and vice versa.
  void set_trainable_filter(std::function<bool(const std::string&)> filter) {
    trainable_filter_ = std::move(filter);
  }

  size_t node_count() const { return nodes_.size(); }

  // Read-only view of a recorded node, for inspection and replay by tests.
  struct NodeView {
    Op op;
    int a, b;
    float c0;
    int i0, i1;
    const Tensor* value;
  };
  NodeView node(size_t i) const {
    const Node& n = nodes_[i];
    return {n.op, n.a, n.b, n.c0, n.i0, n.i1, &n.value};
  }

  const Tensor& value(Val v) const { return nodes_[size_t(v.id)].value; }
  const Tensor& grad(Val v) const { return nodes_[size_t(v.id)].grad; }
  float scalar_value(Val v) const { return nodes_[size_t(v.id)].value.data[0]; }

  Val leaf(Tensor t, bool requires_grad = false) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(t);
    n.requires_grad = requires_grad;
    return push(std::move(n));
  }

  Val constant(Tensor t) { return leaf(std::move(t), false); }

  // Leaf backed by a named store parameter; gradients accumulate into the
  // store on backward() unless the trainable filter excludes the name.
  Val param(const std::string& name) {
    if (!store_) throw ValidationError("graph has no parameter store");
    int idx = store_->find(name);
    if (idx < 0) throw ValidationError("unknown parameter: " + name);
    bool trainable = !trainable_filter_ || trainable_filter_(name);
    Node n;
    n.op = Op::Leaf;
    n.value = store_->entry(idx).value;
    n.requires_grad = trainable;
    n.param = trainable ? idx : -1;
    return push(std::move(n));
  }

  Val matmul(Val a, Val b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (ta.rank() != 2 || tb.rank() != 2 || ta.dim(1) != tb.dim(0)) {
      throw ValidationError("matmul dims incompatible: " + dims_str(ta.dims) + " x " +
                            dims_str(tb.dims));
    }
    const int m = ta.dim(0), k = ta.dim(1), n = tb.dim(1);
    Node node = binary_node(Op::MatMul, a, b, Tensor({m, n}));
    detail::matmul_nn_acc(ta.data.data(), tb.data.data(), node.value.data.data(), m, k, n);
    return push(std::move(node));
  }

  Val add(Val a, Val b) { return binary_ew(Op::Add, a, b); }
  Val sub(Val a, Val b) { return binary_ew(Op::Sub, a, b); }
  Val mul(Val a, Val b) { return binary_ew(Op::Mul, a, b); }
  Val div(Val a, Val b) { return binary_ew(Op::Div, a, b); }

  Val scalar_mul(Val a, float c) {
    Node n = unary_node(Op::ScalarMul, a);
    n.c0 = c;
    for (auto& x : n.value.data) x *= c;
    return push(std::move(n));
  }

  Val concat_last(Val a, Val b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    bool ok = ta.rank() == tb.rank() && ta.rank() >= 1;
    for (int i = 0; ok && i + 1 < ta.rank(); ++i) ok = ta.dim(i) == tb.dim(i);
    if (!ok) {
      throw ValidationError("concat-last-axis dims incompatible: " + dims_str(ta.dims) +
                            " vs " + dims_str(tb.dims));
    }
    std::vector<int> dims = ta.dims;
    dims.back() = ta.last_dim() + tb.last_dim();
    Node n = binary_node(Op::ConcatLast, a, b, Tensor(dims));
    const size_t rows = ta.rows();
    const int la = ta.last_dim(), lb = tb.last_dim();
    for (size_t r = 0; r < rows; ++r) {
      float* out = n.value.data.data() + r * size_t(la + lb);
      const float* pa = ta.data.data() + r * size_t(la);
      const float* pb = tb.data.data() + r * size_t(lb);
      for (int j = 0; j < la; ++j) out[j] = pa[j];
      for (int j = 0; j < lb; ++j) out[la + j] = pb[j];
    }
    return push(std::move(n));
  }

  // Slice [start, start+len) along the last axis.
  Val slice_last(Val a, int start, int len) {
    const Tensor& ta = value(a);
    if (start < 0 || len <= 0 || start + len > ta.last_dim()) {
      throw ValidationError("slice [" + std::to_string(start) + "," +
                            std::to_string(start + len) + ") out of range for " +
                            dims_str(ta.dims));
    }
    std::vector<int> dims = ta.dims;
    dims.back() = len;
    Node n = unary_node(Op::SliceLast, a, Tensor(dims));
    n.i0 = start;
    n.i1 = len;
    const size_t rows = ta.rows();
    const int ld = ta.last_dim();
    for (size_t r = 0; r < rows; ++r) {
      const float* src = ta.data.data() + r * size_t(ld) + start;
      float* dst = n.value.data.data() + r * size_t(len);
      for (int j = 0; j < len; ++j) dst[j] = src[j];
    }
    return push(std::move(n));
  }

  Val tanh(Val a) {
    Node n = unary_node(Op::Tanh, a);
    for (auto& x : n.value.data) x = std::tanh(x);
    return push(std::move(n));
  }

  Val sigmoid(Val a) {
    Node n = unary_node(Op::Sigmoid, a);
    for (auto& x : n.value.data) x = 1.0f / (1.0f + std::exp(-x));
    return push(std::move(n));
  }

  Val sqrt(Val a) {
    Node n = unary_node(Op::Sqrt, a);
    for (auto& x : n.value.data) x = std::sqrt(x);
    return push(std::move(n));
  }

  Val square(Val a) {
    Node n = unary_node(Op::Square, a);
    for (auto& x : n.value.data) x = x * x;
    return push(std::move(n));
  }

  Val abs(Val a) {
    Node n = unary_node(Op::Abs, a);
    for (auto& x : n.value.data) x = std::fabs(x);
    return push(std::move(n));
  }

  Val sum_all(Val a) { return reduce_all(Op::SumAll, a); }
  Val mean_all(Val a) { return reduce_all(Op::MeanAll, a); }

  Val row_sum(Val a) { return reduce_rows(Op::RowSum, a); }
  Val row_mean(Val a) { return reduce_rows(Op::RowMean, a); }

  // Reverse pass from a scalar root. Gradients of parameter leaves are added
  // into the store's accumulators; repeated backward calls keep accumulating
  // until the optimizer clears them.
  void backward(Val root) {
    Node& r = nodes_[size_t(root.id)];
    if (r.value.size() != 1) {
      throw ValidationError("backward root must be scalar, got " + dims_str(r.value.dims));
    }
    if (!r.requires_grad) return;
    for (auto& n : nodes_) n.grad = Tensor();
    ensure_grad(r);
    r.grad.data[0] = 1.0f;
    for (int i = root.id; i >= 0; --i) {
      Node& n = nodes_[size_t(i)];
      if (!n.requires_grad || n.grad.data.empty()) continue;
      propagate(n);
      if (n.param >= 0 && store_) store_->accumulate(n.param, n.grad);
    }
  }

 private:
  struct Node {
    Op op = Op::Leaf;
    int a = -1, b = -1;
    float c0 = 0.0f;  // ScalarMul factor
    int i0 = 0, i1 = 0;  // SliceLast start/len
    int param = -1;
    bool requires_grad = false;
    Tensor value;
    Tensor grad;
  };

  // How operand `b` of an elementwise binary op is expanded against `a`.
  enum class Broadcast : uint8_t { Same, Scalar, Col, Row };

  ParameterStore* store_ = nullptr;
  std::function<bool(const std::string&)> trainable_filter_;
  std::vector<Node> nodes_;

  Val push(Node n) {
    nodes_.push_back(std::move(n));
    return Val{int(nodes_.size()) - 1};
  }

  Node unary_node(Op op, Val a) {
    Node n;
    n.op = op;
    n.a = a.id;
    n.requires_grad = nodes_[size_t(a.id)].requires_grad;
    n.value = nodes_[size_t(a.id)].value;
    return n;
  }

  Node unary_node(Op op, Val a, Tensor out) {
    Node n;
    n.op = op;
    n.a = a.id;
    n.requires_grad = nodes_[size_t(a.id)].requires_grad;
    n.value = std::move(out);
    return n;
  }

  Node binary_node(Op op, Val a, Val b, Tensor out) {
    Node n;
    n.op = op;
    n.a = a.id;
    n.b = b.id;
    n.requires_grad =
        nodes_[size_t(a.id)].requires_grad || nodes_[size_t(b.id)].requires_grad;
    n.value = std::move(out);
    return n;
  }

  static Broadcast classify(const Tensor& a, const Tensor& b) {
    if (a.same_dims(b)) return Broadcast::Same;
    if (b.size() == 1) return Broadcast::Scalar;
    if (b.rank() == a.rank() && b.last_dim() == 1) {
      bool ok = true;
      for (int i = 0; i + 1 < a.rank(); ++i) ok = ok && a.dim(i) == b.dim(i);
      if (ok) return Broadcast::Col;
    }
    if (b.rank() == 1 && b.dim(0) == a.last_dim()) return Broadcast::Row;
    throw ValidationError("elementwise dims incompatible: " + dims_str(a.dims) + " vs " +
                          dims_str(b.dims));
  }

  Val binary_ew(Op op, Val a, Val b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    Broadcast bc = classify(ta, tb);
    Node n = binary_node(op, a, b, Tensor(ta.dims));
    const size_t rows = ta.rows();
    const int ld = ta.last_dim();
    auto apply = [op](float x, float y) {
      switch (op) {
        case Op::Add: return x + y;
        case Op::Sub: return x - y;
        case Op::Mul: return x * y;
        default: return x / y;
      }
    };
    const float* pa = ta.data.data();
    const float* pb = tb.data.data();
    float* po = n.value.data.data();
    switch (bc) {
      case Broadcast::Same:
        for (size_t i = 0; i < ta.size(); ++i) po[i] = apply(pa[i], pb[i]);
        break;
      case Broadcast::Scalar: {
        const float y = pb[0];
        for (size_t i = 0; i < ta.size(); ++i) po[i] = apply(pa[i], y);
        break;
      }
      case Broadcast::Col:
        for (size_t r = 0; r < rows; ++r) {
          const float y = pb[r];
          for (int j = 0; j < ld; ++j) po[r * ld + j] = apply(pa[r * ld + j], y);
        }
        break;
      case Broadcast::Row:
        for (size_t r = 0; r < rows; ++r)
          for (int j = 0; j < ld; ++j) po[r * ld + j] = apply(pa[r * ld + j], pb[j]);
        break;
    }
    return push(std::move(n));
  }

  Val reduce_all(Op op, Val a) {
    const Tensor& ta = value(a);
    Node n = unary_node(op, a, Tensor({1}));
    double acc = 0.0;
    for (float x : ta.data) acc += x;
    n.value.data[0] = op == Op::SumAll ? float(acc) : float(acc / double(ta.size()));
    return push(std::move(n));
  }

  Val reduce_rows(Op op, Val a) {
    const Tensor& ta = value(a);
    std::vector<int> dims = ta.dims;
    if (dims.empty()) dims = {1};
    dims.back() = 1;
    Node n = unary_node(op, a, Tensor(dims));
    const size_t rows = ta.rows();
    const int ld = ta.last_dim();
    for (size_t r = 0; r < rows; ++r) {
      double acc = 0.0;
      const float* src = ta.data.data() + r * size_t(ld);
      for (int j = 0; j < ld; ++j) acc += src[j];
      n.value.data[r] = op == Op::RowSum ? float(acc) : float(acc / double(ld));
    }
    return push(std::move(n));
  }

  void ensure_grad(Node& n) {
    if (n.grad.data.empty()) n.grad = Tensor(n.value.dims);
  }

  Node* input_node(int id) { return id >= 0 ? &nodes_[size_t(id)] : nullptr; }

  // Adds dL/db for a broadcast operand: reduces `contrib` (shaped like the
  // output) down to the operand's shape, optionally negated (Sub).
  static void reduce_into(Tensor& bgrad, const Tensor& contrib, Broadcast bc, float sign) {
    const size_t rows = contrib.rows();
    const int ld = contrib.last_dim();
    switch (bc) {
      case Broadcast::Same:
        for (size_t i = 0; i < contrib.size(); ++i) bgrad.data[i] += sign * contrib.data[i];
        break;
      case Broadcast::Scalar: {
        double acc = 0.0;
        for (float x : contrib.data) acc += x;
        bgrad.data[0] += sign * float(acc);
        break;
      }
      case Broadcast::Col:
        for (size_t r = 0; r < rows; ++r) {
          double acc = 0.0;
          for (int j = 0; j < ld; ++j) acc += contrib.data[r * ld + j];
          bgrad.data[r] += sign * float(acc);
        }
        break;
      case Broadcast::Row:
        for (size_t r = 0; r < rows; ++r)
          for (int j = 0; j < ld; ++j) bgrad.data[j] += sign * contrib.data[r * ld + j];
        break;
    }
  }

  void propagate(Node& n) {
    Node* na = input_node(n.a);
    Node* nb = input_node(n.b);
    const bool ga = na && na->requires_grad;
    const bool gb = nb && nb->requires_grad;
    if (!ga && !gb) return;
    if (ga) ensure_grad(*na);
    if (gb) ensure_grad(*nb);
    const Tensor& g = n.grad;
    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::MatMul: {
        const int m = na->value.dim(0), k = na->value.dim(1), nn = nb->value.dim(1);
        if (ga)
          detail::matmul_nt_acc(g.data.data(), nb->value.data.data(), na->grad.data.data(),
                                m, nn, k);
        if (gb)
          detail::matmul_tn_acc(na->value.data.data(), g.data.data(), nb->grad.data.data(),
                                m, k, nn);
        break;
      }
      case Op::Add:
      case Op::Sub: {
        const float sign = n.op == Op::Sub ? -1.0f : 1.0f;
        if (ga)
          for (size_t i = 0; i < g.size(); ++i) na->grad.data[i] += g.data[i];
        if (gb) reduce_into(nb->grad, g, classify(na->value, nb->value), sign);
        break;
      }
      case Op::Mul: {
        Broadcast bc = classify(na->value, nb->value);
        if (ga) {
          // dL/da = g * b (b expanded)
          accumulate_expanded(na->grad, g, nb->value, bc);
        }
        if (gb) {
          Tensor contrib(g.dims);
          for (size_t i = 0; i < g.size(); ++i) contrib.data[i] = g.data[i];
          elementwise_mul_expanded(contrib, na->value, Broadcast::Same);
          reduce_into(nb->grad, contrib, bc, 1.0f);
        }
        break;
      }
      case Op::Div: {
        Broadcast bc = classify(na->value, nb->value);
        if (ga) {
          Tensor contrib = g;
          elementwise_div_expanded(contrib, nb->value, bc);
          for (size_t i = 0; i < contrib.size(); ++i) na->grad.data[i] += contrib.data[i];
        }
        if (gb) {
          // dL/db = -g * a / b^2
          Tensor contrib = g;
          elementwise_mul_expanded(contrib, na->value, Broadcast::Same);
          elementwise_div_expanded(contrib, nb->value, bc);
          elementwise_div_expanded(contrib, nb->value, bc);
          reduce_into(nb->grad, contrib, bc, -1.0f);
        }
        break;
      }
      case Op::ScalarMul:
        for (size_t i = 0; i < g.size(); ++i) na->grad.data[i] += n.c0 * g.data[i];
        break;
      case Op::ConcatLast: {
        const int la = na->value.last_dim();
        const int lb = nb->value.last_dim();
        const size_t rows = na->value.rows();
        for (size_t r = 0; r < rows; ++r) {
          const float* src = g.data.data() + r * size_t(la + lb);
          if (ga) {
            float* dst = na->grad.data.data() + r * size_t(la);
            for (int j = 0; j < la; ++j) dst[j] += src[j];
          }
          if (gb) {
            float* dst = nb->grad.data.data() + r * size_t(lb);
            for (int j = 0; j < lb; ++j) dst[j] += src[la + j];
          }
        }
        break;
      }
      case Op::SliceLast: {
        const int ld = na->value.last_dim();
        const size_t rows = na->value.rows();
        for (size_t r = 0; r < rows; ++r) {
          float* dst = na->grad.data.data() + r * size_t(ld) + n.i0;
          const float* src = g.data.data() + r * size_t(n.i1);
          for (int j = 0; j < n.i1; ++j) dst[j] += src[j];
        }
        break;
      }
      case Op::Tanh:
        for (size_t i = 0; i < g.size(); ++i) {
          const float y = n.value.data[i];
          na->grad.data[i] += g.data[i] * (1.0f - y * y);
        }
        break;
      case Op::Sigmoid:
        for (size_t i = 0; i < g.size(); ++i) {
          const float y = n.value.data[i];
          na->grad.data[i] += g.data[i] * y * (1.0f - y);
        }
        break;
      case Op::Sqrt:
        // derivative at 0 taken as 0 (degenerate correlation windows)
        for (size_t i = 0; i < g.size(); ++i) {
          const float y = n.value.data[i];
          if (y != 0.0f) na->grad.data[i] += g.data[i] * 0.5f / y;
        }
        break;
      case Op::Square:
        for (size_t i = 0; i < g.size(); ++i)
          na->grad.data[i] += g.data[i] * 2.0f * na->value.data[i];
        break;
      case Op::Abs:
        for (size_t i = 0; i < g.size(); ++i) {
          const float x = na->value.data[i];
          na->grad.data[i] += x > 0.0f ? g.data[i] : (x < 0.0f ? -g.data[i] : 0.0f);
        }
        break;
      case Op::SumAll:
        for (size_t i = 0; i < na->grad.size(); ++i) na->grad.data[i] += g.data[0];
        break;
      case Op::MeanAll: {
        const float s = g.data[0] / float(na->value.size());
        for (size_t i = 0; i < na->grad.size(); ++i) na->grad.data[i] += s;
        break;
      }
      case Op::RowSum: {
        const size_t rows = na->value.rows();
        const int ld = na->value.last_dim();
        for (size_t r = 0; r < rows; ++r)
          for (int j = 0; j < ld; ++j) na->grad.data[r * ld + j] += g.data[r];
        break;
      }
      case Op::RowMean: {
        const size_t rows = na->value.rows();
        const int ld = na->value.last_dim();
        for (size_t r = 0; r < rows; ++r) {
          const float s = g.data[r] / float(ld);
          for (int j = 0; j < ld; ++j) na->grad.data[r * ld + j] += s;
        }
        break;
      }
    }
  }

  // dst (shaped like output) += g * src, where src may be broadcast.
  static void accumulate_expanded(Tensor& dst, const Tensor& g, const Tensor& src,
                                  Broadcast bc) {
    const size_t rows = g.rows();
    const int ld = g.last_dim();
    switch (bc) {
      case Broadcast::Same:
        for (size_t i = 0; i < g.size(); ++i) dst.data[i] += g.data[i] * src.data[i];
        break;
      case Broadcast::Scalar:
        for (size_t i = 0; i < g.size(); ++i) dst.data[i] += g.data[i] * src.data[0];
        break;
      case Broadcast::Col:
        for (size_t r = 0; r < rows; ++r)
          for (int j = 0; j < ld; ++j) dst.data[r * ld + j] += g.data[r * ld + j] * src.data[r];
        break;
      case Broadcast::Row:
        for (size_t r = 0; r < rows; ++r)
          for (int j = 0; j < ld; ++j) dst.data[r * ld + j] += g.data[r * ld + j] * src.data[j];
        break;
    }
  }

  static void elementwise_mul_expanded(Tensor& t, const Tensor& src, Broadcast bc) {
    const size_t rows = t.rows();
    const int ld = t.last_dim();
    switch (bc) {
      case Broadcast::Same:
        for (size_t i = 0; i < t.size(); ++i) t.data[i] *= src.data[i];
        break;
      case Broadcast::Scalar:
        for (size_t i = 0; i < t.size(); ++i) t.data[i] *= src.data[0];
        break;
      case Broadcast::Col:
        for (size_t r = 0; r < rows; ++r)
          for (int j = 0; j < ld; ++j) t.data[r * ld + j] *= src.data[r];
        break;
      case Broadcast::Row:
        for (size_t r = 0; r < rows; ++r)
          for (int j = 0; j < ld; ++j) t.data[r * ld + j] *= src.data[j];
        break;
    }
  }

  static void elementwise_div_expanded(Tensor& t, const Tensor& src, Broadcast bc) {
    const size_t rows = t.rows();
    const int ld = t.last_dim();
    switch (bc) {
      case Broadcast::Same:
        for (size_t i = 0; i < t.size(); ++i) t.data[i] /= src.data[i];
        break;
      case Broadcast::Scalar:
        for (size_t i = 0; i < t.size(); ++i) t.data[i] /= src.data[0];
        break;
      case Broadcast::Col:
        for (size_t r = 0; r < rows; ++r)
          for (int j = 0; j < ld; ++j) t.data[r * ld + j] /= src.data[r];
        break;
      case Broadcast::Row:
        for (size_t r = 0; r < rows; ++r)
          for (int j = 0; j < ld; ++j) t.data[r * ld + j] /= src.data[j];
        break;
    }
  }
};

}  // namespace emoseq

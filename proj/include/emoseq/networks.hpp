#pragma once

#include <array>
#include <string>
#include <vector>

#include "emoseq/autodiff.hpp"
#include "emoseq/rng.hpp"

namespace emoseq {

constexpr int kExprDim = 51;   // jaw opening + 50 expression coefficients
constexpr int kStyleDim = 16;
constexpr int kLatentDim = 4;
constexpr int kNumLabels = 7;

// Label order is fixed; indices are part of the checkpoint/manifest contract.
inline const std::array<const char*, kNumLabels>& label_names() {
  static const std::array<const char*, kNumLabels> names = {
      "neutral", "happy", "fear", "sad", "surprised", "angry", "disgusted"};
  return names;
}

inline int label_from_name(const std::string& s) {
  for (int i = 0; i < kNumLabels; ++i)
    if (s == label_names()[size_t(i)]) return i;
  throw ValidationError("unknown emotion label: " + s);
}

struct ManipulatorConfig {
  int n_window = 10;
  int hidden_g = 128;
  int hidden_e = 64;
  int hidden_d = 64;
  int mlp_hidden = 64;
};

// Per-dimension statistics of the training expressions; applied before every
// network and inverted after the translator.
struct NormStats {
  Tensor mean;    // [51]
  Tensor stddev;  // [51], floored at 1e-6

  static NormStats identity() {
    NormStats n;
    n.mean = Tensor({kExprDim});
    n.stddev = Tensor::full({kExprDim}, 1.0f);
    return n;
  }
};

namespace detail {

inline Tensor uniform_init(std::vector<int> dims, int fan_in, Rng& rng) {
  Tensor t(std::move(dims));
  const float bound = 1.0f / std::sqrt(float(fan_in));
  for (auto& x : t.data) x = rng.uniform(-bound, bound);
  return t;
}

inline Tensor lstm_bias_init(int hidden) {
  Tensor b({4 * hidden});
  // gate order i|f|g|o; forget gate biased open
  for (int j = hidden; j < 2 * hidden; ++j) b.data[size_t(j)] = 1.0f;
  return b;
}

}  // namespace detail

// Creates all trainable tensors of G, E, M, D in a fixed order so that a
// seeded init is reproducible.
inline void init_manipulator_params(ParameterStore& store, const ManipulatorConfig& cfg,
                                    Rng& rng) {
  using detail::lstm_bias_init;
  using detail::uniform_init;
  const int hg = cfg.hidden_g, he = cfg.hidden_e, hd = cfg.hidden_d, hm = cfg.mlp_hidden;
  const int in_g = kExprDim + kStyleDim;

  store.add("g.in.w", uniform_init({in_g, hg}, in_g, rng));
  store.add("g.in.b", Tensor({hg}));
  store.add("g.lstm.wx", uniform_init({hg, 4 * hg}, hg, rng));
  store.add("g.lstm.wh", uniform_init({hg, 4 * hg}, hg, rng));
  store.add("g.lstm.b", lstm_bias_init(hg));
  store.add("g.out.w", uniform_init({hg, kExprDim}, hg, rng));
  store.add("g.out.b", Tensor({kExprDim}));

  store.add("e.lstm.wx", uniform_init({kExprDim, 4 * he}, kExprDim, rng));
  store.add("e.lstm.wh", uniform_init({he, 4 * he}, he, rng));
  store.add("e.lstm.b", lstm_bias_init(he));
  store.add("e.out.w", uniform_init({he, kStyleDim}, he, rng));
  store.add("e.out.b", Tensor({kStyleDim}));

  store.add("m.fc1.w", uniform_init({kLatentDim, hm}, kLatentDim, rng));
  store.add("m.fc1.b", Tensor({hm}));
  store.add("m.fc2.w", uniform_init({hm, hm}, hm, rng));
  store.add("m.fc2.b", Tensor({hm}));
  for (int y = 0; y < kNumLabels; ++y) {
    const std::string base = "m.head" + std::to_string(y);
    store.add(base + ".w", uniform_init({hm, kStyleDim}, hm, rng));
    store.add(base + ".b", Tensor({kStyleDim}));
  }

  store.add("d.lstm.wx", uniform_init({kExprDim, 4 * hd}, kExprDim, rng));
  store.add("d.lstm.wh", uniform_init({hd, 4 * hd}, hd, rng));
  store.add("d.lstm.b", lstm_bias_init(hd));
  store.add("d.out.w", uniform_init({hd, kNumLabels}, hd, rng));
  store.add("d.out.b", Tensor({kNumLabels}));
}

namespace detail {

struct LstmVals {
  Val wx, wh, b;
  int hidden = 0;
};

inline LstmVals lstm_params(Graph& g, const std::string& prefix, int hidden) {
  return {g.param(prefix + ".wx"), g.param(prefix + ".wh"), g.param(prefix + ".b"), hidden};
}

// One LSTM step: x [B,in], h/c [B,H] -> new h/c.
inline std::pair<Val, Val> lstm_step(Graph& g, const LstmVals& p, Val x, Val h, Val c) {
  const int hd = p.hidden;
  Val z = g.add(g.add(g.matmul(x, p.wx), g.matmul(h, p.wh)), p.b);
  Val gi = g.sigmoid(g.slice_last(z, 0, hd));
  Val gf = g.sigmoid(g.slice_last(z, hd, hd));
  Val gg = g.tanh(g.slice_last(z, 2 * hd, hd));
  Val go = g.sigmoid(g.slice_last(z, 3 * hd, hd));
  Val cn = g.add(g.mul(gf, c), g.mul(gi, gg));
  Val hn = g.mul(go, g.tanh(cn));
  return {hn, cn};
}

struct NormVals {
  Val mean, stddev, inv_std;
};

inline NormVals norm_constants(Graph& g, const NormStats& norm) {
  Tensor inv(norm.stddev.dims);
  for (size_t i = 0; i < inv.size(); ++i) inv.data[i] = 1.0f / norm.stddev.data[i];
  return {g.constant(norm.mean), g.constant(norm.stddev), g.constant(inv)};
}

inline Val normalize(Graph& g, const NormVals& nv, Val x) {
  return g.mul(g.sub(x, nv.mean), nv.inv_std);
}

}  // namespace detail

// Translator G on the tape. xs holds the raw expression frames, one [B,51]
// tensor per timestep; style is [B,16]. The per-step delta predicted from the
// hidden state is scaled back to raw units and added to the raw input frame,
// so a zeroed output head is exactly the identity map.
inline std::vector<Val> translate_graph(Graph& g, const ManipulatorConfig& cfg,
                                        const NormStats& norm, const std::vector<Val>& xs,
                                        Val style) {
  if (int(xs.size()) == 0) throw ValidationError("translate: empty sequence");
  auto nv = detail::norm_constants(g, norm);
  auto lstm = detail::lstm_params(g, "g.lstm", cfg.hidden_g);
  Val in_w = g.param("g.in.w"), in_b = g.param("g.in.b");
  Val out_w = g.param("g.out.w"), out_b = g.param("g.out.b");
  const int batch = g.value(xs[0]).dim(0);
  Val h = g.constant(Tensor({batch, cfg.hidden_g}));
  Val c = h;
  std::vector<Val> outs;
  outs.reserve(xs.size());
  for (Val x : xs) {
    Val xn = detail::normalize(g, nv, x);
    Val u = g.add(g.matmul(g.concat_last(xn, style), in_w), in_b);
    auto hc = detail::lstm_step(g, lstm, u, h, c);
    h = hc.first;
    c = hc.second;
    Val delta = g.add(g.matmul(h, out_w), out_b);
    outs.push_back(g.add(x, g.mul(delta, nv.stddev)));
  }
  return outs;
}

// Style encoder E: recurrent pass over the frames, final hidden state through
// an affine head. No emotion label is involved.
inline Val encode_style_graph(Graph& g, const ManipulatorConfig& cfg, const NormStats& norm,
                              const std::vector<Val>& xs) {
  if (xs.empty()) throw ValidationError("encode_style: empty sequence");
  auto nv = detail::norm_constants(g, norm);
  auto lstm = detail::lstm_params(g, "e.lstm", cfg.hidden_e);
  const int batch = g.value(xs[0]).dim(0);
  Val h = g.constant(Tensor({batch, cfg.hidden_e}));
  Val c = h;
  for (Val x : xs) {
    auto hc = detail::lstm_step(g, lstm, detail::normalize(g, nv, x), h, c);
    h = hc.first;
    c = hc.second;
  }
  return g.add(g.matmul(h, g.param("e.out.w")), g.param("e.out.b"));
}

// Mapping network M: shared MLP trunk, one affine head per emotion label.
// labels selects the head per batch row.
inline Val map_latent_graph(Graph& g, const ManipulatorConfig& cfg, Val z,
                            const std::vector<int>& labels) {
  const Tensor& tz = g.value(z);
  if (tz.rank() != 2 || tz.dim(1) != kLatentDim) {
    throw ValidationError("map_latent: z must be [B," + std::to_string(kLatentDim) +
                          "], got " + dims_str(tz.dims));
  }
  const int batch = tz.dim(0);
  if (int(labels.size()) != batch) throw ValidationError("map_latent: label count mismatch");
  for (int y : labels) {
    if (y < 0 || y >= kNumLabels)
      throw ValidationError("map_latent: label index " + std::to_string(y) + " out of range");
  }
  (void)cfg;
  Val t1 = g.tanh(g.add(g.matmul(z, g.param("m.fc1.w")), g.param("m.fc1.b")));
  Val t2 = g.tanh(g.add(g.matmul(t1, g.param("m.fc2.w")), g.param("m.fc2.b")));

  bool uniform = true;
  for (int y : labels) uniform = uniform && y == labels[0];
  auto head = [&](int y) {
    const std::string base = "m.head" + std::to_string(y);
    return g.add(g.matmul(t2, g.param(base + ".w")), g.param(base + ".b"));
  };
  if (uniform) return head(labels[0]);

  // mixed batch: evaluate every head and keep each row's own label
  Val out{-1};
  for (int y = 0; y < kNumLabels; ++y) {
    Tensor mask({batch, 1});
    bool any = false;
    for (int r = 0; r < batch; ++r) {
      mask.data[size_t(r)] = labels[size_t(r)] == y ? 1.0f : 0.0f;
      any = any || labels[size_t(r)] == y;
    }
    if (!any) continue;
    Val sel = g.mul(head(y), g.constant(mask));
    out = out.id < 0 ? sel : g.add(out, sel);
  }
  return out;
}

// Discriminator D: recurrent pass, affine head to one raw scalar per label.
inline Val discriminate_graph(Graph& g, const ManipulatorConfig& cfg, const NormStats& norm,
                              const std::vector<Val>& xs) {
  if (xs.empty()) throw ValidationError("discriminate: empty sequence");
  auto nv = detail::norm_constants(g, norm);
  auto lstm = detail::lstm_params(g, "d.lstm", cfg.hidden_d);
  const int batch = g.value(xs[0]).dim(0);
  Val h = g.constant(Tensor({batch, cfg.hidden_d}));
  Val c = h;
  for (Val x : xs) {
    auto hc = detail::lstm_step(g, lstm, detail::normalize(g, nv, x), h, c);
    h = hc.first;
    c = hc.second;
  }
  return g.add(g.matmul(h, g.param("d.out.w")), g.param("d.out.b"));
}

namespace detail {

// Splits a [N,51] sequence into per-timestep [1,51] leaves.
inline std::vector<Val> sequence_leaves(Graph& g, const Tensor& seq) {
  if (seq.rank() != 2 || seq.dim(1) != kExprDim) {
    throw ValidationError("expression sequence must be [N," + std::to_string(kExprDim) +
                          "], got " + dims_str(seq.dims));
  }
  std::vector<Val> xs;
  xs.reserve(size_t(seq.dim(0)));
  for (int t = 0; t < seq.dim(0); ++t) {
    Tensor frame({1, kExprDim});
    for (int j = 0; j < kExprDim; ++j)
      frame.data[size_t(j)] = seq.data[size_t(t) * kExprDim + size_t(j)];
    xs.push_back(g.constant(frame));
  }
  return xs;
}

inline Tensor stack_outputs(const Graph& g, const std::vector<Val>& outs) {
  Tensor seq({int(outs.size()), kExprDim});
  for (size_t t = 0; t < outs.size(); ++t) {
    const Tensor& row = g.value(outs[t]);
    for (int j = 0; j < kExprDim; ++j)
      seq.data[t * kExprDim + size_t(j)] = row.data[size_t(j)];
  }
  return seq;
}

}  // namespace detail

// Convenience single-sequence forward passes (inference path).

inline Tensor translate(ParameterStore& store, const ManipulatorConfig& cfg,
                        const NormStats& norm, const Tensor& seq, const Tensor& style) {
  if (style.size() != size_t(kStyleDim))
    throw ValidationError("style vector must have " + std::to_string(kStyleDim) + " entries");
  Graph g(&store);
  g.set_trainable_filter([](const std::string&) { return false; });
  auto xs = detail::sequence_leaves(g, seq);
  Tensor st({1, kStyleDim}, style.data);
  auto outs = translate_graph(g, cfg, norm, xs, g.constant(st));
  Tensor result = detail::stack_outputs(g, outs);
  if (!all_finite(result.data))
    throw DivergenceError("translate produced non-finite values");
  return result;
}

inline Tensor encode_style(ParameterStore& store, const ManipulatorConfig& cfg,
                           const NormStats& norm, const Tensor& seq) {
  Graph g(&store);
  g.set_trainable_filter([](const std::string&) { return false; });
  auto xs = detail::sequence_leaves(g, seq);
  Val d = encode_style_graph(g, cfg, norm, xs);
  return Tensor({kStyleDim}, g.value(d).data);
}

inline Tensor map_latent(ParameterStore& store, const ManipulatorConfig& cfg,
                         const Tensor& z, int label) {
  if (z.size() != size_t(kLatentDim))
    throw ValidationError("latent code must have " + std::to_string(kLatentDim) + " entries");
  Graph g(&store);
  g.set_trainable_filter([](const std::string&) { return false; });
  Val d = map_latent_graph(g, cfg, g.constant(Tensor({1, kLatentDim}, z.data)), {label});
  return Tensor({kStyleDim}, g.value(d).data);
}

inline Tensor discriminate(ParameterStore& store, const ManipulatorConfig& cfg,
                           const NormStats& norm, const Tensor& seq) {
  Graph g(&store);
  g.set_trainable_filter([](const std::string&) { return false; });
  auto xs = detail::sequence_leaves(g, seq);
  Val s = discriminate_graph(g, cfg, norm, xs);
  return Tensor({kNumLabels}, g.value(s).data);
}

}  // namespace emoseq

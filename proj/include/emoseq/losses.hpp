#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "emoseq/autodiff.hpp"

namespace emoseq {

struct LossWeights {
  float sty = 1.0f;
  float cyc = 1.0f;
  float mouth = 1.0f;
};

struct LossReport {
  float adv_d = 0.0f;
  float adv_g = 0.0f;
  float sty = 0.0f;
  float cyc = 0.0f;
  float mouth = 0.0f;
  float total_gem = 0.0f;
};

// Correlation windows with sigma_x * sigma_y below this are treated as
// degenerate (constant jaw during silence) and contribute 0 with 0 gradient.
constexpr float kPccGuard = 1e-8f;

// ---------------------------------------------------------------------------
// Plain float versions (reporting, metrics, tests).

inline float pcc(std::span<const float> x, std::span<const float> y) {
  if (x.size() != y.size())
    throw ValidationError("pcc: series lengths differ (" + std::to_string(x.size()) +
                          " vs " + std::to_string(y.size()) + ")");
  if (x.size() < 2) throw ValidationError("pcc: need at least 2 samples");
  const double n = double(x.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double cov = 0.0, vx = 0.0, vy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    cov += dx * dy;
    vx += dx * dx;
    vy += dy * dy;
  }
  const double denom = std::sqrt(vx / n) * std::sqrt(vy / n);
  if (denom < kPccGuard) return 0.0f;
  return float((cov / n) / denom);
}

inline float adv_loss_d(std::span<const float> real_scores, std::span<const float> fake_scores) {
  double real = 0.0, fake = 0.0;
  for (float s : real_scores) real += (s - 1.0) * (s - 1.0);
  for (float s : fake_scores) fake += s * double(s);
  return float(0.5 * real / double(real_scores.size()) +
               0.5 * fake / double(fake_scores.size()));
}

inline float adv_loss_g(std::span<const float> fake_scores) {
  double acc = 0.0;
  for (float s : fake_scores) acc += (s - 1.0) * (s - 1.0);
  return float(0.5 * acc / double(fake_scores.size()));
}

// L1 norm of the difference, summed over all entries.
inline float style_recon_loss(std::span<const float> target, std::span<const float> recovered) {
  if (target.size() != recovered.size())
    throw ValidationError("style_recon_loss: size mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < target.size(); ++i) acc += std::fabs(target[i] - recovered[i]);
  return float(acc);
}

inline float cycle_loss(const Tensor& s, const Tensor& cycled) {
  if (!s.same_dims(cycled))
    throw ValidationError("cycle_loss: dims " + dims_str(s.dims) + " vs " +
                          dims_str(cycled.dims));
  double acc = 0.0;
  for (size_t i = 0; i < s.size(); ++i) acc += std::fabs(s.data[i] - cycled.data[i]);
  return float(acc);
}

inline float speech_loss(std::span<const float> jaw_in, std::span<const float> jaw_translated,
                         std::span<const float> jaw_cycled) {
  return -(pcc(jaw_in, jaw_translated) + pcc(jaw_translated, jaw_cycled));
}

inline float total_gem_loss(const LossReport& parts, const LossWeights& w) {
  return parts.adv_g + w.sty * parts.sty + w.cyc * parts.cyc + w.mouth * parts.mouth;
}

// ---------------------------------------------------------------------------
// Tape builders (training path). Scores enter as [B,1] columns; sequences as
// per-timestep [B,51] values.

// 1/2 E[(real-1)^2] + 1/2 E[fake^2]
inline Val adv_loss_d_graph(Graph& g, Val real_scores, Val fake_scores) {
  Val one = g.constant(Tensor::scalar(1.0f));
  Val real_term = g.mean_all(g.square(g.sub(real_scores, one)));
  Val fake_term = g.mean_all(g.square(fake_scores));
  return g.scalar_mul(g.add(real_term, fake_term), 0.5f);
}

// 1/2 E[(fake-1)^2]
inline Val adv_loss_g_graph(Graph& g, Val fake_scores) {
  Val one = g.constant(Tensor::scalar(1.0f));
  return g.scalar_mul(g.mean_all(g.square(g.sub(fake_scores, one))), 0.5f);
}

// E over the batch of the per-sample L1 norm: sum everything, divide by B.
inline Val l1_batch_mean_graph(Graph& g, Val a, Val b) {
  const int batch = g.value(a).dim(0);
  return g.scalar_mul(g.sum_all(g.abs(g.sub(a, b))), 1.0f / float(batch));
}

inline Val style_recon_loss_graph(Graph& g, Val target, Val recovered) {
  return l1_batch_mean_graph(g, target, recovered);
}

// xs/cs are per-timestep [B,51]; per-sample L1 over all N*51 entries.
inline Val cycle_loss_graph(Graph& g, const std::vector<Val>& xs, const std::vector<Val>& cs) {
  if (xs.size() != cs.size()) throw ValidationError("cycle_loss: sequence length mismatch");
  Val acc{-1};
  for (size_t t = 0; t < xs.size(); ++t) {
    Val term = g.sum_all(g.abs(g.sub(xs[t], cs[t])));
    acc = acc.id < 0 ? term : g.add(acc, term);
  }
  const int batch = g.value(xs[0]).dim(0);
  return g.scalar_mul(acc, 1.0f / float(batch));
}

// Row-wise Pearson correlation of two [B,N] tensors -> [B,1]. Degenerate rows
// (denominator under the guard) yield 0 with zero gradient; the mask is a
// constant built from the eagerly computed forward values.
inline Val pcc_rows_graph(Graph& g, Val x, Val y) {
  const Tensor& tx = g.value(x);
  const Tensor& ty = g.value(y);
  if (!tx.same_dims(ty))
    throw ValidationError("pcc: dims " + dims_str(tx.dims) + " vs " + dims_str(ty.dims));
  if (tx.last_dim() < 2) throw ValidationError("pcc: need at least 2 samples per row");
  Val xc = g.sub(x, g.row_mean(x));
  Val yc = g.sub(y, g.row_mean(y));
  Val cov = g.row_mean(g.mul(xc, yc));
  Val denom = g.sqrt(g.mul(g.row_mean(g.square(xc)), g.row_mean(g.square(yc))));

  const Tensor& dv = g.value(denom);
  Tensor mask(dv.dims);
  Tensor guard(dv.dims);
  for (size_t i = 0; i < dv.size(); ++i) {
    const bool ok = dv.data[i] >= kPccGuard;
    mask.data[i] = ok ? 1.0f : 0.0f;
    guard.data[i] = ok ? 0.0f : 1.0f;  // keeps the masked-out denominator nonzero
  }
  Val masked_num = g.mul(cov, g.constant(mask));
  Val safe_denom = g.add(denom, g.constant(guard));
  return g.div(masked_num, safe_denom);
}

// -(pcc(jaw_in, jaw_translated) + pcc(jaw_translated, jaw_cycled)), batch mean.
inline Val speech_loss_graph(Graph& g, Val jaw_in, Val jaw_translated, Val jaw_cycled) {
  Val p1 = pcc_rows_graph(g, jaw_in, jaw_translated);
  Val p2 = pcc_rows_graph(g, jaw_translated, jaw_cycled);
  return g.scalar_mul(g.mean_all(g.add(p1, p2)), -1.0f);
}

inline Val total_gem_loss_graph(Graph& g, Val adv_g, Val sty, Val cyc, Val mouth,
                                const LossWeights& w) {
  Val total = g.add(adv_g, g.scalar_mul(sty, w.sty));
  total = g.add(total, g.scalar_mul(cyc, w.cyc));
  return g.add(total, g.scalar_mul(mouth, w.mouth));
}

// Extracts the jaw channel (component 1 of each frame) of a per-timestep
// sequence as a [B,N] tensor.
inline Val jaw_series_graph(Graph& g, const std::vector<Val>& xs) {
  Val acc{-1};
  for (Val x : xs) {
    Val jaw = g.slice_last(x, 0, 1);
    acc = acc.id < 0 ? jaw : g.concat_last(acc, jaw);
  }
  return acc;
}

}  // namespace emoseq

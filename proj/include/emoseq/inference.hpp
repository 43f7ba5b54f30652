#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "emoseq/networks.hpp"

namespace emoseq {

// Gaussian window-merge weights, centered at (N-1)/2.
struct MergeKernel {
  std::vector<float> weights;

  static MergeKernel gaussian(int n, float sigma = 0.0f) {
    if (n < 1) throw ValidationError("merge kernel needs n >= 1");
    if (sigma <= 0.0f) sigma = float(n) / 4.0f;
    MergeKernel k;
    k.weights.resize(size_t(n));
    const float center = float(n - 1) / 2.0f;
    for (int i = 0; i < n; ++i) {
      const float d = float(i) - center;
      k.weights[size_t(i)] = std::exp(-d * d / (2.0f * sigma * sigma));
    }
    return k;
  }
};

namespace detail {

// Translates a contiguous range of stride-1 windows [first, first+count) of
// the track in one batched graph; returns count x N x 51 values row-major.
inline std::vector<float> translate_windows(ParameterStore& store, const ManipulatorConfig& cfg,
                                            const NormStats& norm, const Tensor& track,
                                            const Tensor& style, int first, int count) {
  const int n = cfg.n_window;
  Graph g(&store);
  g.set_trainable_filter([](const std::string&) { return false; });
  std::vector<Val> xs;
  xs.reserve(size_t(n));
  for (int t = 0; t < n; ++t) {
    Tensor frame({count, kExprDim});
    for (int w = 0; w < count; ++w) {
      const float* src = track.data.data() + size_t(first + w + t) * kExprDim;
      float* dst = frame.data.data() + size_t(w) * kExprDim;
      for (int j = 0; j < kExprDim; ++j) dst[j] = src[j];
    }
    xs.push_back(g.constant(frame));
  }
  Tensor style_rows({count, kStyleDim});
  for (int w = 0; w < count; ++w)
    for (int j = 0; j < kStyleDim; ++j)
      style_rows.data[size_t(w) * kStyleDim + size_t(j)] = style.data[size_t(j)];
  auto outs = translate_graph(g, cfg, norm, xs, g.constant(style_rows));

  std::vector<float> values(size_t(count) * size_t(n) * kExprDim);
  for (int t = 0; t < n; ++t) {
    const Tensor& out = g.value(outs[size_t(t)]);
    for (int w = 0; w < count; ++w)
      for (int j = 0; j < kExprDim; ++j)
        values[(size_t(w) * size_t(n) + size_t(t)) * kExprDim + size_t(j)] =
            out.data[size_t(w) * kExprDim + size_t(j)];
  }
  return values;
}

}  // namespace detail

// Merges per-window translated values back into a track. translated[w] holds
// the [N,51] output of the window starting at frame w. The blend is computed
// in delta form, out[t] = in[t] + sum(k*(v-in))/sum(k), which is the same
// renormalized convex combination but returns the input bit-exactly when
// every window does; frames covered by a single window take that window's
// value directly.
inline Tensor merge_windows(const Tensor& track, const std::vector<Tensor>& translated,
                            const MergeKernel& kernel) {
  const int frames = track.dim(0);
  const int n = int(kernel.weights.size());
  const int n_windows = frames - n + 1;
  if (int(translated.size()) != n_windows)
    throw ValidationError("merge: expected " + std::to_string(n_windows) + " windows, got " +
                          std::to_string(translated.size()));
  for (float w : kernel.weights)
    if (!(w > 0.0f)) throw ValidationError("merge kernel weights must be positive");

  std::vector<double> delta_acc(size_t(frames) * kExprDim, 0.0);
  std::vector<double> weight_acc(size_t(frames), 0.0);
  std::vector<int> cover(size_t(frames), 0);
  std::vector<float> single(size_t(frames) * kExprDim, 0.0f);

  for (int start = 0; start < n_windows; ++start) {
    const Tensor& win = translated[size_t(start)];
    if (win.rank() != 2 || win.dim(0) != n || win.dim(1) != kExprDim)
      throw ValidationError("merge: window " + std::to_string(start) + " has dims " +
                            dims_str(win.dims));
    for (int t = 0; t < n; ++t) {
      const int frame = start + t;
      const float kw = kernel.weights[size_t(t)];
      const float* v = win.data.data() + size_t(t) * kExprDim;
      const float* in = track.data.data() + size_t(frame) * kExprDim;
      double* acc = delta_acc.data() + size_t(frame) * kExprDim;
      for (int j = 0; j < kExprDim; ++j) acc[j] += double(kw) * (double(v[j]) - double(in[j]));
      weight_acc[size_t(frame)] += double(kw);
      if (cover[size_t(frame)]++ == 0)
        std::copy(v, v + kExprDim, single.data() + size_t(frame) * kExprDim);
    }
  }

  Tensor out({frames, kExprDim});
  for (int t = 0; t < frames; ++t) {
    float* dst = out.data.data() + size_t(t) * kExprDim;
    if (cover[size_t(t)] == 1) {
      const float* v = single.data() + size_t(t) * kExprDim;
      std::copy(v, v + kExprDim, dst);
      continue;
    }
    const float* in = track.data.data() + size_t(t) * kExprDim;
    const double wsum = weight_acc[size_t(t)];
    const double* acc = delta_acc.data() + size_t(t) * kExprDim;
    for (int j = 0; j < kExprDim; ++j) dst[j] = float(double(in[j]) + acc[j] / wsum);
  }
  return out;
}

// Whole-clip translation: every stride-1 window goes through the translator
// (batched), then overlaps are merged with the kernel.
inline Tensor translate_track(ParameterStore& store, const ManipulatorConfig& cfg,
                              const NormStats& norm, const Tensor& track, const Tensor& style,
                              const MergeKernel& kernel) {
  if (track.rank() != 2 || track.dim(1) != kExprDim)
    throw ValidationError("track must be [T,51], got " + dims_str(track.dims));
  const int frames = track.dim(0);
  const int n = cfg.n_window;
  if (frames < n)
    throw ValidationError("track length " + std::to_string(frames) +
                          " is shorter than the window " + std::to_string(n));
  if (int(kernel.weights.size()) != n)
    throw ValidationError("merge kernel length does not match window");

  const int n_windows = frames - n + 1;
  std::vector<Tensor> translated;
  translated.reserve(size_t(n_windows));
  const int chunk = 256;
  for (int first = 0; first < n_windows; first += chunk) {
    const int count = std::min(chunk, n_windows - first);
    auto values = detail::translate_windows(store, cfg, norm, track, style, first, count);
    for (int w = 0; w < count; ++w) {
      Tensor win({n, kExprDim});
      std::copy(values.begin() + long(size_t(w) * size_t(n) * kExprDim),
                values.begin() + long((size_t(w) + 1) * size_t(n) * kExprDim),
                win.data.begin());
      translated.push_back(std::move(win));
    }
  }
  Tensor out = merge_windows(track, translated, kernel);
  if (!all_finite(out.data)) throw DivergenceError("translate_track produced non-finite values");
  return out;
}

// Weiszfeld iteration for the point minimizing the summed Euclidean distance.
// Starts from the coordinate-wise median; stops when the update norm drops
// under 1e-8 or after 1000 rounds. An iterate that lands on a data point is
// damped with epsilon=1e-12 in the denominator.
inline std::vector<float> geometric_median(const std::vector<std::vector<float>>& points,
                                           std::vector<double>* objective_trace = nullptr) {
  if (points.empty()) throw ValidationError("geometric_median: no points");
  const size_t dim = points[0].size();
  for (const auto& p : points)
    if (p.size() != dim) throw ValidationError("geometric_median: inconsistent dimensions");
  if (points.size() == 1) return points[0];

  std::vector<double> x(dim);
  {
    std::vector<double> coord(points.size());
    for (size_t j = 0; j < dim; ++j) {
      for (size_t i = 0; i < points.size(); ++i) coord[i] = double(points[i][j]);
      std::sort(coord.begin(), coord.end());
      const size_t mid = coord.size() / 2;
      x[j] = coord.size() % 2 ? coord[mid] : 0.5 * (coord[mid - 1] + coord[mid]);
    }
  }

  auto objective = [&](const std::vector<double>& q) {
    double total = 0.0;
    for (const auto& p : points) {
      double d2 = 0.0;
      for (size_t j = 0; j < dim; ++j) {
        const double d = q[j] - double(p[j]);
        d2 += d * d;
      }
      total += std::sqrt(d2);
    }
    return total;
  };
  if (objective_trace) objective_trace->push_back(objective(x));

  std::vector<double> next(dim);
  for (int it = 0; it < 1000; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    double wsum = 0.0;
    for (const auto& p : points) {
      double d2 = 0.0;
      for (size_t j = 0; j < dim; ++j) {
        const double d = x[j] - double(p[j]);
        d2 += d * d;
      }
      const double dist = std::max(std::sqrt(d2), 1e-12);
      const double w = 1.0 / dist;
      wsum += w;
      for (size_t j = 0; j < dim; ++j) next[j] += w * double(p[j]);
    }
    for (size_t j = 0; j < dim; ++j) next[j] /= wsum;
    double step2 = 0.0;
    for (size_t j = 0; j < dim; ++j) {
      const double d = next[j] - x[j];
      step2 += d * d;
    }
    x = next;
    if (objective_trace) objective_trace->push_back(objective(x));
    if (std::sqrt(step2) < 1e-8) break;
  }
  std::vector<float> result(dim);
  for (size_t j = 0; j < dim; ++j) result[j] = float(x[j]);
  return result;
}

// Encodes every stride-1 window of the reference and takes the geometric
// median of the style vectors.
inline Tensor extract_style(ParameterStore& store, const ManipulatorConfig& cfg,
                            const NormStats& norm, const Tensor& reference) {
  if (reference.rank() != 2 || reference.dim(1) != kExprDim)
    throw ValidationError("reference track must be [T,51]");
  const int frames = reference.dim(0);
  const int n = cfg.n_window;
  if (frames < n)
    throw ValidationError("reference length " + std::to_string(frames) +
                          " is shorter than the window " + std::to_string(n));
  const int n_windows = frames - n + 1;
  std::vector<std::vector<float>> styles;
  styles.reserve(size_t(n_windows));

  const int chunk = 512;
  for (int first = 0; first < n_windows; first += chunk) {
    const int count = std::min(chunk, n_windows - first);
    Graph g(&store);
    g.set_trainable_filter([](const std::string&) { return false; });
    std::vector<Val> xs;
    for (int t = 0; t < n; ++t) {
      Tensor frame({count, kExprDim});
      for (int w = 0; w < count; ++w)
        for (int j = 0; j < kExprDim; ++j)
          frame.data[size_t(w) * kExprDim + size_t(j)] =
              reference.data[size_t(first + w + t) * kExprDim + size_t(j)];
      xs.push_back(g.constant(frame));
    }
    Val d = encode_style_graph(g, cfg, norm, xs);
    const Tensor& dt = g.value(d);
    for (int w = 0; w < count; ++w) {
      std::vector<float> row(dt.data.begin() + long(size_t(w) * kStyleDim),
                             dt.data.begin() + long((size_t(w) + 1) * kStyleDim));
      styles.push_back(std::move(row));
    }
  }
  return Tensor({kStyleDim}, geometric_median(styles));
}

}  // namespace emoseq

#pragma once

#include <cmath>
#include <vector>

#include "emoseq/image.hpp"
#include "emoseq/losses.hpp"
#include "emoseq/networks.hpp"

namespace emoseq {

struct MetricReport {
  std::vector<double> per_frame;
  double aggregate = 0.0;

  void add(double v) {
    per_frame.push_back(v);
    aggregate = 0.0;
    for (double x : per_frame) aggregate += x;
    aggregate /= double(per_frame.size());
  }
};

namespace detail {

// Pixel distances run on the 8-bit grid: float values are mapped back to
// their nearest 0..255 level, matching metrics computed on 8-bit frames.
inline double quantize255(float v) { return std::nearbyint(double(v) * 255.0); }

}  // namespace detail

// Mean L2 RGB distance in [0,255] scale over pixels where mask > 0.5.
inline double fapd(const ImageBuffer& gen, const ImageBuffer& gt, const MaskBuffer& mask) {
  if (!gen.same_dims(gt) || gen.width != mask.width || gen.height != mask.height)
    throw ValidationError("fapd: dimensions differ");
  double total = 0.0;
  int64_t count = 0;
  for (int y = 0; y < gen.height; ++y)
    for (int x = 0; x < gen.width; ++x) {
      if (!(mask.at(x, y) > 0.5f)) continue;
      const float* a = gen.pixel(x, y);
      const float* b = gt.pixel(x, y);
      double d2 = 0.0;
      for (int ch = 0; ch < 3; ++ch) {
        const double d = detail::quantize255(a[ch]) - detail::quantize255(b[ch]);
        d2 += d * d;
      }
      total += std::sqrt(d2);
      ++count;
    }
  if (count == 0) throw ValidationError("fapd: empty mask");
  return total / double(count);
}

// fapd over the entire image.
inline double apd(const ImageBuffer& gen, const ImageBuffer& gt) {
  if (!gen.same_dims(gt)) throw ValidationError("apd: dimensions differ");
  MaskBuffer full(gen.width, gen.height);
  std::fill(full.data.begin(), full.data.end(), 1.0f);
  return fapd(gen, gt, full);
}

// apd restricted to a 72x72 crop around the mouth center, clamped to borders.
inline double mapd(const ImageBuffer& gen, const ImageBuffer& gt, int mouth_x, int mouth_y) {
  if (!gen.same_dims(gt)) throw ValidationError("mapd: dimensions differ");
  constexpr int kCrop = 72;
  const int cw = std::min(kCrop, gen.width);
  const int ch = std::min(kCrop, gen.height);
  const int x0 = std::clamp(mouth_x - kCrop / 2, 0, gen.width - cw);
  const int y0 = std::clamp(mouth_y - kCrop / 2, 0, gen.height - ch);
  MaskBuffer crop(gen.width, gen.height);
  for (int y = y0; y < y0 + ch; ++y)
    for (int x = x0; x < x0 + cw; ++x) crop.at(x, y) = 1.0f;
  return fapd(gen, gt, crop);
}

// Pearson correlation of the jaw channel over two whole tracks.
inline double track_jaw_pcc(const Tensor& input_track, const Tensor& output_track) {
  if (input_track.rank() != 2 || input_track.dim(1) != kExprDim ||
      output_track.rank() != 2 || output_track.dim(1) != kExprDim)
    throw ValidationError("track_jaw_pcc: tracks must be [T,51]");
  if (input_track.dim(0) != output_track.dim(0))
    throw ValidationError("track_jaw_pcc: lengths differ (" +
                          std::to_string(input_track.dim(0)) + " vs " +
                          std::to_string(output_track.dim(0)) + ")");
  const int frames = input_track.dim(0);
  std::vector<float> a, b;
  a.reserve(size_t(frames));
  b.reserve(size_t(frames));
  for (int t = 0; t < frames; ++t) {
    a.push_back(input_track.data[size_t(t) * kExprDim]);
    b.push_back(output_track.data[size_t(t) * kExprDim]);
  }
  return double(pcc(a, b));
}

}  // namespace emoseq

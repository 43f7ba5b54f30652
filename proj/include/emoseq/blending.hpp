#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "emoseq/image.hpp"

namespace emoseq {

namespace detail {

// Channel-interleaved float plane; pyramid math is channel-count agnostic.
struct Plane {
  int w = 0, h = 0, c = 1;
  std::vector<float> data;
  Plane() = default;
  Plane(int w_, int h_, int c_) : w(w_), h(h_), c(c_), data(size_t(w_) * size_t(h_) * size_t(c_), 0.0f) {}
  float* px(int x, int y) { return data.data() + (size_t(y) * size_t(w) + size_t(x)) * size_t(c); }
  const float* px(int x, int y) const {
    return data.data() + (size_t(y) * size_t(w) + size_t(x)) * size_t(c);
  }
};

constexpr float kBinomial5[5] = {1.0f / 16, 4.0f / 16, 6.0f / 16, 4.0f / 16, 1.0f / 16};

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

// Separable 5-tap binomial blur with edge-clamped sampling; `gain` rescales
// the kernel (x2 per axis for the zero-inserted upsample lattice).
inline Plane blur5(const Plane& src, float gain = 1.0f) {
  Plane tmp(src.w, src.h, src.c);
  for (int y = 0; y < src.h; ++y)
    for (int x = 0; x < src.w; ++x) {
      float* out = tmp.px(x, y);
      for (int ch = 0; ch < src.c; ++ch) out[ch] = 0.0f;
      for (int k = -2; k <= 2; ++k) {
        const float* in = src.px(clampi(x + k, 0, src.w - 1), y);
        const float wk = kBinomial5[k + 2] * gain;
        for (int ch = 0; ch < src.c; ++ch) out[ch] += wk * in[ch];
      }
    }
  Plane dst(src.w, src.h, src.c);
  for (int y = 0; y < src.h; ++y)
    for (int x = 0; x < src.w; ++x) {
      float* out = dst.px(x, y);
      for (int ch = 0; ch < src.c; ++ch) out[ch] = 0.0f;
      for (int k = -2; k <= 2; ++k) {
        const float* in = tmp.px(x, clampi(y + k, 0, src.h - 1));
        const float wk = kBinomial5[k + 2] * gain;
        for (int ch = 0; ch < src.c; ++ch) out[ch] += wk * in[ch];
      }
    }
  return dst;
}

// Blur + keep every other sample; ceil-division sizes handle odd dims.
inline Plane downsample(const Plane& src) {
  Plane blurred = blur5(src);
  Plane dst((src.w + 1) / 2, (src.h + 1) / 2, src.c);
  for (int y = 0; y < dst.h; ++y)
    for (int x = 0; x < dst.w; ++x) {
      const float* in = blurred.px(2 * x, 2 * y);
      float* out = dst.px(x, y);
      for (int ch = 0; ch < src.c; ++ch) out[ch] = in[ch];
    }
  return dst;
}

// Zero insertion then the binomial blur with gain 2 per axis (4 total) to
// restore the carried energy. Implemented as a direct gather over the even
// lattice taps, clamping in *source* coordinates so that edges replicate the
// nearest sample instead of bleeding in zeros (a constant image upsamples to
// the same constant everywhere).
inline Plane upsample(const Plane& src, int target_w, int target_h) {
  Plane tmp(target_w, src.h, src.c);  // horizontal pass
  for (int y = 0; y < src.h; ++y)
    for (int x = 0; x < target_w; ++x) {
      float* out = tmp.px(x, y);
      for (int ch = 0; ch < src.c; ++ch) out[ch] = 0.0f;
      for (int m = -2; m <= 2; ++m) {
        const int p = x - m;
        if (p & 1) continue;  // odd lattice positions carry zeros
        const float* in = src.px(clampi(p / 2, 0, src.w - 1), y);
        const float wk = kBinomial5[m + 2] * 2.0f;
        for (int ch = 0; ch < src.c; ++ch) out[ch] += wk * in[ch];
      }
    }
  Plane dst(target_w, target_h, src.c);  // vertical pass
  for (int y = 0; y < target_h; ++y)
    for (int x = 0; x < target_w; ++x) {
      float* out = dst.px(x, y);
      for (int ch = 0; ch < src.c; ++ch) out[ch] = 0.0f;
      for (int m = -2; m <= 2; ++m) {
        const int p = y - m;
        if (p & 1) continue;
        const float* in = tmp.px(x, clampi(p / 2, 0, src.h - 1));
        const float wk = kBinomial5[m + 2] * 2.0f;
        for (int ch = 0; ch < src.c; ++ch) out[ch] += wk * in[ch];
      }
    }
  return dst;
}

inline Plane from_image(const ImageBuffer& img) {
  Plane p(img.width, img.height, 3);
  p.data = img.data;
  return p;
}

inline Plane from_mask(const MaskBuffer& mask) {
  Plane p(mask.width, mask.height, 1);
  p.data = mask.data;
  return p;
}

}  // namespace detail

struct Pyramids {
  std::vector<detail::Plane> gaussian;
  std::vector<detail::Plane> laplacian;  // top level equals the coarsest gaussian
};

inline void check_pyramid_levels(int width, int height, int levels) {
  if (levels < 1) throw ValidationError("pyramid needs levels >= 1");
  const int min_dim = std::min(width, height);
  if (min_dim < (1 << (levels - 1)))
    throw ValidationError("image " + std::to_string(width) + "x" + std::to_string(height) +
                          " too small for " + std::to_string(levels) + " pyramid levels");
}

inline Pyramids build_pyramids_plane(detail::Plane base, int levels) {
  check_pyramid_levels(base.w, base.h, levels);
  Pyramids p;
  p.gaussian.push_back(std::move(base));
  for (int i = 1; i < levels; ++i) p.gaussian.push_back(detail::downsample(p.gaussian.back()));
  for (int i = 0; i + 1 < levels; ++i) {
    const detail::Plane& g = p.gaussian[size_t(i)];
    detail::Plane up = detail::upsample(p.gaussian[size_t(i) + 1], g.w, g.h);
    detail::Plane lap(g.w, g.h, g.c);
    for (size_t k = 0; k < lap.data.size(); ++k) lap.data[k] = g.data[k] - up.data[k];
    p.laplacian.push_back(std::move(lap));
  }
  p.laplacian.push_back(p.gaussian.back());
  return p;
}

inline Pyramids build_pyramids(const ImageBuffer& image, int levels) {
  return build_pyramids_plane(detail::from_image(image), levels);
}

// Reconstructs the base image from a Laplacian pyramid (telescoping sum).
inline ImageBuffer collapse_pyramid(const std::vector<detail::Plane>& laplacian) {
  if (laplacian.empty()) throw ValidationError("collapse: empty pyramid");
  detail::Plane acc = laplacian.back();
  for (int i = int(laplacian.size()) - 2; i >= 0; --i) {
    const detail::Plane& lap = laplacian[size_t(i)];
    detail::Plane up = detail::upsample(acc, lap.w, lap.h);
    for (size_t k = 0; k < up.data.size(); ++k) up.data[k] += lap.data[k];
    acc = std::move(up);
  }
  ImageBuffer out(acc.w, acc.h);
  out.data = acc.data;
  return out;
}

inline int default_blend_levels(int width, int height) {
  const int levels = int(std::floor(std::log2(double(std::min(width, height))))) - 2;
  return std::max(3, levels);
}

// Per-level alpha blend with the mask's Gaussian pyramid, then collapse.
// Output values are clamped to [0,1] only at this final boundary.
inline ImageBuffer multiband_blend(const ImageBuffer& fg, const ImageBuffer& bg,
                                   const MaskBuffer& mask, int levels) {
  if (!fg.same_dims(bg) || fg.width != mask.width || fg.height != mask.height)
    throw ValidationError("blend: fg/bg/mask dimensions differ");
  check_pyramid_levels(fg.width, fg.height, levels);
  Pyramids pf = build_pyramids_plane(detail::from_image(fg), levels);
  Pyramids pb = build_pyramids_plane(detail::from_image(bg), levels);
  Pyramids pm = build_pyramids_plane(detail::from_mask(mask), levels);

  std::vector<detail::Plane> blended;
  blended.reserve(size_t(levels));
  for (int i = 0; i < levels; ++i) {
    const detail::Plane& lf = pf.laplacian[size_t(i)];
    const detail::Plane& lb = pb.laplacian[size_t(i)];
    const detail::Plane& gm = pm.gaussian[size_t(i)];
    detail::Plane out(lf.w, lf.h, 3);
    for (int y = 0; y < lf.h; ++y)
      for (int x = 0; x < lf.w; ++x) {
        const float m = gm.px(x, y)[0];
        const float* f = lf.px(x, y);
        const float* b = lb.px(x, y);
        float* o = out.px(x, y);
        for (int ch = 0; ch < 3; ++ch) o[ch] = m * f[ch] + (1.0f - m) * b[ch];
      }
    blended.push_back(std::move(out));
  }
  ImageBuffer result = collapse_pyramid(blended);
  clamp01(result.data);
  return result;
}

// Grayscale erosion with a disk, then Gaussian blur with sigma = radius/2.
// Samples outside the mask count as 0, so support shrinks at the borders too.
inline MaskBuffer erode_soft(const MaskBuffer& mask, float radius) {
  if (radius < 0.0f) throw ValidationError("erode: radius must be >= 0");
  if (radius == 0.0f) return mask;

  const int r = int(std::ceil(radius));
  std::vector<std::pair<int, int>> disk;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx)
      if (float(dx * dx + dy * dy) <= radius * radius + 1e-6f) disk.emplace_back(dx, dy);

  MaskBuffer eroded(mask.width, mask.height);
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) {
      float lo = 1.0f;
      for (const auto& [dx, dy] : disk) {
        const int px = x + dx, py = y + dy;
        const float v = (px < 0 || py < 0 || px >= mask.width || py >= mask.height)
                            ? 0.0f
                            : mask.at(px, py);
        lo = std::min(lo, v);
        if (lo == 0.0f) break;
      }
      eroded.at(x, y) = lo;
    }

  const float sigma = radius / 2.0f;
  const int half = std::max(1, int(std::ceil(3.0f * sigma)));
  std::vector<float> kernel(size_t(2 * half + 1));
  float sum = 0.0f;
  for (int k = -half; k <= half; ++k) {
    kernel[size_t(k + half)] = std::exp(-float(k * k) / (2.0f * sigma * sigma));
    sum += kernel[size_t(k + half)];
  }
  for (auto& v : kernel) v /= sum;

  MaskBuffer tmp(mask.width, mask.height);
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) {
      float acc = 0.0f;
      for (int k = -half; k <= half; ++k) {
        const int px = x + k;
        if (px < 0 || px >= mask.width) continue;
        acc += kernel[size_t(k + half)] * eroded.at(px, y);
      }
      tmp.at(x, y) = acc;
    }
  MaskBuffer out(mask.width, mask.height);
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) {
      float acc = 0.0f;
      for (int k = -half; k <= half; ++k) {
        const int py = y + k;
        if (py < 0 || py >= mask.height) continue;
        acc += kernel[size_t(k + half)] * tmp.at(x, py);
      }
      out.at(x, y) = acc;
    }
  return out;
}

}  // namespace emoseq

#pragma once

// Independent multiband-blend oracle. Same mathematical definition as the
// library version (binomial 5-tap pyramid, per-level alpha blend with the
// mask's Gaussian pyramid) but coded as straightforward non-separable 2D
// convolutions in double precision, sharing no code with the implementation.

#include <algorithm>
#include <cmath>
#include <vector>

#include "emoseq/image.hpp"

namespace testsupport {

struct RefPlane {
  int w = 0, h = 0, c = 1;
  std::vector<double> data;
  RefPlane() = default;
  RefPlane(int w_, int h_, int c_) : w(w_), h(h_), c(c_), data(size_t(w_) * size_t(h_) * size_t(c_), 0.0) {}
  double& at(int x, int y, int ch) {
    return data[(size_t(y) * size_t(w) + size_t(x)) * size_t(c) + size_t(ch)];
  }
  double at(int x, int y, int ch) const {
    return data[(size_t(y) * size_t(w) + size_t(x)) * size_t(c) + size_t(ch)];
  }
};

inline double ref_kernel(int k) {
  static const double k5[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
  return k5[k + 2];
}

inline int ref_clamp(int v, int hi) { return std::clamp(v, 0, hi); }

inline RefPlane ref_blur(const RefPlane& src) {
  RefPlane out(src.w, src.h, src.c);
  for (int y = 0; y < src.h; ++y)
    for (int x = 0; x < src.w; ++x)
      for (int ch = 0; ch < src.c; ++ch) {
        double acc = 0.0;
        for (int n = -2; n <= 2; ++n)
          for (int m = -2; m <= 2; ++m)
            acc += ref_kernel(m) * ref_kernel(n) *
                   src.at(ref_clamp(x + m, src.w - 1), ref_clamp(y + n, src.h - 1), ch);
        out.at(x, y, ch) = acc;
      }
  return out;
}

inline RefPlane ref_down(const RefPlane& src) {
  RefPlane blurred = ref_blur(src);
  RefPlane out((src.w + 1) / 2, (src.h + 1) / 2, src.c);
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x)
      for (int ch = 0; ch < src.c; ++ch) out.at(x, y, ch) = blurred.at(2 * x, 2 * y, ch);
  return out;
}

inline RefPlane ref_up(const RefPlane& src, int tw, int th) {
  RefPlane out(tw, th, src.c);
  for (int y = 0; y < th; ++y)
    for (int x = 0; x < tw; ++x)
      for (int ch = 0; ch < src.c; ++ch) {
        double acc = 0.0;
        for (int n = -2; n <= 2; ++n)
          for (int m = -2; m <= 2; ++m) {
            const int px = x - m, py = y - n;
            if ((px & 1) || (py & 1)) continue;
            acc += 4.0 * ref_kernel(m) * ref_kernel(n) *
                   src.at(ref_clamp(px / 2, src.w - 1), ref_clamp(py / 2, src.h - 1), ch);
          }
        out.at(x, y, ch) = acc;
      }
  return out;
}

inline std::vector<RefPlane> ref_gaussian(const RefPlane& base, int levels) {
  std::vector<RefPlane> g = {base};
  for (int i = 1; i < levels; ++i) g.push_back(ref_down(g.back()));
  return g;
}

inline std::vector<RefPlane> ref_laplacian(const std::vector<RefPlane>& g) {
  std::vector<RefPlane> lap;
  for (size_t i = 0; i + 1 < g.size(); ++i) {
    RefPlane up = ref_up(g[i + 1], g[i].w, g[i].h);
    RefPlane l(g[i].w, g[i].h, g[i].c);
    for (size_t k = 0; k < l.data.size(); ++k) l.data[k] = g[i].data[k] - up.data[k];
    lap.push_back(std::move(l));
  }
  lap.push_back(g.back());
  return lap;
}

inline RefPlane ref_from_image(const emoseq::ImageBuffer& img) {
  RefPlane p(img.width, img.height, 3);
  for (size_t k = 0; k < img.data.size(); ++k) p.data[k] = double(img.data[k]);
  return p;
}

inline emoseq::ImageBuffer ref_multiband_blend(const emoseq::ImageBuffer& fg,
                                               const emoseq::ImageBuffer& bg,
                                               const emoseq::MaskBuffer& mask, int levels) {
  RefPlane pm(mask.width, mask.height, 1);
  for (size_t k = 0; k < mask.data.size(); ++k) pm.data[k] = double(mask.data[k]);
  auto gf = ref_gaussian(ref_from_image(fg), levels);
  auto gb = ref_gaussian(ref_from_image(bg), levels);
  auto gm = ref_gaussian(pm, levels);
  auto lf = ref_laplacian(gf);
  auto lb = ref_laplacian(gb);

  std::vector<RefPlane> blended;
  for (int i = 0; i < levels; ++i) {
    RefPlane out(lf[size_t(i)].w, lf[size_t(i)].h, 3);
    for (int y = 0; y < out.h; ++y)
      for (int x = 0; x < out.w; ++x) {
        const double m = gm[size_t(i)].at(x, y, 0);
        for (int ch = 0; ch < 3; ++ch)
          out.at(x, y, ch) = m * lf[size_t(i)].at(x, y, ch) + (1.0 - m) * lb[size_t(i)].at(x, y, ch);
      }
    blended.push_back(std::move(out));
  }
  RefPlane acc = blended.back();
  for (int i = levels - 2; i >= 0; --i) {
    RefPlane up = ref_up(acc, blended[size_t(i)].w, blended[size_t(i)].h);
    for (size_t k = 0; k < up.data.size(); ++k) up.data[k] += blended[size_t(i)].data[k];
    acc = std::move(up);
  }
  emoseq::ImageBuffer result(acc.w, acc.h);
  for (size_t k = 0; k < acc.data.size(); ++k)
    result.data[k] = std::clamp(float(acc.data[k]), 0.0f, 1.0f);
  return result;
}

}  // namespace testsupport

#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "emoseq/image.hpp"

namespace emoseq {

constexpr int kNumLandmarks = 68;

using Landmarks68 = std::array<std::array<double, 2>, kNumLandmarks>;

// x' = s*R(theta)*x + t, no reflection.
struct SimilarityTransform2D {
  double scale = 1.0;
  double rotation = 0.0;
  double tx = 0.0;
  double ty = 0.0;

  std::array<double, 2> apply(double x, double y) const {
    const double c = std::cos(rotation), s = std::sin(rotation);
    return {scale * (c * x - s * y) + tx, scale * (s * x + c * y) + ty};
  }

  SimilarityTransform2D inverse() const {
    SimilarityTransform2D inv;
    inv.scale = 1.0 / scale;
    inv.rotation = -rotation;
    const double c = std::cos(-rotation), s = std::sin(-rotation);
    inv.tx = -inv.scale * (c * tx - s * ty);
    inv.ty = -inv.scale * (s * tx + c * ty);
    return inv;
  }
};

// Least-squares similarity (Procrustes) aligning src onto dst. Closed form
// over centroids and the cross-covariance; the rotation comes from atan2 of
// the cross/dot sums, so the linear part is always a proper rotation.
inline SimilarityTransform2D estimate_similarity(const Landmarks68& src, const Landmarks68& dst) {
  double mx = 0, my = 0, nx = 0, ny = 0;
  for (int i = 0; i < kNumLandmarks; ++i) {
    mx += src[size_t(i)][0];
    my += src[size_t(i)][1];
    nx += dst[size_t(i)][0];
    ny += dst[size_t(i)][1];
  }
  mx /= kNumLandmarks;
  my /= kNumLandmarks;
  nx /= kNumLandmarks;
  ny /= kNumLandmarks;

  double dot = 0, cross = 0, src_norm = 0, dst_norm = 0;
  for (int i = 0; i < kNumLandmarks; ++i) {
    const double ax = src[size_t(i)][0] - mx, ay = src[size_t(i)][1] - my;
    const double bx = dst[size_t(i)][0] - nx, by = dst[size_t(i)][1] - ny;
    dot += ax * bx + ay * by;
    cross += ax * by - ay * bx;
    src_norm += ax * ax + ay * ay;
    dst_norm += bx * bx + by * by;
  }
  if (src_norm < 1e-12 || dst_norm < 1e-12)
    throw ValidationError("estimate_similarity: degenerate landmark set (zero spread)");

  SimilarityTransform2D t;
  t.rotation = std::atan2(cross, dot);
  t.scale = std::sqrt(dot * dot + cross * cross) / src_norm;
  const double c = std::cos(t.rotation), s = std::sin(t.rotation);
  t.tx = nx - t.scale * (c * mx - s * my);
  t.ty = ny - t.scale * (s * mx + c * my);
  return t;
}

inline double alignment_residual(const SimilarityTransform2D& t, const Landmarks68& src,
                                 const Landmarks68& dst) {
  double acc = 0;
  for (int i = 0; i < kNumLandmarks; ++i) {
    const auto p = t.apply(src[size_t(i)][0], src[size_t(i)][1]);
    const double dx = p[0] - dst[size_t(i)][0], dy = p[1] - dst[size_t(i)][1];
    acc += dx * dx + dy * dy;
  }
  return acc;
}

// Coordinate-wise mean of landmark sets already mapped to a common frame
// (jitter suppression across displaced crops).
inline Landmarks68 smooth_landmarks(const std::vector<Landmarks68>& sets) {
  if (sets.empty()) throw ValidationError("smooth_landmarks: no landmark sets");
  Landmarks68 mean{};
  for (const auto& set : sets)
    for (int i = 0; i < kNumLandmarks; ++i) {
      mean[size_t(i)][0] += set[size_t(i)][0];
      mean[size_t(i)][1] += set[size_t(i)][1];
    }
  for (auto& p : mean) {
    p[0] /= double(sets.size());
    p[1] /= double(sets.size());
  }
  return mean;
}

// Inverse-mapped bilinear warp; samples outside the source are black.
inline ImageBuffer warp(const ImageBuffer& image, const SimilarityTransform2D& transform,
                        int out_width, int out_height) {
  ImageBuffer out(out_width, out_height);
  const SimilarityTransform2D inv = transform.inverse();
  for (int y = 0; y < out_height; ++y) {
    for (int x = 0; x < out_width; ++x) {
      const auto src = inv.apply(double(x), double(y));
      const double sx = src[0], sy = src[1];
      const int x0 = int(std::floor(sx)), y0 = int(std::floor(sy));
      const float fx = float(sx - x0), fy = float(sy - y0);
      float* dst = out.pixel(x, y);
      auto sample = [&](int px, int py, float* rgb) {
        if (px < 0 || py < 0 || px >= image.width || py >= image.height) {
          rgb[0] = rgb[1] = rgb[2] = 0.0f;
        } else {
          const float* p = image.pixel(px, py);
          rgb[0] = p[0];
          rgb[1] = p[1];
          rgb[2] = p[2];
        }
      };
      float p00[3], p10[3], p01[3], p11[3];
      sample(x0, y0, p00);
      sample(x0 + 1, y0, p10);
      sample(x0, y0 + 1, p01);
      sample(x0 + 1, y0 + 1, p11);
      for (int cch = 0; cch < 3; ++cch) {
        const float top = p00[cch] * (1.0f - fx) + p10[cch] * fx;
        const float bottom = p01[cch] * (1.0f - fx) + p11[cch] * fx;
        dst[cch] = top * (1.0f - fy) + bottom * fy;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// NMFC colorization: each vertex colored by the mean mesh's XYZ coordinates
// normalized to [0,1] per axis, a pose- and expression-independent coding.

struct MeshVertices {
  std::vector<std::array<float, 3>> positions;  // posed mesh (unused by the coloring)
  std::vector<std::array<float, 3>> mean_positions;
};

inline std::vector<std::array<float, 3>> nmfc_colorize(const MeshVertices& mesh) {
  if (mesh.mean_positions.empty()) throw ValidationError("nmfc_colorize: empty mesh");
  if (!mesh.positions.empty() && mesh.positions.size() != mesh.mean_positions.size())
    throw ValidationError("nmfc_colorize: vertex count mismatch");
  std::array<float, 3> lo = mesh.mean_positions[0], hi = mesh.mean_positions[0];
  for (const auto& v : mesh.mean_positions)
    for (int a = 0; a < 3; ++a) {
      lo[size_t(a)] = std::min(lo[size_t(a)], v[size_t(a)]);
      hi[size_t(a)] = std::max(hi[size_t(a)], v[size_t(a)]);
    }
  for (int a = 0; a < 3; ++a)
    if (!(hi[size_t(a)] - lo[size_t(a)] > 0.0f))
      throw ValidationError("nmfc_colorize: degenerate bounding box on axis " + std::to_string(a));
  std::vector<std::array<float, 3>> colors(mesh.mean_positions.size());
  for (size_t i = 0; i < mesh.mean_positions.size(); ++i)
    for (int a = 0; a < 3; ++a)
      colors[i][size_t(a)] =
          (mesh.mean_positions[i][size_t(a)] - lo[size_t(a)]) / (hi[size_t(a)] - lo[size_t(a)]);
  return colors;
}

}  // namespace emoseq

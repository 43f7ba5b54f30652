#include <gtest/gtest.h>

#include "emoseq/geometry.hpp"
#include "emoseq/rng.hpp"

using namespace emoseq;

namespace {

Landmarks68 random_landmarks(Rng& rng, double spread = 100.0) {
  Landmarks68 pts;
  for (auto& p : pts) {
    p[0] = double(rng.uniform(0.0f, float(spread)));
    p[1] = double(rng.uniform(0.0f, float(spread)));
  }
  return pts;
}

Landmarks68 apply_all(const SimilarityTransform2D& t, const Landmarks68& src) {
  Landmarks68 out;
  for (int i = 0; i < kNumLandmarks; ++i) {
    auto p = t.apply(src[size_t(i)][0], src[size_t(i)][1]);
    out[size_t(i)] = {p[0], p[1]};
  }
  return out;
}

}  // namespace

TEST(Procrustes, IdentityOnEqualSets) {
  Rng rng(1);
  Landmarks68 pts = random_landmarks(rng);
  SimilarityTransform2D t = estimate_similarity(pts, pts);
  EXPECT_NEAR(t.scale, 1.0, 1e-10);
  EXPECT_NEAR(t.rotation, 0.0, 1e-10);
  EXPECT_NEAR(t.tx, 0.0, 1e-8);
  EXPECT_NEAR(t.ty, 0.0, 1e-8);
}

TEST(Procrustes, ExactRecoveryOfNoiselessTransform) {
  Rng rng(2);
  Landmarks68 src = random_landmarks(rng);
  SimilarityTransform2D truth;
  truth.scale = 2.0;
  truth.rotation = 30.0 * M_PI / 180.0;
  truth.tx = 5.0;
  truth.ty = -3.0;
  Landmarks68 dst = apply_all(truth, src);
  SimilarityTransform2D got = estimate_similarity(src, dst);
  EXPECT_NEAR(got.scale, truth.scale, 1e-8);
  EXPECT_NEAR(got.rotation, truth.rotation, 1e-8);
  EXPECT_NEAR(got.tx, truth.tx, 1e-6);
  EXPECT_NEAR(got.ty, truth.ty, 1e-6);
}

TEST(Procrustes, ManyRandomNoiselessRecoveries) {
  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    Landmarks68 src = random_landmarks(rng);
    SimilarityTransform2D truth;
    truth.scale = double(rng.uniform(0.2f, 4.0f));
    truth.rotation = double(rng.uniform(-3.1f, 3.1f));
    truth.tx = double(rng.uniform(-50.0f, 50.0f));
    truth.ty = double(rng.uniform(-50.0f, 50.0f));
    Landmarks68 dst = apply_all(truth, src);
    SimilarityTransform2D got = estimate_similarity(src, dst);
    ASSERT_NEAR(got.scale, truth.scale, 1e-8 * truth.scale);
    ASSERT_NEAR(got.rotation, truth.rotation, 1e-8);
    // determinant of the linear part is scale^2 > 0: never a reflection
    ASSERT_GT(got.scale * got.scale, 0.0);
  }
}

// On noisy correspondences the closed form must beat random perturbations.
TEST(Procrustes, NoisyEstimateBeatsRandomSearch) {
  Rng rng(4);
  Landmarks68 src = random_landmarks(rng);
  SimilarityTransform2D truth;
  truth.scale = 1.4;
  truth.rotation = 0.7;
  truth.tx = 12.0;
  truth.ty = -8.0;
  Landmarks68 dst = apply_all(truth, src);
  for (auto& p : dst) {
    p[0] += double(rng.uniform(-1.5f, 1.5f));
    p[1] += double(rng.uniform(-1.5f, 1.5f));
  }
  SimilarityTransform2D est = estimate_similarity(src, dst);
  const double base = alignment_residual(est, src, dst);
  for (int trial = 0; trial < 10000; ++trial) {
    SimilarityTransform2D cand = est;
    cand.scale *= double(1.0f + rng.uniform(-0.05f, 0.05f));
    cand.rotation += double(rng.uniform(-0.05f, 0.05f));
    cand.tx += double(rng.uniform(-1.0f, 1.0f));
    cand.ty += double(rng.uniform(-1.0f, 1.0f));
    ASSERT_GE(alignment_residual(cand, src, dst), base - 1e-9);
  }
}

TEST(Procrustes, DegenerateSetsRejected) {
  Landmarks68 point{};
  for (auto& p : point) p = {5.0, 5.0};
  Rng rng(5);
  Landmarks68 ok = random_landmarks(rng);
  EXPECT_THROW(estimate_similarity(point, ok), ValidationError);
  EXPECT_THROW(estimate_similarity(ok, point), ValidationError);
}

TEST(Transform, InverseRoundTrip) {
  SimilarityTransform2D t;
  t.scale = 1.7;
  t.rotation = -0.45;
  t.tx = 30.0;
  t.ty = -12.0;
  const SimilarityTransform2D inv = t.inverse();
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const double x = double(rng.uniform(-100.0f, 100.0f));
    const double y = double(rng.uniform(-100.0f, 100.0f));
    const auto fwd = t.apply(x, y);
    const auto back = inv.apply(fwd[0], fwd[1]);
    ASSERT_NEAR(back[0], x, 1e-6);
    ASSERT_NEAR(back[1], y, 1e-6);
  }
}

TEST(SmoothLandmarks, MeanBehavior) {
  Rng rng(7);
  Landmarks68 base = random_landmarks(rng);
  EXPECT_EQ(smooth_landmarks({base}), base);

  Landmarks68 plus = base, minus = base;
  for (int i = 0; i < kNumLandmarks; ++i) {
    plus[size_t(i)][0] += 2.0;
    minus[size_t(i)][0] -= 2.0;
  }
  Landmarks68 mid = smooth_landmarks({plus, minus});
  for (int i = 0; i < kNumLandmarks; ++i) {
    EXPECT_NEAR(mid[size_t(i)][0], base[size_t(i)][0], 1e-12);
    EXPECT_NEAR(mid[size_t(i)][1], base[size_t(i)][1], 1e-12);
  }

  Landmarks68 same = smooth_landmarks({base, base, base});
  EXPECT_EQ(same, base);
  EXPECT_THROW(smooth_landmarks({}), ValidationError);
}

namespace {

ImageBuffer random_image(int w, int h, Rng& rng) {
  ImageBuffer img(w, h);
  for (auto& v : img.data) v = rng.uniform(0.0f, 1.0f);
  return img;
}

}  // namespace

TEST(Warp, IdentityIsBitExact) {
  Rng rng(8);
  ImageBuffer img = random_image(17, 13, rng);
  ImageBuffer out = warp(img, SimilarityTransform2D{}, img.width, img.height);
  for (size_t i = 0; i < img.data.size(); ++i) ASSERT_EQ(out.data[i], img.data[i]);
}

TEST(Warp, IntegerTranslationIsExactShift) {
  Rng rng(9);
  ImageBuffer img = random_image(20, 15, rng);
  SimilarityTransform2D t;
  t.tx = 3.0;
  t.ty = -2.0;
  ImageBuffer out = warp(img, t, img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const int sx = x - 3, sy = y + 2;
      const float* o = out.pixel(x, y);
      if (sx < 0 || sy < 0 || sx >= img.width || sy >= img.height) {
        for (int ch = 0; ch < 3; ++ch) ASSERT_EQ(o[ch], 0.0f);
      } else {
        const float* p = img.pixel(sx, sy);
        for (int ch = 0; ch < 3; ++ch) ASSERT_EQ(o[ch], p[ch]);
      }
    }
}

TEST(Warp, RoundTripCloseAwayFromBorders) {
  Rng rng(10);
  // smooth image: bilinear round trips poorly on pure noise
  ImageBuffer img(64, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      float* p = img.pixel(x, y);
      p[0] = 0.5f + 0.5f * std::sin(0.15f * float(x));
      p[1] = 0.5f + 0.5f * std::cos(0.11f * float(y));
      p[2] = 0.5f + 0.25f * std::sin(0.1f * float(x + y));
    }
  SimilarityTransform2D t;
  t.scale = 1.05;
  t.rotation = 0.2;
  t.tx = 1.5;
  t.ty = -2.25;
  ImageBuffer fwd = warp(img, t, img.width, img.height);
  ImageBuffer back = warp(fwd, t.inverse(), img.width, img.height);
  double total = 0.0;
  int count = 0;
  for (int y = 12; y < 52; ++y)
    for (int x = 12; x < 52; ++x)
      for (int ch = 0; ch < 3; ++ch) {
        total += std::fabs(double(back.pixel(x, y)[ch]) - double(img.pixel(x, y)[ch]));
        ++count;
      }
  EXPECT_LT(total / count, 2.0 / 255.0);
}

TEST(Nmfc, CornerAndCenterColors) {
  MeshVertices mesh;
  mesh.mean_positions = {{0.0f, 0.0f, 0.0f}, {2.0f, 4.0f, 8.0f}, {1.0f, 2.0f, 4.0f}};
  auto colors = nmfc_colorize(mesh);
  EXPECT_EQ(colors[0], (std::array<float, 3>{0.0f, 0.0f, 0.0f}));
  EXPECT_EQ(colors[1], (std::array<float, 3>{1.0f, 1.0f, 1.0f}));
  EXPECT_EQ(colors[2], (std::array<float, 3>{0.5f, 0.5f, 0.5f}));
}

TEST(Nmfc, DegenerateAxisRejected) {
  MeshVertices mesh;
  mesh.mean_positions = {{0.0f, 0.0f, 1.0f}, {1.0f, 2.0f, 1.0f}};  // flat in z
  EXPECT_THROW(nmfc_colorize(mesh), ValidationError);
}

// Distinct vertices (farther than 1e-3 of the bbox diagonal) never share a color.
TEST(Nmfc, DistinctVerticesGetDistinctColors) {
  Rng rng(11);
  MeshVertices mesh;
  for (int i = 0; i < 500; ++i)
    mesh.mean_positions.push_back(
        {rng.uniform(-1.0f, 1.0f), rng.uniform(-1.0f, 1.0f), rng.uniform(-1.0f, 1.0f)});
  auto colors = nmfc_colorize(mesh);
  std::array<float, 3> lo = mesh.mean_positions[0], hi = lo;
  for (const auto& v : mesh.mean_positions)
    for (int a = 0; a < 3; ++a) {
      lo[size_t(a)] = std::min(lo[size_t(a)], v[size_t(a)]);
      hi[size_t(a)] = std::max(hi[size_t(a)], v[size_t(a)]);
    }
  const double diag = std::sqrt(std::pow(hi[0] - lo[0], 2) + std::pow(hi[1] - lo[1], 2) +
                                std::pow(hi[2] - lo[2], 2));
  for (size_t i = 0; i < colors.size(); ++i)
    for (size_t j = i + 1; j < colors.size(); ++j) {
      double d2 = 0.0;
      for (int a = 0; a < 3; ++a)
        d2 += std::pow(double(mesh.mean_positions[i][size_t(a)]) -
                           double(mesh.mean_positions[j][size_t(a)]), 2);
      if (std::sqrt(d2) <= 1e-3 * diag) continue;
      ASSERT_NE(colors[i], colors[j]) << i << "," << j;
    }
}

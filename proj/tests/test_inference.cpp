#include <gtest/gtest.h>

#include <cstring>

#include "emoseq/inference.hpp"
#include "support/grid_search.hpp"

using namespace emoseq;

namespace {

ManipulatorConfig small_config() {
  ManipulatorConfig cfg;
  cfg.n_window = 5;
  cfg.hidden_g = 8;
  cfg.hidden_e = 6;
  cfg.hidden_d = 6;
  return cfg;
}

Tensor random_track(int frames, Rng& rng) {
  Tensor t({frames, kExprDim});
  for (auto& x : t.data) x = rng.uniform(-1.0f, 1.0f);
  return t;
}

Tensor random_style(Rng& rng) {
  Tensor s({kStyleDim});
  for (auto& x : s.data) x = rng.uniform(-1.0f, 1.0f);
  return s;
}

}  // namespace

TEST(MergeKernel, GaussianShapeAndPositivity) {
  MergeKernel k = MergeKernel::gaussian(10);
  ASSERT_EQ(k.weights.size(), 10u);
  for (float w : k.weights) EXPECT_GT(w, 0.0f);
  EXPECT_FLOAT_EQ(k.weights[4], k.weights[5]);  // symmetric around (N-1)/2
  EXPECT_GT(k.weights[4], k.weights[0]);
}

TEST(TranslateTrack, SingleWindowEqualsDirectTranslation) {
  ManipulatorConfig cfg = small_config();
  Rng rng(1);
  ParameterStore store;
  init_manipulator_params(store, cfg, rng);
  Rng drng(2);
  Tensor track = random_track(cfg.n_window, drng);
  Tensor style = random_style(drng);
  MergeKernel kernel = MergeKernel::gaussian(cfg.n_window);
  Tensor merged = translate_track(store, cfg, NormStats::identity(), track, style, kernel);
  Tensor direct = translate(store, cfg, NormStats::identity(), track, style);
  ASSERT_EQ(merged.dims, direct.dims);
  EXPECT_EQ(std::memcmp(merged.data.data(), direct.data.data(),
                        merged.size() * sizeof(float)), 0);
}

TEST(TranslateTrack, ZeroOutputHeadIsExactIdentityOnTrack) {
  ManipulatorConfig cfg = small_config();
  Rng rng(3);
  ParameterStore store;
  init_manipulator_params(store, cfg, rng);
  std::fill(store.at("g.out.w").value.data.begin(), store.at("g.out.w").value.data.end(), 0.0f);
  std::fill(store.at("g.out.b").value.data.begin(), store.at("g.out.b").value.data.end(), 0.0f);
  Rng drng(4);
  Tensor track = random_track(23, drng);
  Tensor style = random_style(drng);
  MergeKernel kernel = MergeKernel::gaussian(cfg.n_window);
  Tensor out = translate_track(store, cfg, NormStats::identity(), track, style, kernel);
  EXPECT_EQ(std::memcmp(out.data.data(), track.data.data(), track.size() * sizeof(float)), 0);
}

TEST(TranslateTrack, TooShortTrackRejected) {
  ManipulatorConfig cfg = small_config();
  Rng rng(5);
  ParameterStore store;
  init_manipulator_params(store, cfg, rng);
  Rng drng(6);
  Tensor track = random_track(cfg.n_window - 1, drng);
  EXPECT_THROW(translate_track(store, cfg, NormStats::identity(), track, random_style(drng),
                               MergeKernel::gaussian(cfg.n_window)),
               ValidationError);
}

TEST(MergeWindows, ConstantWindowsGiveConstantOutput) {
  const int n = 10, frames = 14;
  Tensor track({frames, kExprDim});
  Rng rng(7);
  for (auto& x : track.data) x = rng.uniform(-1.0f, 1.0f);
  std::vector<Tensor> windows;
  for (int w = 0; w + n <= frames; ++w) windows.push_back(Tensor::full({n, kExprDim}, 0.4f));
  Tensor out = merge_windows(track, windows, MergeKernel::gaussian(n));
  for (float v : out.data) EXPECT_NEAR(v, 0.4f, 1e-6f);
}

// T=12, N=10: three overlapping windows with disagreeing values; every frame
// must equal the plain normalized Gaussian average computed here from the
// kernel definition.
TEST(MergeWindows, MatchesHandComputedGaussianBlend) {
  const int n = 10, frames = 12, n_windows = 3;
  Tensor track({frames, kExprDim});
  MergeKernel kernel = MergeKernel::gaussian(n);  // sigma = N/4
  std::vector<Tensor> windows;
  for (int w = 0; w < n_windows; ++w) windows.push_back(Tensor::full({n, kExprDim}, float(w + 1)));

  Tensor out = merge_windows(track, windows, kernel);
  for (int t = 0; t < frames; ++t) {
    double num = 0.0, den = 0.0;
    for (int w = 0; w < n_windows; ++w) {
      const int offset = t - w;
      if (offset < 0 || offset >= n) continue;
      num += double(kernel.weights[size_t(offset)]) * double(w + 1);
      den += double(kernel.weights[size_t(offset)]);
    }
    for (int j = 0; j < kExprDim; ++j)
      EXPECT_NEAR(out.data[size_t(t) * kExprDim + size_t(j)], float(num / den), 1e-5f) << t;
  }
}

// Convex-combination bound: every output frame lies inside the min/max of the
// contributing window values, coordinate-wise.
TEST(MergeWindows, OutputBoundedByContributingWindows) {
  const int n = 6, frames = 15;
  Rng rng(8);
  Tensor track({frames, kExprDim});
  for (auto& x : track.data) x = rng.uniform(-1.0f, 1.0f);
  std::vector<Tensor> windows;
  for (int w = 0; w + n <= frames; ++w) {
    Tensor win({n, kExprDim});
    for (auto& x : win.data) x = rng.uniform(-2.0f, 2.0f);
    windows.push_back(std::move(win));
  }
  Tensor out = merge_windows(track, windows, MergeKernel::gaussian(n));
  for (int t = 0; t < frames; ++t) {
    for (int j = 0; j < kExprDim; ++j) {
      float lo = 1e9f, hi = -1e9f;
      for (int w = 0; w < int(windows.size()); ++w) {
        const int offset = t - w;
        if (offset < 0 || offset >= n) continue;
        const float v = windows[size_t(w)].data[size_t(offset) * kExprDim + size_t(j)];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      const float v = out.data[size_t(t) * kExprDim + size_t(j)];
      EXPECT_GE(v, lo - 1e-5f);
      EXPECT_LE(v, hi + 1e-5f);
    }
  }
}

TEST(GeometricMedian, SinglePointAndEmpty) {
  std::vector<std::vector<float>> one = {{1.0f, 2.0f, 3.0f}};
  EXPECT_EQ(geometric_median(one), one[0]);
  EXPECT_THROW(geometric_median({}), ValidationError);
}

TEST(GeometricMedian, UnitSquareCenter) {
  std::vector<std::vector<float>> corners;
  for (float x : {0.0f, 1.0f})
    for (float y : {0.0f, 1.0f}) {
      std::vector<float> p(16, 0.0f);
      p[0] = x;
      p[1] = y;
      corners.push_back(p);
    }
  auto med = geometric_median(corners);
  EXPECT_NEAR(med[0], 0.5f, 1e-6f);
  EXPECT_NEAR(med[1], 0.5f, 1e-6f);
  for (size_t j = 2; j < 16; ++j) EXPECT_NEAR(med[j], 0.0f, 1e-6f);
}

TEST(GeometricMedian, MatchesGridSearchOracle) {
  std::vector<std::vector<float>> pts = {{0, 0}, {10, 0}, {5, 1}};
  auto med = geometric_median(pts);
  auto expected = testsupport::grid_search_median({{0, 0}, {10, 0}, {5, 1}});
  EXPECT_NEAR(med[0], float(expected[0]), 1e-2f);
  EXPECT_NEAR(med[1], float(expected[1]), 1e-2f);
}

TEST(GeometricMedian, ObjectiveNonIncreasing) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<float>> pts;
    const int count = 2 + int(rng.uniform_int(6));
    for (int i = 0; i < count; ++i)
      pts.push_back({rng.uniform(-5.0f, 5.0f), rng.uniform(-5.0f, 5.0f)});
    std::vector<double> trace;
    geometric_median(pts, &trace);
    for (size_t i = 1; i < trace.size(); ++i) EXPECT_LE(trace[i], trace[i - 1] + 1e-9);
  }
}

TEST(ExtractStyle, SingleWindowEqualsEncoding) {
  ManipulatorConfig cfg = small_config();
  Rng rng(12);
  ParameterStore store;
  init_manipulator_params(store, cfg, rng);
  Rng drng(13);
  Tensor track = random_track(cfg.n_window, drng);
  Tensor style = extract_style(store, cfg, NormStats::identity(), track);
  Tensor direct = encode_style(store, cfg, NormStats::identity(), track);
  for (int j = 0; j < kStyleDim; ++j) EXPECT_FLOAT_EQ(style.data[size_t(j)], direct.data[size_t(j)]);
}

TEST(ExtractStyle, IdenticalWindowEncodingsGiveThatVector) {
  ManipulatorConfig cfg = small_config();
  Rng rng(14);
  ParameterStore store;
  init_manipulator_params(store, cfg, rng);
  std::fill(store.at("e.out.w").value.data.begin(), store.at("e.out.w").value.data.end(), 0.0f);
  auto& bias = store.at("e.out.b").value;
  for (int j = 0; j < kStyleDim; ++j) bias.data[size_t(j)] = 0.1f * float(j) - 0.4f;
  Rng drng(15);
  Tensor track = random_track(30, drng);
  Tensor style = extract_style(store, cfg, NormStats::identity(), track);
  for (int j = 0; j < kStyleDim; ++j) EXPECT_NEAR(style.data[size_t(j)], bias.data[size_t(j)], 1e-6f);
}

TEST(ExtractStyle, Deterministic) {
  ManipulatorConfig cfg = small_config();
  Rng rng(16);
  ParameterStore store;
  init_manipulator_params(store, cfg, rng);
  Rng drng(17);
  Tensor track = random_track(25, drng);
  Tensor a = extract_style(store, cfg, NormStats::identity(), track);
  Tensor b = extract_style(store, cfg, NormStats::identity(), track);
  EXPECT_EQ(std::memcmp(a.data.data(), b.data.data(), a.size() * sizeof(float)), 0);
}

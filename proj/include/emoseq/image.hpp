#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "emoseq/common.hpp"

namespace emoseq {

// Float RGB image in [0,1], row-major, channel-interleaved.
struct ImageBuffer {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // height*width*3

  ImageBuffer() = default;
  ImageBuffer(int w, int h) : width(w), height(h), data(size_t(w) * size_t(h) * 3, 0.0f) {
    if (w <= 0 || h <= 0) throw ValidationError("image dims must be positive");
  }

  float* pixel(int x, int y) { return data.data() + (size_t(y) * size_t(width) + size_t(x)) * 3; }
  const float* pixel(int x, int y) const {
    return data.data() + (size_t(y) * size_t(width) + size_t(x)) * 3;
  }
  bool same_dims(const ImageBuffer& o) const { return width == o.width && height == o.height; }
};

// Single-channel float mask in [0,1].
struct MaskBuffer {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // height*width

  MaskBuffer() = default;
  MaskBuffer(int w, int h) : width(w), height(h), data(size_t(w) * size_t(h), 0.0f) {
    if (w <= 0 || h <= 0) throw ValidationError("mask dims must be positive");
  }

  float& at(int x, int y) { return data[size_t(y) * size_t(width) + size_t(x)]; }
  float at(int x, int y) const { return data[size_t(y) * size_t(width) + size_t(x)]; }
};

inline void clamp01(std::vector<float>& data) {
  for (auto& v : data) v = std::clamp(v, 0.0f, 1.0f);
}

}  // namespace emoseq

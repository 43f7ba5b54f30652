#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "emoseq/networks.hpp"
#include "emoseq/rng.hpp"
#include "emoseq/tensor.hpp"

namespace emoseq {

// ---------------------------------------------------------------------------
// Expression tracks: CSV, one row per frame, 51 decimal columns, optional
// header. %.9g round-trips float32 exactly.

inline void write_track(const std::string& path, const Tensor& track) {
  if (track.rank() != 2 || track.dim(1) != kExprDim)
    throw ValidationError("track must be [T," + std::to_string(kExprDim) + "], got " +
                          dims_str(track.dims));
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw ValidationError("cannot open " + path + " for writing");
  char buf[32];
  for (int t = 0; t < track.dim(0); ++t) {
    std::string line;
    for (int j = 0; j < kExprDim; ++j) {
      std::snprintf(buf, sizeof buf, "%.9g", double(track.data[size_t(t) * kExprDim + size_t(j)]));
      if (j) line += ',';
      line += buf;
    }
    line += '\n';
    os << line;
  }
  if (!os) throw ValidationError("write failed for " + path);
}

inline Tensor read_track(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open track file " + path);
  std::vector<float> values;
  std::string line;
  int row = 0;
  bool first = true;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<float> cols;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      while (end && *end == ' ') ++end;
      if (end == cell.c_str() || (end && *end != '\0' && *end != '\r')) {
        numeric = false;
        break;
      }
      cols.push_back(float(v));
    }
    if (!numeric) {
      if (first) {  // optional header row
        first = false;
        continue;
      }
      throw ValidationError(path + ": non-numeric value at row " + std::to_string(row));
    }
    if (int(cols.size()) != kExprDim)
      throw ValidationError(path + ": row " + std::to_string(row) + " has " +
                            std::to_string(cols.size()) + " columns, expected " +
                            std::to_string(kExprDim));
    first = false;
    values.insert(values.end(), cols.begin(), cols.end());
  }
  if (values.empty()) throw ValidationError(path + ": empty track file");
  const int frames = int(values.size()) / kExprDim;
  return Tensor({frames, kExprDim}, std::move(values));
}

// ---------------------------------------------------------------------------
// Synthetic multi-domain generator. Each emotion domain applies its own
// affine map (diagonal-dominant A_y, offset b_y) to a shared content signal:
// every channel is a sum of sinusoids drawn from a small bank of fixed,
// well-separated frequencies, with per-clip random amplitudes and phases.
// Channel 0 is the speech/jaw signal; its row of A_y is purely diagonal with
// a positive gain, so a correct translation preserves its correlation.

struct DomainAffine {
  Tensor a;      // [51,51]
  Tensor a_inv;  // [51,51]
  Tensor offset; // [51]
};

struct DomainSpec {
  int n_slots = 25;
  float noise = 0.02f;
  float style_scale = 0.3f;
  std::vector<std::vector<int>> channel_slots;  // per channel, 2..4 slot ids
  std::vector<DomainAffine> domains;

  double slot_freq(int slot) const {
    // cycles per frame, spaced so that length-100 clips resolve all slots
    return (double(slot) + 1.0) * 0.45 / double(n_slots + 1);
  }

  static DomainSpec make(uint64_t seed, int n_labels = kNumLabels);
};

namespace detail {

inline Tensor invert_matrix(const Tensor& m) {
  const int n = m.dim(0);
  std::vector<double> a(size_t(n) * size_t(2 * n), 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a[size_t(i) * (2 * n) + size_t(j)] = double(m.data[size_t(i) * n + size_t(j)]);
    a[size_t(i) * (2 * n) + size_t(n + i)] = 1.0;
  }
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::fabs(a[size_t(r) * (2 * n) + size_t(col)]) >
          std::fabs(a[size_t(pivot) * (2 * n) + size_t(col)]))
        pivot = r;
    if (std::fabs(a[size_t(pivot) * (2 * n) + size_t(col)]) < 1e-12)
      throw ValidationError("domain matrix is singular");
    if (pivot != col)
      for (int j = 0; j < 2 * n; ++j)
        std::swap(a[size_t(pivot) * (2 * n) + size_t(j)], a[size_t(col) * (2 * n) + size_t(j)]);
    const double d = a[size_t(col) * (2 * n) + size_t(col)];
    for (int j = 0; j < 2 * n; ++j) a[size_t(col) * (2 * n) + size_t(j)] /= d;
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[size_t(r) * (2 * n) + size_t(col)];
      if (f == 0.0) continue;
      for (int j = 0; j < 2 * n; ++j)
        a[size_t(r) * (2 * n) + size_t(j)] -= f * a[size_t(col) * (2 * n) + size_t(j)];
    }
  }
  Tensor inv({n, n});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      inv.data[size_t(i) * n + size_t(j)] = float(a[size_t(i) * (2 * n) + size_t(n + j)]);
  return inv;
}

}  // namespace detail

inline DomainSpec DomainSpec::make(uint64_t seed, int n_labels) {
  DomainSpec spec;
  Rng rng(Rng::mix(seed, 0x5eedULL));
  spec.channel_slots.resize(kExprDim);
  for (int k = 0; k < kExprDim; ++k) {
    const int count = 2 + int(rng.uniform_int(3));  // 2..4 sinusoids
    std::vector<int>& slots = spec.channel_slots[size_t(k)];
    while (int(slots.size()) < count) {
      int s = int(rng.uniform_int(uint32_t(spec.n_slots)));
      if (std::find(slots.begin(), slots.end(), s) == slots.end()) slots.push_back(s);
    }
    std::sort(slots.begin(), slots.end());
  }
  spec.domains.resize(size_t(n_labels));
  for (int y = 0; y < n_labels; ++y) {
    DomainAffine& dom = spec.domains[size_t(y)];
    dom.a = Tensor({kExprDim, kExprDim});
    dom.offset = Tensor({kExprDim});
    auto at = [&](int r, int c) -> float& { return dom.a.data[size_t(r) * kExprDim + size_t(c)]; };
    at(0, 0) = rng.uniform(0.6f, 1.8f);  // jaw gain, positive in every domain
    for (int r = 1; r < kExprDim; ++r) {
      at(r, r) = rng.uniform(0.8f, 1.6f);
      at(r, 0) = rng.uniform(-0.12f, 0.12f);
      for (int pick = 0; pick < 8; ++pick) {
        int c = 1 + int(rng.uniform_int(kExprDim - 1));
        if (c == r) continue;
        at(r, c) = rng.uniform(-0.09f, 0.09f);
      }
      // keep every row strictly diagonally dominant
      float off = 0.0f;
      for (int c = 0; c < kExprDim; ++c)
        if (c != r) off += std::fabs(at(r, c));
      if (off > 0.75f * at(r, r)) {
        const float scale = 0.75f * at(r, r) / off;
        for (int c = 0; c < kExprDim; ++c)
          if (c != r) at(r, c) *= scale;
      }
    }
    for (int r = 0; r < kExprDim; ++r) dom.offset.data[size_t(r)] = rng.uniform(-0.5f, 0.5f);
    dom.a_inv = detail::invert_matrix(dom.a);
  }
  return spec;
}

// Shared content signal for one clip; channel k is a sum of sinusoids at the
// channel's bank slots. Consumes the rng stream in a fixed order.
inline Tensor generate_content(const DomainSpec& spec, int frames, Rng& rng) {
  Tensor content({frames, kExprDim});
  for (int k = 0; k < kExprDim; ++k) {
    const auto& slots = spec.channel_slots[size_t(k)];
    for (int s : slots) {
      const double freq = spec.slot_freq(s);
      const float amp = rng.uniform(0.5f, 1.5f);
      const float phase = rng.uniform(0.0f, 6.2831853f);
      for (int t = 0; t < frames; ++t)
        content.data[size_t(t) * kExprDim + size_t(k)] +=
            amp * std::sin(float(6.283185307179586 * freq * t) + phase);
    }
  }
  return content;
}

// One clip of the given domain: affine map of the content plus per-clip style
// jitter (gain/offset on the non-jaw channels) and observation noise.
inline Tensor generate_clip(const DomainSpec& spec, int label, int frames, Rng& rng) {
  if (label < 0 || label >= int(spec.domains.size()))
    throw ValidationError("generate_clip: label out of range");
  Tensor content = generate_content(spec, frames, rng);
  std::vector<float> gain(kExprDim, 1.0f), shift(kExprDim, 0.0f);
  for (int k = 1; k < kExprDim; ++k) {
    gain[size_t(k)] = 1.0f + spec.style_scale * rng.normal() * 0.5f;
    shift[size_t(k)] = spec.style_scale * rng.normal();
  }
  const DomainAffine& dom = spec.domains[size_t(label)];
  Tensor clip({frames, kExprDim});
  std::vector<float> styled(kExprDim);
  for (int t = 0; t < frames; ++t) {
    const float* c = content.data.data() + size_t(t) * kExprDim;
    for (int k = 0; k < kExprDim; ++k) styled[size_t(k)] = c[k] * gain[size_t(k)] + shift[size_t(k)];
    float* out = clip.data.data() + size_t(t) * kExprDim;
    for (int r = 0; r < kExprDim; ++r) {
      const float* row = dom.a.data.data() + size_t(r) * kExprDim;
      float acc = dom.offset.data[size_t(r)];
      for (int k = 0; k < kExprDim; ++k) acc += row[k] * styled[size_t(k)];
      out[r] = acc + spec.noise * rng.normal();
    }
  }
  return clip;
}

// Least-squares residual of a series against the sinusoid bank of one
// channel (constant + sin/cos pair per slot), solved by normal equations.
namespace detail {

inline double sinusoid_fit_residual(const float* series, int frames, size_t stride,
                                    const std::vector<int>& slots, const DomainSpec& spec) {
  const int m = 1 + 2 * int(slots.size());
  std::vector<double> phi(size_t(frames) * size_t(m));
  for (int t = 0; t < frames; ++t) {
    phi[size_t(t) * m] = 1.0;
    for (size_t s = 0; s < slots.size(); ++s) {
      const double w = 6.283185307179586 * spec.slot_freq(slots[s]) * t;
      phi[size_t(t) * m + 1 + 2 * s] = std::sin(w);
      phi[size_t(t) * m + 2 + 2 * s] = std::cos(w);
    }
  }
  // normal equations G beta = r
  std::vector<double> G(size_t(m) * size_t(m), 0.0), r(size_t(m), 0.0);
  double yy = 0.0;
  for (int t = 0; t < frames; ++t) {
    const double y = double(series[size_t(t) * stride]);
    yy += y * y;
    const double* p = phi.data() + size_t(t) * m;
    for (int i = 0; i < m; ++i) {
      r[size_t(i)] += p[i] * y;
      for (int j = i; j < m; ++j) G[size_t(i) * m + size_t(j)] += p[i] * p[j];
    }
  }
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < i; ++j) G[size_t(i) * m + size_t(j)] = G[size_t(j) * m + size_t(i)];
  // Gaussian elimination with partial pivoting
  std::vector<double> beta = r;
  for (int col = 0; col < m; ++col) {
    int pivot = col;
    for (int rr = col + 1; rr < m; ++rr)
      if (std::fabs(G[size_t(rr) * m + size_t(col)]) > std::fabs(G[size_t(pivot) * m + size_t(col)]))
        pivot = rr;
    if (std::fabs(G[size_t(pivot) * m + size_t(col)]) < 1e-12) return yy;  // degenerate bank
    if (pivot != col) {
      for (int j = 0; j < m; ++j) std::swap(G[size_t(pivot) * m + size_t(j)], G[size_t(col) * m + size_t(j)]);
      std::swap(beta[size_t(pivot)], beta[size_t(col)]);
    }
    for (int rr = col + 1; rr < m; ++rr) {
      const double f = G[size_t(rr) * m + size_t(col)] / G[size_t(col) * m + size_t(col)];
      if (f == 0.0) continue;
      for (int j = col; j < m; ++j) G[size_t(rr) * m + size_t(j)] -= f * G[size_t(col) * m + size_t(j)];
      beta[size_t(rr)] -= f * beta[size_t(col)];
    }
  }
  for (int i = m - 1; i >= 0; --i) {
    for (int j = i + 1; j < m; ++j) beta[size_t(i)] -= G[size_t(i) * m + size_t(j)] * beta[size_t(j)];
    beta[size_t(i)] /= G[size_t(i) * m + size_t(i)];
  }
  // residual = ||y||^2 - beta' r  (projection identity)
  double explained = 0.0;
  for (int i = 0; i < m; ++i) explained += beta[size_t(i)] * r[size_t(i)];
  return std::max(0.0, yy - explained);
}

}  // namespace detail

// Classifies a track by inverting each domain's affine map and fitting the
// recovered channels against their own sinusoid banks; the true domain leaves
// only noise unexplained while a wrong inversion leaks cross-channel energy
// at out-of-bank frequencies. Ties break to the lowest label index.
inline int oracle_classify(const Tensor& track, const DomainSpec& spec) {
  if (track.rank() != 2 || track.dim(1) != kExprDim)
    throw ValidationError("oracle_classify: track must be [T,51]");
  const int frames = track.dim(0);
  int best = 0;
  double best_residual = 0.0;
  std::vector<float> recovered(size_t(frames) * kExprDim);
  for (int y = 0; y < int(spec.domains.size()); ++y) {
    const DomainAffine& dom = spec.domains[size_t(y)];
    for (int t = 0; t < frames; ++t) {
      const float* row_in = track.data.data() + size_t(t) * kExprDim;
      float* row_out = recovered.data() + size_t(t) * kExprDim;
      for (int r = 0; r < kExprDim; ++r) {
        const float* inv_row = dom.a_inv.data.data() + size_t(r) * kExprDim;
        float acc = 0.0f;
        for (int k = 0; k < kExprDim; ++k)
          acc += inv_row[k] * (row_in[k] - dom.offset.data[size_t(k)]);
        row_out[r] = acc;
      }
    }
    double residual = 0.0;
    for (int k = 0; k < kExprDim; ++k)
      residual += detail::sinusoid_fit_residual(recovered.data() + size_t(k), frames,
                                                kExprDim, spec.channel_slots[size_t(k)], spec);
    if (y == 0 || residual < best_residual) {
      best = y;
      best_residual = residual;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Dataset manifest.

struct ManifestClip {
  std::string path;
  int label = 0;
  int length = 0;
};

struct DatasetManifest {
  uint32_t version = 1;
  int n_window = 10;
  uint64_t seed = 0;
  std::vector<ManifestClip> clips;
  Tensor norm_mean;  // [51]
  Tensor norm_std;   // [51]
};

inline nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json j;
  j["version"] = m.version;
  j["n_window"] = m.n_window;
  j["seed"] = m.seed;
  j["clips"] = nlohmann::json::array();
  for (const auto& c : m.clips)
    j["clips"].push_back({{"path", c.path}, {"label", label_names()[size_t(c.label)]}, {"length", c.length}});
  j["norm"] = {{"mean", m.norm_mean.data}, {"std", m.norm_std.data}};
  return j;
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  try {
    m.version = j.at("version").get<uint32_t>();
    m.n_window = j.at("n_window").get<int>();
    m.seed = j.at("seed").get<uint64_t>();
    for (const auto& c : j.at("clips")) {
      ManifestClip clip;
      clip.path = c.at("path").get<std::string>();
      clip.label = label_from_name(c.at("label").get<std::string>());
      clip.length = c.at("length").get<int>();
      m.clips.push_back(std::move(clip));
    }
    auto mean = j.at("norm").at("mean").get<std::vector<float>>();
    auto stddev = j.at("norm").at("std").get<std::vector<float>>();
    if (int(mean.size()) != kExprDim || int(stddev.size()) != kExprDim)
      throw ValidationError("manifest: norm stats must have 51 entries");
    m.norm_mean = Tensor({kExprDim}, std::move(mean));
    m.norm_std = Tensor({kExprDim}, std::move(stddev));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("manifest: ") + e.what());
  }
  return m;
}

inline void write_manifest(const std::string& path, const DatasetManifest& m) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw ValidationError("cannot open " + path + " for writing");
  os << manifest_to_json(m).dump(2) << "\n";
}

inline DatasetManifest read_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open manifest " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("manifest parse error: ") + e.what());
  }
  return manifest_from_json(j);
}

// Generates clips_per_domain clips for every domain into out_dir and writes
// manifest.json. Fully determined by (spec, seed): clip c of domain y uses
// the stream mix(seed, y * clips_per_domain + c).
inline DatasetManifest generate_dataset(const DomainSpec& spec, int clips_per_domain,
                                        int frames, uint64_t seed, const std::string& out_dir,
                                        int n_window = 10) {
  if (clips_per_domain < 1) throw ValidationError("gen-data: clips_per_domain must be >= 1");
  if (frames < n_window)
    throw ValidationError("gen-data: clip length " + std::to_string(frames) +
                          " shorter than window " + std::to_string(n_window));
  std::filesystem::create_directories(out_dir);
  DatasetManifest manifest;
  manifest.n_window = n_window;
  manifest.seed = seed;

  std::vector<double> sum(kExprDim, 0.0), sumsq(kExprDim, 0.0);
  int64_t count = 0;
  const int n_labels = int(spec.domains.size());
  for (int y = 0; y < n_labels; ++y) {
    for (int c = 0; c < clips_per_domain; ++c) {
      Rng rng(Rng::mix(seed, uint64_t(y) * uint64_t(clips_per_domain) + uint64_t(c)));
      Tensor clip = generate_clip(spec, y, frames, rng);
      char name[64];
      std::snprintf(name, sizeof name, "clip_%s_%03d.csv", label_names()[size_t(y)], c);
      write_track(out_dir + "/" + name, clip);
      manifest.clips.push_back({name, y, frames});
      for (int t = 0; t < frames; ++t)
        for (int k = 0; k < kExprDim; ++k) {
          const double v = double(clip.data[size_t(t) * kExprDim + size_t(k)]);
          sum[size_t(k)] += v;
          sumsq[size_t(k)] += v * v;
        }
      count += frames;
    }
  }
  manifest.norm_mean = Tensor({kExprDim});
  manifest.norm_std = Tensor({kExprDim});
  for (int k = 0; k < kExprDim; ++k) {
    const double mean = sum[size_t(k)] / double(count);
    const double var = std::max(0.0, sumsq[size_t(k)] / double(count) - mean * mean);
    manifest.norm_mean.data[size_t(k)] = float(mean);
    manifest.norm_std.data[size_t(k)] = std::max(float(std::sqrt(var)), 1e-6f);
  }
  write_manifest(out_dir + "/manifest.json", manifest);
  return manifest;
}

}  // namespace emoseq

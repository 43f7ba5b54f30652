#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "emoseq/checkpoint.hpp"
#include "emoseq/dataio.hpp"
#include "emoseq/losses.hpp"
#include "emoseq/networks.hpp"

namespace emoseq {

struct TrainConfig {
  int batch_size = 64;
  float learning_rate = 1e-4f;
  float beta1 = 0.0f;
  float beta2 = 0.99f;
  int iterations = 1500;
  uint64_t seed = 1;
  int n_window = 10;
  int hidden_g = 128;
  int hidden_e = 64;
  int hidden_d = 64;
  LossWeights weights;
  int checkpoint_interval = 0;  // 0: final checkpoint only
  bool single_thread_sampling = true;

  ManipulatorConfig manipulator() const {
    ManipulatorConfig cfg;
    cfg.n_window = n_window;
    cfg.hidden_g = hidden_g;
    cfg.hidden_e = hidden_e;
    cfg.hidden_d = hidden_d;
    return cfg;
  }

  void validate() const {
    if (batch_size < 1) throw ValidationError("config: batch_size must be >= 1");
    if (iterations < 1) throw ValidationError("config: iterations must be >= 1");
    if (n_window < 2) throw ValidationError("config: n_window must be >= 2");
    if (hidden_g < 1 || hidden_e < 1 || hidden_d < 1)
      throw ValidationError("config: hidden sizes must be positive");
    if (weights.sty < 0 || weights.cyc < 0 || weights.mouth < 0)
      throw ValidationError("config: loss weights must be non-negative");
  }
};

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<int>();
    if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<float>();
    if (j.contains("beta1")) c.beta1 = j.at("beta1").get<float>();
    if (j.contains("beta2")) c.beta2 = j.at("beta2").get<float>();
    if (j.contains("iterations")) c.iterations = j.at("iterations").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<uint64_t>();
    if (j.contains("n_window")) c.n_window = j.at("n_window").get<int>();
    if (j.contains("hidden_g")) c.hidden_g = j.at("hidden_g").get<int>();
    if (j.contains("hidden_e")) c.hidden_e = j.at("hidden_e").get<int>();
    if (j.contains("hidden_d")) c.hidden_d = j.at("hidden_d").get<int>();
    if (j.contains("lambda_sty")) c.weights.sty = j.at("lambda_sty").get<float>();
    if (j.contains("lambda_cyc")) c.weights.cyc = j.at("lambda_cyc").get<float>();
    if (j.contains("lambda_mouth")) c.weights.mouth = j.at("lambda_mouth").get<float>();
    if (j.contains("checkpoint_interval"))
      c.checkpoint_interval = j.at("checkpoint_interval").get<int>();
    if (j.contains("single_thread_sampling"))
      c.single_thread_sampling = j.at("single_thread_sampling").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
  return nlohmann::json{{"batch_size", c.batch_size},
                        {"learning_rate", c.learning_rate},
                        {"beta1", c.beta1},
                        {"beta2", c.beta2},
                        {"iterations", c.iterations},
                        {"seed", c.seed},
                        {"n_window", c.n_window},
                        {"hidden_g", c.hidden_g},
                        {"hidden_e", c.hidden_e},
                        {"hidden_d", c.hidden_d},
                        {"lambda_sty", c.weights.sty},
                        {"lambda_cyc", c.weights.cyc},
                        {"lambda_mouth", c.weights.mouth},
                        {"checkpoint_interval", c.checkpoint_interval},
                        {"single_thread_sampling", c.single_thread_sampling}};
}

// Stride-1 training windows pre-extracted from every clip.
struct WindowPool {
  std::vector<Tensor> tracks;
  struct WindowRef {
    int track = 0;
    int start = 0;
    int label = 0;
  };
  std::vector<WindowRef> windows;
  int n_window = 10;

  static WindowPool load(const DatasetManifest& manifest, const std::string& data_dir,
                         int n_window, int batch_size) {
    WindowPool pool;
    pool.n_window = n_window;
    std::vector<int> per_domain(kNumLabels, 0);
    for (const auto& clip : manifest.clips) {
      Tensor track = read_track(data_dir + "/" + clip.path);
      if (track.dim(0) != clip.length)
        throw ValidationError(clip.path + ": manifest length " + std::to_string(clip.length) +
                              " does not match file (" + std::to_string(track.dim(0)) + ")");
      if (track.dim(0) < n_window) continue;
      const int track_idx = int(pool.tracks.size());
      pool.tracks.push_back(std::move(track));
      for (int s = 0; s + n_window <= clip.length; ++s)
        pool.windows.push_back({track_idx, s, clip.label});
      per_domain[size_t(clip.label)] += clip.length - n_window + 1;
    }
    int domains = 0;
    for (int y = 0; y < kNumLabels; ++y) {
      if (per_domain[size_t(y)] == 0) continue;
      ++domains;
      if (per_domain[size_t(y)] < batch_size)
        throw ValidationError("dataset: domain '" + std::string(label_names()[size_t(y)]) +
                              "' has only " + std::to_string(per_domain[size_t(y)]) +
                              " windows, need at least " + std::to_string(batch_size));
    }
    if (domains < 2) throw ValidationError("dataset: need at least 2 domains");
    return pool;
  }
};

// A batch laid out as one [B,51] tensor per timestep.
struct SequenceBatch {
  std::vector<Tensor> frames;  // n_window tensors of [B,51]
  std::vector<int> labels;     // B
};

inline SequenceBatch sample_batch(const WindowPool& pool, int batch_size, Rng& rng) {
  SequenceBatch batch;
  batch.frames.assign(size_t(pool.n_window), Tensor({batch_size, kExprDim}));
  batch.labels.resize(size_t(batch_size));
  for (int b = 0; b < batch_size; ++b) {
    const auto& ref = pool.windows[rng.uniform_int(uint32_t(pool.windows.size()))];
    batch.labels[size_t(b)] = ref.label;
    const Tensor& track = pool.tracks[size_t(ref.track)];
    for (int t = 0; t < pool.n_window; ++t) {
      const float* src = track.data.data() + size_t(ref.start + t) * kExprDim;
      float* dst = batch.frames[size_t(t)].data.data() + size_t(b) * kExprDim;
      for (int j = 0; j < kExprDim; ++j) dst[j] = src[j];
    }
  }
  return batch;
}

struct TrainState {
  TrainConfig config;
  ManipulatorConfig cfg;
  ParameterStore store;
  NormStats norm;
  Rng rng;
  int64_t iteration = 0;
};

inline TrainState init_train_state(const TrainConfig& config, const NormStats& norm) {
  TrainState st;
  st.config = config;
  st.cfg = config.manipulator();
  st.norm = norm;
  Rng init_rng(Rng::mix(config.seed, 0x1217ULL));
  init_manipulator_params(st.store, st.cfg, init_rng);
  st.rng = Rng(Rng::mix(config.seed, 0x7e57ULL));
  return st;
}

namespace detail {

inline bool is_reserved_name(const std::string& name) {
  return name.rfind("norm.", 0) == 0 || name.rfind("opt.", 0) == 0 ||
         name.rfind("train.", 0) == 0 || name.rfind("meta.", 0) == 0;
}

inline std::function<bool(const std::string&)> prefix_filter(bool want_d) {
  return [want_d](const std::string& name) {
    const bool is_d = name.rfind("d.", 0) == 0;
    return want_d ? is_d : !is_d;
  };
}

inline Tensor onehot_rows(const std::vector<int>& labels) {
  Tensor t({int(labels.size()), kNumLabels});
  for (size_t r = 0; r < labels.size(); ++r) t.data[r * kNumLabels + size_t(labels[r])] = 1.0f;
  return t;
}

// D output [B,7] -> the per-row branch given by labels, as [B,1].
inline Val select_branch(Graph& g, Val scores, const std::vector<int>& labels) {
  return g.row_sum(g.mul(scores, g.constant(onehot_rows(labels))));
}

inline std::vector<Val> batch_leaves(Graph& g, const SequenceBatch& batch) {
  std::vector<Val> xs;
  xs.reserve(batch.frames.size());
  for (const auto& f : batch.frames) xs.push_back(g.constant(f));
  return xs;
}

}  // namespace detail

// One optimization pair: update D on the adversarial loss, then update G, E
// and M on the full objective (adversary frozen). `use_latent_style` selects
// between the mapping-network path (style from z, random target labels) and
// the reference path (style encoded from an independently drawn batch, target
// labels taken from the reference windows).
inline LossReport train_step(TrainState& st, const SequenceBatch& content,
                             const SequenceBatch* reference, const Tensor* z,
                             const std::vector<int>* latent_labels) {
  const bool use_latent_style = reference == nullptr;
  const std::vector<int>& target_labels =
      use_latent_style ? *latent_labels : reference->labels;
  LossReport report;

  {  // discriminator update; generator side enters as constants
    Graph g(&st.store);
    g.set_trainable_filter(detail::prefix_filter(true));
    auto xs = detail::batch_leaves(g, content);
    Val style = use_latent_style
                    ? map_latent_graph(g, st.cfg, g.constant(*z), target_labels)
                    : encode_style_graph(g, st.cfg, st.norm,
                                         detail::batch_leaves(g, *reference));
    auto fake = translate_graph(g, st.cfg, st.norm, xs, style);
    Val real_scores =
        detail::select_branch(g, discriminate_graph(g, st.cfg, st.norm, xs), content.labels);
    Val fake_scores =
        detail::select_branch(g, discriminate_graph(g, st.cfg, st.norm, fake), target_labels);
    Val loss_d = adv_loss_d_graph(g, real_scores, fake_scores);
    report.adv_d = g.scalar_value(loss_d);
    g.backward(loss_d);
    adam_step(st.store, st.config.learning_rate, st.config.beta1, st.config.beta2);
  }

  {  // translator / style encoder / mapping network update; D frozen
    Graph g(&st.store);
    g.set_trainable_filter(detail::prefix_filter(false));
    auto xs = detail::batch_leaves(g, content);
    Val style = use_latent_style
                    ? map_latent_graph(g, st.cfg, g.constant(*z), target_labels)
                    : encode_style_graph(g, st.cfg, st.norm,
                                         detail::batch_leaves(g, *reference));
    auto fake = translate_graph(g, st.cfg, st.norm, xs, style);
    Val fake_scores =
        detail::select_branch(g, discriminate_graph(g, st.cfg, st.norm, fake), target_labels);
    Val adv_g = adv_loss_g_graph(g, fake_scores);
    Val style_rec = encode_style_graph(g, st.cfg, st.norm, fake);
    Val sty = style_recon_loss_graph(g, style, style_rec);
    Val back_style = encode_style_graph(g, st.cfg, st.norm, xs);
    auto cycled = translate_graph(g, st.cfg, st.norm, fake, back_style);
    Val cyc = cycle_loss_graph(g, xs, cycled);
    Val mouth = speech_loss_graph(g, jaw_series_graph(g, xs), jaw_series_graph(g, fake),
                                  jaw_series_graph(g, cycled));
    Val total = total_gem_loss_graph(g, adv_g, sty, cyc, mouth, st.config.weights);
    report.adv_g = g.scalar_value(adv_g);
    report.sty = g.scalar_value(sty);
    report.cyc = g.scalar_value(cyc);
    report.mouth = g.scalar_value(mouth);
    report.total_gem = g.scalar_value(total);
    g.backward(total);
    adam_step(st.store, st.config.learning_rate, st.config.beta1, st.config.beta2);
  }

  const float checks[] = {report.adv_d, report.adv_g, report.sty,
                          report.cyc,   report.mouth, report.total_gem};
  if (!all_finite(checks))
    throw DivergenceError("training diverged at iteration " + std::to_string(st.iteration));
  return report;
}

inline LossReport train_step_latent(TrainState& st, const SequenceBatch& content,
                                    const Tensor& z, const std::vector<int>& target_labels) {
  return train_step(st, content, nullptr, &z, &target_labels);
}

inline LossReport train_step_reference(TrainState& st, const SequenceBatch& content,
                                       const SequenceBatch& reference) {
  return train_step(st, content, &reference, nullptr, nullptr);
}

// ---------------------------------------------------------------------------
// Checkpoints. Model tensors plus reserved entries: normalization statistics,
// Adam state, RNG state and iteration counter, and the window length.

inline TensorList train_state_to_tensors(const TrainState& st, bool include_train_state) {
  TensorList out;
  for (size_t i = 0; i < st.store.size(); ++i) {
    const auto& e = st.store.entry(int(i));
    out.emplace_back(e.name, e.value);
  }
  out.emplace_back("norm.mean", st.norm.mean);
  out.emplace_back("norm.std", st.norm.stddev);
  Tensor nwin({1});
  nwin.data[0] = float(st.cfg.n_window);
  out.emplace_back("meta.n_window", nwin);
  if (include_train_state) {
    for (size_t i = 0; i < st.store.size(); ++i) {
      const auto& e = st.store.entry(int(i));
      out.emplace_back("opt.m." + e.name, e.m);
      out.emplace_back("opt.v." + e.name, e.v);
      Tensor step({1});
      step.data[0] = float(e.step);
      out.emplace_back("opt.t." + e.name, step);
    }
    auto s = st.rng.state();
    Tensor rng_t({8});
    for (int w = 0; w < 4; ++w) pack_u64(s[size_t(w)], rng_t.data.data() + 2 * w);
    out.emplace_back("train.rng", rng_t);
    Tensor iter_t({1});
    iter_t.data[0] = float(st.iteration);
    out.emplace_back("train.iter", iter_t);
  }
  return out;
}

inline void save_train_checkpoint(const std::string& path, const TrainState& st) {
  write_checkpoint(path, train_state_to_tensors(st, true));
}

// Loads parameters (+ norm stats) into a fresh state; when the checkpoint
// carries training state and `resume` is set, optimizer moments, RNG and the
// iteration counter are restored as well.
inline void load_checkpoint_into_state(const std::string& path, TrainState& st,
                                       bool resume = true) {
  TensorList tensors = read_checkpoint(path);
  for (const auto& [name, t] : tensors) {
    if (detail::is_reserved_name(name)) continue;
    int idx = st.store.find(name);
    if (idx < 0) throw ValidationError("checkpoint tensor " + name + " has no matching parameter");
    auto& e = st.store.entry(idx);
    if (!e.value.same_dims(t))
      throw ValidationError("checkpoint tensor " + name + " dims " + dims_str(t.dims) +
                            " incompatible with " + dims_str(e.value.dims));
    e.value = t;
  }
  if (const Tensor* mean = find_tensor(tensors, "norm.mean")) st.norm.mean = *mean;
  if (const Tensor* stddev = find_tensor(tensors, "norm.std")) st.norm.stddev = *stddev;
  const Tensor* iter = find_tensor(tensors, "train.iter");
  if (resume && iter) {
    for (size_t i = 0; i < st.store.size(); ++i) {
      auto& e = st.store.entry(int(i));
      if (const Tensor* m = find_tensor(tensors, "opt.m." + e.name)) e.m = *m;
      if (const Tensor* v = find_tensor(tensors, "opt.v." + e.name)) e.v = *v;
      if (const Tensor* t = find_tensor(tensors, "opt.t." + e.name))
        e.step = int64_t(t->data[0]);
    }
    if (const Tensor* rng_t = find_tensor(tensors, "train.rng")) {
      std::array<uint64_t, 4> s;
      for (int w = 0; w < 4; ++w) s[size_t(w)] = unpack_u64(rng_t->data.data() + 2 * w);
      st.rng.set_state(s);
    }
    st.iteration = int64_t(iter->data[0]);
  }
}

// ---------------------------------------------------------------------------
// Full training loop. Each iteration runs the latent-style step followed by
// the reference-style step; the log gets one row per step.

inline std::string format_log_row(int64_t step, const LossReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%lld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                static_cast<long long>(step), double(r.adv_d), double(r.adv_g), double(r.sty),
                double(r.cyc), double(r.mouth), double(r.total_gem));
  return buf;
}

inline std::string train(const TrainConfig& config, const DatasetManifest& manifest,
                         const std::string& data_dir, const std::string& out_dir,
                         const std::string& init_checkpoint = "") {
  config.validate();
  WindowPool pool = WindowPool::load(manifest, data_dir, config.n_window, config.batch_size);

  NormStats norm;
  norm.mean = manifest.norm_mean;
  norm.stddev = manifest.norm_std;
  TrainState st = init_train_state(config, norm);
  if (!init_checkpoint.empty()) load_checkpoint_into_state(init_checkpoint, st, true);

  std::filesystem::create_directories(out_dir);
  const std::string log_path = out_dir + "/train_log.csv";
  std::ofstream log(log_path, st.iteration > 0 ? std::ios::app : std::ios::trunc);
  if (!log) throw ValidationError("cannot open " + log_path);
  if (st.iteration == 0) log << "step,adv_d,adv_g,sty,cyc,mouth,total\n";

  const std::string final_path = out_dir + "/model.nedm";
  for (; st.iteration < config.iterations; ++st.iteration) {
    // latent-style path
    SequenceBatch content = sample_batch(pool, config.batch_size, st.rng);
    Tensor z({config.batch_size, kLatentDim});
    for (auto& x : z.data) x = st.rng.normal();
    std::vector<int> targets(size_t(config.batch_size));
    for (auto& y : targets) y = int(st.rng.uniform_int(kNumLabels));
    LossReport latent = train_step_latent(st, content, z, targets);
    log << format_log_row(2 * st.iteration, latent);

    // reference-style path
    SequenceBatch content2 = sample_batch(pool, config.batch_size, st.rng);
    SequenceBatch reference = sample_batch(pool, config.batch_size, st.rng);
    LossReport ref = train_step_reference(st, content2, reference);
    log << format_log_row(2 * st.iteration + 1, ref);

    if (config.checkpoint_interval > 0 && (st.iteration + 1) % config.checkpoint_interval == 0 &&
        st.iteration + 1 < config.iterations) {
      char name[64];
      std::snprintf(name, sizeof name, "model_%06lld.nedm",
                    static_cast<long long>(st.iteration + 1));
      TrainState snapshot_view = st;  // iteration counter already advanced below
      snapshot_view.iteration = st.iteration + 1;
      save_train_checkpoint(out_dir + "/" + std::string(name), snapshot_view);
    }
  }
  log.flush();
  save_train_checkpoint(final_path, st);
  return final_path;
}

}  // namespace emoseq

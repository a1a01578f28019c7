#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "movekit/common.hpp"
#include "movekit/dataset.hpp"

namespace movekit {

// Trainable head: n_h residual feature-map blocks (d -> d), then a classifier
// with n_c ReLU hidden layers shrinking by `scale` down to kNumClasses logits.
struct HeadConfig {
  std::size_t d = 0;
  int n_h = 1;
  int n_c = 1;
  double scale = 2.0;
  std::uint64_t seed = 0;
  // One skip per block by default; `global_residual` additionally adds the
  // head input to the final block output.
  bool global_residual = false;
};

// w_0 = d, w_k = max(L, floor(w_{k-1}/scale)); the returned vector is
// {w_0, ..., w_{n_c}, L}.
std::vector<std::size_t> classifier_widths(const HeadConfig& cfg);

struct Layer {
  Mat w;                  // out x in, row-major
  std::vector<double> b;  // out
};

struct HeadParams {
  HeadConfig config;
  std::vector<Layer> fm_blocks;   // n_h blocks, each d x d
  std::vector<Layer> classifier;  // n_c + 1 layers per width schedule

  static HeadParams zeros_like(const HeadConfig& cfg);
  std::size_t num_params() const;

  // Visits every tensor as a flat span, fm blocks first then classifier,
  // weights before bias within a layer. Order defines the checkpoint layout.
  template <class F>
  void for_each_tensor(F&& f) {
    for (auto& l : fm_blocks) {
      f(l.w.data.data(), l.w.data.size());
      f(l.b.data(), l.b.size());
    }
    for (auto& l : classifier) {
      f(l.w.data.data(), l.w.data.size());
      f(l.b.data(), l.b.size());
    }
  }
  template <class F>
  void for_each_tensor(F&& f) const {
    for (const auto& l : fm_blocks) {
      f(l.w.data.data(), l.w.data.size());
      f(l.b.data(), l.b.size());
    }
    for (const auto& l : classifier) {
      f(l.w.data.data(), l.w.data.size());
      f(l.b.data(), l.b.size());
    }
  }
};

// Glorot-uniform weights, zero biases, deterministic under cfg.seed.
HeadParams init_head(const HeadConfig& cfg);

// Activations retained for the backward pass.
struct ForwardCache {
  std::vector<std::vector<double>> fm_in;   // x before each block (n_h entries)
  std::vector<std::vector<double>> fm_pre;  // W x + b per block
  std::vector<double> fm_out;               // z fed to the classifier
  std::vector<std::vector<double>> cls_in;  // input of each classifier layer
  std::vector<std::vector<double>> cls_pre; // pre-activation of each layer
  std::vector<double> logits;
};

std::vector<double> fm_forward(const HeadParams& p, const std::vector<double>& x);
std::vector<double> classifier_forward(const HeadParams& p, const std::vector<double>& z);
ForwardCache forward_cached(const HeadParams& p, const std::vector<double>& x);

// argmax with lowest-index tie break.
int argmax_index(const double* v, std::size_t n);
Label predict(const HeadParams& p, const std::vector<double>& x);

// Backward passes accumulate into `grads` (shaped like the params).
// classifier_backward consumes dL/dlogits and writes dL/dz into dz.
void classifier_backward(const HeadParams& p, const ForwardCache& cache,
                         const double* dlogits, HeadParams& grads, double* dz);
// fm_backward consumes dL/dz at the head output.
void fm_backward(const HeadParams& p, const ForwardCache& cache, const double* dz,
                 HeadParams& grads);

// Checkpoint: one JSON header line, then EMB1 tensor blocks in
// for_each_tensor order.
void save_checkpoint(const std::filesystem::path& path, const HeadParams& params,
                     int epoch);
struct Checkpoint {
  HeadParams params;
  int epoch = 0;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace movekit

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "movekit/dataset.hpp"
#include "movekit/eval.hpp"
#include "movekit/objective.hpp"

namespace movekit {

enum class Optimizer { sgd, adam };

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  int epochs = 50;
  std::size_t pairs_per_batch = 32;
  Optimizer optimizer = Optimizer::adam;  // adam runs beta1=0.9 beta2=0.999 eps=1e-8
  int patience = 10;                      // <= 0 disables early stopping
  std::uint64_t seed = 0;
  double val_fraction = 0.15;  // fraction of training *videos* held out
  double min_coverage = 0.5;
  PoolMode pool = PoolMode::mean;
  OverlapRule overlap_rule = OverlapRule::nearest_center;
  FrameCountMode count_mode = FrameCountMode::all_frames;
};

struct EpochStats {
  LossBreakdown loss;  // summed over the epoch's batches
  double val_accuracy = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> history;
  int best_epoch = -1;
  double best_val_accuracy = 0.0;
  double wall_clock_sec = 0.0;
  std::vector<std::string> val_video_ids;  // empty when validating on train
  std::size_t train_windows = 0;
  std::size_t val_windows = 0;
};

// Emits up to pairs_per_batch pairs over the batch, ceil(half) same-class and
// floor(half) different-class where such pairs exist; falls back to whichever
// kind the batch supports. Deterministic under the rng state.
PairBatch sample_pairs(const std::vector<int>& labels, std::size_t pairs_per_batch,
                       Rng& rng);

struct FitResult {
  HeadParams params;  // snapshot of the best validation epoch
  TrainReport report;
};

// Minibatch training over the labeled windows of train_data. Epoch shuffles
// and pair draws are seeded per (seed, epoch), so training to epoch k is
// bit-identical whether run in one shot or re-run from scratch.
FitResult fit(const EmbeddingDataset& train_data, const HeadConfig& head_cfg,
              const LossConfig& loss_cfg, const TrainConfig& train_cfg);

struct WindowEval {
  std::string video_id;
  std::size_t index = 0;
  double start_sec = 0.0;
  double end_sec = 0.0;
  std::array<double, 4> logits{};
  Label pred = Label::none;
  Label label = Label::none;
};

struct SplitEval {
  double accuracy = 0.0;  // NaN when count == 0
  std::size_t count = 0;
  std::vector<WindowEval> windows;
};

SplitEval evaluate_split(const HeadParams& params, const EmbeddingDataset& data,
                         double min_coverage = 0.5, PoolMode pool = PoolMode::mean);

}  // namespace movekit

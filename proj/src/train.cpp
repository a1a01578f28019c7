#include "movekit/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "movekit/simd.hpp"

namespace movekit {

PairBatch sample_pairs(const std::vector<int>& labels, std::size_t pairs_per_batch,
                       Rng& rng) {
  PairBatch out;
  std::size_t n = labels.size();
  if (n < 2 || pairs_per_batch == 0) return out;

  std::vector<PairBatch::Pair> same, diff;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      (labels[i] == labels[j] ? same : diff).push_back({i, j, labels[i] == labels[j]});

  std::size_t want_same = (pairs_per_batch + 1) / 2;
  std::size_t want_diff = pairs_per_batch / 2;
  if (same.empty()) {
    want_diff = pairs_per_batch;
    want_same = 0;
  } else if (diff.empty()) {
    want_same = pairs_per_batch;
    want_diff = 0;
  }
  for (std::size_t k = 0; k < want_same; ++k) out.pairs.push_back(same[rng.index(same.size())]);
  for (std::size_t k = 0; k < want_diff; ++k) out.pairs.push_back(diff[rng.index(diff.size())]);
  return out;
}

namespace {

struct AdamState {
  std::vector<double> m, v;
  long step = 0;
};

void apply_update(HeadParams& params, const HeadParams& grads, const TrainConfig& cfg,
                  AdamState& adam) {
  std::vector<const double*> gptrs;
  grads.for_each_tensor([&](const double* p, std::size_t) { gptrs.push_back(p); });

  if (cfg.optimizer == Optimizer::sgd) {
    std::size_t idx = 0;
    params.for_each_tensor([&](double* p, std::size_t len) {
      simd::axpy(-cfg.learning_rate, gptrs[idx++], p, len);
    });
    return;
  }

  if (adam.m.empty()) {
    adam.m.assign(params.num_params(), 0.0);
    adam.v.assign(params.num_params(), 0.0);
  }
  ++adam.step;
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double bc1 = 1.0 / (1.0 - std::pow(b1, static_cast<double>(adam.step)));
  double bc2 = 1.0 / (1.0 - std::pow(b2, static_cast<double>(adam.step)));

  std::size_t idx = 0, off = 0;
  params.for_each_tensor([&](double* p, std::size_t len) {
    simd::adam_update(p, adam.m.data() + off, adam.v.data() + off, gptrs[idx++], len,
                      cfg.learning_rate, b1, b2, eps, bc1, bc2);
    off += len;
  });
}

double validation_accuracy(const HeadParams& params,
                           const std::vector<LabeledWindow>& val_windows,
                           const EmbeddingDataset& data,
                           const std::vector<std::string>& val_ids,
                           const TrainConfig& cfg) {
  std::vector<WindowPrediction> preds;
  preds.reserve(val_windows.size());
  for (const auto& w : val_windows) {
    WindowPrediction p;
    p.video_id = w.video_id;
    p.start_sec = w.start_sec;
    p.end_sec = w.end_sec;
    p.pred = predict(params, w.embedding);
    preds.push_back(std::move(p));
  }
  std::vector<FrameSeries> series;
  for (const auto& id : val_ids) {
    const VideoEmbeddings* v = data.find_video(id);
    series.push_back(windows_to_frames(preds, {id, v->fps, v->duration_sec},
                                       data.annotations, cfg.overlap_rule));
  }
  return frame_accuracy(series, cfg.count_mode).overall;
}

}  // namespace

FitResult fit(const EmbeddingDataset& train_data, const HeadConfig& head_cfg,
              const LossConfig& loss_cfg, const TrainConfig& train_cfg) {
  auto t0 = std::chrono::steady_clock::now();
  if (train_data.videos.empty()) fail(Errc::empty_dataset, "fit: no training videos");
  if (train_cfg.pairs_per_batch > 0 && train_cfg.batch_size < 2)
    fail(Errc::invalid_argument, "fit: batch_size must be >= 2 when sampling pairs");
  if (train_cfg.batch_size == 0) fail(Errc::invalid_argument, "fit: batch_size must be positive");
  if (train_cfg.learning_rate < 0.0) fail(Errc::invalid_argument, "fit: negative learning rate");

  // Hold out whole videos for validation so overlapping windows of one video
  // never straddle the split.
  std::vector<std::size_t> vid_order(train_data.videos.size());
  for (std::size_t i = 0; i < vid_order.size(); ++i) vid_order[i] = i;
  Rng split_rng(substream_seed(train_cfg.seed, "valsplit"));
  split_rng.shuffle(vid_order);
  auto n_val = static_cast<std::size_t>(
      std::floor(train_cfg.val_fraction * static_cast<double>(vid_order.size())));
  if (n_val >= vid_order.size())
    fail(Errc::invalid_argument, "fit: val_fraction leaves no training videos");

  std::vector<std::string> val_ids;
  std::vector<bool> is_val(train_data.videos.size(), false);
  for (std::size_t k = 0; k < n_val; ++k) {
    is_val[vid_order[k]] = true;
    val_ids.push_back(train_data.videos[vid_order[k]].video_id);
  }
  std::sort(val_ids.begin(), val_ids.end());

  std::vector<LabeledWindow> train_windows, val_windows;
  for (std::size_t i = 0; i < train_data.videos.size(); ++i) {
    auto ws = labeled_windows(train_data.videos[i], train_data.annotations,
                              train_cfg.min_coverage, train_cfg.pool);
    auto& dst = is_val[i] ? val_windows : train_windows;
    dst.insert(dst.end(), std::make_move_iterator(ws.begin()),
               std::make_move_iterator(ws.end()));
  }
  if (train_windows.empty()) fail(Errc::empty_dataset, "fit: no training windows");
  // No held-out videos: early-stop against the training windows instead.
  bool val_on_train = val_windows.empty();
  const std::vector<LabeledWindow>& eval_windows = val_on_train ? train_windows : val_windows;
  std::vector<std::string> eval_ids;
  if (val_on_train) {
    for (const auto& v : train_data.videos) eval_ids.push_back(v.video_id);
  } else {
    eval_ids = val_ids;
  }

  HeadParams params = init_head(head_cfg);
  HeadParams grads;
  AdamState adam;

  TrainReport report;
  report.val_video_ids = val_on_train ? std::vector<std::string>{} : val_ids;
  report.train_windows = train_windows.size();
  report.val_windows = val_windows.size();

  HeadParams best_params = params;
  double best_acc = -1.0;
  int best_epoch = -1;
  int since_best = 0;

  std::uint64_t shuffle_base = substream_seed(train_cfg.seed, "shuffle");
  std::uint64_t pairs_base = substream_seed(train_cfg.seed, "pairs");

  std::vector<std::size_t> order(train_windows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    Rng shuffle_rng(splitmix64(shuffle_base ^ static_cast<std::uint64_t>(epoch)));
    Rng pairs_rng(splitmix64(pairs_base ^ static_cast<std::uint64_t>(epoch)));
    std::sort(order.begin(), order.end());
    shuffle_rng.shuffle(order);

    EpochStats stats;
    for (std::size_t b = 0; b < order.size(); b += train_cfg.batch_size) {
      std::size_t e = std::min(order.size(), b + train_cfg.batch_size);
      Batch batch;
      for (std::size_t k = b; k < e; ++k) {
        batch.x.push_back(train_windows[order[k]].embedding);
        batch.y.push_back(static_cast<int>(train_windows[order[k]].label));
      }
      PairBatch pairs = sample_pairs(batch.y, train_cfg.pairs_per_batch, pairs_rng);
      LossBreakdown lb = grad_total_loss(params, batch, pairs, loss_cfg, grads);
      if (!std::isfinite(lb.total))
        fail(Errc::diverged_loss, "fit: non-finite loss at epoch " + std::to_string(epoch));
      stats.loss.total += lb.total;
      stats.loss.reg += lb.reg;
      stats.loss.hinge += lb.hinge;
      stats.loss.contrastive += lb.contrastive;
      apply_update(params, grads, train_cfg, adam);
    }

    stats.val_accuracy =
        validation_accuracy(params, eval_windows, train_data, eval_ids, train_cfg);
    report.history.push_back(stats);

    if (stats.val_accuracy > best_acc) {
      best_acc = stats.val_accuracy;
      best_epoch = epoch;
      best_params = params;
      since_best = 0;
    } else {
      ++since_best;
      if (train_cfg.patience > 0 && since_best >= train_cfg.patience) break;
    }
  }

  report.best_epoch = best_epoch;
  report.best_val_accuracy = best_acc < 0.0 ? 0.0 : best_acc;
  report.wall_clock_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {best_epoch >= 0 ? std::move(best_params) : std::move(params), std::move(report)};
}

SplitEval evaluate_split(const HeadParams& params, const EmbeddingDataset& data,
                         double min_coverage, PoolMode pool) {
  SplitEval out;
  std::size_t correct = 0;
  for (const auto& w : labeled_windows(data, min_coverage, pool)) {
    WindowEval we;
    we.video_id = w.video_id;
    we.index = w.index;
    we.start_sec = w.start_sec;
    we.end_sec = w.end_sec;
    auto logits = classifier_forward(params, fm_forward(params, w.embedding));
    std::copy(logits.begin(), logits.end(), we.logits.begin());
    we.pred = static_cast<Label>(argmax_index(logits.data(), logits.size()));
    we.label = w.label;
    if (we.pred == we.label) ++correct;
    out.windows.push_back(std::move(we));
  }
  out.count = out.windows.size();
  out.accuracy = out.count == 0
                     ? std::numeric_limits<double>::quiet_NaN()
                     : static_cast<double>(correct) / static_cast<double>(out.count);
  return out;
}

}  // namespace movekit

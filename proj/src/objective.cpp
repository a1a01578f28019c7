#include "movekit/objective.hpp"

#include <cmath>

#include "movekit/simd.hpp"

namespace movekit {

namespace {

double checked_norm(const std::vector<double>& v) {
  double n = std::sqrt(simd::sum_sq(v.data(), v.size()));
  if (n == 0.0) fail(Errc::zero_vector, "cosine_pair_loss: zero-norm vector");
  return n;
}

double weight_sum_sq(const HeadParams& p) {
  double acc = 0.0;
  for (const auto& l : p.fm_blocks) acc += simd::sum_sq(l.w.data.data(), l.w.data.size());
  for (const auto& l : p.classifier) acc += simd::sum_sq(l.w.data.data(), l.w.data.size());
  return acc;
}

void validate_pairs(const PairBatch& pairs, std::size_t n) {
  for (const auto& pr : pairs.pairs) {
    if (pr.i == pr.j) fail(Errc::invalid_argument, "pair with i == j");
    if (pr.i >= n || pr.j >= n) fail(Errc::invalid_argument, "pair index out of range");
  }
}

// Index of the hinge max term, ties to the lowest class.
int hinge_argmax(const std::vector<double>& f, int y) {
  int best = 0;
  double best_val = (0 == y ? 0.0 : 1.0) + f[0] - f[y];
  for (int k = 1; k < static_cast<int>(f.size()); ++k) {
    double val = (k == y ? 0.0 : 1.0) + f[k] - f[y];
    if (val > best_val) {
      best = k;
      best_val = val;
    }
  }
  return best;
}

}  // namespace

double cosine_pair_loss(const std::vector<double>& a, const std::vector<double>& b,
                        bool same_class, double margin) {
  if (a.size() != b.size()) fail(Errc::shape_mismatch, "cosine_pair_loss: dim mismatch");
  double na = checked_norm(a);
  double nb = checked_norm(b);
  double c = simd::dot(a.data(), b.data(), a.size()) / (na * nb);
  if (same_class) return 1.0 - c;
  double v = c - margin;
  return v > 0.0 ? v : 0.0;
}

double multiclass_hinge(const std::vector<double>& logits, int y) {
  if (y < 0 || y >= static_cast<int>(logits.size()))
    fail(Errc::invalid_class, "multiclass_hinge: class index out of range");
  int k = hinge_argmax(logits, y);
  double val = (k == y ? 0.0 : 1.0) + logits[k] - logits[y];
  return val > 0.0 ? val : 0.0;
}

LossBreakdown total_loss(const HeadParams& params, const Batch& batch,
                         const PairBatch& pairs, const LossConfig& cfg) {
  if (batch.x.size() != batch.y.size())
    fail(Errc::shape_mismatch, "total_loss: x/y length mismatch");
  validate_pairs(pairs, batch.x.size());

  LossBreakdown out;
  out.reg = cfg.weight_decay * weight_sum_sq(params);

  std::vector<std::vector<double>> fm_out(batch.x.size());
  for (std::size_t i = 0; i < batch.x.size(); ++i) {
    fm_out[i] = fm_forward(params, batch.x[i]);
    out.hinge += multiclass_hinge(classifier_forward(params, fm_out[i]), batch.y[i]);
  }
  double pair_sum = 0.0;
  for (const auto& pr : pairs.pairs)
    pair_sum += cosine_pair_loss(fm_out[pr.i], fm_out[pr.j], pr.same_class, cfg.margin);
  out.contrastive = cfg.pair_weight * pair_sum;
  out.total = out.reg + out.hinge + out.contrastive;
  return out;
}

LossBreakdown grad_total_loss(const HeadParams& params, const Batch& batch,
                              const PairBatch& pairs, const LossConfig& cfg,
                              HeadParams& grads) {
  if (batch.x.size() != batch.y.size())
    fail(Errc::shape_mismatch, "grad_total_loss: x/y length mismatch");
  validate_pairs(pairs, batch.x.size());
  grads = HeadParams::zeros_like(params.config);

  const std::size_t n = batch.x.size();
  const std::size_t d = params.config.d;
  LossBreakdown out;

  std::vector<ForwardCache> caches(n);
  std::vector<std::vector<double>> dz(n, std::vector<double>(d, 0.0));

  // Hinge term: per-sample dL/dlogits backed through the classifier.
  for (std::size_t i = 0; i < n; ++i) {
    caches[i] = forward_cached(params, batch.x[i]);
    int y = batch.y[i];
    if (y < 0 || y >= kNumClasses)
      fail(Errc::invalid_class, "grad_total_loss: class index out of range");
    int k = hinge_argmax(caches[i].logits, y);
    double val = (k == y ? 0.0 : 1.0) + caches[i].logits[k] - caches[i].logits[y];
    out.hinge += val > 0.0 ? val : 0.0;
    std::vector<double> dlogits(kNumClasses, 0.0);
    if (k != y) {
      dlogits[k] += 1.0;
      dlogits[y] -= 1.0;
    }
    classifier_backward(params, caches[i], dlogits.data(), grads, dz[i].data());
  }

  // Contrastive term on the FM outputs.
  double pair_sum = 0.0;
  std::vector<double> da(d), db(d);
  for (const auto& pr : pairs.pairs) {
    const std::vector<double>& a = caches[pr.i].fm_out;
    const std::vector<double>& b = caches[pr.j].fm_out;
    double na = checked_norm(a);
    double nb = checked_norm(b);
    double c = simd::dot(a.data(), b.data(), d) / (na * nb);

    double sign;  // dL/dcos
    if (pr.same_class) {
      pair_sum += 1.0 - c;
      sign = -1.0;
    } else {
      double v = c - cfg.margin;
      pair_sum += v > 0.0 ? v : 0.0;
      if (v <= 0.0) continue;  // zero subgradient at and below the margin
      sign = 1.0;
    }
    // dcos/da = (b/|b| - cos * a/|a|) / |a|, symmetric in b.
    for (std::size_t t = 0; t < d; ++t) {
      da[t] = (b[t] / nb - c * a[t] / na) / na;
      db[t] = (a[t] / na - c * b[t] / nb) / nb;
    }
    simd::axpy(cfg.pair_weight * sign, da.data(), dz[pr.i].data(), d);
    simd::axpy(cfg.pair_weight * sign, db.data(), dz[pr.j].data(), d);
  }
  out.contrastive = cfg.pair_weight * pair_sum;

  for (std::size_t i = 0; i < n; ++i) fm_backward(params, caches[i], dz[i].data(), grads);

  // Weight decay: d(lambda ||W||^2)/dW = 2 lambda W, weights only.
  out.reg = cfg.weight_decay * weight_sum_sq(params);
  for (std::size_t k = 0; k < params.fm_blocks.size(); ++k)
    simd::axpy(2.0 * cfg.weight_decay, params.fm_blocks[k].w.data.data(),
               grads.fm_blocks[k].w.data.data(), params.fm_blocks[k].w.data.size());
  for (std::size_t k = 0; k < params.classifier.size(); ++k)
    simd::axpy(2.0 * cfg.weight_decay, params.classifier[k].w.data.data(),
               grads.classifier[k].w.data.data(), params.classifier[k].w.data.size());

  out.total = out.reg + out.hinge + out.contrastive;
  return out;
}

}  // namespace movekit

#pragma once

// Finite-difference gradient harness shared by the unit and acceptance
// suites. Instances are resampled while any hinge/relu/cosine kink sits
// closer than kink_margin: at a nonsmooth point a central difference is not
// a derivative, so no subgradient convention could match it there.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "movekit/objective.hpp"

namespace movekit::testsupport {

struct GradInstance {
  HeadParams params;
  Batch batch;
  PairBatch pairs;
  LossConfig cfg;
};

inline double kink_distance(const GradInstance& gi) {
  double dist = 1e300;
  std::vector<ForwardCache> caches;
  for (const auto& x : gi.batch.x) caches.push_back(forward_cached(gi.params, x));

  for (std::size_t i = 0; i < gi.batch.x.size(); ++i) {
    for (const auto& pre : caches[i].fm_pre)
      for (double v : pre) dist = std::min(dist, std::abs(v));
    for (std::size_t k = 0; k + 1 < caches[i].cls_pre.size(); ++k)
      for (double v : caches[i].cls_pre[k]) dist = std::min(dist, std::abs(v));

    // gap between the top hinge term and the runner-up
    int y = gi.batch.y[i];
    const auto& f = caches[i].logits;
    std::vector<double> terms(f.size());
    for (std::size_t k = 0; k < f.size(); ++k)
      terms[k] = (static_cast<int>(k) == y ? 0.0 : 1.0) + f[k] - f[y];
    std::sort(terms.begin(), terms.end(), std::greater<>());
    dist = std::min(dist, terms[0] - terms[1]);
  }
  for (const auto& pr : gi.pairs.pairs) {
    if (pr.same_class) continue;
    const auto& a = caches[pr.i].fm_out;
    const auto& b = caches[pr.j].fm_out;
    double na = std::sqrt(std::inner_product(a.begin(), a.end(), a.begin(), 0.0));
    double nb = std::sqrt(std::inner_product(b.begin(), b.end(), b.begin(), 0.0));
    double c = std::inner_product(a.begin(), a.end(), b.begin(), 0.0) / (na * nb);
    dist = std::min(dist, std::abs(c - gi.cfg.margin));
  }
  return dist;
}

// Draws one random instance within the stated caps (d <= 32, N_H <= 3,
// N_C <= 2, batch <= 8). Biases get continuous noise so a dead relu layer
// cannot pin the logits to an exact tie.
inline GradInstance random_instance(Rng& rng, std::uint64_t init_seed,
                                    std::size_t d_cap = 32) {
  const std::size_t dims[] = {2, 3, 4, 6, 8, 12, 16, 24, 32};
  std::size_t n_dims = sizeof(dims) / sizeof(dims[0]);
  while (dims[n_dims - 1] > d_cap) --n_dims;

  GradInstance gi;
  HeadConfig hc;
  hc.d = dims[rng.index(n_dims)];
  hc.n_h = static_cast<int>(rng.index(4));   // 0..3
  hc.n_c = static_cast<int>(rng.index(3));   // 0..2
  hc.scale = rng.index(2) == 0 ? 1.5 : 2.0;
  hc.seed = init_seed;
  hc.global_residual = rng.index(4) == 0;
  gi.params = init_head(hc);
  gi.params.for_each_tensor([&](double* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) p[i] += rng.uniform(-0.25, 0.25);
  });

  std::size_t n = 2 + rng.index(7);  // 2..8
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(hc.d);
    for (auto& v : x) v = rng.uniform(-1.5, 1.5);
    gi.batch.x.push_back(std::move(x));
    gi.batch.y.push_back(static_cast<int>(rng.index(4)));
  }
  std::size_t n_pairs = rng.index(6);
  for (std::size_t k = 0; k < n_pairs; ++k) {
    std::size_t i = rng.index(n);
    std::size_t j = rng.index(n);
    if (i == j) continue;
    gi.pairs.pairs.push_back({i, j, gi.batch.y[i] == gi.batch.y[j]});
  }
  gi.cfg.margin = rng.uniform(0.05, 0.85);
  gi.cfg.pair_weight = rng.log_uniform(0.01, 5.0);
  gi.cfg.weight_decay = rng.log_uniform(1e-6, 1e-2);
  return gi;
}

inline GradInstance smooth_instance(Rng& rng, std::uint64_t init_seed,
                                    std::size_t d_cap = 32,
                                    double kink_margin = 1e-4) {
  for (int attempt = 0;; ++attempt) {
    GradInstance gi = random_instance(rng, init_seed + attempt, d_cap);
    if (kink_distance(gi) > kink_margin) return gi;
  }
}

// Max relative error between analytic gradients and central differences.
inline double max_grad_rel_error(GradInstance gi, double eps = 1e-6) {
  HeadParams grads;
  grad_total_loss(gi.params, gi.batch, gi.pairs, gi.cfg, grads);

  std::vector<std::pair<double*, std::size_t>> pv, gv;
  gi.params.for_each_tensor(
      [&](double* p, std::size_t n) { pv.emplace_back(p, n); });
  grads.for_each_tensor([&](double* p, std::size_t n) { gv.emplace_back(p, n); });

  double worst = 0.0;
  for (std::size_t t = 0; t < pv.size(); ++t) {
    for (std::size_t i = 0; i < pv[t].second; ++i) {
      double saved = pv[t].first[i];
      pv[t].first[i] = saved + eps;
      double up = total_loss(gi.params, gi.batch, gi.pairs, gi.cfg).total;
      pv[t].first[i] = saved - eps;
      double down = total_loss(gi.params, gi.batch, gi.pairs, gi.cfg).total;
      pv[t].first[i] = saved;
      double fd = (up - down) / (2.0 * eps);
      double a = gv[t].first[i];
      double denom = std::max({1.0, std::abs(a), std::abs(fd)});
      worst = std::max(worst, std::abs(a - fd) / denom);
    }
  }
  return worst;
}

}  // namespace movekit::testsupport

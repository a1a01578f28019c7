#include <cmath>
#include <vector>

#include "doctest.h"
#include "movekit/objective.hpp"
#include "support/grad_check.hpp"

using namespace movekit;

namespace {

HeadConfig make_cfg(std::size_t d, int n_h, int n_c, double scale, std::uint64_t seed) {
  HeadConfig c;
  c.d = d;
  c.n_h = n_h;
  c.n_c = n_c;
  c.scale = scale;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("cosine_pair_loss: exact unit values") {
  std::vector<double> v34 = {3.0, 4.0};  // |v| = 5 exactly, cos(v, v) == 1 in doubles

  CHECK(cosine_pair_loss(v34, v34, true, 0.0) == 0.0);
  CHECK(cosine_pair_loss(v34, v34, false, 0.5) == 0.5);  // (1 - 0.5)_+ bit-exact

  std::vector<double> e1 = {1.0, 0.0};
  std::vector<double> e2 = {0.0, 1.0};
  CHECK(cosine_pair_loss(e1, e2, false, 0.0) == 0.0);  // hinge boundary
  CHECK(cosine_pair_loss(e1, e2, true, 0.0) == 1.0);

  std::vector<double> zero = {0.0, 0.0};
  CHECK_THROWS_AS(cosine_pair_loss(e1, zero, true, 0.0), Error);
}

TEST_CASE("cosine_pair_loss: symmetric and scale invariant") {
  Rng rng(404);
  for (int rep = 0; rep < 100; ++rep) {
    std::size_t d = 2 + rng.index(6);
    std::vector<double> a(d), b(d);
    for (auto& v : a) v = rng.uniform(-2.0, 2.0);
    for (auto& v : b) v = rng.uniform(-2.0, 2.0);
    bool same = rng.index(2) == 0;
    double margin = rng.uniform(0.0, 0.9);

    double lab = cosine_pair_loss(a, b, same, margin);
    CHECK(cosine_pair_loss(b, a, same, margin) == doctest::Approx(lab).epsilon(1e-12));

    double c1 = rng.uniform(0.1, 5.0);
    double c2 = rng.uniform(0.1, 5.0);
    auto as = a;
    auto bs = b;
    for (auto& v : as) v *= c1;
    for (auto& v : bs) v *= c2;
    CHECK(cosine_pair_loss(as, bs, same, margin) == doctest::Approx(lab).epsilon(1e-10));
  }
}

TEST_CASE("multiclass_hinge: stated examples") {
  CHECK(multiclass_hinge({2, 0, 0, 0}, 0) == 0.0);
  CHECK(multiclass_hinge({0, 0, 0, 0}, 0) == 1.0);
  // by hand: k=1 term is 1 + 1.0 - 0.5 = 1.5, the max
  CHECK(multiclass_hinge({0.5, 1.0, 0.0, 0.0}, 0) == 1.5);
  CHECK_THROWS_AS(multiclass_hinge({0, 0, 0, 0}, 4), Error);
  CHECK_THROWS_AS(multiclass_hinge({0, 0, 0, 0}, -1), Error);
}

TEST_CASE("multiclass_hinge: shift invariance and midpoint convexity") {
  Rng rng(808);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> f(4), g(4);
    for (auto& v : f) v = rng.uniform(-3.0, 3.0);
    for (auto& v : g) v = rng.uniform(-3.0, 3.0);
    int y = static_cast<int>(rng.index(4));

    double c = rng.uniform(-5.0, 5.0);
    auto shifted = f;
    for (auto& v : shifted) v += c;
    CHECK(multiclass_hinge(shifted, y) == doctest::Approx(multiclass_hinge(f, y)).epsilon(1e-12));

    std::vector<double> mid(4);
    for (int k = 0; k < 4; ++k) mid[k] = 0.5 * (f[k] + g[k]);
    CHECK(multiclass_hinge(mid, y) <=
          0.5 * (multiclass_hinge(f, y) + multiclass_hinge(g, y)) + 1e-12);
  }
}

TEST_CASE("total_loss: term isolation") {
  auto params = init_head(make_cfg(4, 1, 1, 2.0, 3));
  Batch batch;
  Rng rng(12);
  for (int i = 0; i < 6; ++i) {
    std::vector<double> x(4);
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);
    batch.x.push_back(x);
    batch.y.push_back(static_cast<int>(rng.index(4)));
  }
  PairBatch pairs;
  pairs.pairs.push_back({0, 1, batch.y[0] == batch.y[1]});

  // C_U = 0, lambda = 0: plain hinge sum
  LossConfig hinge_only{0.3, 0.0, 0.0};
  auto lb = total_loss(params, batch, pairs, hinge_only);
  double expect = 0.0;
  for (std::size_t i = 0; i < batch.x.size(); ++i)
    expect += multiclass_hinge(classifier_forward(params, fm_forward(params, batch.x[i])),
                               batch.y[i]);
  CHECK(lb.total == doctest::Approx(expect).epsilon(1e-12));
  CHECK(lb.reg == 0.0);
  CHECK(lb.contrastive == 0.0);

  // lambda = 1, empty batch: total equals the squared weight norm alone
  LossConfig reg_only{0.3, 0.0, 1.0};
  auto lb2 = total_loss(params, Batch{}, PairBatch{}, reg_only);
  double wsq = 0.0;
  for (const auto& l : params.fm_blocks)
    for (double v : l.w.data) wsq += v * v;
  for (const auto& l : params.classifier)
    for (double v : l.w.data) wsq += v * v;
  CHECK(lb2.total == doctest::Approx(wsq).epsilon(1e-12));
  CHECK(lb2.total > 0.0);  // nonzero weights keep the objective positive
}

TEST_CASE("total_loss: tiny fixed instance matches scalar hand computation") {
  // d=2, N_H=1, N_C=0, two samples, one same-class pair.
  auto params = HeadParams::zeros_like(make_cfg(2, 1, 0, 2.0, 0));
  params.fm_blocks[0].w(0, 0) = 1.0;
  params.fm_blocks[0].w(1, 1) = -1.0;
  params.fm_blocks[0].b = {0.0, 0.5};
  double wc[4][2] = {{1, 0}, {0, 1}, {1, 1}, {0, 0}};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 2; ++j) params.classifier[0].w(i, j) = wc[i][j];
  params.classifier[0].b = {0.0, 0.0, -1.0, 0.25};

  Batch batch;
  batch.x = {{1.0, 2.0}, {-1.0, 0.0}};
  batch.y = {0, 1};
  PairBatch pairs;
  pairs.pairs.push_back({0, 1, true});
  LossConfig cfg{0.25, 2.0, 0.1};

  // FM by hand: x1=(1,2): pre=(1,-1.5), relu=(1,0), z1=(2,2)
  //             x2=(-1,0): pre=(-1,0.5), relu=(0,0.5), z2=(-1,0.5)
  // logits: f1=(2,2,3,0.25) y=0 -> hinge 2 (k=2: 1+3-2)
  //         f2=(-1,0.5,-1.5,0.25) y=1 -> hinge 0.75 (k=3: 1+0.25-0.5)
  // pair: cos(z1,z2) = -1/sqrt(10); same-class loss = 1 + 1/sqrt(10), weighted 2x
  // reg: 0.1 * (2 + 4) = 0.6
  double expected = 0.6 + 2.75 + 2.0 * (1.0 + 1.0 / std::sqrt(10.0));

  auto lb = total_loss(params, batch, pairs, cfg);
  CHECK(lb.reg == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(lb.hinge == doctest::Approx(2.75).epsilon(1e-15));
  CHECK(lb.contrastive ==
        doctest::Approx(2.0 * (1.0 + 1.0 / std::sqrt(10.0))).epsilon(1e-13));
  CHECK(lb.total == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("grad_total_loss: weight decay gradient is exactly 2*lambda*w") {
  auto params = init_head(make_cfg(5, 1, 1, 2.0, 21));
  LossConfig cfg{0.3, 1.0, 0.37};
  HeadParams grads;
  grad_total_loss(params, Batch{}, PairBatch{}, cfg, grads);
  for (std::size_t k = 0; k < params.fm_blocks.size(); ++k) {
    for (std::size_t i = 0; i < params.fm_blocks[k].w.data.size(); ++i)
      CHECK(grads.fm_blocks[k].w.data[i] ==
            doctest::Approx(2.0 * 0.37 * params.fm_blocks[k].w.data[i]).epsilon(1e-15));
    for (double b : grads.fm_blocks[k].b) CHECK(b == 0.0);  // biases excluded
  }
}

TEST_CASE("grad_total_loss: zero pair weight equals the pure hinge gradient") {
  auto params = init_head(make_cfg(4, 2, 1, 2.0, 99));
  Batch batch;
  Rng rng(55);
  for (int i = 0; i < 5; ++i) {
    std::vector<double> x(4);
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);
    batch.x.push_back(x);
    batch.y.push_back(static_cast<int>(rng.index(4)));
  }
  PairBatch pairs;
  pairs.pairs.push_back({0, 1, batch.y[0] == batch.y[1]});
  pairs.pairs.push_back({2, 3, batch.y[2] == batch.y[3]});

  HeadParams g_with, g_without;
  grad_total_loss(params, batch, pairs, LossConfig{0.4, 0.0, 0.0}, g_with);
  grad_total_loss(params, batch, PairBatch{}, LossConfig{0.4, 0.0, 0.0}, g_without);

  std::vector<double> a, b;
  g_with.for_each_tensor([&](const double* d, std::size_t n) { a.insert(a.end(), d, d + n); });
  g_without.for_each_tensor(
      [&](const double* d, std::size_t n) { b.insert(b.end(), d, d + n); });
  CHECK(a == b);
}

TEST_CASE("grad_total_loss: pair validation") {
  auto params = init_head(make_cfg(3, 0, 0, 2.0, 1));
  Batch batch;
  batch.x = {{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}};
  batch.y = {0, 1};
  HeadParams grads;
  PairBatch self;
  self.pairs.push_back({1, 1, true});
  CHECK_THROWS_AS(grad_total_loss(params, batch, self, LossConfig{}, grads), Error);
  PairBatch oob;
  oob.pairs.push_back({0, 5, false});
  CHECK_THROWS_AS(grad_total_loss(params, batch, oob, LossConfig{}, grads), Error);
}

TEST_CASE("grad_total_loss: finite-difference oracle over random configs") {
  Rng rng(161803);
  double worst = 0.0;
  for (int rep = 0; rep < 25; ++rep) {
    auto gi = testsupport::smooth_instance(rng, 7000 + 31 * rep, /*d_cap=*/8);
    worst = std::max(worst, testsupport::max_grad_rel_error(std::move(gi)));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("grad_total_loss: gradient matches with the global residual enabled") {
  Rng rng(31337);
  for (int rep = 0; rep < 8; ++rep) {
    auto gi = testsupport::smooth_instance(rng, 880 + rep, /*d_cap=*/6);
    gi.params.config.global_residual = true;
    if (testsupport::kink_distance(gi) < 1e-4) continue;
    CHECK(testsupport::max_grad_rel_error(std::move(gi)) < 1e-5);
  }
}

#include <cmath>
#include <vector>

#include "doctest.h"
#include "movekit/lda.hpp"
#include "movekit/simd.hpp"

using namespace movekit;

namespace {

// class A = {0, 2}, class B = {10, 12} on the line
ScatterPair one_dim_example() {
  Mat x(4, 1);
  x(0, 0) = 0.0;
  x(1, 0) = 2.0;
  x(2, 0) = 10.0;
  x(3, 0) = 12.0;
  return scatter_matrices(x, {0, 0, 1, 1});
}

// orthonormal basis from a seeded random matrix (Gram-Schmidt)
Mat random_orthogonal(std::size_t d, Rng& rng) {
  Mat q(d, d);
  for (auto& v : q.data) v = rng.normal();
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      double dp = simd::dot(q.row(i), q.row(j), d);
      simd::axpy(-dp, q.row(j), q.row(i), d);
    }
    double norm = std::sqrt(simd::sum_sq(q.row(i), d));
    simd::scal(1.0 / norm, q.row(i), d);
  }
  return q;
}

struct LabeledData {
  Mat x;
  std::vector<int> y;
};

LabeledData gaussian_classes(std::size_t n_per, std::size_t d, int classes,
                             double sep, Rng& rng) {
  LabeledData out;
  out.x = Mat(n_per * classes, d);
  for (int c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < n_per; ++i) {
      std::size_t r = c * n_per + i;
      for (std::size_t j = 0; j < d; ++j) out.x(r, j) = rng.normal();
      out.x(r, c % d) += sep;
      out.y.push_back(c);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("scatter_matrices: 1D hand computation") {
  auto sp = one_dim_example();
  // mu_A = 1, mu_B = 11, mu = 6: S_B = 2*25 + 2*25 = 100, S_W = 1+1+1+1 = 4
  CHECK(sp.s_b(0, 0) == doctest::Approx(100.0).epsilon(1e-14));
  CHECK(sp.s_w(0, 0) == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("scatter_matrices: degenerate and invalid inputs") {
  Mat same(4, 2);
  for (std::size_t i = 0; i < 4; ++i) {
    same(i, 0) = 3.0;
    same(i, 1) = -1.0;
  }
  auto sp = scatter_matrices(same, {0, 0, 1, 1});
  for (double v : sp.s_b.data) CHECK(v == doctest::Approx(0.0).epsilon(1e-12));
  for (double v : sp.s_w.data) CHECK(v == doctest::Approx(0.0).epsilon(1e-12));

  Mat x(3, 2);
  CHECK_THROWS_AS(scatter_matrices(x, {1, 1, 1}), Error);  // single class
  CHECK_THROWS_AS(scatter_matrices(Mat(), {}), Error);     // empty
  CHECK_THROWS_AS(scatter_matrices(x, {0, 1}), Error);     // length mismatch
}

TEST_CASE("scatter_matrices: translation invariance and symmetry") {
  Rng rng(42);
  auto data = gaussian_classes(20, 5, 3, 2.0, rng);
  auto sp = scatter_matrices(data.x, data.y);

  Mat shifted = data.x;
  for (std::size_t i = 0; i < shifted.rows; ++i)
    for (std::size_t j = 0; j < shifted.cols; ++j) shifted(i, j) += 7.3;
  auto sp2 = scatter_matrices(shifted, data.y);
  for (std::size_t k = 0; k < sp.s_b.data.size(); ++k) {
    CHECK(sp2.s_b.data[k] == doctest::Approx(sp.s_b.data[k]).epsilon(1e-9));
    CHECK(sp2.s_w.data[k] == doctest::Approx(sp.s_w.data[k]).epsilon(1e-9));
  }

  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      CHECK(sp.s_b(i, j) == sp.s_b(j, i));
      CHECK(sp.s_w(i, j) == sp.s_w(j, i));
    }
}

TEST_CASE("lda_directions: 1D example gives rho = 25 exactly") {
  auto dirs = lda_directions(one_dim_example(), 1, 0.0);
  REQUIRE(dirs.size() == 1);
  CHECK(dirs[0].value == 25.0);
  CHECK(std::abs(dirs[0].vector[0]) == doctest::Approx(1.0));
}

TEST_CASE("lda_directions: recovers the analytic Fisher direction") {
  // two spherical classes whose means differ along e1 only:
  // w1 ~ S_W^-1 (mu1 - mu0) ~ e1
  Rng rng(314);
  const std::size_t d = 8, n_per = 5000;
  Mat x(2 * n_per, d);
  std::vector<int> y;
  for (std::size_t i = 0; i < 2 * n_per; ++i) {
    for (std::size_t j = 0; j < d; ++j) x(i, j) = rng.normal();
    if (i >= n_per) x(i, 0) += 4.0;
    y.push_back(i < n_per ? 0 : 1);
  }
  auto sp = scatter_matrices(x, y);
  auto dirs = lda_directions(sp, 2, default_ridge(sp.s_w));
  double cos_e1 = std::abs(dirs[0].vector[0]) /
                  std::sqrt(simd::sum_sq(dirs[0].vector.data(), d));
  CHECK(cos_e1 > 0.99);
  // rank(S_B) = 1: the second value collapses
  CHECK(dirs[1].value < 1e-6 * dirs[0].value);
}

TEST_CASE("lda_directions: zero between-class scatter") {
  // both classes centered at 0: S_B = 0
  Mat x(4, 1);
  x(0, 0) = -1.0;
  x(1, 0) = 1.0;
  x(2, 0) = -2.0;
  x(3, 0) = 2.0;
  auto sp = scatter_matrices(x, {0, 0, 1, 1});
  CHECK(sp.s_b(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  auto dirs = lda_directions(sp, 1, 0.0);
  CHECK(std::abs(dirs[0].value) < 1e-12);
}

TEST_CASE("lda_directions: eigenvalue at k = num_classes vanishes (rank bound)") {
  Rng rng(271);
  auto data = gaussian_classes(50, 6, 3, 3.0, rng);
  auto sp = scatter_matrices(data.x, data.y);
  auto dirs = lda_directions(sp, 3, default_ridge(sp.s_w));
  CHECK(dirs[0].value > 0.1);
  CHECK(dirs[1].value > 0.01);
  CHECK(std::abs(dirs[2].value) < 1e-8 * dirs[0].value);
}

TEST_CASE("lda_directions: singular S_W without ridge fails, with ridge succeeds") {
  // 3 samples in d=5: S_W is rank-deficient
  Rng rng(8);
  Mat x(3, 5);
  for (auto& v : x.data) v = rng.normal();
  std::vector<int> y = {0, 1, 0};
  auto sp = scatter_matrices(x, y);
  bool threw = false;
  try {
    lda_directions(sp, 1, 0.0);
  } catch (const Error& e) {
    threw = true;
    CHECK(e.code() == Errc::numerical_failure);
  }
  CHECK(threw);
  CHECK_NOTHROW(lda_directions(sp, 1, default_ridge(sp.s_w)));
  CHECK_THROWS_AS(lda_directions(sp, 9, 1e-6), Error);  // k > d
}

TEST_CASE("separability_scores: 1D two-class example") {
  Mat x(4, 1);
  x(0, 0) = 0.0;
  x(1, 0) = 2.0;
  x(2, 0) = 10.0;
  x(3, 0) = 12.0;
  auto s = separability_scores(x, {0, 0, 1, 1}, 0.0);
  CHECK(s.j1 == 25.0);
  CHECK(!s.j2_defined);
  CHECK(s.j2 == 0.0);
}

TEST_CASE("separability_scores: scale invariance and S_W-orthogonality") {
  Rng rng(5050);
  auto data = gaussian_classes(60, 6, 3, 2.5, rng);
  auto base = separability_scores(data.x, data.y);
  CHECK(base.j2_defined);
  CHECK(base.j1 >= base.j2);
  CHECK(base.j2 >= 0.0);

  Mat scaled = data.x;
  for (auto& v : scaled.data) v *= 3.7;
  auto s2 = separability_scores(scaled, data.y);
  CHECK(s2.j1 == doctest::Approx(base.j1).epsilon(1e-9));
  CHECK(s2.j2 == doctest::Approx(base.j2).epsilon(1e-9));

  // w1^T (S_W + eps I) w2 == 0 within 1e-8 of the matrix scale
  auto sp = scatter_matrices(data.x, data.y);
  std::vector<double> tmp(6);
  simd::matvec(sp.s_w.data.data(), base.w2.data(), tmp.data(), 6, 6);
  double cross = simd::dot(base.w1.data(), tmp.data(), 6) +
                 base.ridge * simd::dot(base.w1.data(), base.w2.data(), 6);
  double scale = std::abs(sp.s_w(0, 0)) + std::abs(sp.s_w(3, 3));
  CHECK(std::abs(cross) < 1e-8 * scale);
}

TEST_CASE("separability_scores: rotation equivariance") {
  Rng rng(939);
  auto data = gaussian_classes(40, 5, 3, 2.0, rng);
  auto base = separability_scores(data.x, data.y);

  Mat q = random_orthogonal(5, rng);
  Mat rotated(data.x.rows, 5);
  for (std::size_t i = 0; i < data.x.rows; ++i)
    simd::matvec(q.data.data(), data.x.row(i), rotated.row(i), 5, 5);
  auto rot = separability_scores(rotated, data.y);

  CHECK(rot.j1 == doctest::Approx(base.j1).epsilon(1e-8));
  CHECK(rot.j2 == doctest::Approx(base.j2).epsilon(1e-8));

  // w1 rotates with Q (up to sign)
  std::vector<double> qw1(5);
  simd::matvec(q.data.data(), base.w1.data(), qw1.data(), 5, 5);
  double cosang = std::abs(simd::dot(qw1.data(), rot.w1.data(), 5));
  CHECK(cosang == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("separability_scores: J1 is maximal over random directions") {
  Rng rng(112);
  auto data = gaussian_classes(40, 6, 4, 2.0, rng);
  auto s = separability_scores(data.x, data.y);
  auto sp = scatter_matrices(data.x, data.y);
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<double> w(6);
    for (auto& v : w) v = rng.normal();
    double norm = std::sqrt(simd::sum_sq(w.data(), 6));
    simd::scal(1.0 / norm, w.data(), 6);
    CHECK(s.j1 + 1e-9 >= rayleigh_quotient(sp, w, s.ridge));
  }
}

TEST_CASE("rayleigh_quotient: invariant to scaling of w") {
  Rng rng(21);
  auto data = gaussian_classes(30, 4, 2, 1.5, rng);
  auto sp = scatter_matrices(data.x, data.y);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> w(4);
    for (auto& v : w) v = rng.normal();
    double j = rayleigh_quotient(sp, w, 1e-6);
    double c = rng.uniform(0.1, 9.0) * (rng.index(2) ? 1.0 : -1.0);
    auto cw = w;
    for (auto& v : cw) v *= c;
    CHECK(rayleigh_quotient(sp, cw, 1e-6) == doctest::Approx(j).epsilon(1e-10));
  }
}

TEST_CASE("project2d: axis projection and J consistency") {
  // unit directions pick out coordinates
  SeparabilityScores s;
  s.w1 = {1.0, 0.0, 0.0};
  s.w2 = {0.0, 1.0, 0.0};
  s.j2_defined = true;
  Mat x(3, 3);
  for (std::size_t i = 0; i < 3; ++i) x(i, i) = 1.0;
  auto proj = project2d(x, s);
  CHECK(proj(0, 0) == 1.0);
  CHECK(proj(1, 1) == 1.0);
  CHECK(proj(2, 0) == 0.0);

  // all-identical rows project onto coincident points
  Mat same(4, 3);
  for (std::size_t i = 0; i < 4; ++i) {
    same(i, 0) = 0.4;
    same(i, 1) = -2.0;
    same(i, 2) = 1.0;
  }
  auto p2 = project2d(same, s);
  for (std::size_t i = 1; i < 4; ++i) {
    CHECK(p2(i, 0) == p2(0, 0));
    CHECK(p2(i, 1) == p2(0, 1));
  }

  // projecting onto w1 and recomputing J along that axis reproduces J1
  Rng rng(606);
  auto data = gaussian_classes(50, 5, 3, 2.0, rng);
  auto scores = separability_scores(data.x, data.y);
  auto coords = project2d(data.x, scores);
  Mat axis1(coords.rows, 1);
  for (std::size_t i = 0; i < coords.rows; ++i) axis1(i, 0) = coords(i, 0);
  auto sp1 = scatter_matrices(axis1, data.y);
  double j_axis = sp1.s_b(0, 0) / (sp1.s_w(0, 0) + scores.ridge);
  CHECK(j_axis == doctest::Approx(scores.j1).epsilon(1e-9));
}

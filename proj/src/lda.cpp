#include "movekit/lda.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "movekit/simd.hpp"

namespace movekit {

namespace {

// In-place Cholesky: a becomes L (lower triangle), upper left untouched.
void cholesky(Mat& a) {
  std::size_t n = a.rows;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a(i, j) - simd::dot(a.row(i), a.row(j), j);
      if (i == j) {
        if (s <= 0.0)
          fail(Errc::numerical_failure, "cholesky: matrix not positive definite");
        a(i, i) = std::sqrt(s);
      } else {
        a(i, j) = s / a(j, j);
      }
    }
  }
}

// Solves L x = b with the lower triangle of l.
void forward_solve(const Mat& l, const double* b, double* x) {
  std::size_t n = l.rows;
  for (std::size_t i = 0; i < n; ++i)
    x[i] = (b[i] - simd::dot(l.row(i), x, i)) / l(i, i);
}

// Solves L^T x = b with the lower triangle of l.
void backward_solve(const Mat& l, const double* b, double* x) {
  std::size_t n = l.rows;
  for (std::size_t ii = n; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x[k];
    x[ii] = s / l(ii, ii);
  }
}

// Cyclic Jacobi for a symmetric matrix. a is destroyed; v's ROWS end up as
// the eigenvectors (kept row-major so plane rotations touch contiguous memory).
void jacobi_eigen(Mat& a, Mat& v, std::vector<double>& evals) {
  std::size_t n = a.rows;
  v = Mat(n, n);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) scale = std::max(scale, std::abs(a(i, j)));
  if (scale == 0.0) {
    evals.assign(n, 0.0);
    return;
  }

  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= 1e-14 * scale * static_cast<double>(n)) {
      evals.resize(n);
      for (std::size_t i = 0; i < n; ++i) evals[i] = a(i, i);
      return;
    }
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t = (theta >= 0.0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        // A <- J^T A J applied as a row rotation then a column rotation.
        simd::rot(a.row(q), a.row(p), c, s, n);
        for (std::size_t k = 0; k < n; ++k) {
          double akq = a(k, q);
          double akp = a(k, p);
          a(k, q) = c * akq + s * akp;
          a(k, p) = c * akp - s * akq;
        }
        simd::rot(v.row(q), v.row(p), c, s, n);
      }
    }
  }
  fail(Errc::numerical_failure, "jacobi_eigen: no convergence in 64 sweeps");
}

}  // namespace

ScatterPair scatter_matrices(const Mat& x, const std::vector<int>& y) {
  if (x.rows == 0 || x.cols == 0) fail(Errc::empty_input, "scatter_matrices: empty data");
  if (x.rows != y.size())
    fail(Errc::shape_mismatch, "scatter_matrices: label count != row count");

  std::map<int, std::size_t> counts;
  for (int c : y) counts[c]++;
  if (counts.size() < 2) fail(Errc::single_class, "scatter_matrices: need >= 2 classes");

  std::size_t d = x.cols;
  std::map<int, std::vector<double>> means;
  for (const auto& [c, cnt] : counts) means[c] = std::vector<double>(d, 0.0);
  std::vector<double> global(d, 0.0);
  for (std::size_t i = 0; i < x.rows; ++i) {
    simd::axpy(1.0, x.row(i), means[y[i]].data(), d);
    simd::axpy(1.0, x.row(i), global.data(), d);
  }
  for (auto& [c, m] : means)
    simd::scal(1.0 / static_cast<double>(counts[c]), m.data(), d);
  simd::scal(1.0 / static_cast<double>(x.rows), global.data(), d);

  ScatterPair sp{Mat(d, d), Mat(d, d)};
  std::vector<double> diff(d);
  for (const auto& [c, m] : means) {
    for (std::size_t j = 0; j < d; ++j) diff[j] = m[j] - global[j];
    simd::ger(static_cast<double>(counts[c]), diff.data(), diff.data(),
              sp.s_b.data.data(), d, d);
  }
  for (std::size_t i = 0; i < x.rows; ++i) {
    const auto& m = means[y[i]];
    for (std::size_t j = 0; j < d; ++j) diff[j] = x(i, j) - m[j];
    simd::ger(1.0, diff.data(), diff.data(), sp.s_w.data.data(), d, d);
  }
  // rank-1 accumulation rounds (i,j) and (j,i) separately; restore exact symmetry
  for (Mat* m : {&sp.s_b, &sp.s_w}) {
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i + 1; j < d; ++j) {
        double avg = 0.5 * ((*m)(i, j) + (*m)(j, i));
        (*m)(i, j) = avg;
        (*m)(j, i) = avg;
      }
  }
  return sp;
}

std::vector<EigenPair> lda_directions(const ScatterPair& scatter, std::size_t k,
                                      double ridge) {
  std::size_t d = scatter.s_b.rows;
  if (scatter.s_b.cols != d || scatter.s_w.rows != d || scatter.s_w.cols != d)
    fail(Errc::shape_mismatch, "lda_directions: scatter matrices not square/matching");
  if (k > d) fail(Errc::invalid_argument, "lda_directions: k > d");
  if (ridge < 0.0) fail(Errc::invalid_argument, "lda_directions: negative ridge");

  Mat l = scatter.s_w;
  for (std::size_t i = 0; i < d; ++i) l(i, i) += ridge;
  cholesky(l);

  // C = L^-1 S_B L^-T, computed row by row so the solves stay contiguous.
  Mat z(d, d);
  std::vector<double> col(d), sol(d);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < d; ++i) col[i] = scatter.s_b(i, j);
    forward_solve(l, col.data(), sol.data());
    for (std::size_t i = 0; i < d; ++i) z(i, j) = sol[i];
  }
  Mat c(d, d);
  for (std::size_t i = 0; i < d; ++i) forward_solve(l, z.row(i), c.row(i));

  Mat vecs;
  std::vector<double> evals;
  jacobi_eigen(c, vecs, evals);

  std::vector<std::size_t> order(d);
  for (std::size_t i = 0; i < d; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return evals[a] > evals[b]; });

  std::vector<EigenPair> out;
  for (std::size_t r = 0; r < k; ++r) {
    EigenPair ep;
    ep.value = evals[order[r]];
    ep.vector.resize(d);
    backward_solve(l, vecs.row(order[r]), ep.vector.data());
    double norm = std::sqrt(simd::sum_sq(ep.vector.data(), d));
    if (norm > 0.0) simd::scal(1.0 / norm, ep.vector.data(), d);
    out.push_back(std::move(ep));
  }
  return out;
}

double default_ridge(const Mat& s_w) {
  double tr = 0.0;
  for (std::size_t i = 0; i < s_w.rows; ++i) tr += s_w(i, i);
  return 1e-6 * tr / static_cast<double>(s_w.rows);
}

double rayleigh_quotient(const ScatterPair& scatter, const std::vector<double>& w,
                         double ridge) {
  std::size_t d = w.size();
  std::vector<double> tmp(d);
  simd::matvec(scatter.s_b.data.data(), w.data(), tmp.data(), d, d);
  double num = simd::dot(w.data(), tmp.data(), d);
  simd::matvec(scatter.s_w.data.data(), w.data(), tmp.data(), d, d);
  double den = simd::dot(w.data(), tmp.data(), d) + ridge * simd::sum_sq(w.data(), d);
  if (den == 0.0) fail(Errc::numerical_failure, "rayleigh_quotient: zero denominator");
  return num / den;
}

SeparabilityScores separability_scores(const Mat& x, const std::vector<int>& y,
                                       double ridge) {
  ScatterPair sp = scatter_matrices(x, y);
  double eps = ridge < 0.0 ? default_ridge(sp.s_w) : ridge;

  SeparabilityScores out;
  out.ridge = eps;
  for (int c : y)
    if (c >= 0 && c < 4) out.class_counts[c]++;

  std::map<int, bool> distinct;
  for (int c : y) distinct[c] = true;

  std::size_t k = std::min<std::size_t>(2, x.cols);
  auto dirs = lda_directions(sp, k, eps);
  out.w1 = dirs[0].vector;
  out.j1 = rayleigh_quotient(sp, out.w1, eps);
  if (dirs.size() > 1 && distinct.size() >= 3) {
    out.w2 = dirs[1].vector;
    out.j2 = rayleigh_quotient(sp, out.w2, eps);
    out.j2_defined = true;
  } else {
    out.w2.assign(x.cols, 0.0);
    out.j2 = 0.0;
    out.j2_defined = false;
  }
  return out;
}

Mat project2d(const Mat& x, const SeparabilityScores& scores) {
  if (scores.w1.size() != x.cols)
    fail(Errc::shape_mismatch, "project2d: direction dim != data dim");
  Mat out(x.rows, 2);
  for (std::size_t i = 0; i < x.rows; ++i) {
    out(i, 0) = simd::dot(x.row(i), scores.w1.data(), x.cols);
    out(i, 1) = scores.w2.empty() ? 0.0 : simd::dot(x.row(i), scores.w2.data(), x.cols);
  }
  return out;
}

}  // namespace movekit

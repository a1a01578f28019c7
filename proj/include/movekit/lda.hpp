#pragma once

#include <array>
#include <vector>

#include "movekit/common.hpp"

namespace movekit {

struct ScatterPair {
  Mat s_b;  // between-class scatter, sum_c n_c (mu_c - mu)(mu_c - mu)^T
  Mat s_w;  // within-class scatter,  sum_c sum_{i in c} (x_i - mu_c)(x_i - mu_c)^T
};

// y holds class indices; at least two distinct classes required.
ScatterPair scatter_matrices(const Mat& x, const std::vector<int>& y);

struct EigenPair {
  double value = 0.0;
  std::vector<double> vector;  // unit 2-norm
};

// Top-k generalized eigenpairs of S_B w = rho (S_W + ridge I) w, eigenvalues
// descending. Solved via Cholesky reduction to a symmetric standard problem
// plus cyclic Jacobi.
std::vector<EigenPair> lda_directions(const ScatterPair& scatter, std::size_t k,
                                      double ridge);

struct SeparabilityScores {
  double j1 = 0.0;
  double j2 = 0.0;
  std::vector<double> w1, w2;  // unit norm; w2 zero when j2_defined is false
  bool j2_defined = false;
  double ridge = 0.0;
  std::array<std::size_t, 4> class_counts{};
};

// ridge < 0 selects the default 1e-6 * trace(S_W) / d.
double default_ridge(const Mat& s_w);
SeparabilityScores separability_scores(const Mat& x, const std::vector<int>& y,
                                       double ridge = -1.0);

// Rayleigh quotient w^T S_B w / w^T (S_W + ridge I) w.
double rayleigh_quotient(const ScatterPair& scatter, const std::vector<double>& w,
                         double ridge);

// n x 2 coordinates (X w1, X w2).
Mat project2d(const Mat& x, const SeparabilityScores& scores);

}  // namespace movekit

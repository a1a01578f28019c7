#pragma once

#include <cstddef>

namespace movekit::simd {

// Kernel table for the double-precision inner loops everything else is built
// on. Two implementations exist: a scalar reference and an AVX2/FMA variant
// selected at runtime. The AVX2 kernels must agree with the reference up to
// reassociation-level rounding; tests/test_simd.cpp enforces that.
struct Kernels {
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // x *= alpha
  void (*scal)(double alpha, double* x, std::size_t n);
  // y = max(x, 0)
  void (*relu)(const double* x, double* y, std::size_t n);
  // out = g * (pre > 0 ? 1 : 0); the subgradient at 0 is 0
  void (*relu_mask_mul)(const double* pre, const double* g, double* out, std::size_t n);
  // sum_i x[i]^2
  double (*sum_sq)(const double* x, std::size_t n);
  // y = A x with A row-major (rows x cols), y length rows
  void (*matvec)(const double* a, const double* x, double* y,
                 std::size_t rows, std::size_t cols);
  // y = A^T x with A row-major (rows x cols), y length cols
  void (*matvec_t)(const double* a, const double* x, double* y,
                   std::size_t rows, std::size_t cols);
  // A += alpha * u v^T (rank-1 update), A row-major (rows x cols)
  void (*ger)(double alpha, const double* u, const double* v, double* a,
              std::size_t rows, std::size_t cols);
  // plane rotation: {x, y} <- {c x + s y, c y - s x}
  void (*rot)(double* x, double* y, double c, double s, std::size_t n);
  // y = max(y, x) elementwise
  void (*max_inplace)(const double* x, double* y, std::size_t n);
  // Adam step: m <- b1 m + (1-b1) g; v <- b2 v + (1-b2) g^2;
  // p -= lr * (m * bc1) / (sqrt(v * bc2) + eps)   (bc* = bias corrections)
  void (*adam_update)(double* p, double* m, double* v, const double* g,
                      std::size_t n, double lr, double b1, double b2,
                      double eps, double bc1, double bc2);
};

enum class Backend { automatic, scalar, avx2 };

const Kernels& scalar_kernels();
#if defined(MOVEKIT_HAVE_AVX2_BUILD)
const Kernels& avx2_kernels();
#endif

bool avx2_supported();

// Forces a backend (test hook). Throws Errc::invalid_argument when the
// requested backend is not available on this machine.
void set_backend(Backend b);
const Kernels& active();
const char* active_name();

inline double dot(const double* a, const double* b, std::size_t n) {
  return active().dot(a, b, n);
}
inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  active().axpy(alpha, x, y, n);
}
inline void scal(double alpha, double* x, std::size_t n) { active().scal(alpha, x, n); }
inline void relu(const double* x, double* y, std::size_t n) { active().relu(x, y, n); }
inline void relu_mask_mul(const double* pre, const double* g, double* out, std::size_t n) {
  active().relu_mask_mul(pre, g, out, n);
}
inline double sum_sq(const double* x, std::size_t n) { return active().sum_sq(x, n); }
inline void matvec(const double* a, const double* x, double* y,
                   std::size_t rows, std::size_t cols) {
  active().matvec(a, x, y, rows, cols);
}
inline void matvec_t(const double* a, const double* x, double* y,
                     std::size_t rows, std::size_t cols) {
  active().matvec_t(a, x, y, rows, cols);
}
inline void ger(double alpha, const double* u, const double* v, double* a,
                std::size_t rows, std::size_t cols) {
  active().ger(alpha, u, v, a, rows, cols);
}
inline void rot(double* x, double* y, double c, double s, std::size_t n) {
  active().rot(x, y, c, s, n);
}
inline void max_inplace(const double* x, double* y, std::size_t n) {
  active().max_inplace(x, y, n);
}
inline void adam_update(double* p, double* m, double* v, const double* g,
                        std::size_t n, double lr, double b1, double b2,
                        double eps, double bc1, double bc2) {
  active().adam_update(p, m, v, g, n, lr, b1, b2, eps, bc1, bc2);
}

}  // namespace movekit::simd

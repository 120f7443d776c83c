#pragma once

// Dense double-precision kernels used by the neural models.
//
// Every kernel has a portable scalar reference and, on x86-64 builds, an
// AVX2/FMA variant. The variant is chosen once at first use from CPUID; set
// KT_SIMD=scalar (or avx2) in the environment to force a choice. Matrices
// are row-major.

#include <cstddef>
#include <span>
#include <string_view>

namespace kt::simd {

struct KernelTable {
  const char* name;
  /// sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  /// y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  /// y[rows] += A[rows x cols] * x[cols]
  void (*gemv)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
  /// y[cols] += A[rows x cols]^T * x[rows]
  void (*gemv_t)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
  /// A[rows x cols] += alpha * x[rows] * y[cols]^T
  void (*ger)(double alpha, const double* x, std::size_t rows, const double* y, std::size_t cols,
              double* a);
};

const KernelTable& scalar_kernels();

/// nullptr when the variant was not compiled in or the CPU lacks AVX2/FMA.
const KernelTable* avx2_kernels();

const KernelTable& active_kernels();

/// Replaces the active table; returns the previous one.
const KernelTable& set_active_kernels(const KernelTable& table);

/// Restores the previous kernel table on scope exit.
class ScopedKernels {
 public:
  explicit ScopedKernels(const KernelTable& table) : previous_(set_active_kernels(table)) {}
  ~ScopedKernels() { set_active_kernels(previous_); }
  ScopedKernels(const ScopedKernels&) = delete;
  ScopedKernels& operator=(const ScopedKernels&) = delete;

 private:
  const KernelTable& previous_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active_kernels().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active_kernels().axpy(alpha, x.data(), y.data(), x.size());
}

inline void gemv(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  active_kernels().gemv(a, rows, cols, x, y);
}

inline void gemv_t(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  active_kernels().gemv_t(a, rows, cols, x, y);
}

inline void ger(double alpha, const double* x, std::size_t rows, const double* y, std::size_t cols,
                double* a) {
  active_kernels().ger(alpha, x, rows, y, cols, a);
}

namespace detail {
extern const KernelTable kAvx2Table;
}

}  // namespace kt::simd

#pragma once

// Dense double-precision kernels behind the Q-network. Every kernel has a
// scalar reference implementation; vector variants are selected once at
// startup from the CPU features and must agree with the reference to
// rounding (see tests/test_kernels.cpp).
//
// Matrices are row-major, `rows x cols`, contiguous.

#include <cstddef>
#include <span>
#include <string_view>

namespace gridfase::kernels {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa);

struct KernelTable {
    Isa isa;
    // sum_i x[i] * y[i]
    double (*dot)(const double* x, const double* y, std::size_t n);
    // y[i] += alpha * x[i]
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // y = A x + b  (b may be null)
    void (*gemv)(const double* a, std::size_t rows, std::size_t cols, const double* x, const double* b,
                 double* y);
    // y += A^T x
    void (*gemv_t)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
    // A += alpha * x y^T
    void (*ger)(double* a, std::size_t rows, std::size_t cols, double alpha, const double* x, const double* y);
};

bool isa_available(Isa isa);

/// Table for a specific ISA. Throws std::invalid_argument if it is not available on this CPU/build.
const KernelTable& table(Isa isa);

/// Table chosen at first use: best available ISA unless GRIDFASE_KERNELS=scalar|avx2|neon overrides it.
const KernelTable& active();

// Span wrappers over the active table.
double dot(std::span<const double> x, std::span<const double> y);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void gemv(std::span<const double> a, std::size_t rows, std::size_t cols, std::span<const double> x,
          std::span<const double> b, std::span<double> y);
void gemv_t(std::span<const double> a, std::size_t rows, std::size_t cols, std::span<const double> x,
            std::span<double> y);
void ger(std::span<double> a, std::size_t rows, std::size_t cols, double alpha, std::span<const double> x,
         std::span<const double> y);

namespace detail {
const KernelTable& scalar_table();
#if defined(GRIDFASE_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
#if defined(GRIDFASE_HAVE_NEON)
const KernelTable& neon_table();
#endif
}  // namespace detail

}  // namespace gridfase::kernels

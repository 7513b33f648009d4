#include "gridfase/kernels.hpp"

#include <immintrin.h>

namespace gridfase::kernels::detail {

namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
    }
    if (i + 4 <= n) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
        i += 4;
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d a = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(a, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_avx2(const double* a, std::size_t rows, std::size_t cols, const double* x, const double* b, double* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        y[r] = dot_avx2(a + r * cols, x, cols) + (b ? b[r] : 0.0);
    }
}

void gemv_t_avx2(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        if (x[r] != 0.0) axpy_avx2(x[r], a + r * cols, y, cols);
    }
}

void ger_avx2(double* a, std::size_t rows, std::size_t cols, double alpha, const double* x, const double* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double s = alpha * x[r];
        if (s != 0.0) axpy_avx2(s, y, a + r * cols, cols);
    }
}

}  // namespace

const KernelTable& avx2_table() {
    static const KernelTable t{Isa::Avx2, dot_avx2, axpy_avx2, gemv_avx2, gemv_t_avx2, ger_avx2};
    return t;
}

}  // namespace gridfase::kernels::detail

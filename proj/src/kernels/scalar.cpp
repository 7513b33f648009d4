#include "gridfase/kernels.hpp"

namespace gridfase::kernels::detail {

namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_scalar(const double* a, std::size_t rows, std::size_t cols, const double* x, const double* b, double* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        y[r] = dot_scalar(a + r * cols, x, cols) + (b ? b[r] : 0.0);
    }
}

void gemv_t_scalar(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        if (x[r] != 0.0) axpy_scalar(x[r], a + r * cols, y, cols);
    }
}

void ger_scalar(double* a, std::size_t rows, std::size_t cols, double alpha, const double* x, const double* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double s = alpha * x[r];
        if (s != 0.0) axpy_scalar(s, y, a + r * cols, cols);
    }
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable t{Isa::Scalar, dot_scalar, axpy_scalar, gemv_scalar, gemv_t_scalar, ger_scalar};
    return t;
}

}  // namespace gridfase::kernels::detail

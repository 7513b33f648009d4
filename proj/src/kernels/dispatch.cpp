#include <cassert>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "gridfase/kernels.hpp"

namespace gridfase::kernels {

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return "scalar";
        case Isa::Avx2: return "avx2";
        case Isa::Neon: return "neon";
    }
    return "unknown";
}

bool isa_available(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return true;
        case Isa::Avx2:
#if defined(GRIDFASE_HAVE_AVX2)
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
        case Isa::Neon:
#if defined(GRIDFASE_HAVE_NEON)
            return true;
#else
            return false;
#endif
    }
    return false;
}

const KernelTable& table(Isa isa) {
    if (!isa_available(isa)) {
        throw std::invalid_argument("kernel ISA not available: " + std::string(isa_name(isa)));
    }
    switch (isa) {
#if defined(GRIDFASE_HAVE_AVX2)
        case Isa::Avx2: return detail::avx2_table();
#endif
#if defined(GRIDFASE_HAVE_NEON)
        case Isa::Neon: return detail::neon_table();
#endif
        default: return detail::scalar_table();
    }
}

namespace {

const KernelTable& select() {
    if (const char* forced = std::getenv("GRIDFASE_KERNELS")) {
        const std::string name(forced);
        for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Neon}) {
            if (name == isa_name(isa) && isa_available(isa)) return table(isa);
        }
    }
    for (Isa isa : {Isa::Avx2, Isa::Neon}) {
        if (isa_available(isa)) return table(isa);
    }
    return detail::scalar_table();
}

}  // namespace

const KernelTable& active() {
    static const KernelTable& t = select();
    return t;
}

double dot(std::span<const double> x, std::span<const double> y) {
    assert(x.size() == y.size());
    return active().dot(x.data(), y.data(), x.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    assert(x.size() == y.size());
    active().axpy(alpha, x.data(), y.data(), x.size());
}

void gemv(std::span<const double> a, std::size_t rows, std::size_t cols, std::span<const double> x,
          std::span<const double> b, std::span<double> y) {
    assert(a.size() == rows * cols && x.size() == cols && y.size() == rows);
    assert(b.empty() || b.size() == rows);
    active().gemv(a.data(), rows, cols, x.data(), b.empty() ? nullptr : b.data(), y.data());
}

void gemv_t(std::span<const double> a, std::size_t rows, std::size_t cols, std::span<const double> x,
            std::span<double> y) {
    assert(a.size() == rows * cols && x.size() == rows && y.size() == cols);
    active().gemv_t(a.data(), rows, cols, x.data(), y.data());
}

void ger(std::span<double> a, std::size_t rows, std::size_t cols, double alpha, std::span<const double> x,
         std::span<const double> y) {
    assert(a.size() == rows * cols && x.size() == rows && y.size() == cols);
    active().ger(a.data(), rows, cols, alpha, x.data(), y.data());
}

}  // namespace gridfase::kernels

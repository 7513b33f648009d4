#include <doctest.h>

#include <random>
#include <stdexcept>
#include <vector>

#include "gridfase/kernels.hpp"

using namespace gridfase::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(n);
    for (double& x : v) x = u(rng);
    return v;
}

std::vector<const KernelTable*> vector_tables() {
    std::vector<const KernelTable*> out;
    for (Isa isa : {Isa::Avx2, Isa::Neon}) {
        if (isa_available(isa)) out.push_back(&table(isa));
    }
    return out;
}

}  // namespace

TEST_CASE("scalar kernels against naive loops") {
    const KernelTable& s = detail::scalar_table();
    std::vector<double> a{1, 2, 3, 4, 5, 6};  // 2 x 3
    std::vector<double> x{1, -1, 2};
    std::vector<double> b{0.5, -0.5};
    std::vector<double> y(2);
    s.gemv(a.data(), 2, 3, x.data(), b.data(), y.data());
    CHECK(y[0] == doctest::Approx(1 - 2 + 6 + 0.5));
    CHECK(y[1] == doctest::Approx(4 - 5 + 12 - 0.5));
    s.gemv(a.data(), 2, 3, x.data(), nullptr, y.data());
    CHECK(y[0] == doctest::Approx(5.0));

    std::vector<double> z{1, 1, 1};
    const std::vector<double> w{1, 2};
    s.gemv_t(a.data(), 2, 3, w.data(), z.data());
    CHECK(z == std::vector<double>{1 + 1 + 8, 1 + 2 + 10, 1 + 3 + 12});

    s.ger(a.data(), 2, 3, 2.0, w.data(), x.data());
    CHECK(a == std::vector<double>{3, 0, 7, 8, 1, 14});

    CHECK(s.dot(x.data(), x.data(), 3) == 6.0);
    std::vector<double> acc{1, 1, 1};
    s.axpy(-1.0, x.data(), acc.data(), 3);
    CHECK(acc == std::vector<double>{0, 2, -1});
}

TEST_CASE("vector kernels agree with the scalar reference on awkward lengths") {
    const auto tables = vector_tables();
    if (tables.empty()) {
        MESSAGE("no vector ISA on this machine; only the scalar path is exercised");
        return;
    }
    const KernelTable& ref = detail::scalar_table();
    std::mt19937_64 rng(11);
    for (const KernelTable* t : tables) {
        for (std::size_t n : {1u, 3u, 4u, 7u, 8u, 9u, 15u, 16u, 17u, 31u, 64u, 121u, 146u, 1001u}) {
            const auto x = random_vec(n, rng), y = random_vec(n, rng);
            CHECK(t->dot(x.data(), y.data(), n) == doctest::Approx(ref.dot(x.data(), y.data(), n)).epsilon(1e-13));

            auto y1 = y, y2 = y;
            t->axpy(0.37, x.data(), y1.data(), n);
            ref.axpy(0.37, x.data(), y2.data(), n);
            for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-14));

            for (std::size_t rows : {1u, 5u, 121u}) {
                const auto a = random_vec(rows * n, rng), b = random_vec(rows, rng), v = random_vec(rows, rng);
                std::vector<double> o1(rows), o2(rows);
                t->gemv(a.data(), rows, n, x.data(), b.data(), o1.data());
                ref.gemv(a.data(), rows, n, x.data(), b.data(), o2.data());
                for (std::size_t i = 0; i < rows; ++i) CHECK(o1[i] == doctest::Approx(o2[i]).epsilon(1e-12));

                std::vector<double> t1 = y, t2 = y;
                t->gemv_t(a.data(), rows, n, v.data(), t1.data());
                ref.gemv_t(a.data(), rows, n, v.data(), t2.data());
                for (std::size_t i = 0; i < n; ++i) CHECK(t1[i] == doctest::Approx(t2[i]).epsilon(1e-12));

                auto g1 = a, g2 = a;
                t->ger(g1.data(), rows, n, -0.25, v.data(), x.data());
                ref.ger(g2.data(), rows, n, -0.25, v.data(), x.data());
                for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g1[i] == doctest::Approx(g2[i]).epsilon(1e-14));
            }
        }
    }
}

TEST_CASE("active table honours availability") {
    CHECK(isa_available(Isa::Scalar));
    CHECK(isa_available(active().isa));
    CHECK_THROWS_AS(table(isa_available(Isa::Neon) ? Isa::Avx2 : Isa::Neon), std::invalid_argument);
}

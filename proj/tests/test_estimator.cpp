#include <doctest.h>

#include <random>

#include <Eigen/Dense>

#include "common.hpp"
#include "gridfase/errors.hpp"
#include "gridfase/estimator.hpp"

using namespace gridfase;

namespace {

Eigen::VectorXd rand_vec(int n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = u(rng);
    return v;
}

SensorConfig quiet(SensorConfig s, double factor) {
    s.noise.pmu_magnitude *= factor;
    s.noise.pmu_angle_rad *= factor;
    s.noise.scada *= factor;
    s.noise.pseudo *= factor;
    return s;
}

}  // namespace

TEST_CASE("holt transition corners") {
    std::mt19937_64 rng(1);
    HoltMemory mem;
    mem.level = rand_vec(4, rng);
    mem.trend = rand_vec(4, rng);
    mem.level_prev = mem.level;
    mem.trend_prev = mem.trend;
    const Eigen::VectorXd xt = rand_vec(4, rng);

    auto tr = holt_fg({1.0, 0.0}, mem, xt);
    CHECK(tr.f == 1.0);
    CHECK((tr.g - mem.trend).norm() < 1e-15);

    tr = holt_fg({0.6, 0.5}, mem, xt);
    CHECK(tr.f == 0.9);
    CHECK(tr.F() == 0.9 * Eigen::MatrixXd::Identity(4, 4));

    tr = holt_fg({0.0, 0.0}, mem, xt);
    CHECK(tr.f == 0.0);
    CHECK((tr.g - (xt + mem.trend)).norm() < 1e-15);

    CHECK_THROWS_AS(SmoothingCoefficients::checked(1.1, 0.0), std::invalid_argument);
}

TEST_CASE("holt prediction equals level plus trend") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 200; ++k) {
        const SmoothingCoefficients c{u(rng), u(rng)};
        HoltMemory mem;
        mem.level = rand_vec(6, rng);
        mem.trend = rand_vec(6, rng, -0.1, 0.1);
        const Eigen::VectorXd xh = rand_vec(6, rng), xt = rand_vec(6, rng);
        const Eigen::VectorXd a = c.alpha * xh + (1 - c.alpha) * xt;
        const Eigen::VectorXd b = c.beta * (a - mem.level) + (1 - c.beta) * mem.trend;
        const Gaussian g = predict(xh, Eigen::MatrixXd::Identity(6, 6), holt_fg(c, mem, xt), Eigen::MatrixXd::Zero(6, 6));
        CHECK((g.mean - (a + b)).cwiseAbs().maxCoeff() < 1e-12);

        const HoltMemory next = holt_advance(mem, c, xh, xt);
        CHECK((next.level - a).cwiseAbs().maxCoeff() < 1e-15);
        CHECK((next.trend - b).cwiseAbs().maxCoeff() < 1e-15);
        CHECK(next.level_prev == mem.level);
        CHECK(next.trend_prev == mem.trend);
    }
}

TEST_CASE("holt memory update corners and fixed point") {
    std::mt19937_64 rng(3);
    HoltMemory mem = HoltMemory::anchored(rand_vec(3, rng));
    mem.trend = rand_vec(3, rng);
    const Eigen::VectorXd xh = rand_vec(3, rng), xt = rand_vec(3, rng);
    CHECK(holt_advance(mem, {1.0, 0.3}, xh, xt).level == xh);
    CHECK(holt_advance(mem, {0.4, 0.0}, xh, xt).trend == mem.trend);

    const Eigen::VectorXd target = rand_vec(3, rng);
    for (const SmoothingCoefficients c : {SmoothingCoefficients{0.3, 0.2}, SmoothingCoefficients{0.9, 0.7}}) {
        HoltMemory m = mem;
        for (int k = 0; k < 400; ++k) m = holt_advance(m, c, target, target);
        CHECK((m.level - target).norm() < 1e-9);
        CHECK(m.trend.norm() < 1e-9);
    }
}

TEST_CASE("predict step") {
    const Gaussian g = predict(Eigen::VectorXd::Constant(1, 2.0), Eigen::MatrixXd::Constant(1, 1, 1.0),
                               Eigen::MatrixXd::Constant(1, 1, 0.5), Eigen::VectorXd::Constant(1, 1.0),
                               Eigen::MatrixXd::Constant(1, 1, 0.1));
    CHECK(g.mean[0] == doctest::Approx(2.0));
    CHECK(g.cov(0, 0) == doctest::Approx(0.35));

    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(3, 3);
    const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(3, 1, 3);
    const Gaussian h = predict(x, I, I, Eigen::VectorXd::Zero(3), 0.01 * I);
    CHECK(h.mean == x);
    CHECK((h.cov - 1.01 * I).norm() < 1e-15);

    // anchored memory is a fixed point of every coefficient pair
    const HoltMemory mem = HoltMemory::anchored(x);
    const Gaussian p = predict(x, I, holt_fg({0.6, 0.5}, mem, x), I);
    CHECK((p.mean - x).norm() < 1e-15);
}

TEST_CASE("ekf update special cases") {
    const Eigen::MatrixXd S0 = Eigen::MatrixXd::Constant(1, 1, 4.0);
    const Eigen::MatrixXd H = Eigen::MatrixXd::Ones(1, 1);
    const Eigen::VectorXd r = Eigen::VectorXd::Constant(1, 1.0);
    const Gaussian g = ekf_update(Eigen::VectorXd::Zero(1), S0, Eigen::VectorXd::Constant(1, 1.0), r, H);
    CHECK(g.mean[0] == doctest::Approx(4.0 / 5.0));
    CHECK(g.cov(0, 0) == doctest::Approx(4.0 - 16.0 / 5.0));

    std::mt19937_64 rng(4);
    const Eigen::MatrixXd A = Eigen::MatrixXd::Random(3, 3);
    const Eigen::MatrixXd sigma = A * A.transpose() + Eigen::MatrixXd::Identity(3, 3);
    const Eigen::MatrixXd H2 = Eigen::MatrixXd::Random(2, 3);
    const Eigen::VectorXd x = rand_vec(3, rng);
    const Gaussian z = ekf_update(x, sigma, H2 * x, Eigen::VectorXd::Constant(2, 0.5), H2);
    CHECK((z.mean - x).norm() < 1e-14);
    CHECK(z.cov.trace() < sigma.trace());
    CHECK((z.cov - z.cov.transpose()).norm() == 0.0);

    // angle innovations are wrapped
    UpdateOptions opt;
    opt.angle_rows = {0};
    const Gaussian w = ekf_update(Eigen::VectorXd::Zero(1), S0, Eigen::VectorXd::Constant(1, 3.14),
                                  Eigen::VectorXd::Constant(1, -3.14), r, H, opt);
    CHECK(w.mean[0] == doctest::Approx(0.8 * (6.28 - 2 * 3.141592653589793)));
}

TEST_CASE("degenerate innovation covariance") {
    Eigen::MatrixXd H(2, 2);
    H << 1, 1, 1, 1;
    CHECK_THROWS_AS(ekf_update(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2),
                               Eigen::VectorXd::Zero(2), H),
                    SingularInnovation);
}

TEST_CASE("linear system tracks a textbook Kalman filter") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n01(0.0, 1.0);
    Eigen::Matrix2d F, H, Q, R;
    F << 1.0, 0.1, 0.0, 0.95;
    H << 1.0, 0.0, 0.5, 1.0;
    Q << 1e-3, 2e-4, 2e-4, 5e-4;
    R << 4e-2, 0.0, 0.0, 9e-2;
    Eigen::Vector2d truth(1.0, -0.5), x(0.0, 0.0), xr(0.0, 0.0);
    Eigen::Matrix2d P = Eigen::Matrix2d::Identity(), Pr = P;
    for (int k = 0; k < 50; ++k) {
        truth = F * truth + Eigen::Vector2d(0.03 * n01(rng), 0.02 * n01(rng));
        const Eigen::Vector2d y = H * truth + Eigen::Vector2d(0.2 * n01(rng), 0.3 * n01(rng));

        const Gaussian p = predict(x, P, F, Eigen::Vector2d::Zero(), Q);
        const Gaussian u = ekf_update(p.mean, p.cov, y, R.diagonal(), H);
        x = u.mean;
        P = u.cov;

        xr = F * xr;
        Pr = F * Pr * F.transpose() + Q;
        const Eigen::Matrix2d K = Pr * H.transpose() * (H * Pr * H.transpose() + R).inverse();
        xr = xr + K * (y - H * xr);
        Pr = (Eigen::Matrix2d::Identity() - K * H) * Pr;

        CHECK((x - xr).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((P - Pr).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("static WLS") {
    const auto net = testing::ieee13();
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.5, 1.3);
    Eigen::VectorXcd s = net->nominal_injection_kva();
    for (Eigen::Index i = 0; i < s.size(); ++i) s(i) *= u(rng);
    const SystemState truth = solve_powerflow(*net, s);
    const FilterConfig cfg;

    SUBCASE("noise-free recovery") {
        const MeasurementModel model(net, quiet(testing::ieee13_sensors(), 0.0));
        const WlsResult r = wls_static(model, synthesize(model, truth, 0, 1), cfg);
        CHECK((r.state.x() - truth.x()).cwiseAbs().maxCoeff() < 1e-6);
        CHECK(r.iterations < cfg.wls_max_iter);
    }
    SUBCASE("small noise stays close") {
        const MeasurementModel model(net, quiet(testing::ieee13_sensors(), 1e-3));
        for (int k = 0; k < 5; ++k) {
            const WlsResult r = wls_static(model, synthesize(model, truth, k, 2), cfg);
            CHECK((r.state.x() - truth.x()).cwiseAbs().maxCoeff() < 1e-4);
        }
    }
    SUBCASE("PMUs alone do not observe the state") {
        SensorConfig pmu_only;
        pmu_only.pmu_buses = {"650", "671", "675"};
        const MeasurementModel model(net, pmu_only);
        CHECK_THROWS_AS(wls_static(model, synthesize(model, truth, 0, 1), cfg), RankDeficient);
    }
}

TEST_CASE("forecasting-aided estimator on a constant noise-free state") {
    const auto net = testing::ieee13();
    const auto model = std::make_shared<const MeasurementModel>(net, quiet(testing::ieee13_sensors(), 0.0));
    const SystemState truth = solve_powerflow(*net, net->nominal_injection_kva());
    const auto snaps = stream(*model, std::vector<SystemState>(20, truth), 10, 1);

    FaseEstimator est(model, {});
    CHECK_FALSE(est.anchored());
    CHECK_THROWS(est.step(snaps[1], {}));
    for (const Snapshot& s : snaps) {
        if (s.slow_refreshed) {
            est.anchor(s);
            CHECK(est.state().x_hat == est.state().x_tilde);
            CHECK(est.state().holt.trend.norm() == 0.0);
        } else {
            est.step(s, {0.6, 0.5});
        }
        CHECK(est.state().t == s.t);
        CHECK((est.state().x_hat - truth.x()).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("reconstruction evaluates the slow channels at the prediction") {
    const auto model = testing::ieee13_model();
    const SystemState st = solve_powerflow(model->network(), model->network().nominal_injection_kva());
    CHECK(reconstruct_slow(*model, st.x()) == model->h_slow(st));
}

#include <doctest.h>

#include <cmath>

#include "common.hpp"
#include "gridfase/environment.hpp"
#include "gridfase/errors.hpp"
#include "gridfase/harness.hpp"
#include "gridfase/scenario.hpp"

using namespace gridfase;

namespace {

Testbed constant_bed(int slow_ratio = 10, int horizon = 120) {
    Scenario sc = load_scenario(testing::scenario_dir() / "constant.json");
    sc.timing.slow_ratio = slow_ratio;
    sc.timing.horizon_steps = horizon;
    return Testbed::build(std::move(sc));
}

Testbed noisy_bed(int horizon = 60) {
    Scenario sc = load_scenario(testing::scenario_dir() / "ieee13_fixed.json");
    sc.timing.horizon_steps = horizon;
    return Testbed::build(std::move(sc));
}

double max_error(const RunTrace& tr) {
    double e = 0.0;
    for (const TraceRow& r : tr.rows) {
        const Eigen::Index nn = r.truth.size() / 2;
        for (Eigen::Index i = 0; i < nn; ++i) {
            e = std::max(e, std::abs(r.estimated[i] - r.truth[i]));
            e = std::max(e, std::abs(wrap_angle(r.estimated[nn + i] - r.truth[nn + i])));
        }
    }
    return e;
}

}  // namespace

TEST_CASE("refresh schedule of a run") {
    SUBCASE("N = 10 over 60 steps") {
        const Testbed bed = noisy_bed(60);
        const RunTrace tr = run_scenario(bed, simulate_run(bed, 1), Method::fixed_coefficients("f", {0.6, 0.5}));
        REQUIRE(tr.rows.size() == 60);
        const MetricsReport m = metrics(tr);
        CHECK(m.wls_steps == 6);
        CHECK(m.fase_steps == 54);
        for (const TraceRow& r : tr.rows) CHECK((r.mode == StepMode::Wls) == (r.t % 10 == 0));
    }
    SUBCASE("N = 1 is WLS only") {
        Scenario sc = load_scenario(testing::scenario_dir() / "ieee13_fixed.json");
        sc.timing.slow_ratio = 1;
        sc.timing.horizon_steps = 12;
        const Testbed bed = Testbed::build(std::move(sc));
        const RunTrace tr = run_scenario(bed, simulate_run(bed, 1), Method::fixed_coefficients("f", {0.6, 0.5}));
        for (const TraceRow& r : tr.rows) CHECK(r.mode == StepMode::Wls);
    }
}

TEST_CASE("noise-free constant scenario is tracked") {
    const Testbed bed = constant_bed();
    const RunInputs in = simulate_run(bed, 3);
    for (const SmoothingCoefficients c : {SmoothingCoefficients{1.0, 0.0}, SmoothingCoefficients{0.6, 0.5}}) {
        const RunTrace tr = run_scenario(bed, in, Method::fixed_coefficients("f", c));
        CHECK(max_error(tr) < 1e-4);
    }
}

TEST_CASE("metric arithmetic") {
    const double pi = 3.141592653589793;
    RunTrace tr;
    TraceRow r;
    r.truth = Eigen::Vector2d(1.0, pi - 0.01);
    r.estimated = Eigen::Vector2d(1.01, -pi + 0.01);
    r.predicted = r.estimated;
    r.mode = StepMode::Fase;
    r.micros = 5.0;
    tr.rows = {r, r};
    tr.rows[1].mode = StepMode::Wls;
    const MetricsReport m = metrics(tr);
    CHECK(m.mean_vmag_mape_pct == doctest::Approx(1.0));
    CHECK(m.mean_vang_mae_rad == doctest::Approx(0.02));
    CHECK(m.fase_steps == 1);
    CHECK(m.wls_steps == 1);
    CHECK_THROWS(metrics(RunTrace{}));
}

TEST_CASE("Monte Carlo battery") {
    const Testbed bed = noisy_bed(40);
    const Method fixed = Method::fixed_coefficients("fixed", {0.6, 0.5});

    SUBCASE("single run has zero spread") {
        const auto res = monte_carlo(bed, {fixed}, 1, 5);
        CHECK(res.front().vmag_mape_pct.stddev == 0.0);
        CHECK(res.front().vmag_mape_pct.mean == res.front().runs.front().mean_vmag_mape_pct);
    }
    SUBCASE("more runs extend the same sequence") {
        const auto two = monte_carlo(bed, {fixed}, 2, 5);
        const auto four = monte_carlo(bed, {fixed}, 4, 5);
        for (int k = 0; k < 2; ++k) {
            CHECK(two[0].runs[k].mean_vmag_mape_pct == four[0].runs[k].mean_vmag_mape_pct);
            CHECK(two[0].runs[k].mean_vang_mae_rad == four[0].runs[k].mean_vang_mae_rad);
        }
    }
    SUBCASE("a method against itself has unit ratios") {
        const auto rows = comparison(monte_carlo(bed, {fixed, fixed}, 2, 5));
        CHECK(rows[0].vmag_ratio == 1.0);
        CHECK(rows[0].vang_ratio == 1.0);
        CHECK(format_comparison(rows, 2).find("fixed") != std::string::npos);
    }
}

TEST_CASE("persistence is not worse on a constant scenario") {
    const Testbed bed = constant_bed();
    const auto rows = comparison(monte_carlo(
        bed, {Method::fixed_coefficients("persist", {1.0, 0.0}), Method::fixed_coefficients("base", {0.6, 0.5})}, 1, 9));
    CHECK(rows[0].vmag_mape_pct.mean <= rows[1].vmag_mape_pct.mean + 1e-12);
}

TEST_CASE("training environment") {
    SUBCASE("decisions per episode") {
        for (int n : {10, 2}) {
            const Testbed bed = constant_bed(n);
            FaseEnvironment env(bed, 4);
            env.reset();
            int decisions = 0;
            for (;;) {
                ++decisions;
                if (env.step(71).terminal) break;
            }
            CHECK(decisions == n - 1);
            CHECK(env.decisions_per_episode() == n - 1);
        }
        const Testbed one = constant_bed(1);
        CHECK_THROWS(FaseEnvironment(one, 4));
    }
    SUBCASE("same seed, same episodes") {
        const Testbed bed = noisy_bed(1440);
        FaseEnvironment a(bed, 8), b(bed, 8);
        for (int ep = 0; ep < 3; ++ep) {
            CHECK(a.reset() == b.reset());
            for (int action = 0;; action += 13) {
                const auto sa = a.step(action % 121), sb = b.step(action % 121);
                CHECK(sa.reward == sb.reward);
                CHECK(sa.observation == sb.observation);
                if (sa.terminal) break;
            }
        }
    }
    SUBCASE("observation layout") {
        const Testbed bed = noisy_bed(1440);
        FaseEnvironment env(bed, 8);
        CHECK(env.observation_dim() == 2 * 64 + 18);
        CHECK(env.reset().size() == env.observation_dim());
    }
}

TEST_CASE("scenario files") {
    const auto dir = testing::scenario_dir();
    for (const char* name : {"ieee13.json", "ieee13_fixed.json", "ieee34.json", "constant.json"}) {
        CAPTURE(name);
        const Scenario sc = load_scenario(dir / name);
        CHECK_NOTHROW(validate_scenario(sc));
    }
    const Scenario sc = load_scenario(dir / "ieee13.json");
    CHECK(sc.method.kind == MethodKind::Adaptive);
    CHECK(sc.baseline.alpha == 0.6);
    CHECK(sc.baseline.beta == 0.5);
    CHECK(sc.runs >= 20);
    CHECK(sc.timing.horizon_steps == 1440);

    const Testbed bed = Testbed::build(sc);
    CHECK(bed.model->state_dim() == 64);
    CHECK(bed.model->fast_count() == 18);

    const std::string base = R"({"name": "x", "feeder": "../data/ieee13.feeder",
        "sensors": {"pmu": ["650"], "scada": [], "pseudo": "all"}, "method": {"type": "fixed", "alpha": 0.6, "beta": 0.5})";
    CHECK_NOTHROW(parse_scenario(base + "}", dir));
    CHECK_THROWS_AS(parse_scenario(base, dir), ParseError);
    CHECK_THROWS_AS(parse_scenario(base + R"(, "runs": "many"})", dir), ParseError);

    Scenario bad = parse_scenario(base + "}", dir);
    bad.runs = 0;
    CHECK_THROWS_AS(validate_scenario(bad), ValidationError);
    bad = parse_scenario(base + "}", dir);
    bad.method.coefficients.alpha = 1.2;
    CHECK_THROWS_AS(validate_scenario(bad), ValidationError);
    bad = parse_scenario(base + "}", dir);
    bad.timing.slow_ratio = 0;
    CHECK_THROWS_AS(validate_scenario(bad), ValidationError);
}

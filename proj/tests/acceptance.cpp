// Prints one PASS/FAIL line per acceptance criterion. Pass criterion numbers to run a subset.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "common.hpp"
#include "gridfase/dqn.hpp"
#include "gridfase/environment.hpp"
#include "gridfase/errors.hpp"
#include "gridfase/harness.hpp"

namespace fs = std::filesystem;
using namespace gridfase;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

SystemState random_state(const Network& net, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.3, 1.4);
    Eigen::VectorXcd s = net.nominal_injection_kva();
    for (Eigen::Index i = 0; i < s.size(); ++i) s(i) *= u(rng);
    return solve_powerflow(net, s);
}

Outcome jacobian() {
    const auto t0 = Clock::now();
    const auto model = testing::ieee13_model();
    std::mt19937_64 rng(101);
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
        const SystemState st = random_state(model->network(), rng);
        const Eigen::MatrixXd H = model->jacobian(st);
        const double h = 1e-6;
        Eigen::MatrixXd fd(H.rows(), H.cols());
        for (int j = 0; j < st.dim(); ++j) {
            Eigen::VectorXd xp = st.x(), xm = st.x();
            xp[j] += h;
            xm[j] -= h;
            fd.col(j) = (model->h_full(SystemState(xp)) - model->h_full(SystemState(xm))) / (2 * h);
        }
        for (int i = 0; i < H.rows(); ++i) {
            const double scale = std::max(1.0, H.row(i).cwiseAbs().maxCoeff());
            worst = std::max(worst, (H.row(i) - fd.row(i)).cwiseAbs().maxCoeff() / scale);
        }
    }
    const double secs = seconds_since(t0);
    return {worst < 1e-6 && secs < 10.0, fmt("max relative error %.2e over 20 states, %.2f s", worst, secs)};
}

Outcome linear_kalman() {
    std::mt19937_64 rng(102);
    std::normal_distribution<double> n01(0.0, 1.0);
    Eigen::Matrix2d F, H, Q, R;
    F << 0.98, 0.05, -0.02, 0.9;
    H << 1.0, 0.2, -0.3, 1.0;
    Q << 2e-3, 1e-4, 1e-4, 1e-3;
    R << 5e-2, 0.0, 0.0, 2e-2;
    Eigen::Vector2d truth(0.4, 1.1), x = Eigen::Vector2d::Zero(), xr = x;
    Eigen::Matrix2d P = 2.0 * Eigen::Matrix2d::Identity(), Pr = P;
    double worst = 0.0;
    for (int k = 0; k < 50; ++k) {
        truth = F * truth + Eigen::Vector2d(0.04 * n01(rng), 0.03 * n01(rng));
        const Eigen::Vector2d y = H * truth + Eigen::Vector2d(0.2 * n01(rng), 0.15 * n01(rng));
        const Gaussian p = predict(x, P, F, Eigen::Vector2d::Zero(), Q);
        const Gaussian u = ekf_update(p.mean, p.cov, y, R.diagonal(), H);
        x = u.mean;
        P = u.cov;

        xr = F * xr;
        Pr = F * Pr * F.transpose() + Q;
        const Eigen::Matrix2d S = H * Pr * H.transpose() + R;
        const Eigen::Matrix2d K = Pr * H.transpose() * S.inverse();
        xr += K * (y - H * xr);
        Pr = (Eigen::Matrix2d::Identity() - K * H) * Pr;
        worst = std::max({worst, (x - xr).cwiseAbs().maxCoeff(), (P - Pr).cwiseAbs().maxCoeff()});
    }
    return {worst < 1e-10, fmt("max elementwise deviation %.2e over 50 steps", worst)};
}

Outcome wls_recovery() {
    const auto net = testing::ieee13();
    SensorConfig sensors = testing::ieee13_sensors();
    sensors.noise.pmu_magnitude = sensors.noise.pmu_angle_rad = sensors.noise.scada = sensors.noise.pseudo = 0.0;
    const MeasurementModel model(net, sensors);
    std::mt19937_64 rng(103);
    double worst_v = 0.0, worst_a = 0.0;
    const int nn = net->node_count();
    for (int k = 0; k < 10; ++k) {
        const SystemState truth = random_state(*net, rng);
        const WlsResult r = wls_static(model, synthesize(model, truth, 0, 1), FilterConfig{});
        const Eigen::VectorXd d = r.state.x() - truth.x();
        worst_v = std::max(worst_v, d.head(nn).cwiseAbs().maxCoeff());
        worst_a = std::max(worst_a, d.tail(nn).cwiseAbs().maxCoeff());
    }
    SensorConfig pmu_only;
    pmu_only.pmu_buses = sensors.pmu_buses;
    const MeasurementModel pmu_model(net, pmu_only);
    bool raised = false;
    try {
        wls_static(pmu_model, synthesize(pmu_model, random_state(*net, rng), 0, 1), FilterConfig{});
    } catch (const RankDeficient&) {
        raised = true;
    }
    return {worst_v < 1e-6 && worst_a < 1e-6 && raised,
            fmt("max error %.2e p.u. / %.2e rad over 10 states, PMU-only snapshot %s", worst_v, worst_a,
                raised ? "rejected as unobservable" : "NOT rejected")};
}

Outcome holt_algebra() {
    std::mt19937_64 rng(104);
    std::uniform_real_distribution<double> u(0.0, 1.0), v(-1.0, 1.0);
    const int n = 8;
    auto vec = [&] {
        Eigen::VectorXd x(n);
        for (int i = 0; i < n; ++i) x[i] = v(rng);
        return x;
    };
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const SmoothingCoefficients c{u(rng), u(rng)};
        HoltMemory mem;
        mem.level = vec();
        mem.trend = 0.1 * vec();
        mem.level_prev = vec();
        mem.trend_prev = vec();
        const Eigen::VectorXd xh = vec(), xt = vec();
        const Eigen::VectorXd a = c.alpha * xh + (1 - c.alpha) * xt;
        const Eigen::VectorXd b = c.beta * (a - mem.level) + (1 - c.beta) * mem.trend;
        const Gaussian g = predict(xh, Eigen::MatrixXd::Identity(n, n), holt_fg(c, mem, xt),
                                   Eigen::MatrixXd::Zero(n, n));
        worst = std::max(worst, (g.mean - (a + b)).cwiseAbs().maxCoeff());
    }
    HoltMemory mem = HoltMemory::anchored(vec());
    const bool exact = holt_fg({0.6, 0.5}, mem, vec()).F() == 0.9 * Eigen::MatrixXd::Identity(n, n);
    return {worst < 1e-12 && exact,
            fmt("max deviation %.2e over 1000 draws, F(0.6, 0.5) %s 0.9 I", worst, exact ? "==" : "!=")};
}

Outcome schedule() {
    const Testbed bed = Testbed::build(load_scenario(testing::scenario_dir() / "ieee13_fixed.json"));
    const RunInputs in = simulate_run(bed, 105);
    bool ok = in.snapshots.size() == 1440;
    int refreshes = 0;
    for (const Snapshot& s : in.snapshots) {
        const bool expect = s.t % 10 == 0;
        ok = ok && s.slow_refreshed == expect;
        refreshes += s.slow_refreshed;
        if (!expect) ok = ok && s.slow_values == in.snapshots[static_cast<std::size_t>(s.t - 1)].slow_values;
        else if (s.t > 0) ok = ok && s.slow_values != in.snapshots[static_cast<std::size_t>(s.t - 1)].slow_values;
    }
    return {ok, fmt("%zu steps, %d refreshes, slow channels held bit-identical in between", in.snapshots.size(),
                    refreshes)};
}

Outcome gradient_check() {
    using namespace agent;
    double worst = 0.0;
    for (Head head : {Head::Linear, Head::Dueling}) {
        std::mt19937_64 rng(106);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        std::uniform_int_distribution<int> pick(0, 120);
        const int out = head == Head::Dueling ? 122 : 121;
        Mlp q({4, 8, out}, 31, head);
        const Mlp target({4, 8, out}, 32, head);
        std::vector<Transition> batch;
        for (int i = 0; i < 8; ++i) {
            Transition t;
            for (int d = 0; d < 4; ++d) {
                t.state.push_back(u(rng));
                t.next_state.push_back(u(rng));
            }
            t.action = pick(rng);
            t.reward = u(rng);
            t.terminal = i % 4 == 0;
            batch.push_back(std::move(t));
        }
        std::vector<const Transition*> ptrs;
        for (const Transition& t : batch) ptrs.push_back(&t);
        std::vector<double> grad(q.parameter_count()), scratch(q.parameter_count());
        loss_and_gradient(q, target, ptrs, 0.95, grad);
        auto params = q.parameters();
        const double h = 1e-6;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double keep = params[i];
            params[i] = keep + h;
            const double lp = loss_and_gradient(q, target, ptrs, 0.95, scratch);
            params[i] = keep - h;
            const double lm = loss_and_gradient(q, target, ptrs, 0.95, scratch);
            params[i] = keep;
            const double fd = (lp - lm) / (2 * h);
            worst = std::max(worst, std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-7}));
        }
    }
    return {worst < 1e-4, fmt("max relative error %.2e on 4-8-121 (linear and dueling heads)", worst)};
}

Outcome degenerate() {
    const auto t0 = Clock::now();
    const Testbed bed = Testbed::build(load_scenario(testing::scenario_dir() / "constant.json"));
    const agent::TrainResult res = train_agent(bed, bed.scenario.seed);
    FaseEnvironment env(bed, derive_seed(bed.scenario.seed, "acceptance.eval"));
    const auto totals = agent::evaluate_greedy(env, res.agent, 100);
    double mean = 0.0;
    for (double r : totals) mean += r;
    mean /= static_cast<double>(totals.size());
    const double secs = seconds_since(t0);
    return {mean > -1e-6 && secs < 300.0 && bed.scenario.training.episodes <= 2000,
            fmt("greedy mean episode reward %.3e after %d episodes, %.1f s", mean, bed.scenario.training.episodes,
                secs)};
}

struct Table2 {
    std::vector<MonteCarloResult> results;
    std::vector<ComparisonRow> rows;
    fs::path checkpoint;
    double seconds = 0.0;
};

const Table2& table2() {
    static const Table2 t = [] {
        Table2 t;
        const auto t0 = Clock::now();
        const Testbed bed = Testbed::build(load_scenario(testing::scenario_dir() / "ieee13.json"));
        const agent::TrainResult res = train_agent(bed, bed.scenario.seed);
        t.checkpoint = fs::temp_directory_path() / "gridfase_acceptance" / "ieee13.agent";
        fs::create_directories(t.checkpoint.parent_path());
        agent::save_agent(res.agent, t.checkpoint);
        const std::vector<Method> methods{Method::adaptive("adaptive", res.agent),
                                          Method::fixed_coefficients("fixed", bed.scenario.baseline)};
        t.results = monte_carlo(bed, methods, std::max(20, bed.scenario.runs), bed.scenario.seed);
        t.rows = comparison(t.results);
        t.seconds = seconds_since(t0);
        return t;
    }();
    return t;
}

Outcome directional() {
    const Table2& t = table2();
    const ComparisonRow& a = t.rows[0];
    const ComparisonRow& f = t.rows[1];
    const bool order = a.vmag_mape_pct.mean < f.vmag_mape_pct.mean && a.vang_mae_rad.mean < f.vang_mae_rad.mean;
    const bool ratio = a.vmag_ratio <= 0.9;
    return {order && ratio && t.seconds < 1800.0,
            fmt("%zu runs: voltage MAPE %.4f%% vs %.4f%% (ratio %.3f, need <= 0.9), angle MAE %.6f vs %.6f rad "
                "(ratio %.3f), ordering %s, %.0f s",
                t.results[0].runs.size(), a.vmag_mape_pct.mean, f.vmag_mape_pct.mean, a.vmag_ratio,
                a.vang_mae_rad.mean, f.vang_mae_rad.mean, a.vang_ratio, order ? "holds" : "fails", t.seconds)};
}

Outcome step_cost() {
    const Table2& t = table2();
    const fs::path out = t.checkpoint.parent_path() / "timing.csv";
    write_timing_csv(out, t.results);
    double worst = 0.0;
    for (const MonteCarloResult& r : t.results) worst = std::max(worst, r.fase_mean_us.mean);
    return {worst * 1e-6 < 0.1 && fs::file_size(out) > 0,
            fmt("mean FASE step %.3f ms (slowest method), reported in %s", worst * 1e-3, out.filename().c_str())};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome determinism() {
    const Table2& t = table2();
    const fs::path root = t.checkpoint.parent_path();
    const std::string cli = GRIDFASE_CLI;
    const std::string scenario = (testing::scenario_dir() / "ieee13.json").string();
    std::string detail;
    bool ok = true;
    for (const char* cmd : {"eval", "compare"}) {
        std::vector<fs::path> dirs{root / (std::string(cmd) + "_a"), root / (std::string(cmd) + "_b")};
        for (const fs::path& d : dirs) {
            fs::remove_all(d);
            const std::string line = cli + " " + cmd + " \"" + scenario + "\" --seed 77 --runs 3 --quiet --checkpoint \"" +
                                     t.checkpoint.string() + "\" --out \"" + d.string() + "\"";
            if (std::system(line.c_str()) != 0) {
                ok = false;
                detail += std::string(cmd) + " exited nonzero; ";
            }
        }
        int files = 0;
        for (const char* csv : {"trace.csv", "metrics.csv", "compare.csv"}) {
            if (!fs::exists(dirs[0] / csv)) continue;
            ++files;
            if (slurp(dirs[0] / csv) != slurp(dirs[1] / csv)) {
                ok = false;
                detail += std::string(cmd) + "/" + csv + " differs; ";
            }
        }
        if (files < 2) ok = false;
        detail += fmt("%s: %d CSVs compared; ", cmd, files);
    }
    return {ok, detail + "seed 77"};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"jacobian vs finite differences", jacobian},
        {"linear Kalman oracle", linear_kalman},
        {"WLS recovery and unobservability", wls_recovery},
        {"Holt algebra", holt_algebra},
        {"multi-rate schedule", schedule},
        {"DQN gradient check", gradient_check},
        {"degenerate-environment convergence", degenerate},
        {"adaptive vs fixed accuracy on the 13-bus feeder", directional},
        {"per-step cost", step_cost},
        {"CSV determinism", determinism},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(id)) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}

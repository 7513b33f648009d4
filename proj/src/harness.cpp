#include "gridfase/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <thread>

#include "gridfase/csv.hpp"
#include "gridfase/environment.hpp"
#include "gridfase/errors.hpp"

namespace gridfase {

namespace {

// Re-raises the active exception with a context prefix, keeping the error category.
[[noreturn]] void rethrow_with_context(const std::string& ctx) {
    try {
        throw;
    } catch (const NonConvergence& e) {
        throw NonConvergence(ctx + e.what(), e.worst_mismatch(), e.iterations());
    } catch (const RankDeficient& e) {
        throw RankDeficient(ctx + e.what());
    } catch (const SingularInnovation& e) {
        throw SingularInnovation(ctx + e.what());
    } catch (const DimensionMismatch& e) {
        throw DimensionMismatch(ctx + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(ctx + e.what());
    } catch (const std::exception& e) {
        throw Error(ctx + e.what());
    }
}

Aggregate aggregate(const std::vector<double>& v) {
    Aggregate a;
    if (v.empty()) return a;
    for (double x : v) a.mean += x;
    a.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - a.mean) * (x - a.mean);
        a.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return a;
}

std::string mode_name(StepMode m) { return m == StepMode::Wls ? "wls" : "fase"; }

}  // namespace

std::uint64_t run_seed(std::uint64_t base_seed, int run) {
    return derive_seed(base_seed, "run", static_cast<std::uint64_t>(run));
}

int worker_count() {
    if (const char* env = std::getenv("GRIDFASE_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

RunInputs simulate_run(const Testbed& bed, std::uint64_t seed) {
    const Scenario& sc = bed.scenario;
    RunInputs in;
    in.seed = seed;
    ProfileOptions po;
    po.dt_seconds = sc.timing.dt_seconds;
    po.steps = sc.timing.horizon_steps;
    po.start_hour = sc.timing.start_hour;
    po.fluctuation = sc.profile.fluctuation;
    in.profile = generate_profiles(sc.profile.curves, *bed.network, po, seed);
    in.truth = true_trajectory(*bed.network, in.profile);
    in.snapshots = stream(*bed.model, in.truth, sc.timing.slow_ratio, seed);
    return in;
}

RunTrace run_scenario(const Testbed& bed, const RunInputs& inputs, const Method& method) {
    using clock = std::chrono::steady_clock;
    const int N = bed.scenario.timing.slow_ratio;
    if (method.agent) {
        if (method.agent->state_dim != bed.model->state_dim() || method.agent->pmu_count != bed.model->fast_count()) {
            throw DimensionMismatch("agent was trained for state dimension " + std::to_string(method.agent->state_dim) +
                                    " with " + std::to_string(method.agent->pmu_count) +
                                    " PMU channels; scenario has " + std::to_string(bed.model->state_dim()) + " and " +
                                    std::to_string(bed.model->fast_count()));
        }
    }

    FaseEstimator est(bed.model, bed.scenario.estimator);
    RunTrace trace;
    trace.rows.reserve(inputs.snapshots.size());
    for (std::size_t k = 0; k < inputs.snapshots.size(); ++k) {
        const Snapshot& snap = inputs.snapshots[k];
        TraceRow row;
        row.t = snap.t;
        try {
            const auto start = clock::now();
            if (snap.t % N == 0) {
                est.anchor(snap);
                row.mode = StepMode::Wls;
                row.coefficients = {};
            } else {
                const FilterState& prev = est.state();
                row.coefficients = method.agent
                                       ? method.agent->choose(agent::raw_observation(prev.x_hat, prev.x_tilde,
                                                                                     snap.fast_values))
                                       : method.fixed;
                est.step(snap, row.coefficients);
                row.mode = StepMode::Fase;
            }
            row.micros = std::chrono::duration<double, std::micro>(clock::now() - start).count();
        } catch (...) {
            rethrow_with_context("step " + std::to_string(snap.t) + ": ");
        }
        row.truth = inputs.truth[k].x();
        row.predicted = est.state().x_tilde;
        row.estimated = est.state().x_hat;
        trace.rows.push_back(std::move(row));
    }
    return trace;
}

MetricsReport metrics(const RunTrace& trace) {
    if (trace.rows.empty()) throw std::invalid_argument("metrics of an empty trace");
    const Eigen::Index nn = trace.rows.front().truth.size() / 2;
    MetricsReport m;
    m.vmag_mape_pct.assign(static_cast<std::size_t>(nn), 0.0);
    m.vang_mae_rad.assign(static_cast<std::size_t>(nn), 0.0);
    double fase_us = 0.0, wls_us = 0.0;
    for (const TraceRow& r : trace.rows) {
        for (Eigen::Index i = 0; i < nn; ++i) {
            m.vmag_mape_pct[static_cast<std::size_t>(i)] += std::abs(r.estimated[i] - r.truth[i]) / std::abs(r.truth[i]);
            m.vang_mae_rad[static_cast<std::size_t>(i)] += std::abs(wrap_angle(r.estimated[nn + i] - r.truth[nn + i]));
        }
        if (r.mode == StepMode::Fase) {
            ++m.fase_steps;
            fase_us += r.micros;
            m.fase_max_us = std::max(m.fase_max_us, r.micros);
        } else {
            ++m.wls_steps;
            wls_us += r.micros;
        }
    }
    const double steps = static_cast<double>(trace.rows.size());
    for (std::size_t i = 0; i < m.vmag_mape_pct.size(); ++i) {
        m.vmag_mape_pct[i] *= 100.0 / steps;
        m.vang_mae_rad[i] /= steps;
        m.mean_vmag_mape_pct += m.vmag_mape_pct[i];
        m.mean_vang_mae_rad += m.vang_mae_rad[i];
    }
    m.mean_vmag_mape_pct /= static_cast<double>(nn);
    m.mean_vang_mae_rad /= static_cast<double>(nn);
    if (m.fase_steps) m.fase_mean_us = fase_us / m.fase_steps;
    if (m.wls_steps) m.wls_mean_us = wls_us / m.wls_steps;
    return m;
}

std::vector<MonteCarloResult> monte_carlo(const Testbed& bed, const std::vector<Method>& methods, int runs,
                                          std::uint64_t base_seed, RunTrace* first_trace) {
    if (runs < 1) throw std::invalid_argument("runs must be at least 1");
    if (methods.empty()) throw std::invalid_argument("no methods to evaluate");

    std::vector<std::vector<MetricsReport>> reports(methods.size(), std::vector<MetricsReport>(static_cast<std::size_t>(runs)));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(runs));
    std::atomic<int> next{0};

    auto work = [&]() {
        for (int k = next++; k < runs; k = next++) {
            try {
                const RunInputs in = simulate_run(bed, run_seed(base_seed, k));
                for (std::size_t m = 0; m < methods.size(); ++m) {
                    RunTrace trace = run_scenario(bed, in, methods[m]);
                    reports[m][static_cast<std::size_t>(k)] = metrics(trace);
                    if (k == 0 && m == 0 && first_trace) *first_trace = std::move(trace);
                }
            } catch (...) {
                errors[static_cast<std::size_t>(k)] = std::current_exception();
            }
        }
    };

    const int workers = std::min(worker_count(), runs);
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (std::thread& t : pool) t.join();

    for (int k = 0; k < runs; ++k) {
        if (errors[static_cast<std::size_t>(k)]) {
            try {
                std::rethrow_exception(errors[static_cast<std::size_t>(k)]);
            } catch (...) {
                rethrow_with_context("run " + std::to_string(k) + ": ");
            }
        }
    }

    std::vector<MonteCarloResult> out;
    for (std::size_t m = 0; m < methods.size(); ++m) {
        MonteCarloResult r;
        r.label = methods[m].label;
        r.runs = std::move(reports[m]);
        std::vector<double> v, a, us;
        r.pooled = r.runs.front();
        for (std::size_t k = 1; k < r.runs.size(); ++k) {
            const MetricsReport& x = r.runs[k];
            for (std::size_t i = 0; i < x.vmag_mape_pct.size(); ++i) {
                r.pooled.vmag_mape_pct[i] += x.vmag_mape_pct[i];
                r.pooled.vang_mae_rad[i] += x.vang_mae_rad[i];
            }
            r.pooled.wls_steps += x.wls_steps;
            r.pooled.fase_steps += x.fase_steps;
            r.pooled.fase_max_us = std::max(r.pooled.fase_max_us, x.fase_max_us);
        }
        for (const MetricsReport& x : r.runs) {
            v.push_back(x.mean_vmag_mape_pct);
            a.push_back(x.mean_vang_mae_rad);
            us.push_back(x.fase_mean_us);
        }
        const double n = static_cast<double>(r.runs.size());
        for (std::size_t i = 0; i < r.pooled.vmag_mape_pct.size(); ++i) {
            r.pooled.vmag_mape_pct[i] /= n;
            r.pooled.vang_mae_rad[i] /= n;
        }
        r.vmag_mape_pct = aggregate(v);
        r.vang_mae_rad = aggregate(a);
        r.fase_mean_us = aggregate(us);
        r.pooled.mean_vmag_mape_pct = r.vmag_mape_pct.mean;
        r.pooled.mean_vang_mae_rad = r.vang_mae_rad.mean;
        r.pooled.fase_mean_us = r.fase_mean_us.mean;
        double wls = 0.0;
        for (const MetricsReport& x : r.runs) wls += x.wls_mean_us;
        r.pooled.wls_mean_us = wls / n;
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<ComparisonRow> comparison(const std::vector<MonteCarloResult>& results) {
    std::vector<ComparisonRow> rows;
    if (results.empty()) return rows;
    const MonteCarloResult& ref = results.back();
    auto ratio = [](double a, double b) { return b > 0.0 ? a / b : (a == b ? 1.0 : INFINITY); };
    for (const MonteCarloResult& r : results) {
        rows.push_back({r.label, r.vmag_mape_pct, r.vang_mae_rad, ratio(r.vmag_mape_pct.mean, ref.vmag_mape_pct.mean),
                        ratio(r.vang_mae_rad.mean, ref.vang_mae_rad.mean)});
    }
    return rows;
}

std::string format_comparison(const std::vector<ComparisonRow>& rows, int runs) {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof line, "Comparison of estimation accuracy (%d Monte Carlo run%s)\n", runs,
                  runs == 1 ? "" : "s");
    out += line;
    std::snprintf(line, sizeof line, "%-22s %-22s %-24s %8s %8s\n", "method", "voltage MAPE [%]", "angle MAE [rad]",
                  "V ratio", "A ratio");
    out += line;
    for (const ComparisonRow& r : rows) {
        char v[64], a[64];
        std::snprintf(v, sizeof v, "%.4f +/- %.4f", r.vmag_mape_pct.mean, r.vmag_mape_pct.stddev);
        std::snprintf(a, sizeof a, "%.6f +/- %.6f", r.vang_mae_rad.mean, r.vang_mae_rad.stddev);
        std::snprintf(line, sizeof line, "%-22s %-22s %-24s %8.3f %8.3f\n", r.label.c_str(), v, a, r.vmag_ratio,
                      r.vang_ratio);
        out += line;
    }
    return out;
}

agent::TrainResult train_agent(const Testbed& bed, std::uint64_t seed,
                               const std::function<void(const agent::EpisodeLog&)>& progress) {
    FaseEnvironment env(bed, derive_seed(seed, "train.env"), true);
    return agent::train_offline(env, bed.scenario.training, derive_seed(seed, "train.agent"), progress);
}

void write_trace_csv(const std::filesystem::path& path, const Network& net, const RunTrace& trace) {
    csv::Writer w(path, "t,mode,alpha,beta,bus,phase,vmag_true,vang_true,vmag_pred,vang_pred,vmag_est,vang_est");
    const int nn = net.node_count();
    for (const TraceRow& r : trace.rows) {
        const std::string mode = mode_name(r.mode);
        for (int i = 0; i < nn; ++i) {
            const NodeRef& node = net.nodes()[static_cast<std::size_t>(i)];
            w.row(r.t, mode, r.coefficients.alpha, r.coefficients.beta,
                  net.feeder().buses[static_cast<std::size_t>(node.bus)].id, phase_letter(node.phase), r.truth[i],
                  r.truth[nn + i], r.predicted[i], r.predicted[nn + i], r.estimated[i], r.estimated[nn + i]);
        }
    }
}

void write_metrics_csv(const std::filesystem::path& path, const Network& net,
                       const std::vector<MonteCarloResult>& results) {
    csv::Writer w(path, "method,run,bus,phase,vmag_mape_pct,vang_mae_rad");
    for (const MonteCarloResult& r : results) {
        auto emit = [&](const std::string& run, const MetricsReport& m) {
            for (std::size_t i = 0; i < m.vmag_mape_pct.size(); ++i) {
                const NodeRef& node = net.nodes()[i];
                w.row(r.label, run, net.feeder().buses[static_cast<std::size_t>(node.bus)].id,
                      phase_letter(node.phase), m.vmag_mape_pct[i], m.vang_mae_rad[i]);
            }
            w.row(r.label, run, "all", "all", m.mean_vmag_mape_pct, m.mean_vang_mae_rad);
        };
        for (std::size_t k = 0; k < r.runs.size(); ++k) emit(std::to_string(k), r.runs[k]);
        emit("all", r.pooled);
    }
}

void write_timing_csv(const std::filesystem::path& path, const std::vector<MonteCarloResult>& results) {
    csv::Writer w(path, "method,run,fase_steps,fase_mean_us,fase_max_us,wls_steps,wls_mean_us");
    for (const MonteCarloResult& r : results) {
        for (std::size_t k = 0; k < r.runs.size(); ++k) {
            const MetricsReport& m = r.runs[k];
            w.row(r.label, k, m.fase_steps, m.fase_mean_us, m.fase_max_us, m.wls_steps, m.wls_mean_us);
        }
        const MetricsReport& p = r.pooled;
        w.row(r.label, "all", p.fase_steps, p.fase_mean_us, p.fase_max_us, p.wls_steps, p.wls_mean_us);
    }
}

void write_compare_csv(const std::filesystem::path& path, const std::vector<ComparisonRow>& rows, int runs) {
    csv::Writer w(path, "method,runs,vmag_mape_pct_mean,vmag_mape_pct_std,vang_mae_rad_mean,vang_mae_rad_std,"
                        "vmag_ratio,vang_ratio");
    for (const ComparisonRow& r : rows) {
        w.row(r.label, runs, r.vmag_mape_pct.mean, r.vmag_mape_pct.stddev, r.vang_mae_rad.mean, r.vang_mae_rad.stddev,
              r.vmag_ratio, r.vang_ratio);
    }
}

}  // namespace gridfase

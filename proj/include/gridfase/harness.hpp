#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gridfase/dqn.hpp"
#include "gridfase/scenario.hpp"

namespace gridfase {

/// How the intermediate steps choose their smoothing coefficients.
struct Method {
    std::string label;
    SmoothingCoefficients fixed;
    const agent::Agent* agent = nullptr;  ///< adaptive when set

    static Method fixed_coefficients(std::string label, SmoothingCoefficients c) { return {std::move(label), c, nullptr}; }
    static Method adaptive(std::string label, const agent::Agent& a) { return {std::move(label), {}, &a}; }
};

/// Ground truth and the multi-rate measurement stream of one Monte Carlo run.
struct RunInputs {
    std::uint64_t seed = 0;
    InjectionProfile profile;
    std::vector<SystemState> truth;
    std::vector<Snapshot> snapshots;
};

RunInputs simulate_run(const Testbed& bed, std::uint64_t run_seed);

enum class StepMode { Wls, Fase };

struct TraceRow {
    int t = 0;
    StepMode mode = StepMode::Wls;
    SmoothingCoefficients coefficients;
    double micros = 0.0;
    Eigen::VectorXd truth;
    Eigen::VectorXd predicted;
    Eigen::VectorXd estimated;
};

struct RunTrace {
    std::vector<TraceRow> rows;
};

/// Runs the estimator over the inputs: WLS at refresh steps, predict/update in between.
RunTrace run_scenario(const Testbed& bed, const RunInputs& inputs, const Method& method);

struct MetricsReport {
    std::vector<double> vmag_mape_pct;  ///< per node
    std::vector<double> vang_mae_rad;   ///< per node
    double mean_vmag_mape_pct = 0.0;
    double mean_vang_mae_rad = 0.0;
    int wls_steps = 0;
    int fase_steps = 0;
    double fase_mean_us = 0.0;
    double fase_max_us = 0.0;
    double wls_mean_us = 0.0;
};

/// Voltage MAPE in percent and wrapped angle MAE in radians, per node and averaged over nodes.
MetricsReport metrics(const RunTrace& trace);

struct Aggregate {
    double mean = 0.0;
    double stddev = 0.0;  ///< sample standard deviation, 0 for a single run
};

struct MonteCarloResult {
    std::string label;
    std::vector<MetricsReport> runs;
    MetricsReport pooled;  ///< per-node metrics averaged over runs
    Aggregate vmag_mape_pct;
    Aggregate vang_mae_rad;
    Aggregate fase_mean_us;
};

/// Paired Monte Carlo battery: run k feeds the same truth and noise to every method.
/// Runs execute in parallel (GRIDFASE_THREADS caps the worker count); results are ordered by run index.
std::vector<MonteCarloResult> monte_carlo(const Testbed& bed, const std::vector<Method>& methods, int runs,
                                          std::uint64_t base_seed, RunTrace* first_trace = nullptr);

std::uint64_t run_seed(std::uint64_t base_seed, int run);
int worker_count();

struct ComparisonRow {
    std::string label;
    Aggregate vmag_mape_pct;
    Aggregate vang_mae_rad;
    double vmag_ratio = 1.0;  ///< relative to the reference (last) method
    double vang_ratio = 1.0;
};

std::vector<ComparisonRow> comparison(const std::vector<MonteCarloResult>& results);
std::string format_comparison(const std::vector<ComparisonRow>& rows, int runs);

agent::TrainResult train_agent(const Testbed& bed, std::uint64_t seed,
                               const std::function<void(const agent::EpisodeLog&)>& progress = {});

void write_trace_csv(const std::filesystem::path& path, const Network& net, const RunTrace& trace);
void write_metrics_csv(const std::filesystem::path& path, const Network& net,
                       const std::vector<MonteCarloResult>& results);
void write_timing_csv(const std::filesystem::path& path, const std::vector<MonteCarloResult>& results);
void write_compare_csv(const std::filesystem::path& path, const std::vector<ComparisonRow>& rows, int runs);

}  // namespace gridfase

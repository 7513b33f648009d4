// gridfase: simulate, train, eval, compare, validate.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gridfase/errors.hpp"
#include "gridfase/harness.hpp"

namespace fs = std::filesystem;
using namespace gridfase;

namespace {

struct Common {
    fs::path out = ".";
    std::optional<std::uint64_t> seed;
    std::optional<int> runs;
    std::optional<int> episodes;
    fs::path checkpoint;
    bool quiet = false;
};

void note(const Common& c, const std::string& msg) {
    if (!c.quiet) std::cout << msg << '\n';
}

Testbed prepare(const fs::path& scenario_path, const Common& c) {
    Scenario sc = load_scenario(scenario_path);
    if (c.seed) sc.seed = *c.seed;
    if (c.runs) sc.runs = *c.runs;
    if (c.episodes) sc.training.episodes = *c.episodes;
    if (!c.checkpoint.empty()) {
        sc.method.kind = MethodKind::Adaptive;
        sc.method.checkpoint = c.checkpoint;
    }
    return Testbed::build(std::move(sc));
}

std::string coeff_label(SmoothingCoefficients c) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "fixed(%.2g,%.2g)", c.alpha, c.beta);
    return buf;
}

agent::Agent train_and_save(const Testbed& bed, const Common& c, const fs::path& ckpt) {
    const int episodes = bed.scenario.training.episodes;
    auto progress = [&](const agent::EpisodeLog& e) {
        if (!c.quiet && (e.episode + 1) % 100 == 0) {
            std::cout << "episode " << e.episode + 1 << "/" << episodes << "  reward " << e.total_reward
                      << "  epsilon " << e.epsilon << "  loss " << e.loss_mean << '\n';
        }
    };
    agent::TrainResult res = train_agent(bed, bed.scenario.seed, progress);
    fs::create_directories(c.out);
    agent::write_training_log_csv(c.out / "training_log.csv", res.log);
    if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
    agent::save_agent(res.agent, ckpt);
    note(c, "checkpoint written to " + ckpt.string());
    return std::move(res.agent);
}

int cmd_validate(const fs::path& path, const Common& c) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path.string() + ": cannot open file");
    std::ostringstream buf;
    buf << in.rdbuf();
    const nlohmann::json doc = nlohmann::json::parse(buf.str(), nullptr, false, true);
    if (doc.is_object() && doc.contains("feeder") && !doc.contains("buses")) {
        const Testbed bed = prepare(path, c);
        std::cout << "scenario " << bed.scenario.name << ": " << bed.network->feeder().buses.size() << " buses, "
                  << bed.network->feeder().branches.size() << " branches, state dimension "
                  << bed.model->state_dim() << ", " << bed.model->fast_count() << " fast and "
                  << bed.model->slow_count() << " slow channels\n";
        return 0;
    }
    const FeederModel m = load_feeder(path);
    std::cout << "feeder " << m.name << ": " << m.buses.size() << " buses, " << m.branches.size() << " branches, "
              << m.loads.size() << " loads, " << m.ders.size() << " DERs\n";
    return 0;
}

int cmd_simulate(const fs::path& path, const Common& c) {
    const Testbed bed = prepare(path, c);
    const RunInputs in = simulate_run(bed, run_seed(bed.scenario.seed, 0));
    fs::create_directories(c.out);
    write_profile_csv(c.out / "profile.csv", *bed.network, in.profile);
    write_trajectory_csv(c.out / "truth.csv", *bed.network, in.truth);
    write_snapshots_csv(c.out / "measurements.csv", *bed.model, in.snapshots);
    note(c, "simulated " + std::to_string(in.truth.size()) + " steps into " + c.out.string());
    return 0;
}

int cmd_train(const fs::path& path, const Common& c) {
    const Testbed bed = prepare(path, c);
    const fs::path ckpt = c.checkpoint.empty() ? c.out / "agent.ckpt" : c.checkpoint;
    train_and_save(bed, c, ckpt);
    return 0;
}

int cmd_eval(const fs::path& path, const Common& c) {
    const Testbed bed = prepare(path, c);
    std::optional<agent::Agent> ag;
    Method method = Method::fixed_coefficients(coeff_label(bed.scenario.method.coefficients),
                                               bed.scenario.method.coefficients);
    if (bed.scenario.method.kind == MethodKind::Adaptive) {
        ag = agent::load_agent(bed.scenario.method.checkpoint, bed.model->state_dim(), bed.model->fast_count());
        method = Method::adaptive("adaptive", *ag);
    }
    RunTrace trace;
    const auto results = monte_carlo(bed, {method}, bed.scenario.runs, bed.scenario.seed, &trace);
    fs::create_directories(c.out);
    write_trace_csv(c.out / "trace.csv", *bed.network, trace);
    write_metrics_csv(c.out / "metrics.csv", *bed.network, results);
    write_timing_csv(c.out / "timing.csv", results);
    if (!c.quiet) {
        const MonteCarloResult& r = results.front();
        std::printf("%s over %d runs: voltage MAPE %.4f %%, angle MAE %.6f rad, mean FASE step %.1f us\n",
                    r.label.c_str(), bed.scenario.runs, r.vmag_mape_pct.mean, r.vang_mae_rad.mean,
                    r.fase_mean_us.mean);
    }
    return 0;
}

int cmd_compare(const fs::path& path, const Common& c) {
    const Testbed bed = prepare(path, c);
    const fs::path ckpt = bed.scenario.method.checkpoint.empty() ? c.out / "agent.ckpt" : bed.scenario.method.checkpoint;
    agent::Agent ag;
    if (fs::exists(ckpt)) {
        ag = agent::load_agent(ckpt, bed.model->state_dim(), bed.model->fast_count());
    } else {
        note(c, "no checkpoint at " + ckpt.string() + "; training one");
        ag = train_and_save(bed, c, ckpt);
    }
    const std::vector<Method> methods{Method::adaptive("adaptive", ag),
                                      Method::fixed_coefficients(coeff_label(bed.scenario.baseline),
                                                                 bed.scenario.baseline)};
    const auto results = monte_carlo(bed, methods, bed.scenario.runs, bed.scenario.seed);
    const auto rows = comparison(results);
    fs::create_directories(c.out);
    write_compare_csv(c.out / "compare.csv", rows, bed.scenario.runs);
    write_metrics_csv(c.out / "metrics.csv", *bed.network, results);
    write_timing_csv(c.out / "timing.csv", results);
    if (!c.quiet) std::cout << format_comparison(rows, bed.scenario.runs);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Forecasting-aided state estimation with adaptive Holt smoothing"};
    app.require_subcommand(1, 1);
    Common c;
    fs::path input;

    auto add_common = [&](CLI::App* sub, const char* what) {
        sub->add_option("input", input, what)->required();
        sub->add_option("--out", c.out, "Output directory");
        sub->add_option("--seed", c.seed, "Override the scenario seed");
        sub->add_flag("--quiet", c.quiet, "Suppress console output");
    };

    auto* validate = app.add_subcommand("validate", "Check a feeder or scenario file");
    add_common(validate, "Feeder or scenario file");
    auto* simulate = app.add_subcommand("simulate", "Write ground truth, profiles and measurements for run 0");
    add_common(simulate, "Scenario file");
    auto* train = app.add_subcommand("train", "Train the coefficient-selection agent");
    add_common(train, "Scenario file");
    train->add_option("--episodes", c.episodes, "Override the episode count");
    train->add_option("--checkpoint", c.checkpoint, "Checkpoint path (default OUT/agent.ckpt)");
    auto* eval = app.add_subcommand("eval", "Monte Carlo evaluation of the scenario's method");
    add_common(eval, "Scenario file");
    eval->add_option("--runs", c.runs, "Override the Monte Carlo run count");
    eval->add_option("--checkpoint", c.checkpoint, "Evaluate this agent checkpoint");
    auto* compare = app.add_subcommand("compare", "Adaptive agent against the fixed-coefficient baseline");
    add_common(compare, "Scenario file");
    compare->add_option("--runs", c.runs, "Override the Monte Carlo run count");
    compare->add_option("--episodes", c.episodes, "Episodes if an agent has to be trained");
    compare->add_option("--checkpoint", c.checkpoint, "Agent checkpoint (trained and saved here if missing)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*validate) return cmd_validate(input, c);
        if (*simulate) return cmd_simulate(input, c);
        if (*train) return cmd_train(input, c);
        if (*eval) return cmd_eval(input, c);
        if (*compare) return cmd_compare(input, c);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

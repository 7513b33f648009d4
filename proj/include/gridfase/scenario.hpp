#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "gridfase/dqn.hpp"
#include "gridfase/estimator.hpp"
#include "gridfase/network.hpp"
#include "gridfase/powerflow.hpp"
#include "gridfase/telemetry.hpp"

namespace gridfase {

struct TimingConfig {
    double dt_seconds = 60.0;
    int slow_ratio = 10;  ///< N: slow channels refresh every N fast steps
    int horizon_steps = 1440;
    double start_hour = 0.0;
};

struct ProfileConfig {
    double fluctuation = 0.1;
    BaseCurves curves = BaseCurves::standard();
};

enum class MethodKind { Fixed, Adaptive };

struct MethodConfig {
    MethodKind kind = MethodKind::Fixed;
    SmoothingCoefficients coefficients;  ///< fixed method
    std::filesystem::path checkpoint;    ///< adaptive method
};

struct Scenario {
    std::string name;
    std::filesystem::path source;  ///< scenario file, empty for in-memory scenarios
    std::filesystem::path feeder_path;
    SensorConfig sensors;
    bool pseudo_all = false;  ///< pseudo-measurements at every non-slack bus
    TimingConfig timing;
    ProfileConfig profile;
    FilterConfig estimator;
    MethodConfig method;
    SmoothingCoefficients baseline{0.6, 0.5};
    agent::TrainConfig training;
    std::uint64_t seed = 1;
    int runs = 1;
};

/// JSON scenario (comments allowed). Relative paths resolve against `base_dir`.
Scenario parse_scenario(std::string_view text, const std::filesystem::path& base_dir,
                        std::string_view source = "<memory>");
Scenario load_scenario(const std::filesystem::path& path);
/// Throws ValidationError for out-of-range settings.
void validate_scenario(const Scenario& sc);

/// A scenario with its feeder, network and measurement model built once and shared read-only.
struct Testbed {
    Scenario scenario;
    std::shared_ptr<const Network> network;
    std::shared_ptr<const MeasurementModel> model;

    static Testbed build(Scenario sc);
    static Testbed build(Scenario sc, FeederModel feeder);
};

}  // namespace gridfase

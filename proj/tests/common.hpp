#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "gridfase/feeder.hpp"
#include "gridfase/network.hpp"
#include "gridfase/telemetry.hpp"

namespace testing {

inline std::filesystem::path data_dir() { return GRIDFASE_DATA_DIR; }
inline std::filesystem::path scenario_dir() { return GRIDFASE_SCENARIO_DIR; }

inline std::shared_ptr<const gridfase::Network> ieee13() {
    static const auto net = std::make_shared<const gridfase::Network>(gridfase::load_feeder(data_dir() / "ieee13.feeder"));
    return net;
}

inline gridfase::SensorConfig ieee13_sensors() {
    gridfase::SensorConfig s;
    s.pmu_buses = {"650", "671", "675"};
    s.scada_branches = {"650-632", "632-671", "632-633", "692-675"};
    for (const auto& b : ieee13()->feeder().buses) {
        if (b.id != "650") s.pseudo_buses.push_back(b.id);
    }
    return s;
}

inline std::shared_ptr<const gridfase::MeasurementModel> ieee13_model() {
    static const auto m = std::make_shared<const gridfase::MeasurementModel>(ieee13(), ieee13_sensors());
    return m;
}

/// Minimal feeder text; `extra_branches` and `extra_buses` are spliced into the arrays.
inline std::string chain_feeder(const std::string& extra_buses = "", const std::string& extra_branches = "") {
    return R"({
  "schema_version": 1,
  "meta": {"name": "chain", "base_kva": 3000, "base_kv": 4.16, "slack_bus": "s"},
  "line_configs": {"l": {"r": [0.3, 0.1, 0.1, 0.3, 0.1, 0.3], "x": [1.0, 0.4, 0.4, 1.0, 0.4, 1.0]}},
  "buses": [
    {"id": "s", "phases": "ABC"},
    {"id": "a", "phases": "ABC"},
    {"id": "b", "phases": "ABC"},
    {"id": "c", "phases": "ABC"})" +
           extra_buses + R"(
  ],
  "branches": [
    {"from": "b", "to": "c", "phases": "ABC", "config": "l", "length_ft": 1000},
    {"from": "s", "to": "a", "phases": "ABC", "config": "l", "length_ft": 1000},
    {"from": "a", "to": "b", "phases": "ABC", "config": "l", "length_ft": 1000})" +
           extra_branches + R"(
  ],
  "loads": [{"bus": "c", "phase": "A", "p_kw": 100, "q_kvar": 40},
            {"bus": "b", "phase": "B", "p_kw": 80, "q_kvar": 30}]
})";
}

}  // namespace testing

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "gridfase/network.hpp"
#include "gridfase/powerflow.hpp"

namespace gridfase {

enum class ChannelKind : std::uint8_t { PmuVmag, PmuVang, ScadaPflow, ScadaQflow, PseudoPinj, PseudoQinj };
enum class RateClass : std::uint8_t { Fast, Slow };

std::string_view kind_name(ChannelKind kind);
constexpr RateClass rate_of(ChannelKind kind) {
    return (kind == ChannelKind::PmuVmag || kind == ChannelKind::PmuVang) ? RateClass::Fast : RateClass::Slow;
}

/// Maximum errors per sensor class. Noise is Gaussian with sigma = max / sigma_ratio.
struct NoiseSpec {
    double pmu_magnitude = 0.001;  ///< relative
    double pmu_angle_rad = 1e-3;   ///< absolute (0.1 crad)
    double scada = 0.02;           ///< relative
    double pseudo = 0.2;           ///< relative
    double sigma_ratio = 3.0;
    double sigma_floor = 1e-4;  ///< p.u.; lower bound on relative sigmas and on every variance
};

struct SensorConfig {
    std::vector<std::string> pmu_buses;
    std::vector<std::string> scada_branches;
    std::vector<std::string> pseudo_buses;
    NoiseSpec noise;
};

struct Channel {
    ChannelKind kind = ChannelKind::PmuVmag;
    int bus = -1;     ///< PMU and pseudo channels
    int branch = -1;  ///< SCADA channels (flow measured at the branch's `from` end)
    int phase = 0;
    int node = -1;  ///< measured node; for flows the sending-end node
};

/// Measurement function h(x) and its Jacobian for one feeder + sensor arrangement.
/// Channel order: fast block (PMU |V|, angle per bus-phase), then slow block
/// (SCADA P, Q flows per branch-phase, then pseudo P, Q injections per bus-phase).
class MeasurementModel {
public:
    MeasurementModel(std::shared_ptr<const Network> net, SensorConfig config);

    const Network& network() const { return *net_; }
    const std::shared_ptr<const Network>& network_ptr() const { return net_; }
    const SensorConfig& config() const { return config_; }

    const std::vector<Channel>& channels() const { return channels_; }
    int size() const { return static_cast<int>(channels_.size()); }
    int fast_count() const { return fast_count_; }
    int slow_count() const { return size() - fast_count_; }
    int state_dim() const { return net_->state_dim(); }

    Eigen::VectorXd h_full(const SystemState& state) const;
    Eigen::VectorXd h_fast(const SystemState& state) const;
    Eigen::VectorXd h_slow(const SystemState& state) const;

    /// Analytic d h / d x, size() x state_dim(). Columns follow SystemState's [|V|, theta] layout.
    Eigen::MatrixXd jacobian(const SystemState& state) const;

    bool is_angle(int channel) const { return channels_[static_cast<std::size_t>(channel)].kind == ChannelKind::PmuVang; }
    /// Gaussian sigma used for noise on a channel whose true value is `true_value`.
    double noise_sigma(int channel, double true_value) const;
    /// Variance recorded in R: max(noise sigma, floor)^2.
    double variance(int channel, double true_value) const;
    std::string location(int channel) const;

private:
    struct Term {
        int node;
        double g;
        double b;
    };
    struct PowerRow {
        int anchor;
        bool reactive;
        std::vector<Term> terms;
    };

    double eval_power(const PowerRow& row, const Eigen::VectorXd& x) const;
    void eval_power_gradient(const PowerRow& row, const Eigen::VectorXd& x, Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> out) const;
    void eval_range(const SystemState& state, int begin, int end, Eigen::Ref<Eigen::VectorXd> out) const;

    std::shared_ptr<const Network> net_;
    SensorConfig config_;
    std::vector<Channel> channels_;
    std::vector<PowerRow> power_rows_;  ///< parallel to channels_ for slow channels
    int fast_count_ = 0;
};

struct Measurement {
    ChannelKind kind;
    std::string location;
    int phase;
    double value;     ///< p.u. or rad
    double variance;  ///< p.u.^2 or rad^2
    RateClass rate;
    int sample_time;  ///< step index when physically measured
};

/// Measurement set delivered at step t. Fast values are always fresh; slow values were sampled at
/// `slow_sample_time` and carried forward until the next refresh.
struct Snapshot {
    int t = 0;
    int slow_sample_time = 0;
    bool slow_refreshed = true;
    Eigen::VectorXd fast_values;
    Eigen::VectorXd fast_variances;
    Eigen::VectorXd slow_values;
    Eigen::VectorXd slow_variances;

    int staleness() const { return t - slow_sample_time; }
    std::vector<Measurement> measurements(const MeasurementModel& model) const;
};

/// Fully refreshed snapshot of `truth` at step t: h(x_true) plus Gaussian noise.
Snapshot synthesize(const MeasurementModel& model, const SystemState& truth, int t, std::uint64_t seed);

/// Multi-rate schedule over a trajectory: fast channels every step, slow channels re-sampled at
/// t = 0 (mod N) and held otherwise. Step indices start at `t0`.
std::vector<Snapshot> stream(const MeasurementModel& model, const std::vector<SystemState>& trajectory, int N,
                             std::uint64_t seed, int t0 = 0);

void write_snapshots_csv(const std::filesystem::path& path, const MeasurementModel& model,
                         const std::vector<Snapshot>& snapshots);

}  // namespace gridfase

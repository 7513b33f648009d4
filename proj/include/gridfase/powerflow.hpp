#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "gridfase/network.hpp"

namespace gridfase {

/// Wraps an angle into (-pi, pi].
double wrap_angle(double rad);

/// Voltage magnitudes (p.u.) and angles (rad) for every node, stored as one vector
/// x = [|V_0| .. |V_{n-1}|, theta_0 .. theta_{n-1}] in the network's canonical node order.
class SystemState {
public:
    SystemState() = default;
    explicit SystemState(int nodes) : x_(Eigen::VectorXd::Zero(2 * nodes)) {}
    explicit SystemState(Eigen::VectorXd x) : x_(std::move(x)) {}

    /// Every node at the slack voltage of its phase.
    static SystemState flat(const Network& net);
    static SystemState from_phasors(const Eigen::VectorXcd& v);

    int node_count() const { return static_cast<int>(x_.size() / 2); }
    int dim() const { return static_cast<int>(x_.size()); }
    double vmag(int node) const { return x_[node]; }
    double vang(int node) const { return x_[node_count() + node]; }

    const Eigen::VectorXd& x() const { return x_; }
    Eigen::VectorXd& x() { return x_; }
    Eigen::VectorXcd phasors() const;

private:
    Eigen::VectorXd x_;
};

struct PowerflowOptions {
    double tolerance = 1e-8;  ///< max per-node complex power mismatch, p.u.
    int max_iterations = 100;
};

struct PowerflowStats {
    int iterations = 0;
    double max_mismatch = 0.0;
};

/// Backward/forward sweep over the topology order with constant-PQ injections.
/// `injection_kva` is the net complex injection per node (generation positive).
/// Throws NonConvergence when the iteration cap is reached.
SystemState solve_powerflow(const Network& net, const Eigen::VectorXcd& injection_kva,
                            const PowerflowOptions& options = {}, const SystemState* initial = nullptr,
                            PowerflowStats* stats = nullptr);

/// Complex power injected at each node (p.u.), S = V . conj(Ybus V).
Eigen::VectorXcd nodal_injection_pu(const Network& net, const SystemState& state);

/// Net nodal injections per timestep, kVA, generation positive.
struct InjectionProfile {
    double dt_seconds = 60.0;
    int steps = 0;
    int nodes = 0;
    std::vector<Complex> s_kva;  ///< steps x nodes, row-major

    Eigen::VectorXcd at(int t) const;
    void set(int t, const Eigen::VectorXcd& s);
};

/// Normalized 24 h load and PV shapes, periodic, linearly interpolated between samples.
struct BaseCurves {
    double step_hours = 1.0;
    std::vector<double> load;
    std::vector<double> pv;

    static BaseCurves standard();
    /// CSV with header `hour,load,pv` at uniform spacing covering one day.
    static BaseCurves from_csv(const std::filesystem::path& path);

    double load_at(double hour) const;
    double pv_at(double hour) const;
};

struct ProfileOptions {
    double dt_seconds = 60.0;
    int steps = 1440;
    double start_hour = 0.0;
    double fluctuation = 0.1;  ///< each injection scaled by U[1-f, 1+f], independently per step
};

InjectionProfile generate_profiles(const BaseCurves& curves, const Network& net, const ProfileOptions& options,
                                   std::uint64_t seed);

/// One converged state per timestep. NonConvergence messages carry the failing step index.
std::vector<SystemState> true_trajectory(const Network& net, const InjectionProfile& profile,
                                         const PowerflowOptions& options = {});

void write_profile_csv(const std::filesystem::path& path, const Network& net, const InjectionProfile& profile);
InjectionProfile read_profile_csv(const std::filesystem::path& path, const Network& net, double dt_seconds);
void write_trajectory_csv(const std::filesystem::path& path, const Network& net,
                          const std::vector<SystemState>& trajectory);

}  // namespace gridfase

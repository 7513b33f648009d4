#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

#include "gridfase/feeder.hpp"

namespace gridfase {

/// One bus-phase pair; the unit of the state vector.
struct NodeRef {
    int bus = 0;
    int phase = 0;
};

struct BranchAdmittance {
    int branch = 0;
    int from_bus = 0;
    int to_bus = 0;
    PhaseSet phases;
    Eigen::Matrix3cd z_pu = Eigen::Matrix3cd::Zero();
    Eigen::Matrix3cd y_pu = Eigen::Matrix3cd::Zero();  ///< inverse of z_pu over present phases
    std::array<int, 3> from_node{-1, -1, -1};
    std::array<int, 3> to_node{-1, -1, -1};
};

/// Per-unit view of a validated feeder: canonical node order, branch admittances and the bus admittance matrix.
/// Per-phase bases are used throughout: S_base = base_kva / 3, V_base = kV_LL / sqrt(3).
class Network {
public:
    explicit Network(FeederModel model);

    const FeederModel& feeder() const { return model_; }
    const TopologyOrder& topology() const { return topo_; }

    int node_count() const { return static_cast<int>(nodes_.size()); }
    int state_dim() const { return 2 * node_count(); }
    const std::vector<NodeRef>& nodes() const { return nodes_; }
    /// Node index of (bus, phase) or -1 when the phase is absent at that bus.
    int node(int bus, int phase) const { return node_of_[static_cast<std::size_t>(bus)][static_cast<std::size_t>(phase)]; }

    const std::vector<BranchAdmittance>& branches() const { return branches_; }
    const Eigen::MatrixXcd& ybus() const { return ybus_; }

    const std::vector<int>& slack_nodes() const { return slack_nodes_; }
    bool is_slack(int node) const { return nodes_[static_cast<std::size_t>(node)].bus == slack_bus_; }
    int slack_bus() const { return slack_bus_; }
    Complex slack_voltage(int phase) const;

    double phase_power_base_kva() const { return model_.base_kva / 3.0; }

    /// Nominal net complex injection per node in kVA (DER at rated output minus load).
    Eigen::VectorXcd nominal_injection_kva(double load_scale = 1.0, double der_scale = 1.0) const;

private:
    FeederModel model_;
    TopologyOrder topo_;
    std::vector<NodeRef> nodes_;
    std::vector<std::array<int, 3>> node_of_;
    std::vector<BranchAdmittance> branches_;
    Eigen::MatrixXcd ybus_;
    std::vector<int> slack_nodes_;
    int slack_bus_ = 0;
};

}  // namespace gridfase

#include "gridfase/network.hpp"

#include <cmath>

#include <Eigen/LU>

#include "gridfase/errors.hpp"

namespace gridfase {

Network::Network(FeederModel model) : model_(std::move(model)) {
    validate_feeder(model_);
    topo_ = topology_order(model_);
    slack_bus_ = model_.bus_index(model_.slack_bus);

    node_of_.assign(model_.buses.size(), {-1, -1, -1});
    for (int bus : topo_.order) {
        for (int p = 0; p < kPhaseCount; ++p) {
            if (!model_.buses[bus].phases.has(p)) continue;
            node_of_[bus][p] = static_cast<int>(nodes_.size());
            if (bus == slack_bus_) slack_nodes_.push_back(static_cast<int>(nodes_.size()));
            nodes_.push_back({bus, p});
        }
    }

    const int nn = node_count();
    ybus_ = Eigen::MatrixXcd::Zero(nn, nn);
    for (std::size_t k = 0; k < model_.branches.size(); ++k) {
        const Branch& br = model_.branches[k];
        BranchAdmittance ba;
        ba.branch = static_cast<int>(k);
        ba.from_bus = model_.bus_index(br.from);
        ba.to_bus = model_.bus_index(br.to);
        ba.phases = br.phases;

        const double kv = model_.buses[ba.from_bus].base_kv;
        const double z_base = kv * kv * 1000.0 / model_.base_kva;
        ba.z_pu = br.z_ohm / z_base;

        std::vector<int> present;
        for (int p = 0; p < kPhaseCount; ++p) {
            if (br.phases.has(p)) present.push_back(p);
            ba.from_node[p] = br.phases.has(p) ? node_of_[ba.from_bus][p] : -1;
            ba.to_node[p] = br.phases.has(p) ? node_of_[ba.to_bus][p] : -1;
        }
        const int np = static_cast<int>(present.size());
        Eigen::MatrixXcd zs(np, np);
        for (int i = 0; i < np; ++i) {
            for (int j = 0; j < np; ++j) zs(i, j) = ba.z_pu(present[i], present[j]);
        }
        Eigen::FullPivLU<Eigen::MatrixXcd> lu(zs);
        if (!lu.isInvertible()) throw ValidationError("branch '" + br.id + "' has a singular impedance matrix");
        const Eigen::MatrixXcd ys = lu.inverse();
        for (int i = 0; i < np; ++i) {
            for (int j = 0; j < np; ++j) ba.y_pu(present[i], present[j]) = ys(i, j);
        }

        for (int i : present) {
            for (int j : present) {
                const Complex y = ba.y_pu(i, j);
                ybus_(ba.from_node[i], ba.from_node[j]) += y;
                ybus_(ba.to_node[i], ba.to_node[j]) += y;
                ybus_(ba.from_node[i], ba.to_node[j]) -= y;
                ybus_(ba.to_node[i], ba.from_node[j]) -= y;
            }
        }
        branches_.push_back(ba);
    }
}

Complex Network::slack_voltage(int phase) const {
    return std::polar(model_.slack.vmag_pu, model_.slack.vang_rad[static_cast<std::size_t>(phase)]);
}

Eigen::VectorXcd Network::nominal_injection_kva(double load_scale, double der_scale) const {
    Eigen::VectorXcd s = Eigen::VectorXcd::Zero(node_count());
    for (const Load& l : model_.loads) {
        s[node(model_.bus_index(l.bus), l.phase)] -= load_scale * Complex(l.p_kw, l.q_kvar);
    }
    for (const Der& d : model_.ders) {
        const double p = der_scale * d.rated_kw;
        const double q = p * std::tan(std::acos(d.power_factor));
        s[node(model_.bus_index(d.bus), d.phase)] += Complex(p, q);
    }
    return s;
}

}  // namespace gridfase

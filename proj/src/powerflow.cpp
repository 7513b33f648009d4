#include "gridfase/powerflow.hpp"

#include <cmath>
#include <numbers>

#include "gridfase/csv.hpp"
#include "gridfase/errors.hpp"

namespace gridfase {

double wrap_angle(double rad) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double w = std::fmod(rad, two_pi);
    if (w <= -std::numbers::pi) w += two_pi;
    if (w > std::numbers::pi) w -= two_pi;
    return w;
}

SystemState SystemState::flat(const Network& net) {
    SystemState s(net.node_count());
    for (int i = 0; i < net.node_count(); ++i) {
        const int phase = net.nodes()[i].phase;
        s.x_[i] = net.feeder().slack.vmag_pu;
        s.x_[net.node_count() + i] = net.feeder().slack.vang_rad[phase];
    }
    return s;
}

SystemState SystemState::from_phasors(const Eigen::VectorXcd& v) {
    const int n = static_cast<int>(v.size());
    SystemState s(n);
    for (int i = 0; i < n; ++i) {
        s.x_[i] = std::abs(v[i]);
        s.x_[n + i] = std::arg(v[i]);
    }
    return s;
}

Eigen::VectorXcd SystemState::phasors() const {
    const int n = node_count();
    Eigen::VectorXcd v(n);
    for (int i = 0; i < n; ++i) v[i] = std::polar(x_[i], x_[n + i]);
    return v;
}

Eigen::VectorXcd nodal_injection_pu(const Network& net, const SystemState& state) {
    const Eigen::VectorXcd v = state.phasors();
    const Eigen::VectorXcd i = net.ybus() * v;
    return v.cwiseProduct(i.conjugate());
}

namespace {

double max_mismatch(const Network& net, const Eigen::VectorXcd& v, const Eigen::VectorXcd& s_pu) {
    const Eigen::VectorXcd s_calc = v.cwiseProduct((net.ybus() * v).conjugate());
    double worst = 0.0;
    for (int i = 0; i < net.node_count(); ++i) {
        if (net.is_slack(i)) continue;
        worst = std::max(worst, std::abs(s_calc[i] - s_pu[i]));
    }
    return worst;
}

}  // namespace

SystemState solve_powerflow(const Network& net, const Eigen::VectorXcd& injection_kva, const PowerflowOptions& options,
                            const SystemState* initial, PowerflowStats* stats) {
    const int nn = net.node_count();
    if (injection_kva.size() != nn) throw DimensionMismatch("injection vector does not match node count");

    const Eigen::VectorXcd s_pu = injection_kva / net.phase_power_base_kva();
    Eigen::VectorXcd v = initial ? initial->phasors() : SystemState::flat(net).phasors();
    for (int node : net.slack_nodes()) v[node] = net.slack_voltage(net.nodes()[node].phase);

    const auto& topo = net.topology();
    const auto& buses = net.feeder().buses;
    // Current flowing from parent into each bus through its parent branch.
    std::vector<Eigen::Vector3cd> inflow(buses.size());

    double worst = max_mismatch(net, v, s_pu);
    int iter = 0;
    while (worst >= options.tolerance) {
        if (iter >= options.max_iterations) {
            throw NonConvergence("power flow did not converge in " + std::to_string(iter) +
                                     " iterations (worst mismatch " + std::to_string(worst) + " p.u.)",
                                 worst, iter);
        }
        ++iter;

        // Backward sweep: load current at each bus plus everything downstream.
        for (auto& c : inflow) c.setZero();
        for (auto it = topo.order.rbegin(); it != topo.order.rend(); ++it) {
            const int bus = *it;
            for (int p = 0; p < kPhaseCount; ++p) {
                const int node = net.node(bus, p);
                if (node < 0) continue;
                inflow[bus][p] -= std::conj(s_pu[node] / v[node]);
            }
            if (topo.parent_bus[bus] >= 0) inflow[topo.parent_bus[bus]] += inflow[bus];
        }

        // Forward sweep: voltage drop along each parent branch.
        for (int bus : topo.order) {
            const int br = topo.parent_branch[bus];
            if (br < 0) continue;
            const BranchAdmittance& ba = net.branches()[br];
            const int parent = topo.parent_bus[bus];
            Eigen::Vector3cd current = Eigen::Vector3cd::Zero();
            for (int p = 0; p < kPhaseCount; ++p) {
                if (ba.phases.has(p)) current[p] = inflow[bus][p];
            }
            const Eigen::Vector3cd drop = ba.z_pu * current;
            for (int p = 0; p < kPhaseCount; ++p) {
                const int node = net.node(bus, p);
                if (node < 0) continue;
                // Phases the parent branch does not carry are unsupplied; the validator rules this out.
                v[node] = v[net.node(parent, p)] - drop[p];
            }
        }
        worst = max_mismatch(net, v, s_pu);
    }

    if (stats) {
        stats->iterations = iter;
        stats->max_mismatch = worst;
    }
    SystemState out = SystemState::from_phasors(v);
    for (int node : net.slack_nodes()) {
        const int p = net.nodes()[node].phase;
        out.x()[node] = net.feeder().slack.vmag_pu;
        out.x()[nn + node] = net.feeder().slack.vang_rad[p];
    }
    return out;
}

Eigen::VectorXcd InjectionProfile::at(int t) const {
    Eigen::VectorXcd s(nodes);
    for (int i = 0; i < nodes; ++i) s[i] = s_kva[static_cast<std::size_t>(t) * nodes + i];
    return s;
}

void InjectionProfile::set(int t, const Eigen::VectorXcd& s) {
    for (int i = 0; i < nodes; ++i) s_kva[static_cast<std::size_t>(t) * nodes + i] = s[i];
}

std::vector<SystemState> true_trajectory(const Network& net, const InjectionProfile& profile,
                                         const PowerflowOptions& options) {
    std::vector<SystemState> states;
    states.reserve(profile.steps);
    for (int t = 0; t < profile.steps; ++t) {
        try {
            states.push_back(solve_powerflow(net, profile.at(t), options, states.empty() ? nullptr : &states.back()));
        } catch (const NonConvergence& e) {
            throw NonConvergence("timestep " + std::to_string(t) + ": " + e.what(), e.worst_mismatch(), e.iterations());
        }
    }
    return states;
}

void write_profile_csv(const std::filesystem::path& path, const Network& net, const InjectionProfile& profile) {
    csv::Writer w(path, "t,bus,phase,p_kw,q_kvar");
    for (int t = 0; t < profile.steps; ++t) {
        const Eigen::VectorXcd s = profile.at(t);
        for (int i = 0; i < net.node_count(); ++i) {
            const NodeRef& nr = net.nodes()[i];
            w.row(t, net.feeder().buses[nr.bus].id, phase_letter(nr.phase), s[i].real(), s[i].imag());
        }
    }
}

InjectionProfile read_profile_csv(const std::filesystem::path& path, const Network& net, double dt_seconds) {
    const csv::Table table = csv::read(path);
    const auto ct = table.column("t"), cb = table.column("bus"), cph = table.column("phase");
    const auto cp = table.column("p_kw"), cq = table.column("q_kvar");

    int steps = 0;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        steps = std::max(steps, static_cast<int>(csv::to_double(table.rows[r][ct], path, r + 2)) + 1);
    }
    InjectionProfile prof;
    prof.dt_seconds = dt_seconds;
    prof.steps = steps;
    prof.nodes = net.node_count();
    prof.s_kva.assign(static_cast<std::size_t>(steps) * prof.nodes, Complex(0.0, 0.0));
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const int t = static_cast<int>(csv::to_double(row[ct], path, r + 2));
        if (t < 0) throw ParseError(path.string() + ":" + std::to_string(r + 2) + ": negative timestep");
        const auto bus = net.feeder().find_bus(row[cb]);
        if (!bus) throw ParseError(path.string() + ":" + std::to_string(r + 2) + ": unknown bus '" + row[cb] + "'");
        int phase = 0;
        try {
            phase = parse_phase(row[cph]);
        } catch (const std::invalid_argument& e) {
            throw ParseError(path.string() + ":" + std::to_string(r + 2) + ": " + e.what());
        }
        const int node = net.node(*bus, phase);
        if (node < 0) {
            throw ParseError(path.string() + ":" + std::to_string(r + 2) + ": phase " + row[cph] + " absent at bus " +
                             row[cb]);
        }
        prof.s_kva[static_cast<std::size_t>(t) * prof.nodes + node] +=
            Complex(csv::to_double(row[cp], path, r + 2), csv::to_double(row[cq], path, r + 2));
    }
    return prof;
}

void write_trajectory_csv(const std::filesystem::path& path, const Network& net,
                          const std::vector<SystemState>& trajectory) {
    csv::Writer w(path, "t,bus,phase,vmag_pu,vang_rad");
    for (std::size_t t = 0; t < trajectory.size(); ++t) {
        for (int i = 0; i < net.node_count(); ++i) {
            const NodeRef& nr = net.nodes()[i];
            w.row(t, net.feeder().buses[nr.bus].id, phase_letter(nr.phase), trajectory[t].vmag(i),
                  trajectory[t].vang(i));
        }
    }
}

}  // namespace gridfase

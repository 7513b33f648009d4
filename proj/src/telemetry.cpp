#include "gridfase/telemetry.hpp"

#include <cmath>
#include <stdexcept>

#include "gridfase/csv.hpp"
#include "gridfase/errors.hpp"
#include "gridfase/seed.hpp"

namespace gridfase {

std::string_view kind_name(ChannelKind kind) {
    switch (kind) {
        case ChannelKind::PmuVmag: return "PMU_VMAG";
        case ChannelKind::PmuVang: return "PMU_VANG";
        case ChannelKind::ScadaPflow: return "SCADA_PFLOW";
        case ChannelKind::ScadaQflow: return "SCADA_QFLOW";
        case ChannelKind::PseudoPinj: return "PSEUDO_PINJ";
        case ChannelKind::PseudoQinj: return "PSEUDO_QINJ";
    }
    return "UNKNOWN";
}

MeasurementModel::MeasurementModel(std::shared_ptr<const Network> net, SensorConfig config)
    : net_(std::move(net)), config_(std::move(config)) {
    const Network& n = *net_;
    const FeederModel& m = n.feeder();
    auto bus_of = [&](const std::string& id, const char* what) {
        auto b = m.find_bus(id);
        if (!b) throw ValidationError(std::string(what) + " references unknown bus '" + id + "'");
        return *b;
    };

    for (const std::string& id : config_.pmu_buses) {
        const int bus = bus_of(id, "PMU");
        for (int p = 0; p < kPhaseCount; ++p) {
            const int node = n.node(bus, p);
            if (node < 0) continue;
            channels_.push_back({ChannelKind::PmuVmag, bus, -1, p, node});
            channels_.push_back({ChannelKind::PmuVang, bus, -1, p, node});
        }
    }
    fast_count_ = static_cast<int>(channels_.size());
    power_rows_.resize(channels_.size());

    for (const std::string& id : config_.scada_branches) {
        const auto k = m.find_branch(id);
        if (!k) throw ValidationError("SCADA sensor references unknown branch '" + id + "'");
        const BranchAdmittance& ba = n.branches()[static_cast<std::size_t>(*k)];
        for (int p = 0; p < kPhaseCount; ++p) {
            if (!ba.phases.has(p)) continue;
            PowerRow row{ba.from_node[p], false, {}};
            for (int q = 0; q < kPhaseCount; ++q) {
                if (!ba.phases.has(q)) continue;
                const Complex y = ba.y_pu(p, q);
                row.terms.push_back({ba.from_node[q], y.real(), y.imag()});
                row.terms.push_back({ba.to_node[q], -y.real(), -y.imag()});
            }
            for (bool reactive : {false, true}) {
                row.reactive = reactive;
                channels_.push_back({reactive ? ChannelKind::ScadaQflow : ChannelKind::ScadaPflow, ba.from_bus, *k, p,
                                     ba.from_node[p]});
                power_rows_.push_back(row);
            }
        }
    }

    for (const std::string& id : config_.pseudo_buses) {
        const int bus = bus_of(id, "pseudo-measurement");
        for (int p = 0; p < kPhaseCount; ++p) {
            const int node = n.node(bus, p);
            if (node < 0) continue;
            PowerRow row{node, false, {}};
            for (int k = 0; k < n.node_count(); ++k) {
                const Complex y = n.ybus()(node, k);
                if (y != Complex(0.0, 0.0)) row.terms.push_back({k, y.real(), y.imag()});
            }
            for (bool reactive : {false, true}) {
                row.reactive = reactive;
                channels_.push_back({reactive ? ChannelKind::PseudoQinj : ChannelKind::PseudoPinj, bus, -1, p, node});
                power_rows_.push_back(row);
            }
        }
    }

    if (fast_count_ >= n.state_dim()) {
        throw ValidationError("PMU channel count " + std::to_string(fast_count_) +
                              " must stay below the state dimension " + std::to_string(n.state_dim()));
    }
    const NoiseSpec& ns = config_.noise;
    if (ns.pmu_magnitude < 0 || ns.pmu_angle_rad < 0 || ns.scada < 0 || ns.pseudo < 0 || !(ns.sigma_ratio > 0) ||
        !(ns.sigma_floor > 0)) {
        throw ValidationError("noise specification must be non-negative with positive sigma ratio and floor");
    }
}

double MeasurementModel::eval_power(const PowerRow& row, const Eigen::VectorXd& x) const {
    const int nn = net_->node_count();
    const double va = x[row.anchor];
    const double ta = x[nn + row.anchor];
    double acc = 0.0;
    for (const Term& t : row.terms) {
        const double d = ta - x[nn + t.node];
        const double c = std::cos(d), s = std::sin(d);
        acc += x[t.node] * (row.reactive ? (t.g * s - t.b * c) : (t.g * c + t.b * s));
    }
    return va * acc;
}

void MeasurementModel::eval_power_gradient(const PowerRow& row, const Eigen::VectorXd& x,
                                           Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> out) const {
    const int nn = net_->node_count();
    const int a = row.anchor;
    const double va = x[a];
    const double ta = x[nn + a];
    for (const Term& t : row.terms) {
        const double vk = x[t.node];
        const double d = ta - x[nn + t.node];
        const double c = std::cos(d), s = std::sin(d);
        // value term f = va vk u(d); derivative of u with respect to d is du.
        const double u = row.reactive ? (t.g * s - t.b * c) : (t.g * c + t.b * s);
        const double du = row.reactive ? (t.g * c + t.b * s) : (-t.g * s + t.b * c);
        out[a] += vk * u;
        out[t.node] += va * u;
        out[nn + a] += va * vk * du;
        out[nn + t.node] -= va * vk * du;
    }
}

void MeasurementModel::eval_range(const SystemState& state, int begin, int end, Eigen::Ref<Eigen::VectorXd> out) const {
    const Eigen::VectorXd& x = state.x();
    const int nn = net_->node_count();
    for (int i = begin; i < end; ++i) {
        const Channel& ch = channels_[static_cast<std::size_t>(i)];
        double v = 0.0;
        switch (ch.kind) {
            case ChannelKind::PmuVmag: v = x[ch.node]; break;
            case ChannelKind::PmuVang: v = x[nn + ch.node]; break;
            default: v = eval_power(power_rows_[static_cast<std::size_t>(i)], x); break;
        }
        out[i - begin] = v;
    }
}

Eigen::VectorXd MeasurementModel::h_full(const SystemState& state) const {
    Eigen::VectorXd out(size());
    eval_range(state, 0, size(), out);
    return out;
}

Eigen::VectorXd MeasurementModel::h_fast(const SystemState& state) const {
    Eigen::VectorXd out(fast_count_);
    eval_range(state, 0, fast_count_, out);
    return out;
}

Eigen::VectorXd MeasurementModel::h_slow(const SystemState& state) const {
    Eigen::VectorXd out(slow_count());
    eval_range(state, fast_count_, size(), out);
    return out;
}

Eigen::MatrixXd MeasurementModel::jacobian(const SystemState& state) const {
    const int nn = net_->node_count();
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(size(), state_dim());
    for (int i = 0; i < size(); ++i) {
        const Channel& ch = channels_[static_cast<std::size_t>(i)];
        switch (ch.kind) {
            case ChannelKind::PmuVmag: h(i, ch.node) = 1.0; break;
            case ChannelKind::PmuVang: h(i, nn + ch.node) = 1.0; break;
            default: eval_power_gradient(power_rows_[static_cast<std::size_t>(i)], state.x(), h.row(i)); break;
        }
    }
    return h;
}

double MeasurementModel::noise_sigma(int channel, double true_value) const {
    const NoiseSpec& ns = config_.noise;
    auto relative = [&](double max_error) {
        if (max_error <= 0.0) return 0.0;
        return std::max(max_error / ns.sigma_ratio * std::abs(true_value), ns.sigma_floor);
    };
    switch (channels_[static_cast<std::size_t>(channel)].kind) {
        case ChannelKind::PmuVmag: return ns.pmu_magnitude / ns.sigma_ratio * std::abs(true_value);
        case ChannelKind::PmuVang: return ns.pmu_angle_rad / ns.sigma_ratio;
        case ChannelKind::ScadaPflow:
        case ChannelKind::ScadaQflow: return relative(ns.scada);
        case ChannelKind::PseudoPinj:
        case ChannelKind::PseudoQinj: return relative(ns.pseudo);
    }
    return 0.0;
}

double MeasurementModel::variance(int channel, double true_value) const {
    const double s = std::max(noise_sigma(channel, true_value), config_.noise.sigma_floor);
    return s * s;
}

std::string MeasurementModel::location(int channel) const {
    const Channel& ch = channels_[static_cast<std::size_t>(channel)];
    if (ch.branch >= 0) return net_->feeder().branches[static_cast<std::size_t>(ch.branch)].id;
    return net_->feeder().buses[static_cast<std::size_t>(ch.bus)].id;
}

std::vector<Measurement> Snapshot::measurements(const MeasurementModel& model) const {
    std::vector<Measurement> out;
    out.reserve(static_cast<std::size_t>(model.size()));
    for (int i = 0; i < model.size(); ++i) {
        const Channel& ch = model.channels()[static_cast<std::size_t>(i)];
        const bool fast = i < model.fast_count();
        const int j = fast ? i : i - model.fast_count();
        out.push_back({ch.kind, model.location(i), ch.phase, fast ? fast_values[j] : slow_values[j],
                       fast ? fast_variances[j] : slow_variances[j], rate_of(ch.kind), fast ? t : slow_sample_time});
    }
    return out;
}

namespace {

void noisy_block(const MeasurementModel& model, const Eigen::VectorXd& truth, int offset, Rng& rng,
                 Eigen::VectorXd& values, Eigen::VectorXd& variances) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    values.resize(truth.size());
    variances.resize(truth.size());
    for (Eigen::Index j = 0; j < truth.size(); ++j) {
        const int ch = offset + static_cast<int>(j);
        const double sigma = model.noise_sigma(ch, truth[j]);
        const double z = gauss(rng);
        values[j] = sigma > 0.0 ? truth[j] + sigma * z : truth[j];
        variances[j] = model.variance(ch, truth[j]);
    }
}

void fill_fast(const MeasurementModel& model, const SystemState& truth, int t, std::uint64_t seed, Snapshot& snap) {
    Rng rng = make_rng(seed, "telemetry.fast", static_cast<std::uint64_t>(t));
    noisy_block(model, model.h_fast(truth), 0, rng, snap.fast_values, snap.fast_variances);
}

void fill_slow(const MeasurementModel& model, const SystemState& truth, int t, std::uint64_t seed, Snapshot& snap) {
    Rng rng = make_rng(seed, "telemetry.slow", static_cast<std::uint64_t>(t));
    noisy_block(model, model.h_slow(truth), model.fast_count(), rng, snap.slow_values, snap.slow_variances);
    snap.slow_sample_time = t;
}

}  // namespace

Snapshot synthesize(const MeasurementModel& model, const SystemState& truth, int t, std::uint64_t seed) {
    if (truth.dim() != model.state_dim()) throw DimensionMismatch("state dimension does not match the feeder");
    Snapshot snap;
    snap.t = t;
    snap.slow_refreshed = true;
    fill_fast(model, truth, t, seed, snap);
    fill_slow(model, truth, t, seed, snap);
    return snap;
}

std::vector<Snapshot> stream(const MeasurementModel& model, const std::vector<SystemState>& trajectory, int N,
                             std::uint64_t seed, int t0) {
    if (N < 1) throw std::invalid_argument("slow-rate ratio N must be at least 1");
    if (t0 % N != 0) throw std::invalid_argument("stream must start at a slow-rate refresh step");
    std::vector<Snapshot> out;
    out.reserve(trajectory.size());
    for (std::size_t k = 0; k < trajectory.size(); ++k) {
        const int t = t0 + static_cast<int>(k);
        if (t % N == 0) {
            out.push_back(synthesize(model, trajectory[k], t, seed));
            continue;
        }
        Snapshot snap = out.back();
        snap.t = t;
        snap.slow_refreshed = false;
        fill_fast(model, trajectory[k], t, seed, snap);
        out.push_back(std::move(snap));
    }
    return out;
}

void write_snapshots_csv(const std::filesystem::path& path, const MeasurementModel& model,
                         const std::vector<Snapshot>& snapshots) {
    csv::Writer w(path, "t,kind,location,phase,value,variance,staleness");
    for (const Snapshot& s : snapshots) {
        for (const Measurement& m : s.measurements(model)) {
            w.row(s.t, kind_name(m.kind), m.location, phase_letter(m.phase), m.value, m.variance, s.t - m.sample_time);
        }
    }
}

}  // namespace gridfase

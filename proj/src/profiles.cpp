#include <cmath>

#include "gridfase/csv.hpp"
#include "gridfase/errors.hpp"
#include "gridfase/powerflow.hpp"
#include "gridfase/seed.hpp"

namespace gridfase {

BaseCurves BaseCurves::standard() {
    BaseCurves c;
    c.step_hours = 1.0;
    // Residential-dominated feeder: overnight trough, morning ramp, evening peak at 18:00.
    c.load = {0.55, 0.50, 0.47, 0.45, 0.45, 0.48, 0.58, 0.70, 0.76, 0.78, 0.80, 0.82,
              0.83, 0.82, 0.81, 0.82, 0.86, 0.93, 1.00, 0.98, 0.93, 0.84, 0.73, 0.62};
    // Clear-sky PV, peak at 12:00.
    c.pv = {0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 0.02, 0.10, 0.28, 0.48, 0.66, 0.80,
            0.88, 0.86, 0.76, 0.60, 0.40, 0.20, 0.06, 0.00, 0.00, 0.00, 0.00, 0.00};
    return c;
}

BaseCurves BaseCurves::from_csv(const std::filesystem::path& path) {
    const csv::Table table = csv::read(path);
    const auto ch = table.column("hour"), cl = table.column("load"), cp = table.column("pv");
    BaseCurves c;
    std::vector<double> hours;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        hours.push_back(csv::to_double(table.rows[r][ch], path, r + 2));
        c.load.push_back(csv::to_double(table.rows[r][cl], path, r + 2));
        c.pv.push_back(csv::to_double(table.rows[r][cp], path, r + 2));
    }
    if (hours.size() < 2) throw ParseError(path.string() + ": need at least two curve samples");
    c.step_hours = hours[1] - hours[0];
    for (std::size_t i = 1; i < hours.size(); ++i) {
        if (std::abs(hours[i] - hours[i - 1] - c.step_hours) > 1e-9) {
            throw ParseError(path.string() + ": curve samples must be uniformly spaced");
        }
    }
    if (std::abs(c.step_hours * static_cast<double>(hours.size()) - 24.0) > 1e-9) {
        throw ParseError(path.string() + ": curve samples must cover exactly 24 h");
    }
    return c;
}

namespace {

double interpolate(const std::vector<double>& samples, double step_hours, double hour) {
    const double day = std::fmod(std::fmod(hour, 24.0) + 24.0, 24.0);
    const double pos = day / step_hours;
    const auto n = samples.size();
    const auto i0 = static_cast<std::size_t>(std::floor(pos)) % n;
    const auto i1 = (i0 + 1) % n;
    const double frac = pos - std::floor(pos);
    return samples[i0] + frac * (samples[i1] - samples[i0]);
}

}  // namespace

double BaseCurves::load_at(double hour) const { return interpolate(load, step_hours, hour); }
double BaseCurves::pv_at(double hour) const { return interpolate(pv, step_hours, hour); }

InjectionProfile generate_profiles(const BaseCurves& curves, const Network& net, const ProfileOptions& options,
                                   std::uint64_t seed) {
    if (!(options.fluctuation >= 0.0 && options.fluctuation <= 0.5)) {
        throw std::invalid_argument("fluctuation must lie in [0, 0.5]");
    }
    const FeederModel& m = net.feeder();
    InjectionProfile prof;
    prof.dt_seconds = options.dt_seconds;
    prof.steps = options.steps;
    prof.nodes = net.node_count();
    prof.s_kva.assign(static_cast<std::size_t>(prof.steps) * prof.nodes, Complex(0.0, 0.0));

    std::vector<int> load_node, der_node;
    for (const Load& l : m.loads) load_node.push_back(net.node(m.bus_index(l.bus), l.phase));
    for (const Der& d : m.ders) der_node.push_back(net.node(m.bus_index(d.bus), d.phase));

    Rng rng = make_rng(seed, "profile");
    std::uniform_real_distribution<double> jitter(1.0 - options.fluctuation, 1.0 + options.fluctuation);
    auto scale = [&]() { return options.fluctuation > 0.0 ? jitter(rng) : 1.0; };

    for (int t = 0; t < prof.steps; ++t) {
        const double hour = options.start_hour + t * options.dt_seconds / 3600.0;
        const double lf = curves.load_at(hour);
        const double pf = curves.pv_at(hour);
        Complex* row = prof.s_kva.data() + static_cast<std::size_t>(t) * prof.nodes;
        for (std::size_t k = 0; k < m.loads.size(); ++k) {
            row[load_node[k]] -= scale() * lf * Complex(m.loads[k].p_kw, m.loads[k].q_kvar);
        }
        for (std::size_t k = 0; k < m.ders.size(); ++k) {
            const double p = scale() * pf * m.ders[k].rated_kw;
            row[der_node[k]] += Complex(p, p * std::tan(std::acos(m.ders[k].power_factor)));
        }
    }
    return prof;
}

}  // namespace gridfase

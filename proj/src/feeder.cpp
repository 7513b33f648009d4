#include "gridfase/feeder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <queue>
#include <sstream>

#include <json.hpp>

#include "gridfase/errors.hpp"

namespace gridfase {

using nlohmann::json;

PhaseSet PhaseSet::parse(std::string_view text) {
    std::uint8_t bits = 0;
    for (char c : text) {
        bits |= static_cast<std::uint8_t>(1u << parse_phase(std::string_view(&c, 1)));
    }
    if (bits == 0) throw std::invalid_argument("empty phase set");
    return PhaseSet(bits);
}

std::string PhaseSet::str() const {
    std::string out;
    for (int p = 0; p < kPhaseCount; ++p) {
        if (has(p)) out.push_back(phase_letter(p));
    }
    return out;
}

char phase_letter(int phase) { return static_cast<char>('A' + phase); }

int parse_phase(std::string_view text) {
    if (text.size() == 1) {
        const char c = text[0];
        if (c >= 'A' && c <= 'C') return c - 'A';
        if (c >= 'a' && c <= 'c') return c - 'a';
    }
    throw std::invalid_argument("invalid phase '" + std::string(text) + "'");
}

std::optional<int> FeederModel::find_bus(std::string_view id) const {
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].id == id) return static_cast<int>(i);
    }
    return std::nullopt;
}

std::optional<int> FeederModel::find_branch(std::string_view id) const {
    for (std::size_t i = 0; i < branches.size(); ++i) {
        if (branches[i].id == id) return static_cast<int>(i);
    }
    return std::nullopt;
}

int FeederModel::bus_index(std::string_view id) const {
    if (auto i = find_bus(id)) return *i;
    throw ValidationError("unknown bus '" + std::string(id) + "'");
}

int FeederModel::branch_index(std::string_view id) const {
    if (auto i = find_branch(id)) return *i;
    throw ValidationError("unknown branch '" + std::string(id) + "'");
}

namespace {

constexpr double kFeetPerMile = 5280.0;

// Upper triangle order used by the file format: aa ab ac bb bc cc.
constexpr std::array<std::pair<int, int>, 6> kTriangle{{{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}}};

class Reader {
public:
    explicit Reader(std::string source) : source_(std::move(source)) {}

    [[noreturn]] void fail(const std::string& field, const std::string& what) const {
        throw ParseError(source_ + ": " + field + ": " + what);
    }

    const json& member(const json& obj, const std::string& key, const std::string& ctx) const {
        if (!obj.is_object()) fail(ctx, "expected an object");
        auto it = obj.find(key);
        if (it == obj.end()) fail(ctx + "." + key, "missing field");
        return *it;
    }

    double number(const json& obj, const std::string& key, const std::string& ctx) const {
        const json& v = member(obj, key, ctx);
        if (!v.is_number()) fail(ctx + "." + key, "expected a number");
        return v.get<double>();
    }

    std::optional<double> optional_number(const json& obj, const std::string& key, const std::string& ctx) const {
        if (!obj.contains(key)) return std::nullopt;
        return number(obj, key, ctx);
    }

    std::string string(const json& obj, const std::string& key, const std::string& ctx) const {
        const json& v = member(obj, key, ctx);
        if (v.is_number_integer()) return std::to_string(v.get<long long>());
        if (!v.is_string()) fail(ctx + "." + key, "expected a string");
        return v.get<std::string>();
    }

    PhaseSet phases(const json& obj, const std::string& key, const std::string& ctx) const {
        try {
            return PhaseSet::parse(string(obj, key, ctx));
        } catch (const std::invalid_argument& e) {
            fail(ctx + "." + key, e.what());
        }
    }

    int phase(const json& obj, const std::string& key, const std::string& ctx) const {
        try {
            return parse_phase(string(obj, key, ctx));
        } catch (const std::invalid_argument& e) {
            fail(ctx + "." + key, e.what());
        }
    }

    std::array<double, 6> triangle(const json& obj, const std::string& key, const std::string& ctx) const {
        const json& v = member(obj, key, ctx);
        if (!v.is_array() || v.size() != 6) fail(ctx + "." + key, "expected 6 numbers (aa ab ac bb bc cc)");
        std::array<double, 6> out{};
        for (std::size_t i = 0; i < 6; ++i) {
            if (!v[i].is_number()) fail(ctx + "." + key + "[" + std::to_string(i) + "]", "expected a number");
            out[i] = v[i].get<double>();
        }
        return out;
    }

    const json& array(const json& obj, const std::string& key, const std::string& ctx) const {
        const json& v = member(obj, key, ctx);
        if (!v.is_array()) fail(ctx + "." + key, "expected an array");
        return v;
    }

private:
    std::string source_;
};

Eigen::Matrix3cd assemble_impedance(const std::array<double, 6>& r, const std::array<double, 6>& x, PhaseSet phases,
                                    double scale) {
    Eigen::Matrix3cd z = Eigen::Matrix3cd::Zero();
    for (std::size_t k = 0; k < kTriangle.size(); ++k) {
        const auto [i, j] = kTriangle[k];
        if (!phases.has(i) || !phases.has(j)) continue;
        z(i, j) = Complex(r[k], x[k]) * scale;
        z(j, i) = z(i, j);
    }
    return z;
}

int line_of_offset(std::string_view text, std::size_t offset) {
    offset = std::min(offset, text.size());
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

}  // namespace

FeederModel parse_feeder(std::string_view text, std::string_view source) {
    const std::string src(source);
    json doc;
    try {
        doc = json::parse(text.begin(), text.end(), nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ParseError(src + ":" + std::to_string(line_of_offset(text, e.byte)) + ": malformed feeder file (" +
                         e.what() + ")");
    }

    Reader rd(src);
    FeederModel m;

    const double version = rd.number(doc, "schema_version", "$");
    if (version != kFeederSchemaVersion) {
        rd.fail("$.schema_version", "unsupported version " + std::to_string(static_cast<int>(version)));
    }
    m.schema_version = kFeederSchemaVersion;

    const json& meta = rd.member(doc, "meta", "$");
    if (meta.contains("name")) m.name = rd.string(meta, "name", "meta");
    m.base_kva = rd.number(meta, "base_kva", "meta");
    m.base_kv = rd.number(meta, "base_kv", "meta");
    m.slack_bus = rd.string(meta, "slack_bus", "meta");
    if (meta.contains("slack_voltage")) {
        const json& sv = meta["slack_voltage"];
        m.slack.vmag_pu = rd.number(sv, "vmag_pu", "meta.slack_voltage");
        const bool degrees = sv.contains("vang_deg");
        const json& ang = rd.member(sv, degrees ? "vang_deg" : "vang_rad", "meta.slack_voltage");
        if (!ang.is_array() || ang.size() != 3) rd.fail("meta.slack_voltage.vang", "expected 3 numbers");
        for (int p = 0; p < kPhaseCount; ++p) {
            if (!ang[p].is_number()) rd.fail("meta.slack_voltage.vang", "expected 3 numbers");
            const double a = ang[p].get<double>();
            m.slack.vang_rad[p] = degrees ? a * std::numbers::pi / 180.0 : a;
        }
    } else {
        m.slack.vmag_pu = 1.0;
        m.slack.vang_rad = {0.0, -2.0 * std::numbers::pi / 3.0, 2.0 * std::numbers::pi / 3.0};
    }

    struct LineConfig {
        std::array<double, 6> r, x;
        double per_mile;  // 1 when the config is given per mile
    };
    std::map<std::string, LineConfig> configs;
    if (doc.contains("line_configs")) {
        const json& lc = doc["line_configs"];
        if (!lc.is_object()) rd.fail("line_configs", "expected an object");
        for (auto it = lc.begin(); it != lc.end(); ++it) {
            const std::string ctx = "line_configs." + it.key();
            configs[it.key()] = LineConfig{rd.triangle(it.value(), "r", ctx), rd.triangle(it.value(), "x", ctx), 1.0};
        }
    }

    const json& buses = rd.array(doc, "buses", "$");
    for (std::size_t i = 0; i < buses.size(); ++i) {
        const std::string ctx = "buses[" + std::to_string(i) + "]";
        Bus b;
        b.id = rd.string(buses[i], "id", ctx);
        b.phases = rd.phases(buses[i], "phases", ctx);
        b.base_kv = rd.optional_number(buses[i], "base_kv", ctx).value_or(m.base_kv);
        m.buses.push_back(std::move(b));
    }

    const json& branches = rd.array(doc, "branches", "$");
    for (std::size_t i = 0; i < branches.size(); ++i) {
        const std::string ctx = "branches[" + std::to_string(i) + "]";
        const json& e = branches[i];
        Branch br;
        br.from = rd.string(e, "from", ctx);
        br.to = rd.string(e, "to", ctx);
        br.id = e.contains("id") ? rd.string(e, "id", ctx) : br.from + "-" + br.to;
        br.phases = rd.phases(e, "phases", ctx);

        double length_mi = 1.0;
        if (auto ft = rd.optional_number(e, "length_ft", ctx)) length_mi = *ft / kFeetPerMile;
        if (auto mi = rd.optional_number(e, "length_mi", ctx)) length_mi = *mi;
        if (!(length_mi > 0.0)) rd.fail(ctx + ".length", "length must be positive");

        if (e.contains("config")) {
            const std::string name = rd.string(e, "config", ctx);
            auto it = configs.find(name);
            if (it == configs.end()) rd.fail(ctx + ".config", "unknown line config '" + name + "'");
            br.z_ohm = assemble_impedance(it->second.r, it->second.x, br.phases, length_mi);
        } else {
            br.z_ohm = assemble_impedance(rd.triangle(e, "r", ctx), rd.triangle(e, "x", ctx), br.phases, length_mi);
        }
        m.branches.push_back(std::move(br));
    }

    if (doc.contains("loads")) {
        const json& loads = rd.array(doc, "loads", "$");
        for (std::size_t i = 0; i < loads.size(); ++i) {
            const std::string ctx = "loads[" + std::to_string(i) + "]";
            Load l;
            l.bus = rd.string(loads[i], "bus", ctx);
            l.phase = rd.phase(loads[i], "phase", ctx);
            l.p_kw = rd.number(loads[i], "p_kw", ctx);
            l.q_kvar = rd.number(loads[i], "q_kvar", ctx);
            m.loads.push_back(std::move(l));
        }
    }

    if (doc.contains("ders")) {
        const json& ders = rd.array(doc, "ders", "$");
        for (std::size_t i = 0; i < ders.size(); ++i) {
            const std::string ctx = "ders[" + std::to_string(i) + "]";
            Der d;
            d.bus = rd.string(ders[i], "bus", ctx);
            d.phase = rd.phase(ders[i], "phase", ctx);
            d.rated_kw = rd.number(ders[i], "rated_kw", ctx);
            d.power_factor = rd.optional_number(ders[i], "power_factor", ctx).value_or(1.0);
            m.ders.push_back(std::move(d));
        }
    }

    validate_feeder(m);
    return m;
}

FeederModel load_feeder(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path.string() + ": cannot open feeder file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_feeder(buf.str(), path.string());
}

std::string serialize_feeder(const FeederModel& m) {
    json doc;
    doc["schema_version"] = m.schema_version;
    doc["meta"] = {{"name", m.name},
                   {"base_kva", m.base_kva},
                   {"base_kv", m.base_kv},
                   {"slack_bus", m.slack_bus},
                   {"slack_voltage",
                    {{"vmag_pu", m.slack.vmag_pu},
                     {"vang_rad", {m.slack.vang_rad[0], m.slack.vang_rad[1], m.slack.vang_rad[2]}}}}};
    doc["buses"] = json::array();
    for (const Bus& b : m.buses) {
        doc["buses"].push_back({{"id", b.id}, {"phases", b.phases.str()}, {"base_kv", b.base_kv}});
    }
    doc["branches"] = json::array();
    for (const Branch& br : m.branches) {
        json r = json::array(), x = json::array();
        for (const auto& [i, j] : kTriangle) {
            r.push_back(br.z_ohm(i, j).real());
            x.push_back(br.z_ohm(i, j).imag());
        }
        doc["branches"].push_back({{"id", br.id},
                                   {"from", br.from},
                                   {"to", br.to},
                                   {"phases", br.phases.str()},
                                   {"length_mi", 1.0},
                                   {"r", r},
                                   {"x", x}});
    }
    doc["loads"] = json::array();
    for (const Load& l : m.loads) {
        doc["loads"].push_back({{"bus", l.bus},
                                {"phase", std::string(1, phase_letter(l.phase))},
                                {"p_kw", l.p_kw},
                                {"q_kvar", l.q_kvar}});
    }
    doc["ders"] = json::array();
    for (const Der& d : m.ders) {
        doc["ders"].push_back({{"bus", d.bus},
                               {"phase", std::string(1, phase_letter(d.phase))},
                               {"rated_kw", d.rated_kw},
                               {"power_factor", d.power_factor}});
    }
    return doc.dump(2) + "\n";
}

namespace {

struct DisjointSet {
    std::vector<int> parent;
    explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent[a] = b;
        return true;
    }
};

}  // namespace

void validate_feeder(const FeederModel& m) {
    auto fail = [](const std::string& what) { throw ValidationError(what); };

    if (!(m.base_kva > 0.0)) fail("meta.base_kva must be positive");
    if (!(m.base_kv > 0.0)) fail("meta.base_kv must be positive");
    if (!(m.slack.vmag_pu > 0.0)) fail("slack voltage magnitude must be positive");
    if (m.buses.empty()) fail("feeder has no buses");

    std::map<std::string, int> ids;
    for (std::size_t i = 0; i < m.buses.size(); ++i) {
        const Bus& b = m.buses[i];
        if (!ids.emplace(b.id, static_cast<int>(i)).second) fail("duplicate bus '" + b.id + "'");
        if (b.phases.empty()) fail("bus '" + b.id + "' has no phases");
        if (!(b.base_kv > 0.0)) fail("bus '" + b.id + "' has non-positive base_kv");
    }

    auto slack = ids.find(m.slack_bus);
    if (slack == ids.end()) fail("missing slack bus '" + m.slack_bus + "'");

    std::map<std::string, int> branch_ids;
    DisjointSet ds(m.buses.size());
    for (const Branch& br : m.branches) {
        if (!branch_ids.emplace(br.id, 0).second) fail("duplicate branch '" + br.id + "'");
        auto f = ids.find(br.from), t = ids.find(br.to);
        if (f == ids.end()) fail("branch '" + br.id + "' references unknown bus '" + br.from + "'");
        if (t == ids.end()) fail("branch '" + br.id + "' references unknown bus '" + br.to + "'");
        if (f->second == t->second) fail("branch '" + br.id + "' is a self-loop");
        if (br.phases.empty()) fail("branch '" + br.id + "' has no phases");
        if (!br.phases.subset_of(m.buses[f->second].phases) || !br.phases.subset_of(m.buses[t->second].phases)) {
            fail("phase mismatch: branch '" + br.id + "' phases " + br.phases.str() + " not present at both ends");
        }
        for (int i = 0; i < kPhaseCount; ++i) {
            for (int j = 0; j < kPhaseCount; ++j) {
                const bool present = br.phases.has(i) && br.phases.has(j);
                if (!present && br.z_ohm(i, j) != Complex(0.0, 0.0)) {
                    fail("branch '" + br.id + "' has impedance on an absent phase");
                }
                if (std::abs(br.z_ohm(i, j) - br.z_ohm(j, i)) > 1e-12 * (1.0 + std::abs(br.z_ohm(i, j)))) {
                    fail("branch '" + br.id + "' impedance matrix is not symmetric");
                }
            }
            if (br.phases.has(i) && !(br.z_ohm(i, i).real() > 0.0)) {
                fail("branch '" + br.id + "' has non-positive resistance on phase " + phase_letter(i));
            }
        }
        if (!ds.unite(f->second, t->second)) fail("cycle detected at branch '" + br.id + "'");
    }

    const int root = ds.find(slack->second);
    for (std::size_t i = 0; i < m.buses.size(); ++i) {
        if (ds.find(static_cast<int>(i)) != root) fail("orphan bus '" + m.buses[i].id + "' not connected to slack");
    }
    if (m.branches.size() + 1 != m.buses.size()) fail("feeder is not radial");

    for (const Load& l : m.loads) {
        auto b = ids.find(l.bus);
        if (b == ids.end()) fail("load references unknown bus '" + l.bus + "'");
        if (!m.buses[b->second].phases.has(l.phase)) {
            fail(std::string("phase mismatch: load at '") + l.bus + "' on absent phase " + phase_letter(l.phase));
        }
        if (l.p_kw < 0.0) fail("load at '" + l.bus + "' has negative p_kw");
    }
    for (const Der& d : m.ders) {
        auto b = ids.find(d.bus);
        if (b == ids.end()) fail("der references unknown bus '" + d.bus + "'");
        if (!m.buses[b->second].phases.has(d.phase)) {
            fail(std::string("phase mismatch: der at '") + d.bus + "' on absent phase " + phase_letter(d.phase));
        }
        if (d.rated_kw < 0.0) fail("der at '" + d.bus + "' has negative rating");
        if (!(d.power_factor > 0.0 && d.power_factor <= 1.0)) fail("der at '" + d.bus + "' has power factor outside (0, 1]");
    }

    const TopologyOrder topo = topology_order(m);
    for (std::size_t b = 0; b < m.buses.size(); ++b) {
        if (topo.parent_branch[b] < 0) continue;
        const Branch& feed = m.branches[static_cast<std::size_t>(topo.parent_branch[b])];
        if (!m.buses[b].phases.subset_of(feed.phases)) {
            fail("phase mismatch: bus '" + m.buses[b].id + "' phases " + m.buses[b].phases.str() +
                 " not supplied by branch '" + feed.id + "'");
        }
    }
}

TopologyOrder topology_order(const FeederModel& m) {
    const std::size_t nb = m.buses.size();
    std::vector<std::vector<std::pair<int, int>>> adjacent(nb);  // (neighbor, branch)
    for (std::size_t k = 0; k < m.branches.size(); ++k) {
        const int f = m.bus_index(m.branches[k].from);
        const int t = m.bus_index(m.branches[k].to);
        adjacent[f].emplace_back(t, static_cast<int>(k));
        adjacent[t].emplace_back(f, static_cast<int>(k));
    }

    TopologyOrder topo;
    topo.parent_branch.assign(nb, -1);
    topo.parent_bus.assign(nb, -1);
    topo.depth.assign(nb, -1);

    const int root = m.bus_index(m.slack_bus);
    topo.depth[root] = 0;
    std::queue<int> frontier;
    frontier.push(root);
    while (!frontier.empty()) {
        const int b = frontier.front();
        frontier.pop();
        for (const auto& [nbr, branch] : adjacent[b]) {
            if (topo.depth[nbr] >= 0) continue;
            topo.depth[nbr] = topo.depth[b] + 1;
            topo.parent_bus[nbr] = b;
            topo.parent_branch[nbr] = branch;
            frontier.push(nbr);
        }
    }

    topo.order.resize(nb);
    std::iota(topo.order.begin(), topo.order.end(), 0);
    std::stable_sort(topo.order.begin(), topo.order.end(), [&](int a, int b) {
        if (topo.depth[a] != topo.depth[b]) return topo.depth[a] < topo.depth[b];
        return m.buses[a].id < m.buses[b].id;
    });
    topo.max_depth = *std::max_element(topo.depth.begin(), topo.depth.end());
    return topo;
}

}  // namespace gridfase

#include "gridfase/scenario.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gridfase/errors.hpp"

namespace gridfase {

using nlohmann::json;

namespace {

int line_of_offset(std::string_view text, std::size_t offset) {
    offset = std::min(offset, text.size());
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

class Fields {
public:
    Fields(const json& obj, std::string ctx, const std::string& source) : obj_(obj), ctx_(std::move(ctx)), source_(source) {
        if (!obj_.is_object()) fail("", "expected an object");
    }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        throw ParseError(source_ + ": " + ctx_ + (key.empty() ? "" : "." + key) + ": " + what);
    }

    bool has(const std::string& key) const { return obj_.contains(key); }
    const json& raw(const std::string& key) const { return obj_.at(key); }
    Fields object(const std::string& key) const { return Fields(obj_.at(key), ctx_ + "." + key, source_); }

    double number(const std::string& key, double fallback) const {
        if (!has(key)) return fallback;
        const json& v = obj_.at(key);
        if (!v.is_number()) fail(key, "expected a number");
        return v.get<double>();
    }

    long long integer(const std::string& key, long long fallback) const {
        if (!has(key)) return fallback;
        const json& v = obj_.at(key);
        if (!v.is_number_integer()) fail(key, "expected an integer");
        return v.get<long long>();
    }

    std::string string(const std::string& key, const std::string& fallback) const {
        if (!has(key)) return fallback;
        const json& v = obj_.at(key);
        if (!v.is_string()) fail(key, "expected a string");
        return v.get<std::string>();
    }

    std::vector<std::string> strings(const std::string& key) const {
        std::vector<std::string> out;
        if (!has(key)) return out;
        const json& v = obj_.at(key);
        if (!v.is_array()) fail(key, "expected an array");
        for (const json& e : v) {
            if (e.is_string()) out.push_back(e.get<std::string>());
            else if (e.is_number_integer()) out.push_back(std::to_string(e.get<long long>()));
            else fail(key, "expected bus or branch identifiers");
        }
        return out;
    }

    std::vector<double> numbers(const std::string& key) const {
        const json& v = obj_.at(key);
        if (!v.is_array()) fail(key, "expected an array of numbers");
        std::vector<double> out;
        for (const json& e : v) {
            if (!e.is_number()) fail(key, "expected an array of numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

private:
    const json& obj_;
    std::string ctx_;
    const std::string& source_;
};

SmoothingCoefficients coefficients(const Fields& f, SmoothingCoefficients fallback) {
    try {
        return SmoothingCoefficients::checked(f.number("alpha", fallback.alpha), f.number("beta", fallback.beta));
    } catch (const std::invalid_argument& e) {
        f.fail("alpha", e.what());
    }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

}  // namespace

Scenario parse_scenario(std::string_view text, const std::filesystem::path& base_dir, std::string_view source) {
    const std::string src(source);
    json doc;
    try {
        doc = json::parse(text.begin(), text.end(), nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ParseError(src + ":" + std::to_string(line_of_offset(text, e.byte)) + ": malformed scenario file (" +
                         e.what() + ")");
    }

    Fields root(doc, "scenario", src);
    Scenario sc;
    sc.name = root.string("name", "scenario");
    if (!root.has("feeder")) root.fail("feeder", "missing field");
    sc.feeder_path = resolve(base_dir, root.string("feeder", ""));
    sc.seed = static_cast<std::uint64_t>(root.integer("seed", 1));
    sc.runs = static_cast<int>(root.integer("runs", 1));

    if (root.has("sensors")) {
        Fields s = root.object("sensors");
        sc.sensors.pmu_buses = s.strings("pmu");
        sc.sensors.scada_branches = s.strings("scada");
        if (s.has("pseudo") && s.raw("pseudo").is_string()) {
            if (s.string("pseudo", "") != "all") s.fail("pseudo", "expected \"all\" or a list of buses");
            sc.pseudo_all = true;
        } else {
            sc.sensors.pseudo_buses = s.strings("pseudo");
        }
        if (s.has("noise")) {
            Fields n = s.object("noise");
            NoiseSpec& ns = sc.sensors.noise;
            ns.pmu_magnitude = n.number("pmu_magnitude", ns.pmu_magnitude);
            ns.pmu_angle_rad = n.number("pmu_angle_rad", ns.pmu_angle_rad);
            ns.scada = n.number("scada", ns.scada);
            ns.pseudo = n.number("pseudo", ns.pseudo);
            ns.sigma_ratio = n.number("sigma_ratio", ns.sigma_ratio);
            ns.sigma_floor = n.number("sigma_floor", ns.sigma_floor);
        }
    }

    if (root.has("timing")) {
        Fields t = root.object("timing");
        sc.timing.dt_seconds = t.number("dt_seconds", sc.timing.dt_seconds);
        sc.timing.slow_ratio = static_cast<int>(t.integer("slow_ratio", sc.timing.slow_ratio));
        sc.timing.horizon_steps = static_cast<int>(t.integer("horizon_steps", sc.timing.horizon_steps));
        sc.timing.start_hour = t.number("start_hour", sc.timing.start_hour);
    }

    if (root.has("profile")) {
        Fields p = root.object("profile");
        sc.profile.fluctuation = p.number("fluctuation", sc.profile.fluctuation);
        if (p.has("curves")) {
            if (p.raw("curves").is_string()) {
                sc.profile.curves = BaseCurves::from_csv(resolve(base_dir, p.string("curves", "")));
            } else {
                Fields c = p.object("curves");
                BaseCurves curves;
                curves.step_hours = c.number("step_hours", 1.0);
                curves.load = c.numbers("load");
                curves.pv = c.numbers("pv");
                if (curves.load.empty() || curves.pv.empty()) c.fail("load", "curves must not be empty");
                sc.profile.curves = std::move(curves);
            }
        }
    }

    if (root.has("estimator")) {
        Fields e = root.object("estimator");
        FilterConfig& fc = sc.estimator;
        fc.q = e.number("q", fc.q);
        fc.sigma0 = e.number("sigma0", fc.sigma0);
        fc.wls_tolerance = e.number("wls_tolerance", fc.wls_tolerance);
        fc.wls_max_iter = static_cast<int>(e.integer("wls_max_iter", fc.wls_max_iter));
        fc.rank_tolerance = e.number("rank_tolerance", fc.rank_tolerance);
        fc.condition_limit = e.number("condition_limit", fc.condition_limit);
    }

    if (root.has("method")) {
        Fields m = root.object("method");
        const std::string type = m.string("type", "fixed");
        if (type == "fixed") {
            sc.method.kind = MethodKind::Fixed;
            sc.method.coefficients = coefficients(m, {});
        } else if (type == "adaptive") {
            sc.method.kind = MethodKind::Adaptive;
            if (m.has("checkpoint")) sc.method.checkpoint = resolve(base_dir, m.string("checkpoint", ""));
        } else {
            m.fail("type", "expected \"fixed\" or \"adaptive\"");
        }
    }

    if (root.has("baseline")) sc.baseline = coefficients(root.object("baseline"), sc.baseline);

    if (root.has("training")) {
        Fields t = root.object("training");
        agent::TrainConfig& tc = sc.training;
        tc.gamma = t.number("gamma", tc.gamma);
        tc.learning_rate = t.number("learning_rate", tc.learning_rate);
        tc.epsilon_start = t.number("epsilon_start", tc.epsilon_start);
        tc.epsilon_end = t.number("epsilon_end", tc.epsilon_end);
        tc.epsilon_decay = t.number("epsilon_decay", tc.epsilon_decay);
        tc.replay_capacity = static_cast<std::size_t>(t.integer("replay_capacity", static_cast<long long>(tc.replay_capacity)));
        tc.batch_size = static_cast<std::size_t>(t.integer("batch_size", static_cast<long long>(tc.batch_size)));
        tc.warmup = static_cast<std::size_t>(t.integer("warmup", static_cast<long long>(tc.warmup)));
        tc.target_sync = static_cast<int>(t.integer("target_sync", tc.target_sync));
        tc.episodes = static_cast<int>(t.integer("episodes", tc.episodes));
        tc.reward_scale = t.number("reward_scale", tc.reward_scale);
        if (t.has("hidden")) {
            tc.hidden.clear();
            for (double h : t.numbers("hidden")) tc.hidden.push_back(static_cast<int>(h));
        }
        const std::string head = t.string("head", tc.head == agent::Head::Dueling ? "dueling" : "linear");
        if (head == "linear") tc.head = agent::Head::Linear;
        else if (head == "dueling") tc.head = agent::Head::Dueling;
        else t.fail("head", "expected \"linear\" or \"dueling\"");
        if (t.has("double_q")) {
            if (!t.raw("double_q").is_boolean()) t.fail("double_q", "expected true or false");
            tc.double_q = t.raw("double_q").get<bool>();
        }
        tc.updates_per_step = static_cast<int>(t.integer("updates_per_step", tc.updates_per_step));
        const std::string reward = t.string("reward", "prediction_gap");
        if (reward == "prediction_gap") tc.reward_mode = agent::RewardMode::PredictionGap;
        else if (reward == "synchronized_oracle") tc.reward_mode = agent::RewardMode::SynchronizedOracle;
        else t.fail("reward", "expected \"prediction_gap\" or \"synchronized_oracle\"");
    }

    validate_scenario(sc);
    return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path.string() + ": cannot open scenario file");
    std::ostringstream buf;
    buf << in.rdbuf();
    Scenario sc = parse_scenario(buf.str(), path.parent_path(), path.string());
    sc.source = path;
    return sc;
}

void validate_scenario(const Scenario& sc) {
    auto bad = [&](const std::string& what) { throw ValidationError("scenario '" + sc.name + "': " + what); };
    if (!(sc.timing.dt_seconds > 0.0)) bad("dt_seconds must be positive");
    if (sc.timing.slow_ratio < 1) bad("slow_ratio N must be at least 1");
    if (sc.timing.horizon_steps < sc.timing.slow_ratio) bad("horizon must cover at least one slow-rate period");
    if (!(sc.profile.fluctuation >= 0.0 && sc.profile.fluctuation <= 0.5)) bad("fluctuation must lie in [0, 0.5]");
    if (sc.runs < 1) bad("runs must be at least 1");
    for (const SmoothingCoefficients c : {sc.method.coefficients, sc.baseline}) {
        if (!(c.alpha >= 0.0 && c.alpha <= 1.0 && c.beta >= 0.0 && c.beta <= 1.0)) {
            bad("smoothing coefficients must lie in [0, 1]");
        }
    }
    if (!(sc.estimator.q > 0.0) || !(sc.estimator.sigma0 > 0.0)) bad("estimator q and sigma0 must be positive");
    const agent::TrainConfig& tc = sc.training;
    if (!(tc.gamma >= 0.0 && tc.gamma <= 1.0)) bad("gamma must lie in [0, 1]");
    if (!(tc.learning_rate > 0.0)) bad("learning_rate must be positive");
    if (!(tc.epsilon_end >= 0.0 && tc.epsilon_start <= 1.0 && tc.epsilon_end <= tc.epsilon_start)) {
        bad("epsilon schedule must satisfy 0 <= end <= start <= 1");
    }
    if (!(tc.epsilon_decay > 0.0 && tc.epsilon_decay <= 1.0)) bad("epsilon_decay must lie in (0, 1]");
    if (tc.batch_size == 0 || tc.replay_capacity < tc.batch_size) bad("replay capacity must hold at least one batch");
    if (tc.target_sync < 1) bad("target_sync must be at least 1");
    if (tc.episodes < 0) bad("episodes must be non-negative");
    if (tc.updates_per_step < 1) bad("updates_per_step must be at least 1");
    for (int h : tc.hidden) {
        if (h < 1) bad("hidden layer widths must be positive");
    }
}

Testbed Testbed::build(Scenario sc) {
    FeederModel feeder = load_feeder(sc.feeder_path);
    return build(std::move(sc), std::move(feeder));
}

Testbed Testbed::build(Scenario sc, FeederModel feeder) {
    validate_scenario(sc);
    auto net = std::make_shared<const Network>(std::move(feeder));
    SensorConfig sensors = sc.sensors;
    if (sc.pseudo_all) {
        sensors.pseudo_buses.clear();
        for (const Bus& b : net->feeder().buses) {
            if (b.id != net->feeder().slack_bus) sensors.pseudo_buses.push_back(b.id);
        }
    }
    auto model = std::make_shared<const MeasurementModel>(net, std::move(sensors));
    return Testbed{std::move(sc), std::move(net), std::move(model)};
}

}  // namespace gridfase

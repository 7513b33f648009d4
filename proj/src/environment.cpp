#include "gridfase/environment.hpp"

#include <cmath>
#include <stdexcept>

namespace gridfase {

FaseEnvironment::FaseEnvironment(const Testbed& bed, std::uint64_t seed, bool randomize)
    : bed_(bed),
      seed_(seed),
      randomize_(randomize),
      window_rng_(make_rng(seed, "env.window")),
      estimator_(bed.model, bed.scenario.estimator) {
    if (bed.scenario.timing.slow_ratio < 2) {
        throw std::invalid_argument("training episodes need N >= 2 (at least one intermediate step)");
    }
}

Eigen::VectorXd FaseEnvironment::reset() {
    const TimingConfig& tm = bed_.scenario.timing;
    const int N = tm.slow_ratio;
    ++episode_;

    // Windows start on refresh steps anywhere in the day, so training sees every operating condition.
    int start_step = 0;
    if (randomize_) {
        const int per_day = std::max(1, static_cast<int>(std::lround(86400.0 / tm.dt_seconds)) / N);
        std::uniform_int_distribution<int> pick(0, per_day - 1);
        start_step = pick(window_rng_) * N;
        episode_seed_ = derive_seed(seed_, "env.episode", static_cast<std::uint64_t>(episode_));
    } else {
        episode_seed_ = seed_;
    }

    ProfileOptions po;
    po.dt_seconds = tm.dt_seconds;
    po.steps = N;
    po.start_hour = tm.start_hour + start_step * tm.dt_seconds / 3600.0;
    po.fluctuation = bed_.scenario.profile.fluctuation;
    const InjectionProfile profile = generate_profiles(bed_.scenario.profile.curves, *bed_.network, po, episode_seed_);
    truth_ = true_trajectory(*bed_.network, profile);
    snapshots_ = stream(*bed_.model, truth_, N, episode_seed_, start_step);

    estimator_.anchor(snapshots_.front());
    k_ = 1;
    return observation();
}

Eigen::VectorXd FaseEnvironment::observation() const {
    const FilterState& s = estimator_.state();
    const std::size_t k = std::min(static_cast<std::size_t>(k_), snapshots_.size() - 1);
    return agent::raw_observation(s.x_hat, s.x_tilde, snapshots_[k].fast_values);
}

agent::Environment::Step FaseEnvironment::step(int action) {
    if (k_ < 1 || k_ >= static_cast<int>(snapshots_.size())) throw std::logic_error("step() outside an episode");
    const Snapshot& snap = snapshots_[static_cast<std::size_t>(k_)];
    estimator_.step(snap, agent::ActionGrid::coefficients(action));
    const FilterState& s = estimator_.state();

    Step out;
    if (bed_.scenario.training.reward_mode == agent::RewardMode::SynchronizedOracle) {
        const Snapshot sync = synthesize(*bed_.model, truth_[static_cast<std::size_t>(k_)], snap.t,
                                         derive_seed(episode_seed_, "env.oracle"));
        const WlsResult ref = wls_static(*bed_.model, sync, bed_.scenario.estimator);
        out.reward = agent::reward(ref.state.x(), s.x_hat);
    } else {
        out.reward = agent::reward(s.x_tilde, s.x_hat);
    }
    ++k_;
    out.terminal = k_ >= static_cast<int>(snapshots_.size());
    out.observation = observation();
    return out;
}

}  // namespace gridfase

#pragma once

#include <cstdint>

#include "gridfase/dqn.hpp"
#include "gridfase/harness.hpp"

namespace gridfase {

/// One episode per slow-rate window: the reset anchors the filter with WLS at a refresh step,
/// the agent then picks coefficients for the N - 1 intermediate steps and the episode ends
/// at the next refresh.
class FaseEnvironment : public agent::Environment {
public:
    /// With `randomize`, every episode draws a fresh window start and profile/noise seed;
    /// otherwise each episode replays the window at the scenario start with `seed`.
    FaseEnvironment(const Testbed& bed, std::uint64_t seed, bool randomize = true);

    int state_dim() const override { return bed_.model->state_dim(); }
    int pmu_count() const override { return bed_.model->fast_count(); }
    Eigen::VectorXd reset() override;
    Step step(int action) override;

    int episode() const { return episode_; }
    int decisions_per_episode() const { return bed_.scenario.timing.slow_ratio - 1; }
    const FaseEstimator& estimator() const { return estimator_; }

private:
    Eigen::VectorXd observation() const;

    const Testbed& bed_;
    std::uint64_t seed_;
    bool randomize_;
    Rng window_rng_;
    FaseEstimator estimator_;
    std::vector<SystemState> truth_;
    std::vector<Snapshot> snapshots_;
    std::uint64_t episode_seed_ = 0;
    int episode_ = -1;
    int k_ = 0;
};

}  // namespace gridfase

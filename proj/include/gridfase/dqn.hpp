#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "gridfase/estimator.hpp"
#include "gridfase/mlp.hpp"
#include "gridfase/seed.hpp"

namespace gridfase::agent {

/// Joint (alpha, beta) grid, 11 x 11 values at step 0.1. Index = 11 * alpha_idx + beta_idx.
struct ActionGrid {
    static constexpr int kLevels = 11;
    static constexpr int kSize = kLevels * kLevels;
    static constexpr double kStep = 0.1;

    static SmoothingCoefficients coefficients(int index);
    /// Nearest grid index for a coefficient pair.
    static int index(SmoothingCoefficients c);
};

/// Per-dimension running mean/scale (Welford). Frozen once training data has warmed it up.
class Normalizer {
public:
    Normalizer() = default;
    explicit Normalizer(int dim);
    Normalizer(std::vector<double> mean, std::vector<double> scale);

    int dim() const { return static_cast<int>(mean_.size()); }
    void update(std::span<const double> raw);
    void freeze() { frozen_ = true; }
    bool frozen() const { return frozen_; }
    std::uint64_t count() const { return count_; }

    const std::vector<double>& mean() const { return mean_; }
    std::vector<double> scale() const;
    void apply(std::span<const double> raw, std::span<double> out) const;

private:
    std::vector<double> mean_;
    std::vector<double> m2_;
    std::vector<double> fixed_scale_;  ///< set when restored from a checkpoint
    std::uint64_t count_ = 0;
    bool frozen_ = false;
};

/// Concatenation [x_hat_prev, x_tilde_prev, p_t], standardized by `norm`.
/// Throws DimensionMismatch when the blocks do not add up to the normalizer's dimension.
std::vector<double> observe(const Eigen::VectorXd& x_hat_prev, const Eigen::VectorXd& x_tilde_prev,
                            const Eigen::VectorXd& pmu, const Normalizer& norm);
/// Unstandardized concatenation.
Eigen::VectorXd raw_observation(const Eigen::VectorXd& x_hat_prev, const Eigen::VectorXd& x_tilde_prev,
                                const Eigen::VectorXd& pmu);

/// Epsilon-greedy: uniform with probability epsilon, else argmax with ties to the lowest index.
int act(std::span<const double> q_values, double epsilon, Rng& rng);
int greedy(std::span<const double> q_values);

/// -(x_tilde - x_hat)^T (x_tilde - x_hat); the second half of each vector holds angles and is wrapped.
double reward(const Eigen::VectorXd& x_tilde, const Eigen::VectorXd& x_hat);

struct Transition {
    std::vector<double> state;
    int action = 0;
    double reward = 0.0;
    std::vector<double> next_state;
    bool terminal = false;
};

/// r + gamma max_a Q_target(s', a), or r for terminal transitions. When `online` is given the
/// action is picked by the online network and valued by the target network (double Q-learning).
double bellman_target(const Mlp& q_target, const Transition& tr, double gamma, const Mlp* online = nullptr);

/// Fixed-capacity FIFO buffer with uniform sampling.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(Transition tr);
    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Transition& operator[](std::size_t i) const { return items_[i]; }
    std::vector<const Transition*> sample(std::size_t batch, Rng& rng) const;

private:
    std::size_t capacity_;
    std::deque<Transition> items_;
};

enum class RewardMode { PredictionGap, SynchronizedOracle };

struct TrainConfig {
    double gamma = 0.95;
    double learning_rate = 1e-3;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    double epsilon_decay = 0.995;  ///< per episode: eps_k = end + (start - end) decay^k
    std::size_t replay_capacity = 50000;
    std::size_t batch_size = 64;
    std::size_t warmup = 500;  ///< transitions collected before the first gradient step
    int target_sync = 200;     ///< gradient steps between hard target syncs; 1 = single network
    int episodes = 2000;
    std::vector<int> hidden{128, 128};
    Head head = Head::Linear;
    bool double_q = false;
    int updates_per_step = 1;  ///< gradient steps per environment step once warm
    /// Rewards are multiplied by this before training. 0 selects 1 / mean|r| over the warm-up transitions.
    double reward_scale = 0.0;
    RewardMode reward_mode = RewardMode::PredictionGap;
};

/// One SGD step on mean 0.5 (Q(s, a) - target)^2 over the batch; returns the batch loss before the step.
/// Gradient flows only through Q(s, a) of the online network.
double train_step(Mlp& q, const Mlp& q_target, std::span<const Transition* const> batch, const TrainConfig& config);

/// Loss and its gradient without updating parameters (the gradient is overwritten).
double loss_and_gradient(const Mlp& q, const Mlp& q_target, std::span<const Transition* const> batch, double gamma,
                         std::span<double> grad, bool double_q = false);

/// Episodic environment driven by the trainer.
class Environment {
public:
    struct Step {
        Eigen::VectorXd observation;  ///< raw, unstandardized
        double reward = 0.0;
        bool terminal = false;
    };

    virtual ~Environment() = default;
    virtual int state_dim() const = 0;
    virtual int pmu_count() const = 0;
    int observation_dim() const { return 2 * state_dim() + pmu_count(); }
    /// Starts the next episode and returns the observation for its first decision.
    virtual Eigen::VectorXd reset() = 0;
    virtual Step step(int action) = 0;
};

/// Deployable greedy policy: frozen normalizer + Q-network.
struct Agent {
    int state_dim = 0;
    int pmu_count = 0;
    Normalizer normalizer;
    Mlp network;

    std::vector<double> q_values(const Eigen::VectorXd& raw_observation) const;
    int greedy_action(const Eigen::VectorXd& raw_observation) const;
    SmoothingCoefficients choose(const Eigen::VectorXd& raw_observation) const {
        return ActionGrid::coefficients(greedy_action(raw_observation));
    }
};

struct EpisodeLog {
    int episode = 0;
    double total_reward = 0.0;  ///< unscaled
    double epsilon = 0.0;
    double loss_mean = 0.0;
};

struct TrainResult {
    Agent agent;
    std::vector<EpisodeLog> log;
    double reward_scale = 1.0;
};

TrainResult train_offline(Environment& env, const TrainConfig& config, std::uint64_t seed,
                          const std::function<void(const EpisodeLog&)>& progress = {});

/// Greedy rollout of `episodes` episodes; returns the unscaled total reward per episode.
std::vector<double> evaluate_greedy(Environment& env, const Agent& agent, int episodes);

void write_training_log_csv(const std::filesystem::path& path, const std::vector<EpisodeLog>& log);

/// Versioned binary checkpoint with dimension header and FNV-1a checksum.
void save_agent(const Agent& agent, const std::filesystem::path& path);
/// Throws ChecksumMismatch on truncation/corruption, DimensionMismatch when the stored
/// dimensions differ from the expected ones (pass -1 to skip a check).
Agent load_agent(const std::filesystem::path& path, int expected_state_dim = -1, int expected_pmu_count = -1);

}  // namespace gridfase::agent

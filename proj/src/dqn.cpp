#include "gridfase/dqn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "gridfase/csv.hpp"
#include "gridfase/errors.hpp"
#include "gridfase/kernels.hpp"
#include "gridfase/powerflow.hpp"

namespace gridfase::agent {

SmoothingCoefficients ActionGrid::coefficients(int index) {
    if (index < 0 || index >= kSize) throw std::out_of_range("action index outside the grid");
    return {(index / kLevels) * kStep, (index % kLevels) * kStep};
}

int ActionGrid::index(SmoothingCoefficients c) {
    const int a = std::clamp(static_cast<int>(std::lround(c.alpha / kStep)), 0, kLevels - 1);
    const int b = std::clamp(static_cast<int>(std::lround(c.beta / kStep)), 0, kLevels - 1);
    return a * kLevels + b;
}

Normalizer::Normalizer(int dim) : mean_(static_cast<std::size_t>(dim), 0.0), m2_(static_cast<std::size_t>(dim), 0.0) {}

Normalizer::Normalizer(std::vector<double> mean, std::vector<double> scale)
    : mean_(std::move(mean)), m2_(mean_.size(), 0.0), fixed_scale_(std::move(scale)), frozen_(true) {
    if (fixed_scale_.size() != mean_.size()) throw DimensionMismatch("normalizer mean/scale size mismatch");
}

void Normalizer::update(std::span<const double> raw) {
    if (frozen_) return;
    if (raw.size() != mean_.size()) throw DimensionMismatch("observation size does not match the normalizer");
    ++count_;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double d = raw[i] - mean_[i];
        mean_[i] += d / static_cast<double>(count_);
        m2_[i] += d * (raw[i] - mean_[i]);
    }
}

std::vector<double> Normalizer::scale() const {
    if (!fixed_scale_.empty()) return fixed_scale_;
    std::vector<double> s(mean_.size(), 1.0);
    if (count_ < 2) return s;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double sd = std::sqrt(m2_[i] / static_cast<double>(count_ - 1));
        s[i] = sd > 1e-9 ? sd : 1.0;
    }
    return s;
}

void Normalizer::apply(std::span<const double> raw, std::span<double> out) const {
    if (raw.size() != mean_.size() || out.size() != mean_.size()) {
        throw DimensionMismatch("observation size does not match the normalizer");
    }
    const std::vector<double> s = scale();
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - mean_[i]) / s[i];
}

Eigen::VectorXd raw_observation(const Eigen::VectorXd& x_hat_prev, const Eigen::VectorXd& x_tilde_prev,
                                const Eigen::VectorXd& pmu) {
    if (x_hat_prev.size() != x_tilde_prev.size()) throw DimensionMismatch("estimate and prediction sizes differ");
    Eigen::VectorXd s(x_hat_prev.size() + x_tilde_prev.size() + pmu.size());
    s << x_hat_prev, x_tilde_prev, pmu;
    return s;
}

std::vector<double> observe(const Eigen::VectorXd& x_hat_prev, const Eigen::VectorXd& x_tilde_prev,
                            const Eigen::VectorXd& pmu, const Normalizer& norm) {
    const Eigen::VectorXd raw = raw_observation(x_hat_prev, x_tilde_prev, pmu);
    if (raw.size() != norm.dim()) throw DimensionMismatch("observation blocks do not match the normalizer dimension");
    std::vector<double> out(static_cast<std::size_t>(raw.size()));
    norm.apply(std::span<const double>(raw.data(), static_cast<std::size_t>(raw.size())), out);
    return out;
}

int greedy(std::span<const double> q_values) {
    int best = 0;
    for (std::size_t i = 1; i < q_values.size(); ++i) {
        if (q_values[i] > q_values[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    }
    return best;
}

int act(std::span<const double> q_values, double epsilon, Rng& rng) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon must lie in [0, 1]");
    if (epsilon > 0.0) {
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        if (coin(rng) < epsilon) {
            std::uniform_int_distribution<int> pick(0, static_cast<int>(q_values.size()) - 1);
            return pick(rng);
        }
    }
    return greedy(q_values);
}

double reward(const Eigen::VectorXd& x_tilde, const Eigen::VectorXd& x_hat) {
    if (x_tilde.size() != x_hat.size()) throw DimensionMismatch("reward operands differ in size");
    const Eigen::Index half = x_tilde.size() / 2;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < x_tilde.size(); ++i) {
        const double d = i < half ? x_tilde[i] - x_hat[i] : wrap_angle(x_tilde[i] - x_hat[i]);
        acc += d * d;
    }
    return -acc;
}

double bellman_target(const Mlp& q_target, const Transition& tr, double gamma, const Mlp* online) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0, 1]");
    if (tr.terminal || gamma == 0.0) return tr.reward;
    const std::vector<double> q = q_target.evaluate(tr.next_state);
    if (online) return tr.reward + gamma * q[static_cast<std::size_t>(greedy(online->evaluate(tr.next_state)))];
    return tr.reward + gamma * *std::max_element(q.begin(), q.end());
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
}

void ReplayBuffer::push(Transition tr) {
    if (items_.size() == capacity_) items_.pop_front();
    items_.push_back(std::move(tr));
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t batch, Rng& rng) const {
    if (items_.empty()) throw std::logic_error("sampling from an empty replay buffer");
    std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
    std::vector<const Transition*> out(batch);
    for (auto& p : out) p = &items_[pick(rng)];
    return out;
}

double loss_and_gradient(const Mlp& q, const Mlp& q_target, std::span<const Transition* const> batch, double gamma,
                         std::span<double> grad, bool double_q) {
    if (batch.empty()) throw std::invalid_argument("empty training batch");
    std::fill(grad.begin(), grad.end(), 0.0);
    Mlp::Workspace ws = q.workspace();
    std::vector<double> d_out(static_cast<std::size_t>(q.output_dim()), 0.0);
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (const Transition* tr : batch) {
        const double target = bellman_target(q_target, *tr, gamma, double_q ? &q : nullptr);
        q.forward(tr->state, ws);
        const auto a = static_cast<std::size_t>(tr->action);
        const double diff = ws.out[a] - target;
        loss += 0.5 * diff * diff;
        d_out[a] = diff * inv_batch;
        q.backward(ws, d_out, grad);
        d_out[a] = 0.0;
    }
    return loss * inv_batch;
}

double train_step(Mlp& q, const Mlp& q_target, std::span<const Transition* const> batch, const TrainConfig& config) {
    std::vector<double> grad(q.parameter_count());
    const double loss = loss_and_gradient(q, q_target, batch, config.gamma, grad, config.double_q);
    kernels::axpy(-config.learning_rate, grad, q.parameters());
    return loss;
}

std::vector<double> Agent::q_values(const Eigen::VectorXd& raw) const {
    std::vector<double> s(static_cast<std::size_t>(raw.size()));
    normalizer.apply(std::span<const double>(raw.data(), s.size()), s);
    return network.evaluate(s);
}

int Agent::greedy_action(const Eigen::VectorXd& raw) const { return greedy(q_values(raw)); }

namespace {

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Transition prepared(const Transition& raw, const Normalizer& norm, double scale) {
    Transition tr;
    tr.state.resize(raw.state.size());
    tr.next_state.resize(raw.next_state.size());
    norm.apply(raw.state, tr.state);
    norm.apply(raw.next_state, tr.next_state);
    tr.action = raw.action;
    tr.reward = raw.reward * scale;
    tr.terminal = raw.terminal;
    return tr;
}

}  // namespace

TrainResult train_offline(Environment& env, const TrainConfig& config, std::uint64_t seed,
                          const std::function<void(const EpisodeLog&)>& progress) {
    if (config.batch_size == 0) throw std::invalid_argument("batch size must be positive");
    if (config.target_sync < 1) throw std::invalid_argument("target sync period must be at least 1");

    std::vector<int> sizes{env.observation_dim()};
    sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
    sizes.push_back(config.head == Head::Dueling ? ActionGrid::kSize + 1 : ActionGrid::kSize);

    if (config.updates_per_step < 1) throw std::invalid_argument("updates_per_step must be at least 1");
    Mlp online(sizes, derive_seed(seed, "agent.init"), config.head);
    Mlp target = online;
    Normalizer norm(env.observation_dim());
    ReplayBuffer replay(config.replay_capacity);
    Rng explore = make_rng(seed, "agent.explore");
    Rng sampler = make_rng(seed, "agent.replay");

    double scale = config.reward_scale;
    double abs_reward_sum = 0.0;
    std::size_t reward_count = 0;
    const std::size_t warmup = std::max(config.warmup, config.batch_size);
    long gradient_steps = 0;

    TrainResult result;
    std::vector<double> s_norm(static_cast<std::size_t>(env.observation_dim()));
    std::vector<Transition> batch_storage(config.batch_size);
    std::vector<const Transition*> batch(config.batch_size);

    for (int ep = 0; ep < config.episodes; ++ep) {
        const double eps =
            config.epsilon_end + (config.epsilon_start - config.epsilon_end) * std::pow(config.epsilon_decay, ep);
        Eigen::VectorXd s = env.reset();
        norm.update(to_vector(s));
        double total = 0.0, loss_sum = 0.0;
        int loss_count = 0;

        for (;;) {
            norm.apply(std::span<const double>(s.data(), s_norm.size()), s_norm);
            const int a = act(online.evaluate(s_norm), eps, explore);
            Environment::Step st = env.step(a);
            total += st.reward;
            norm.update(to_vector(st.observation));
            replay.push({to_vector(s), a, st.reward, to_vector(st.observation), st.terminal});
            if (scale <= 0.0) {
                abs_reward_sum += std::abs(st.reward);
                ++reward_count;
            }

            if (replay.size() >= warmup) {
                norm.freeze();
                if (scale <= 0.0) {
                    const double mean_abs = abs_reward_sum / static_cast<double>(std::max<std::size_t>(reward_count, 1));
                    scale = mean_abs > 0.0 ? 1.0 / mean_abs : 1.0;
                }
                for (int u = 0; u < config.updates_per_step; ++u) {
                    const auto picks = replay.sample(config.batch_size, sampler);
                    for (std::size_t i = 0; i < picks.size(); ++i) {
                        batch_storage[i] = prepared(*picks[i], norm, scale);
                        batch[i] = &batch_storage[i];
                    }
                    loss_sum += train_step(online, target, batch, config);
                    ++loss_count;
                    if (++gradient_steps % config.target_sync == 0) target = online;
                }
            }
            s = std::move(st.observation);
            if (st.terminal) break;
        }

        EpisodeLog entry{ep, total, eps, loss_count ? loss_sum / loss_count : 0.0};
        result.log.push_back(entry);
        if (progress) progress(entry);
    }

    norm.freeze();
    result.agent = Agent{env.state_dim(), env.pmu_count(), std::move(norm), std::move(online)};
    result.reward_scale = scale > 0.0 ? scale : 1.0;
    return result;
}

std::vector<double> evaluate_greedy(Environment& env, const Agent& agent, int episodes) {
    std::vector<double> totals;
    for (int ep = 0; ep < episodes; ++ep) {
        Eigen::VectorXd s = env.reset();
        double total = 0.0;
        for (;;) {
            Environment::Step st = env.step(agent.greedy_action(s));
            total += st.reward;
            s = std::move(st.observation);
            if (st.terminal) break;
        }
        totals.push_back(total);
    }
    return totals;
}

void write_training_log_csv(const std::filesystem::path& path, const std::vector<EpisodeLog>& log) {
    csv::Writer w(path, "episode,total_reward,epsilon,loss_mean");
    for (const EpisodeLog& e : log) w.row(e.episode, e.total_reward, e.epsilon, e.loss_mean);
}

}  // namespace gridfase::agent

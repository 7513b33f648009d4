#include "gridfase/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "gridfase/errors.hpp"
#include "gridfase/kernels.hpp"

namespace gridfase::agent {

void Mlp::index_layers() {
    if (sizes_.size() < 2) throw std::invalid_argument("network needs an input and an output layer");
    for (int s : sizes_) {
        if (s <= 0) throw std::invalid_argument("layer sizes must be positive");
    }
    offsets_.clear();
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        offsets_.push_back(total);
        total += static_cast<std::size_t>(sizes_[l + 1]) * static_cast<std::size_t>(sizes_[l] + 1);
    }
    offsets_.push_back(total);
    if (head_ == Head::Dueling && sizes_.back() < 2) throw std::invalid_argument("dueling head needs two or more outputs");
}

Mlp::Mlp(std::vector<int> sizes, std::uint64_t seed, Head head) : sizes_(std::move(sizes)), head_(head) {
    index_layers();
    params_.assign(offsets_.back(), 0.0);
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        const double limit = std::sqrt(6.0 / sizes_[l]);
        std::uniform_real_distribution<double> u(-limit, limit);
        const std::size_t count = static_cast<std::size_t>(sizes_[l + 1]) * static_cast<std::size_t>(sizes_[l]);
        for (std::size_t i = 0; i < count; ++i) params_[weight_offset(l) + i] = u(rng);
    }
}

Mlp::Mlp(std::vector<int> sizes, std::vector<double> parameters, Head head)
    : sizes_(std::move(sizes)), head_(head), params_(std::move(parameters)) {
    index_layers();
    if (params_.size() != offsets_.back()) throw DimensionMismatch("parameter count does not match layer sizes");
}

Mlp::Workspace Mlp::workspace() const {
    Workspace ws;
    for (int s : sizes_) {
        ws.act.emplace_back(static_cast<std::size_t>(s), 0.0);
        ws.delta.emplace_back(static_cast<std::size_t>(s), 0.0);
    }
    ws.out.assign(static_cast<std::size_t>(output_dim()), 0.0);
    return ws;
}

void Mlp::forward(std::span<const double> input, Workspace& ws) const {
    if (input.size() != static_cast<std::size_t>(input_dim())) throw DimensionMismatch("network input size mismatch");
    std::copy(input.begin(), input.end(), ws.act[0].begin());
    const std::size_t layers = sizes_.size() - 1;
    for (std::size_t l = 0; l < layers; ++l) {
        const auto rows = static_cast<std::size_t>(sizes_[l + 1]);
        const auto cols = static_cast<std::size_t>(sizes_[l]);
        const std::span<const double> w(params_.data() + weight_offset(l), rows * cols);
        const std::span<const double> b(params_.data() + bias_offset(l), rows);
        kernels::gemv(w, rows, cols, ws.act[l], b, ws.act[l + 1]);
        if (l + 1 < layers) {
            for (double& a : ws.act[l + 1]) a = std::max(a, 0.0);
        }
    }
    const std::vector<double>& last = ws.act.back();
    if (head_ == Head::Linear) {
        std::copy(last.begin(), last.end(), ws.out.begin());
        return;
    }
    // last = [V, A_0 .. A_{k-1}]
    const std::size_t k = ws.out.size();
    double mean_a = 0.0;
    for (std::size_t a = 0; a < k; ++a) mean_a += last[a + 1];
    mean_a /= static_cast<double>(k);
    for (std::size_t a = 0; a < k; ++a) ws.out[a] = last[0] + last[a + 1] - mean_a;
}

std::vector<double> Mlp::evaluate(std::span<const double> input) const {
    Workspace ws = workspace();
    forward(input, ws);
    return ws.out;
}

void Mlp::backward(Workspace& ws, std::span<const double> d_output, std::span<double> grad) const {
    if (grad.size() != params_.size()) throw DimensionMismatch("gradient buffer size mismatch");
    const std::size_t layers = sizes_.size() - 1;
    if (d_output.size() != ws.out.size()) throw DimensionMismatch("output gradient size mismatch");
    std::vector<double>& top = ws.delta[layers];
    if (head_ == Head::Linear) {
        std::copy(d_output.begin(), d_output.end(), top.begin());
    } else {
        double sum = 0.0;
        for (double d : d_output) sum += d;
        top[0] = sum;
        const double mean_d = sum / static_cast<double>(d_output.size());
        for (std::size_t a = 0; a < d_output.size(); ++a) top[a + 1] = d_output[a] - mean_d;
    }
    for (std::size_t l = layers; l-- > 0;) {
        const auto rows = static_cast<std::size_t>(sizes_[l + 1]);
        const auto cols = static_cast<std::size_t>(sizes_[l]);
        std::span<double> gw(grad.data() + weight_offset(l), rows * cols);
        std::span<double> gb(grad.data() + bias_offset(l), rows);
        const std::vector<double>& delta = ws.delta[l + 1];
        kernels::ger(gw, rows, cols, 1.0, delta, ws.act[l]);
        kernels::axpy(1.0, delta, gb);
        if (l == 0) break;
        std::vector<double>& prev = ws.delta[l];
        std::fill(prev.begin(), prev.end(), 0.0);
        const std::span<const double> w(params_.data() + weight_offset(l), rows * cols);
        kernels::gemv_t(w, rows, cols, delta, prev);
        for (std::size_t i = 0; i < cols; ++i) {
            if (ws.act[l][i] <= 0.0) prev[i] = 0.0;
        }
    }
}

}  // namespace gridfase::agent

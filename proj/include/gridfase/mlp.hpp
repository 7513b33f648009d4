#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace gridfase::agent {

/// Output stage. A dueling head computes one extra unit V and reads the outputs as
/// Q_a = V + A_a - mean(A), so the state value is shared by every action.
enum class Head : std::uint8_t { Linear, Dueling };

/// Fully connected network, ReLU on hidden layers, linear output. All parameters live in one
/// flat vector laid out layer by layer as [W (out x in, row-major), b (out)].
class Mlp {
public:
    Mlp() = default;
    /// `sizes` = {input, hidden..., output}. He-uniform weights, zero biases. With a dueling head the
    /// last layer has output + 1 units.
    Mlp(std::vector<int> sizes, std::uint64_t seed, Head head = Head::Linear);
    Mlp(std::vector<int> sizes, std::vector<double> parameters, Head head = Head::Linear);

    int input_dim() const { return sizes_.front(); }
    int output_dim() const { return head_ == Head::Dueling ? sizes_.back() - 1 : sizes_.back(); }
    Head head() const { return head_; }
    const std::vector<int>& sizes() const { return sizes_; }
    std::size_t parameter_count() const { return params_.size(); }
    std::span<const double> parameters() const { return params_; }
    std::span<double> parameters() { return params_; }

    /// Layer activations of one forward pass; act[0] is the input, `out` the network output.
    struct Workspace {
        std::vector<std::vector<double>> act;
        std::vector<std::vector<double>> delta;
        std::vector<double> out;
    };
    Workspace workspace() const;

    void forward(std::span<const double> input, Workspace& ws) const;
    std::vector<double> evaluate(std::span<const double> input) const;

    /// Adds d(loss)/d(params) to `grad` given d(loss)/d(output) for the pass stored in `ws`.
    void backward(Workspace& ws, std::span<const double> d_output, std::span<double> grad) const;

private:
    std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
    std::size_t bias_offset(std::size_t layer) const {
        return offsets_[layer] + static_cast<std::size_t>(sizes_[layer + 1]) * static_cast<std::size_t>(sizes_[layer]);
    }
    void index_layers();

    std::vector<int> sizes_;
    Head head_ = Head::Linear;
    std::vector<std::size_t> offsets_;
    std::vector<double> params_;
};

}  // namespace gridfase::agent

#pragma once

#include "slowfast/autodiff.hpp"
#include "slowfast/tensor.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace slowfast {

struct ModelSpec {
    std::size_t data_dim = 2;
    std::size_t time_embed_dim = 32;
    std::vector<std::size_t> hidden = {128, 128};
    // Zero means unconditional.
    std::size_t num_classes = 0;
    double freq_base = 1e4;

    std::size_t input_dim() const noexcept { return data_dim + time_embed_dim; }
    bool conditional() const noexcept { return num_classes > 0; }
    // Validates dimensions; throws ContractError.
    void validate() const;

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

// Affine layer y = x·Wᵀ + b with W stored out×in.
struct Linear {
    Tensor weight;
    Tensor bias;
};

// Sinusoidal embedding: entry 2i = sin(tau / base^(2i/dim)), entry 2i+1 = cos(...).
std::vector<double> time_embed(double tau, std::size_t dim, double base = 1e4);

// Graph handles for one parameterization of the network.
struct BoundModel {
    std::vector<Var> weights;
    std::vector<Var> biases;
    std::optional<Var> cond_table;
};

// MLP velocity field v(x, tau, c). Hidden layers use SiLU; the output layer is
// linear. The class embedding, when present, is added to the time embedding.
class VelocityField {
public:
    VelocityField() = default;
    explicit VelocityField(ModelSpec spec);

    // Uniform ±1/sqrt(fan_in) weights, zero biases.
    static VelocityField init(const ModelSpec& spec, std::uint64_t seed);
    static VelocityField zeros(const ModelSpec& spec);

    const ModelSpec& spec() const noexcept { return spec_; }
    std::span<Linear> layers() noexcept { return layers_; }
    std::span<const Linear> layers() const noexcept { return layers_; }
    Tensor& cond_table() noexcept { return cond_table_; }
    const Tensor& cond_table() const noexcept { return cond_table_; }

    std::size_t parameter_count() const noexcept;
    // Every trainable tensor in a fixed order: W0, b0, W1, b1, ..., cond table.
    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;

    // classes: empty for an unconditional model, otherwise one id per row or a
    // single id broadcast to all rows.
    Tensor forward(const Tensor& x, double tau, std::span<const int> classes = {}) const;
    Tensor forward(const Tensor& x, std::span<const double> taus, std::span<const int> classes = {}) const;
    // Same result computed through an autodiff graph; used to cross-check forward().
    Tensor forward_graph(const Tensor& x, std::span<const double> taus, std::span<const int> classes = {}) const;

    // Places parameters into `g` as leaves.
    BoundModel bind(Graph& g, bool trainable) const;

    friend bool operator==(const VelocityField&, const VelocityField&);

private:
    ModelSpec spec_;
    std::vector<Linear> layers_;
    Tensor cond_table_;
};

bool bit_equal(const VelocityField& a, const VelocityField& b) noexcept;

// Builds the forward pass for `model`'s architecture using the bound parameters.
Var apply_model(Graph& g, const ModelSpec& spec, const BoundModel& params, Var x,
                std::span<const double> taus, std::span<const int> classes);

// Per-row class ids validated against the spec; throws ConditionError.
std::vector<std::size_t> resolve_classes(const ModelSpec& spec, std::size_t rows, std::span<const int> classes);

} // namespace slowfast

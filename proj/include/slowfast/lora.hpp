#pragma once

#include "slowfast/autodiff.hpp"
#include "slowfast/schedule.hpp"
#include "slowfast/velocity_model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace slowfast {

enum class LoraInit {
    // A ~ N(0, 0.02²), B = 0: the adapted model starts as the base model.
    gaussian_a_zero_b,
    // Both A and B ~ N(0, 0.02²).
    gaussian_both,
};

std::string to_string(LoraInit init);
LoraInit parse_lora_init(const std::string& text);

// Low-rank pair for one linear layer W (out×in): A is r×in, B is out×r.
struct LoraLayer {
    Tensor a;
    Tensor b;
};

// Rank used on a layer: the adapter rank capped at min(out, in), so narrow
// layers such as the 2-wide output get a full-rank pair.
std::size_t layer_rank(std::size_t rank, const Tensor& weight) noexcept;

// One adapter covers every linear layer of the base model, in layer order.
// The weight delta is (alpha / rank)·B·A with the nominal rank.
struct LoraAdapter {
    std::size_t rank = 8;
    double alpha = 32.0;
    std::vector<LoraLayer> layers;

    double scale() const noexcept { return alpha / static_cast<double>(rank); }

    static LoraAdapter init(const VelocityField& base, std::size_t rank, double alpha,
                            LoraInit init, std::uint64_t seed);

    // Throws AdapterError if shapes do not match `base`.
    void check_compatible(const VelocityField& base) const;

    std::vector<Tensor*> parameters();
    std::size_t parameter_count() const noexcept;
};

bool bit_equal(const LoraAdapter& a, const LoraAdapter& b) noexcept;

// Dense (alpha/r)·B·A for one layer.
Tensor weight_delta(const LoraLayer& layer, double scale);

// Copy of base with W replaced by W + (alpha/r)·B·A in every layer.
VelocityField effective_weights(const VelocityField& base, const LoraAdapter& adapter);

// Graph handles of an adapter's trainable factors.
struct BoundAdapter {
    std::vector<Var> a;
    std::vector<Var> b;
};

// Binds the frozen base as constants and the adapter factors as leaves; the
// returned model uses W + scale·B·A per layer.
BoundModel bind_adapted(Graph& g, const VelocityField& base, const LoraAdapter& adapter, bool train_adapter,
                        BoundAdapter* handles = nullptr);

enum class RoutingMode {
    // No adapters at all: the bare base model on every step.
    none,
    slow_fast,
    // Slow expert on slow steps, bare base on fast steps.
    slow_only,
    // Bare base on slow steps, fast expert on fast steps.
    fast_only,
    // One adapter on every step.
    single,
};

std::string to_string(RoutingMode mode);

enum class ExpertTag { base, slow, fast, single };

struct ExpertSet {
    RoutingMode mode = RoutingMode::none;
    std::optional<LoraAdapter> slow;
    std::optional<LoraAdapter> fast;
    std::optional<LoraAdapter> single;

    static ExpertSet bare() { return {}; }
    static ExpertSet slow_fast(LoraAdapter slow, LoraAdapter fast);
    static ExpertSet slow_only(LoraAdapter slow);
    static ExpertSet fast_only(LoraAdapter fast);
    static ExpertSet single_adapter(LoraAdapter adapter);

    // Throws ConfigError if the adapters required by `mode` are missing.
    void validate() const;
};

// Which expert handles executed step `step_index` (a base-grid index).
ExpertTag route_tag(const ExpertSet& experts, std::size_t step_index, const PhaseSchedule& schedule);

// Adapter for the step, or nullptr when the bare base model runs.
const LoraAdapter* route(const ExpertSet& experts, std::size_t step_index, const PhaseSchedule& schedule);

} // namespace slowfast

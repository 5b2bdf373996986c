#include "slowfast/lora.hpp"

#include "slowfast/error.hpp"
#include "slowfast/kernels.hpp"
#include "slowfast/rng.hpp"

#include <algorithm>

namespace slowfast {

namespace {
constexpr double kInitStd = 0.02;
}

std::size_t layer_rank(std::size_t rank, const Tensor& weight) noexcept {
    return std::min({rank, weight.rows(), weight.cols()});
}

std::string to_string(LoraInit init) {
    return init == LoraInit::gaussian_both ? "gaussian_both" : "gaussian_a_zero_b";
}

LoraInit parse_lora_init(const std::string& text) {
    if (text == "gaussian_a_zero_b") {
        return LoraInit::gaussian_a_zero_b;
    }
    if (text == "gaussian_both") {
        return LoraInit::gaussian_both;
    }
    throw ConfigError("unknown lora_init '" + text + "'");
}

LoraAdapter LoraAdapter::init(const VelocityField& base, std::size_t rank, double alpha, LoraInit init,
                              std::uint64_t seed) {
    if (rank == 0) {
        throw AdapterError("adapter rank must be positive");
    }
    if (!(alpha > 0.0)) {
        throw AdapterError("adapter alpha must be positive");
    }
    LoraAdapter adapter;
    adapter.rank = rank;
    adapter.alpha = alpha;
    CounterRng rng(seed, Stream::init, 0x10a);
    for (const Linear& layer : base.layers()) {
        const std::size_t out = layer.weight.rows();
        const std::size_t in = layer.weight.cols();
        const std::size_t r = layer_rank(rank, layer.weight);
        LoraLayer l{Tensor(r, in), Tensor(out, r)};
        for (double& v : l.a.data()) {
            v = kInitStd * rng.normal();
        }
        if (init == LoraInit::gaussian_both) {
            for (double& v : l.b.data()) {
                v = kInitStd * rng.normal();
            }
        }
        adapter.layers.push_back(std::move(l));
    }
    return adapter;
}

void LoraAdapter::check_compatible(const VelocityField& base) const {
    const auto base_layers = base.layers();
    if (layers.size() != base_layers.size()) {
        throw AdapterError("adapter has " + std::to_string(layers.size()) + " layers, model has " +
                           std::to_string(base_layers.size()));
    }
    if (rank == 0 || !(alpha > 0.0)) {
        throw AdapterError("adapter rank and alpha must be positive");
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const Tensor& w = base_layers[i].weight;
        const LoraLayer& l = layers[i];
        const std::size_t r = layer_rank(rank, w);
        if (l.a.rows() != r || l.a.cols() != w.cols() || l.b.rows() != w.rows() || l.b.cols() != r) {
            throw AdapterError("adapter layer " + std::to_string(i) + " (A " + l.a.shape_str() + ", B " +
                               l.b.shape_str() + ") does not fit weight " + w.shape_str());
        }
    }
}

std::vector<Tensor*> LoraAdapter::parameters() {
    std::vector<Tensor*> out;
    for (LoraLayer& l : layers) {
        out.push_back(&l.a);
        out.push_back(&l.b);
    }
    return out;
}

std::size_t LoraAdapter::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const LoraLayer& l : layers) {
        n += l.a.size() + l.b.size();
    }
    return n;
}

bool bit_equal(const LoraAdapter& a, const LoraAdapter& b) noexcept {
    if (a.rank != b.rank || a.alpha != b.alpha || a.layers.size() != b.layers.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        if (!bit_equal(a.layers[i].a, b.layers[i].a) || !bit_equal(a.layers[i].b, b.layers[i].b)) {
            return false;
        }
    }
    return true;
}

Tensor weight_delta(const LoraLayer& layer, double scale) {
    Tensor delta;
    kernels::gemm_nn(layer.b, layer.a, delta, false);
    for (double& v : delta.data()) {
        v *= scale;
    }
    return delta;
}

VelocityField effective_weights(const VelocityField& base, const LoraAdapter& adapter) {
    adapter.check_compatible(base);
    VelocityField out = base;
    auto layers = out.layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const Tensor delta = weight_delta(adapter.layers[i], adapter.scale());
        auto w = layers[i].weight.data();
        for (std::size_t j = 0; j < w.size(); ++j) {
            w[j] += delta[j];
        }
    }
    return out;
}

BoundModel bind_adapted(Graph& g, const VelocityField& base, const LoraAdapter& adapter, bool train_adapter,
                        BoundAdapter* handles) {
    adapter.check_compatible(base);
    BoundModel bound;
    const auto layers = base.layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const Var a = g.leaf(adapter.layers[i].a, train_adapter);
        const Var b = g.leaf(adapter.layers[i].b, train_adapter);
        if (handles != nullptr) {
            handles->a.push_back(a);
            handles->b.push_back(b);
        }
        const Var delta = g.scale(g.matmul(b, a), adapter.scale());
        bound.weights.push_back(g.add(g.constant(layers[i].weight), delta));
        bound.biases.push_back(g.constant(layers[i].bias));
    }
    if (base.spec().conditional()) {
        bound.cond_table = g.constant(base.cond_table());
    }
    return bound;
}

std::string to_string(RoutingMode mode) {
    switch (mode) {
    case RoutingMode::none:
        return "none";
    case RoutingMode::slow_fast:
        return "slow-fast";
    case RoutingMode::slow_only:
        return "slow-only";
    case RoutingMode::fast_only:
        return "fast-only";
    case RoutingMode::single:
        return "single";
    }
    return "?";
}

ExpertSet ExpertSet::slow_fast(LoraAdapter slow, LoraAdapter fast) {
    ExpertSet e;
    e.mode = RoutingMode::slow_fast;
    e.slow = std::move(slow);
    e.fast = std::move(fast);
    return e;
}

ExpertSet ExpertSet::slow_only(LoraAdapter slow) {
    ExpertSet e;
    e.mode = RoutingMode::slow_only;
    e.slow = std::move(slow);
    return e;
}

ExpertSet ExpertSet::fast_only(LoraAdapter fast) {
    ExpertSet e;
    e.mode = RoutingMode::fast_only;
    e.fast = std::move(fast);
    return e;
}

ExpertSet ExpertSet::single_adapter(LoraAdapter adapter) {
    ExpertSet e;
    e.mode = RoutingMode::single;
    e.single = std::move(adapter);
    return e;
}

void ExpertSet::validate() const {
    const bool need_slow = mode == RoutingMode::slow_fast || mode == RoutingMode::slow_only;
    const bool need_fast = mode == RoutingMode::slow_fast || mode == RoutingMode::fast_only;
    if ((need_slow && !slow) || (need_fast && !fast) || (mode == RoutingMode::single && !single)) {
        throw ConfigError("expert set in mode " + to_string(mode) + " is missing an adapter");
    }
    if (slow && fast && slow->layers.size() != fast->layers.size()) {
        throw AdapterError("slow and fast experts target different model signatures");
    }
}

ExpertTag route_tag(const ExpertSet& experts, std::size_t step_index, const PhaseSchedule& schedule) {
    const bool is_slow = schedule.in_slow(step_index);
    if (!is_slow && !schedule.in_fast(step_index)) {
        throw ContractError("step index " + std::to_string(step_index) + " is not executed by the schedule");
    }
    switch (experts.mode) {
    case RoutingMode::none:
        return ExpertTag::base;
    case RoutingMode::slow_fast:
        return is_slow ? ExpertTag::slow : ExpertTag::fast;
    case RoutingMode::slow_only:
        return is_slow ? ExpertTag::slow : ExpertTag::base;
    case RoutingMode::fast_only:
        return is_slow ? ExpertTag::base : ExpertTag::fast;
    case RoutingMode::single:
        return ExpertTag::single;
    }
    return ExpertTag::base;
}

const LoraAdapter* route(const ExpertSet& experts, std::size_t step_index, const PhaseSchedule& schedule) {
    experts.validate();
    switch (route_tag(experts, step_index, schedule)) {
    case ExpertTag::base:
        return nullptr;
    case ExpertTag::slow:
        return &*experts.slow;
    case ExpertTag::fast:
        return &*experts.fast;
    case ExpertTag::single:
        return &*experts.single;
    }
    return nullptr;
}

} // namespace slowfast

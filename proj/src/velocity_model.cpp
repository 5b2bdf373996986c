#include "slowfast/velocity_model.hpp"

#include "slowfast/error.hpp"
#include "slowfast/kernels.hpp"
#include "slowfast/rng.hpp"

#include <cmath>
#include <string>

namespace slowfast {

void ModelSpec::validate() const {
    if (data_dim == 0) {
        throw ContractError("data_dim must be positive");
    }
    if (time_embed_dim == 0 || time_embed_dim % 2 != 0) {
        throw ContractError("time_embed_dim must be even and positive, got " + std::to_string(time_embed_dim));
    }
    for (std::size_t h : hidden) {
        if (h == 0) {
            throw ContractError("hidden widths must be positive");
        }
    }
    if (!(freq_base > 0.0)) {
        throw ContractError("freq_base must be positive");
    }
}

std::vector<double> time_embed(double tau, std::size_t dim, double base) {
    if (!(tau >= 0.0 && tau <= 1.0)) {
        throw DomainError("time_embed: tau must lie in [0,1], got " + std::to_string(tau));
    }
    if (dim == 0 || dim % 2 != 0) {
        throw ContractError("time_embed: dim must be even and positive, got " + std::to_string(dim));
    }
    std::vector<double> out(dim);
    for (std::size_t i = 0; i < dim / 2; ++i) {
        const double freq = std::pow(base, static_cast<double>(2 * i) / static_cast<double>(dim));
        const double arg = tau / freq;
        out[2 * i] = std::sin(arg);
        out[2 * i + 1] = std::cos(arg);
    }
    return out;
}

VelocityField::VelocityField(ModelSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    std::size_t in = spec_.input_dim();
    for (std::size_t h : spec_.hidden) {
        layers_.push_back({Tensor(h, in), Tensor(1, h)});
        in = h;
    }
    layers_.push_back({Tensor(spec_.data_dim, in), Tensor(1, spec_.data_dim)});
    if (spec_.conditional()) {
        cond_table_ = Tensor(spec_.num_classes, spec_.time_embed_dim);
    }
}

VelocityField VelocityField::zeros(const ModelSpec& spec) {
    return VelocityField(spec);
}

VelocityField VelocityField::init(const ModelSpec& spec, std::uint64_t seed) {
    VelocityField m(spec);
    CounterRng rng(seed, Stream::init);
    for (Linear& layer : m.layers_) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
        for (double& w : layer.weight.data()) {
            w = (2.0 * rng.uniform() - 1.0) * bound;
        }
    }
    if (spec.conditional()) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(spec.time_embed_dim));
        for (double& w : m.cond_table_.data()) {
            w = (2.0 * rng.uniform() - 1.0) * bound;
        }
    }
    return m;
}

std::size_t VelocityField::parameter_count() const noexcept {
    std::size_t n = cond_table_.size();
    for (const Linear& l : layers_) {
        n += l.weight.size() + l.bias.size();
    }
    return n;
}

std::vector<Tensor*> VelocityField::parameters() {
    std::vector<Tensor*> out;
    for (Linear& l : layers_) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
    }
    if (spec_.conditional()) {
        out.push_back(&cond_table_);
    }
    return out;
}

std::vector<const Tensor*> VelocityField::parameters() const {
    std::vector<const Tensor*> out;
    for (const Linear& l : layers_) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
    }
    if (spec_.conditional()) {
        out.push_back(&cond_table_);
    }
    return out;
}

BoundModel VelocityField::bind(Graph& g, bool trainable) const {
    BoundModel b;
    for (const Linear& l : layers_) {
        b.weights.push_back(g.leaf(l.weight, trainable));
        b.biases.push_back(g.leaf(l.bias, trainable));
    }
    if (spec_.conditional()) {
        b.cond_table = g.leaf(cond_table_, trainable);
    }
    return b;
}

std::vector<std::size_t> resolve_classes(const ModelSpec& spec, std::size_t rows, std::span<const int> classes) {
    if (!spec.conditional()) {
        if (!classes.empty()) {
            throw ConditionError("class ids given to an unconditional model");
        }
        return {};
    }
    if (classes.empty()) {
        throw ConditionError("conditional model requires a class id");
    }
    if (classes.size() != 1 && classes.size() != rows) {
        throw ConditionError("expected 1 or " + std::to_string(rows) + " class ids, got " +
                             std::to_string(classes.size()));
    }
    std::vector<std::size_t> ids(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const int c = classes.size() == 1 ? classes[0] : classes[r];
        if (c < 0 || static_cast<std::size_t>(c) >= spec.num_classes) {
            throw ConditionError("unknown class id " + std::to_string(c) + " (model has " +
                                 std::to_string(spec.num_classes) + " classes)");
        }
        ids[r] = static_cast<std::size_t>(c);
    }
    return ids;
}

Var apply_model(Graph& g, const ModelSpec& spec, const BoundModel& params, Var x,
                std::span<const double> taus, std::span<const int> classes) {
    const Tensor& xv = g.value(x);
    if (xv.cols() != spec.data_dim) {
        throw DimensionError("model expects " + std::to_string(spec.data_dim) + " data columns, got " +
                             xv.shape_str());
    }
    const std::size_t rows = xv.rows();
    if (taus.size() != 1 && taus.size() != rows) {
        throw DimensionError("expected 1 or " + std::to_string(rows) + " time values, got " +
                             std::to_string(taus.size()));
    }
    const auto ids = resolve_classes(spec, rows, classes);

    Tensor temb(rows, spec.time_embed_dim);
    std::vector<double> shared;
    if (taus.size() == 1) {
        shared = time_embed(taus[0], spec.time_embed_dim, spec.freq_base);
    }
    for (std::size_t r = 0; r < rows; ++r) {
        const std::vector<double> e =
            taus.size() == 1 ? shared : time_embed(taus[r], spec.time_embed_dim, spec.freq_base);
        std::copy(e.begin(), e.end(), temb.row(r).begin());
    }
    Var cond_slot = g.constant(std::move(temb));
    if (spec.conditional()) {
        cond_slot = g.add(cond_slot, g.gather_rows(*params.cond_table, ids));
    }
    Var h = g.concat_cols(x, cond_slot);
    const std::size_t n_layers = params.weights.size();
    for (std::size_t i = 0; i < n_layers; ++i) {
        h = g.add_bias(g.matmul(h, g.transpose(params.weights[i])), params.biases[i]);
        if (i + 1 < n_layers) {
            h = g.silu(h);
        }
    }
    return h;
}

Tensor VelocityField::forward(const Tensor& x, double tau, std::span<const int> classes) const {
    const double t[1] = {tau};
    return forward(x, std::span<const double>(t), classes);
}

Tensor VelocityField::forward(const Tensor& x, std::span<const double> taus, std::span<const int> classes) const {
    // Same kernels and operation order as apply_model, without building a tape.
    if (x.cols() != spec_.data_dim) {
        throw DimensionError("model expects " + std::to_string(spec_.data_dim) + " data columns, got " +
                             x.shape_str());
    }
    const std::size_t rows = x.rows();
    if (taus.size() != 1 && taus.size() != rows) {
        throw DimensionError("expected 1 or " + std::to_string(rows) + " time values, got " +
                             std::to_string(taus.size()));
    }
    const auto ids = resolve_classes(spec_, rows, classes);
    const std::size_t temb_dim = spec_.time_embed_dim;
    Tensor h(rows, spec_.input_dim());
    std::vector<double> shared;
    if (taus.size() == 1) {
        shared = time_embed(taus[0], temb_dim, spec_.freq_base);
    }
    for (std::size_t r = 0; r < rows; ++r) {
        const std::vector<double> e = taus.size() == 1 ? shared : time_embed(taus[r], temb_dim, spec_.freq_base);
        auto out = h.row(r);
        for (std::size_t c = 0; c < spec_.data_dim; ++c) {
            out[c] = x(r, c);
        }
        for (std::size_t c = 0; c < temb_dim; ++c) {
            double v = e[c];
            if (spec_.conditional()) {
                v += cond_table_(ids[r], c);
            }
            out[spec_.data_dim + c] = v;
        }
    }
    Tensor next;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const Linear& layer = layers_[i];
        kernels::gemm_nt(h, layer.weight, next, false);
        const bool hidden = i + 1 < layers_.size();
        for (std::size_t r = 0; r < rows; ++r) {
            auto row = next.row(r);
            for (std::size_t c = 0; c < row.size(); ++c) {
                double v = row[c] + layer.bias[c];
                if (hidden) {
                    v *= kernels::sigmoid(v);
                }
                row[c] = v;
            }
        }
        std::swap(h, next);
    }
    return h;
}

Tensor VelocityField::forward_graph(const Tensor& x, std::span<const double> taus,
                                    std::span<const int> classes) const {
    Graph g;
    const BoundModel params = bind(g, false);
    const Var out = apply_model(g, spec_, params, g.constant(x), taus, classes);
    return g.value(out);
}

bool operator==(const VelocityField& a, const VelocityField& b) {
    if (!(a.spec_ == b.spec_) || a.layers_.size() != b.layers_.size() || !(a.cond_table_ == b.cond_table_)) {
        return false;
    }
    for (std::size_t i = 0; i < a.layers_.size(); ++i) {
        if (!(a.layers_[i].weight == b.layers_[i].weight) || !(a.layers_[i].bias == b.layers_[i].bias)) {
            return false;
        }
    }
    return true;
}

bool bit_equal(const VelocityField& a, const VelocityField& b) noexcept {
    const auto pa = a.parameters();
    const auto pb = b.parameters();
    if (!(a.spec() == b.spec()) || pa.size() != pb.size()) {
        return false;
    }
    for (std::size_t i = 0; i < pa.size(); ++i) {
        if (!bit_equal(*pa[i], *pb[i])) {
            return false;
        }
    }
    return true;
}

} // namespace slowfast

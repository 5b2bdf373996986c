#include "slowfast/training.hpp"

#include "slowfast/error.hpp"
#include "slowfast/rng.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace slowfast {

double Weighting::operator()(double tau) const {
    if (mode == Mode::constant) {
        return value;
    }
    if (tau <= table.front().first) {
        return table.front().second;
    }
    if (tau >= table.back().first) {
        return table.back().second;
    }
    const auto hi = std::upper_bound(table.begin(), table.end(), tau,
                                     [](double t, const auto& knot) { return t < knot.first; });
    const auto lo = hi - 1;
    const double f = (tau - lo->first) / (hi->first - lo->first);
    return lo->second + f * (hi->second - lo->second);
}

Weighting Weighting::from_table(std::vector<std::pair<double, double>> knots) {
    if (knots.empty()) {
        throw ConfigError("weighting table is empty");
    }
    for (std::size_t i = 0; i < knots.size(); ++i) {
        if (!(knots[i].second >= 0.0) || (i > 0 && !(knots[i].first > knots[i - 1].first))) {
            throw ConfigError("weighting table needs increasing times and non-negative weights");
        }
    }
    return {Mode::table, 1.0, std::move(knots)};
}

void TrainConfig::validate() const {
    if (!(lr >= 0.0)) {
        throw ConfigError("lr must be non-negative");
    }
    if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0)) {
        throw ConfigError("beta1 and beta2 must lie in (0,1)");
    }
    if (!(weight_decay >= 0.0) || !(eps > 0.0) || !(grad_clip > 0.0)) {
        throw ConfigError("weight_decay must be >= 0, eps and grad_clip > 0");
    }
    if (steps == 0 || batch == 0) {
        throw ConfigError("steps and batch must be at least 1");
    }
    if (weighting.mode == Weighting::Mode::constant && !(weighting.value >= 0.0)) {
        throw ConfigError("constant weighting must be non-negative");
    }
}

TrainConfig TrainConfig::teacher_defaults() {
    TrainConfig c;
    c.lr = 1e-3;
    c.steps = 5000;
    c.batch = 256;
    return c;
}

void adamw_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamWState& state,
                const TrainConfig& config) {
    if (params.size() != grads.size()) {
        throw DimensionError("adamw: " + std::to_string(params.size()) + " parameters but " +
                             std::to_string(grads.size()) + " gradients");
    }
    if (state.first_moment.empty()) {
        for (const Tensor* p : params) {
            state.first_moment.emplace_back(p->rows(), p->cols());
            state.second_moment.emplace_back(p->rows(), p->cols());
        }
    }
    if (state.first_moment.size() != params.size()) {
        throw DimensionError("adamw: optimizer state tracks a different parameter list");
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(config.beta1, t);
    const double bc2 = 1.0 - std::pow(config.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& p = *params[k];
        const Tensor& g = grads[k];
        Tensor& m = state.first_moment[k];
        Tensor& v = state.second_moment[k];
        if (!p.same_shape(g) || !p.same_shape(m)) {
            throw DimensionError("adamw: parameter " + p.shape_str() + " vs gradient " + g.shape_str());
        }
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            p[i] -= config.lr * (m_hat / (std::sqrt(v_hat) + config.eps) + config.weight_decay * p[i]);
        }
    }
}

double global_norm(std::span<const Tensor> grads) {
    double sq = 0.0;
    for (const Tensor& g : grads) {
        for (double v : g.data()) {
            sq += v * v;
        }
    }
    return std::sqrt(sq);
}

double clip_grad_norm(std::span<Tensor> grads, double max_norm) {
    const double norm = global_norm(grads);
    if (norm > max_norm) {
        const double factor = max_norm / norm;
        for (Tensor& g : grads) {
            for (double& v : g.data()) {
                v *= factor;
            }
        }
    }
    return norm;
}

Tensor FmBatch::interpolant() const {
    Tensor x(x0.rows(), x0.cols());
    for (std::size_t r = 0; r < x0.rows(); ++r) {
        const double tau = taus.size() == 1 ? taus[0] : taus[r];
        for (std::size_t c = 0; c < x0.cols(); ++c) {
            x(r, c) = tau * x0(r, c) + (1.0 - tau) * noise(r, c);
        }
    }
    return x;
}

Tensor FmBatch::target_velocity() const {
    Tensor v(x0.rows(), x0.cols());
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = x0[i] - noise[i];
    }
    return v;
}

Var fm_loss(Graph& g, const VelocityFn& velocity, const FmBatch& batch, const Weighting& weighting) {
    if (batch.x0.rows() == 0) {
        throw ContractError("fm_loss: empty batch");
    }
    if (!batch.x0.same_shape(batch.noise)) {
        throw DimensionError("fm_loss: data " + batch.x0.shape_str() + " vs noise " + batch.noise.shape_str());
    }
    if (batch.taus.size() != 1 && batch.taus.size() != batch.x0.rows()) {
        throw DimensionError("fm_loss: expected 1 or one tau per row");
    }
    for (double tau : batch.taus) {
        if (!(tau > 0.0 && tau < 1.0)) {
            throw DomainError("fm_loss: tau must lie in (0,1), got " + std::to_string(tau));
        }
    }
    const Var pred = velocity(g, g.constant(batch.interpolant()), batch.taus, batch.classes);
    const Tensor target = batch.target_velocity();
    const double dim = static_cast<double>(batch.x0.cols());

    bool uniform_weight = weighting.mode == Weighting::Mode::constant || batch.taus.size() == 1;
    if (uniform_weight) {
        const double w = weighting(batch.taus[0]);
        return g.scale(g.mse(pred, target), w * dim);
    }
    // Per-row weights: w·‖r‖² = ‖sqrt(w)·r‖².
    Tensor root_w(target.rows(), target.cols());
    Tensor weighted_target = target;
    for (std::size_t r = 0; r < target.rows(); ++r) {
        const double s = std::sqrt(weighting(batch.taus[r]));
        for (std::size_t c = 0; c < target.cols(); ++c) {
            root_w(r, c) = s;
            weighted_target(r, c) *= s;
        }
    }
    return g.scale(g.mse(g.hadamard(pred, g.constant(std::move(root_w))), weighted_target), dim);
}

namespace {

// Noise rows for draw indices [first, first + rows).
Tensor noise_rows(const CounterRng& rng, std::uint64_t first, std::size_t rows, std::size_t dim) {
    Tensor out(rows, dim);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < dim; ++c) {
            out(r, c) = rng.normal_at(((first + r) * dim + c) * 2);
        }
    }
    return out;
}

void check_finite_loss(double loss, std::size_t step, const VelocityField* snapshot) {
    if (!std::isfinite(loss)) {
        std::shared_ptr<const VelocityField> snap;
        if (snapshot != nullptr) {
            snap = std::make_shared<VelocityField>(*snapshot);
        }
        throw NumericalError("non-finite loss at training step " + std::to_string(step), static_cast<long>(step),
                             std::move(snap));
    }
}

} // namespace

TrainResult train_teacher(VelocityField model, const Dataset2D& data, const TrainConfig& config) {
    config.validate();
    const ModelSpec spec = model.spec();
    if (spec.data_dim != 2) {
        throw ContractError("teacher training uses 2-D datasets");
    }
    if (spec.conditional() && spec.num_classes < data.num_classes()) {
        throw ConditionError("model has fewer classes than the dataset");
    }
    const CounterRng noise_rng(config.seed, Stream::train_noise);
    const CounterRng time_rng(config.seed, Stream::train_time);
    AdamWState opt;
    TrainResult result;
    result.losses.reserve(config.steps);

    for (std::size_t step = 0; step < config.steps; ++step) {
        const std::uint64_t first = static_cast<std::uint64_t>(step) * config.batch;
        LabeledPoints draws = sample_labeled(data, config.batch, first);
        FmBatch batch;
        batch.x0 = std::move(draws.points);
        batch.noise = noise_rows(noise_rng, first, config.batch, spec.data_dim);
        batch.taus.resize(config.batch);
        for (std::size_t r = 0; r < config.batch; ++r) {
            batch.taus[r] = time_rng.uniform_at(first + r);
        }
        if (spec.conditional()) {
            batch.classes = std::move(draws.classes);
        }

        Graph g;
        const BoundModel bound = model.bind(g, true);
        const VelocityFn velocity = [&](Graph& gr, Var x, std::span<const double> taus, std::span<const int> cls) {
            return apply_model(gr, spec, bound, x, taus, cls);
        };
        const Var loss = fm_loss(g, velocity, batch, config.weighting);
        const double loss_value = g.value(loss).item();
        check_finite_loss(loss_value, step, &model);
        g.backward(loss);

        std::vector<Tensor> grads;
        for (std::size_t i = 0; i < bound.weights.size(); ++i) {
            grads.push_back(g.grad(bound.weights[i]));
            grads.push_back(g.grad(bound.biases[i]));
        }
        if (bound.cond_table) {
            grads.push_back(g.grad(*bound.cond_table));
        }
        clip_grad_norm(grads, config.grad_clip);
        const auto params = model.parameters();
        adamw_step(params, grads, opt, config);
        result.losses.push_back(loss_value);
    }
    result.model = std::move(model);
    return result;
}

std::string to_string(Phase phase) {
    switch (phase) {
    case Phase::slow:
        return "slow";
    case Phase::fast:
        return "fast";
    case Phase::full:
        return "full";
    }
    return "?";
}

Phase parse_phase(const std::string& text) {
    if (text == "slow") {
        return Phase::slow;
    }
    if (text == "fast") {
        return Phase::fast;
    }
    if (text == "full" || text == "single") {
        return Phase::full;
    }
    throw ConfigError("unknown phase '" + text + "'");
}

std::pair<double, double> phase_interval(Phase phase, const PhasePartition& partition) {
    switch (phase) {
    case Phase::slow:
        return {0.0, partition.boundary_tau};
    case Phase::fast:
        return {partition.boundary_tau, 1.0};
    case Phase::full:
        return {0.0, 1.0};
    }
    throw ConfigError("bad phase");
}

DistillResult distill_expert(const VelocityField& base, Phase phase, const PhasePartition& partition,
                             const TrainSet& trainset, const TrainConfig& config,
                             const AdapterConfig& adapter_config) {
    config.validate();
    if (trainset.size() == 0) {
        throw ConfigError("distillation needs at least one training sample");
    }
    const auto [lo, hi] = phase_interval(phase, partition);
    if (!(hi > lo)) {
        throw ConfigError("expert phase " + to_string(phase) + " is empty");
    }
    const ModelSpec& spec = base.spec();
    const auto substream = static_cast<std::uint64_t>(phase) + 1;
    const CounterRng noise_rng(config.seed, Stream::train_noise, substream);
    const CounterRng time_rng(config.seed, Stream::train_time, substream);

    DistillResult result;
    result.adapter = LoraAdapter::init(base, adapter_config.rank, adapter_config.alpha, adapter_config.init,
                                       mix64(config.seed) ^ substream);
    result.losses.reserve(config.steps);
    result.taus.reserve(config.steps * config.batch);
    AdamWState opt;

    for (std::size_t step = 0; step < config.steps; ++step) {
        const std::uint64_t first = static_cast<std::uint64_t>(step) * config.batch;
        std::vector<std::size_t> rows(config.batch);
        for (std::size_t r = 0; r < config.batch; ++r) {
            rows[r] = static_cast<std::size_t>((first + r) % trainset.size());
        }
        FmBatch batch;
        batch.x0 = trainset.samples.points.gather_rows(rows);
        batch.noise = noise_rows(noise_rng, first, config.batch, spec.data_dim);
        batch.taus.resize(config.batch);
        for (std::size_t r = 0; r < config.batch; ++r) {
            batch.taus[r] = lo + (hi - lo) * time_rng.uniform_at(first + r);
            result.taus.push_back(batch.taus[r]);
        }
        if (spec.conditional()) {
            for (std::size_t r : rows) {
                batch.classes.push_back(trainset.samples.classes[r]);
            }
        }

        Graph g;
        BoundAdapter handles;
        const BoundModel bound = bind_adapted(g, base, result.adapter, true, &handles);
        const VelocityFn velocity = [&](Graph& gr, Var x, std::span<const double> taus, std::span<const int> cls) {
            return apply_model(gr, spec, bound, x, taus, cls);
        };
        const Var loss = fm_loss(g, velocity, batch, config.weighting);
        const double loss_value = g.value(loss).item();
        check_finite_loss(loss_value, step, nullptr);
        g.backward(loss);

        std::vector<Tensor> grads;
        for (std::size_t i = 0; i < handles.a.size(); ++i) {
            grads.push_back(g.grad(handles.a[i]));
            grads.push_back(g.grad(handles.b[i]));
        }
        clip_grad_norm(grads, config.grad_clip);
        const auto params = result.adapter.parameters();
        adamw_step(params, grads, opt, config);
        result.losses.push_back(loss_value);
    }
    return result;
}

} // namespace slowfast

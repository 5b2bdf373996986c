#include "slowfast/sampling.hpp"

#include "slowfast/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <optional>

#include <fmt/format.h>

namespace slowfast {

Tensor euler_step(const Tensor& x, double tau_a, double tau_b, const Tensor& v) {
    if (!(tau_a < tau_b)) {
        throw ContractError(fmt::format("euler_step needs increasing times, got {} -> {}", tau_a, tau_b));
    }
    if (!x.same_shape(v)) {
        throw DimensionError("euler_step state " + x.shape_str() + " vs velocity " + v.shape_str());
    }
    const double dt = tau_b - tau_a;
    Tensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] += dt * v[i];
    }
    return out;
}

Trajectory generate(const VelocityField& base, const ExpertSet& experts, const PhaseSchedule& schedule,
                    const Tensor& noise, std::span<const int> classes) {
    experts.validate();
    if (!noise.all_finite()) {
        throw ContractError("generate: noise contains non-finite values");
    }
    const auto start = std::chrono::steady_clock::now();

    std::optional<VelocityField> slow_model;
    std::optional<VelocityField> fast_model;
    std::optional<VelocityField> single_model;
    if (experts.slow) {
        slow_model = effective_weights(base, *experts.slow);
    }
    if (experts.fast) {
        fast_model = effective_weights(base, *experts.fast);
    }
    if (experts.single) {
        single_model = effective_weights(base, *experts.single);
    }

    Trajectory traj;
    Tensor x = noise;
    const auto steps = schedule.steps();
    traj.taus.reserve(steps.size() + 1);
    traj.states.reserve(steps.size() + 1);
    for (std::size_t s = 0; s < steps.size(); ++s) {
        const auto& step = steps[s];
        traj.taus.push_back(step.tau_from);
        traj.states.push_back(x);
        const ExpertTag tag = route_tag(experts, step.index, schedule);
        const VelocityField* model = &base;
        switch (tag) {
        case ExpertTag::base:
            break;
        case ExpertTag::slow:
            model = &*slow_model;
            break;
        case ExpertTag::fast:
            model = &*fast_model;
            break;
        case ExpertTag::single:
            model = &*single_model;
            break;
        }
        const Tensor v = model->forward(x, step.tau_from, classes);
        ++traj.nfe;
        traj.experts.push_back(tag);
        x = euler_step(x, step.tau_from, step.tau_to, v);
        if (!x.all_finite()) {
            throw NumericalError("non-finite sampler state after step " + std::to_string(s) + " (grid index " +
                                     std::to_string(step.index) + ")",
                                 static_cast<long>(s));
        }
    }
    traj.taus.push_back(1.0);
    traj.states.push_back(std::move(x));
    traj.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return traj;
}

PhaseSchedule teacher_schedule(std::size_t n_steps) {
    if (n_steps < 2) {
        throw ContractError("teacher grid needs at least 2 steps");
    }
    const TimeGrid grid = TimeGrid::uniform(n_steps);
    const auto boundary = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::ceil(0.4 * static_cast<double>(n_steps) - 1e-9)), 1, n_steps - 1);
    const PhasePartition part{n_steps, boundary, grid.knot(boundary)};
    return full_schedule(grid, part);
}

Trajectory teacher_sample(const VelocityField& base, std::size_t n_steps, const Tensor& noise,
                          std::span<const int> classes) {
    return generate(base, ExpertSet::bare(), teacher_schedule(n_steps), noise, classes);
}

void write_trajectory_csv(const Trajectory& trajectory, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot open " + path.string() + " for writing");
    }
    out << "step,tau,sample,x,y\n";
    for (std::size_t s = 0; s < trajectory.states.size(); ++s) {
        const Tensor& st = trajectory.states[s];
        for (std::size_t r = 0; r < st.rows(); ++r) {
            out << fmt::format("{},{:.17g},{},{:.17g},{:.17g}\n", s, trajectory.taus[s], r, st(r, 0),
                               st.cols() > 1 ? st(r, 1) : 0.0);
        }
    }
}

} // namespace slowfast

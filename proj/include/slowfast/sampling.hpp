#pragma once

#include "slowfast/lora.hpp"
#include "slowfast/schedule.hpp"
#include "slowfast/velocity_model.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace slowfast {

struct Trajectory {
    // Knot times visited: every executed knot, then 1.
    std::vector<double> taus;
    // states[i] is the batch at taus[i]; states.front() is the input noise.
    std::vector<Tensor> states;
    // Expert used for each executed step.
    std::vector<ExpertTag> experts;
    std::size_t nfe = 0;
    double wall_time_s = 0.0;

    const Tensor& terminal() const { return states.back(); }
};

// x + (tau_b − tau_a)·v. Throws ContractError unless tau_a < tau_b.
Tensor euler_step(const Tensor& x, double tau_a, double tau_b, const Tensor& v);

// Integrates from tau = 0 (the given noise) to tau = 1 over the schedule's
// executed knots, evaluating the routed expert at each one.
Trajectory generate(const VelocityField& base, const ExpertSet& experts, const PhaseSchedule& schedule,
                    const Tensor& noise, std::span<const int> classes = {});

// Bare base model on the full uniform n-step grid.
Trajectory teacher_sample(const VelocityField& base, std::size_t n_steps, const Tensor& noise,
                          std::span<const int> classes = {});

// Uniform n-step schedule executing every step (partition at 40% of the steps).
PhaseSchedule teacher_schedule(std::size_t n_steps);

// step,tau,sample,x,y for every recorded state.
void write_trajectory_csv(const Trajectory& trajectory, const std::filesystem::path& path);

} // namespace slowfast

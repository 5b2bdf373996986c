#pragma once

#include "slowfast/autodiff.hpp"
#include "slowfast/data.hpp"
#include "slowfast/lora.hpp"
#include "slowfast/schedule.hpp"
#include "slowfast/velocity_model.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace slowfast {

// Timestep weighting w(tau) of the flow-matching loss. Table mode interpolates
// linearly between (tau, weight) knots and clamps outside them.
struct Weighting {
    enum class Mode { constant, table };
    Mode mode = Mode::constant;
    double value = 1.0;
    std::vector<std::pair<double, double>> table;

    double operator()(double tau) const;
    static Weighting constant(double w) { return {Mode::constant, w, {}}; }
    static Weighting from_table(std::vector<std::pair<double, double>> knots);
};

struct TrainConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 1e-2;
    double eps = 1e-8;
    double grad_clip = 1.0;
    std::size_t steps = 60;
    std::size_t batch = 1;
    Weighting weighting;
    std::uint64_t seed = 0;

    // Throws ConfigError on out-of-range fields.
    void validate() const;

    // Defaults for flow-matching pretraining of the teacher.
    static TrainConfig teacher_defaults();
    // Adapter distillation defaults.
    static TrainConfig distill_defaults() { return {}; }
};

struct AdamWState {
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
    std::size_t step = 0;
};

// theta <- theta − lr·(m_hat / (sqrt(v_hat) + eps) + wd·theta)
void adamw_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamWState& state,
                const TrainConfig& config);

// Rescales grads in place so their joint L2 norm is at most max_norm. Returns
// the norm before clipping.
double clip_grad_norm(std::span<Tensor> grads, double max_norm);
double global_norm(std::span<const Tensor> grads);

// One flow-matching minibatch: per row, x_tau = tau·x0 + (1 − tau)·noise and
// the target velocity x0 − noise.
struct FmBatch {
    Tensor x0;
    Tensor noise;
    std::vector<double> taus;
    std::vector<int> classes;

    Tensor interpolant() const;
    Tensor target_velocity() const;
};

// Produces the velocity prediction for x_tau in graph `g`.
using VelocityFn =
    std::function<Var(Graph& g, Var x_tau, std::span<const double> taus, std::span<const int> classes)>;

// w(tau)·mean over rows of ‖v_hat − v_target‖². Throws DomainError if any tau
// lies outside (0,1) and ContractError on an empty batch.
Var fm_loss(Graph& g, const VelocityFn& velocity, const FmBatch& batch, const Weighting& weighting);

struct TrainResult {
    VelocityField model;
    std::vector<double> losses;
};

// Flow-matching pretraining on fresh draws from `data` every step, one uniform
// tau per row.
TrainResult train_teacher(VelocityField model, const Dataset2D& data, const TrainConfig& config);

enum class Phase { slow, fast, full };

std::string to_string(Phase phase);
Phase parse_phase(const std::string& text);

// Interval from which an expert's training times are drawn.
std::pair<double, double> phase_interval(Phase phase, const PhasePartition& partition);

struct AdapterConfig {
    std::size_t rank = 8;
    double alpha = 32.0;
    LoraInit init = LoraInit::gaussian_a_zero_b;
};

struct DistillResult {
    LoraAdapter adapter;
    std::vector<double> losses;
    // Every tau drawn during training, in order.
    std::vector<double> taus;
};

// Trains one adapter on the frozen base with flow-matching supervision,
// drawing tau uniformly inside the expert's phase. Samples from `trainset`
// are visited cyclically.
DistillResult distill_expert(const VelocityField& base, Phase phase, const PhasePartition& partition,
                             const TrainSet& trainset, const TrainConfig& config,
                             const AdapterConfig& adapter_config = {});

} // namespace slowfast

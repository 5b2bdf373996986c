#pragma once

#include "slowfast/data.hpp"
#include "slowfast/lora.hpp"
#include "slowfast/schedule.hpp"
#include "slowfast/training.hpp"
#include "slowfast/velocity_model.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace slowfast {

enum class Variant {
    // No adapters; the base model on the slowK-fastM knots.
    base_only,
    slow_fast,
    slow_plus_base,
    base_plus_fast,
    // One full-range adapter on the slowK-fastM knots.
    single_identical,
    // One full-range adapter on K+M uniformly strided knots.
    single_uniform,
};

std::string to_string(Variant v);
Variant parse_variant(const std::string& text);

enum class DataSource { data, gaussian_noise };

struct ArmSpec {
    std::string id;
    Variant variant = Variant::slow_fast;
    std::size_t k_slow = 3;
    std::size_t k_fast = 5;
    std::size_t train_size = 1;
    DataSource source = DataSource::data;

    nlohmann::json to_json() const;
    static ArmSpec from_json(const nlohmann::json& j);
};

// The five slow/fast assignment configurations at 3+5 knots.
std::vector<ArmSpec> stage_arms();
// Slow5+Fast5 students on 1, 10 and 100 samples plus the bare base on the same knots.
std::vector<ArmSpec> data_scaling_arms();
// Slow3+Fast5, Slow5+Fast5, Slow5+Fast10.
std::vector<ArmSpec> timestep_arms();
// Slow5+Fast5 on one data sample vs one Gaussian-noise sample.
std::vector<ArmSpec> noise_control_arms();

struct AblationSettings {
    Dataset2D data = Dataset2D::eight_gaussians(1);
    TrainConfig distill = TrainConfig::distill_defaults();
    AdapterConfig adapter;
    PartitionMode partition;
    std::size_t grid_steps = 50;
    std::size_t teacher_steps = 50;
    std::size_t n_generate = 2048;
    std::size_t n_reference = 4096;
    std::size_t n_proj = 64;
    bool parallel = true;

    nlohmann::json to_json() const;
    static AblationSettings from_json(const nlohmann::json& j);
};

struct MetricReport {
    std::string config_id;
    std::uint64_t seed = 0;
    std::size_t nfe = 0;
    double endpoint_mse = 0.0;
    double energy_distance = 0.0;
    double sliced_w2 = 0.0;
    double wall_time_s = 0.0;
};

struct ArmFailure {
    std::string config_id;
    std::uint64_t seed = 0;
    std::string message;
};

struct AblationResult {
    // Ordered by arm, then seed, independent of execution order.
    std::vector<MetricReport> rows;
    std::vector<ArmFailure> failures;
    // Terminal states of the first seed for each arm, and of the teacher.
    std::vector<std::pair<std::string, Tensor>> first_seed_samples;
    Tensor first_seed_teacher;

    const MetricReport* find(const std::string& config_id, std::uint64_t seed) const;
    std::vector<MetricReport> for_config(const std::string& config_id) const;

    // Markdown table of per-config means and sample standard deviations. Wall
    // time is left out so the table is reproducible.
    std::string render_table() const;
    // config,seed,nfe,endpoint_mse,energy_distance,sliced_w2,wall_time_s
    std::string to_csv() const;
    void write_csv(const std::filesystem::path& path) const;
    // Bar chart of mean endpoint_mse per config and one scatter per arm.
    void write_figures(const std::filesystem::path& directory) const;
};

// Shared per-seed evaluation inputs.
struct SeedContext {
    std::uint64_t seed = 0;
    Tensor noise;
    std::vector<int> classes;
    Tensor teacher_terminal;
    Tensor reference;
};

SeedContext make_seed_context(const VelocityField& teacher, const AblationSettings& settings, std::uint64_t seed);

// Runs one arm for one seed. Throws on failure.
MetricReport run_arm(const VelocityField& teacher, const AblationSettings& settings, const ArmSpec& arm,
                     const SeedContext& context, Tensor* terminal = nullptr);

// Every (arm, seed) pair; failures are recorded and the run continues.
AblationResult run_ablation(const VelocityField& teacher, const AblationSettings& settings,
                            std::span<const std::uint64_t> seeds, std::span<const ArmSpec> arms);

} // namespace slowfast

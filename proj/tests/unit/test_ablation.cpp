#include "slowfast/ablation.hpp"
#include "slowfast/error.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <omp.h>

#include <filesystem>
#include <set>

using namespace slowfast;

namespace {

VelocityField tiny_teacher() {
    ModelSpec s;
    s.time_embed_dim = 8;
    s.hidden = {16, 16};
    s.num_classes = 8;
    TrainConfig c = TrainConfig::teacher_defaults();
    c.steps = 30;
    c.batch = 32;
    return train_teacher(VelocityField::init(s, 2), Dataset2D::eight_gaussians(1), c).model;
}

AblationSettings tiny_settings() {
    AblationSettings s;
    s.distill.steps = 5;
    s.n_generate = 32;
    s.n_reference = 64;
    s.n_proj = 8;
    return s;
}

} // namespace

TEST_CASE("arm groups") {
    CHECK(stage_arms().size() == 5);
    CHECK(data_scaling_arms().size() == 4);
    CHECK(timestep_arms().size() == 3);
    CHECK(noise_control_arms().size() == 2);
    for (const auto& group : {stage_arms(), data_scaling_arms(), timestep_arms(), noise_control_arms()}) {
        std::set<std::string> ids;
        for (const ArmSpec& a : group) {
            CHECK(ids.insert(a.id).second);
            const ArmSpec back = ArmSpec::from_json(a.to_json());
            CHECK(back.id == a.id);
            CHECK(back.variant == a.variant);
            CHECK(back.k_slow == a.k_slow);
            CHECK(back.k_fast == a.k_fast);
            CHECK(back.train_size == a.train_size);
            CHECK(back.source == a.source);
        }
    }
    CHECK(parse_variant(to_string(Variant::single_uniform)) == Variant::single_uniform);
    CHECK_THROWS_AS(parse_variant("double"), ConfigError);
}

TEST_CASE("settings json round trip") {
    AblationSettings s = tiny_settings();
    s.grid_steps = 40;
    const AblationSettings b = AblationSettings::from_json(s.to_json());
    CHECK(b.to_json() == s.to_json());
}

TEST_CASE("ablation cardinality and parallel determinism") {
    const VelocityField teacher = tiny_teacher();
    AblationSettings s = tiny_settings();
    const std::vector<std::uint64_t> seeds = {0, 1};
    std::vector<ArmSpec> arms = stage_arms();
    for (const ArmSpec& a : noise_control_arms()) {
        arms.push_back(a);
    }

    s.parallel = false;
    const AblationResult serial = run_ablation(teacher, s, seeds, arms);
    s.parallel = true;
    const int saved = omp_get_max_threads();
    omp_set_num_threads(4);
    const AblationResult parallel = run_ablation(teacher, s, seeds, arms);
    omp_set_num_threads(saved);

    CHECK(serial.failures.empty());
    REQUIRE(serial.rows.size() == arms.size() * seeds.size());
    REQUIRE(parallel.rows.size() == serial.rows.size());
    for (std::size_t i = 0; i < serial.rows.size(); ++i) {
        CHECK(serial.rows[i].config_id == arms[i / 2].id);
        CHECK(serial.rows[i].seed == seeds[i % 2]);
        CHECK(parallel.rows[i].config_id == serial.rows[i].config_id);
        CHECK(parallel.rows[i].endpoint_mse == serial.rows[i].endpoint_mse);
        CHECK(parallel.rows[i].energy_distance == serial.rows[i].energy_distance);
        CHECK(parallel.rows[i].sliced_w2 == serial.rows[i].sliced_w2);
    }
    CHECK(serial.render_table() == parallel.render_table());
    CHECK(serial.find("slow3-fast5", 1)->nfe == 8);
    CHECK(serial.for_config("slow3+base5").size() == 2);
    CHECK(serial.find("missing", 0) == nullptr);
    CHECK(serial.first_seed_samples.size() == arms.size());

    const std::string table = serial.render_table();
    CHECK(table.find("| config | nfe |") == 0);
    CHECK(table.find("wall") == std::string::npos);
    CHECK(serial.to_csv().rfind("config,seed,nfe,endpoint_mse,energy_distance,sliced_w2,wall_time_s\n", 0) == 0);

    const auto dir = std::filesystem::temp_directory_path() / "slowfast_ablation_figs";
    std::filesystem::remove_all(dir);
    serial.write_figures(dir);
    CHECK(std::filesystem::exists(dir / "endpoint_mse.svg"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("duplicate arm ids are rejected") {
    const VelocityField teacher = tiny_teacher();
    std::vector<ArmSpec> arms = {stage_arms()[0], stage_arms()[0]};
    const std::vector<std::uint64_t> seeds = {0};
    CHECK_THROWS_AS(run_ablation(teacher, tiny_settings(), seeds, arms), ContractError);
}

TEST_CASE("zero distillation steps isolate the adapter-free variants") {
    // With lr = 0 the adapters keep B = 0, so every variant reduces to the bare
    // base model on its knots.
    const VelocityField teacher = tiny_teacher();
    AblationSettings s = tiny_settings();
    s.distill.lr = 0.0;
    const SeedContext ctx = make_seed_context(teacher, s, 4);
    ArmSpec base{"b", Variant::base_only, 3, 5};
    ArmSpec sf{"sf", Variant::slow_fast, 3, 5};
    ArmSpec single{"si", Variant::single_identical, 3, 5};
    const MetricReport rb = run_arm(teacher, s, base, ctx);
    CHECK(run_arm(teacher, s, sf, ctx).endpoint_mse == rb.endpoint_mse);
    CHECK(run_arm(teacher, s, single, ctx).endpoint_mse == rb.endpoint_mse);
    CHECK(rb.nfe == 8);
}

#include "slowfast/error.hpp"
#include "slowfast/metrics.hpp"
#include "slowfast/rng.hpp"
#include "slowfast/sampling.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace slowfast;

namespace {

VelocityField small_model(std::size_t classes = 0) {
    ModelSpec s;
    s.time_embed_dim = 8;
    s.hidden = {16, 16};
    s.num_classes = classes;
    return VelocityField::init(s, 5);
}

Tensor noise(std::size_t rows) {
    Tensor x(rows, 2);
    const CounterRng rng(1, Stream::eval_noise);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = rng.normal_at(2 * i);
    }
    return x;
}

} // namespace

TEST_CASE("euler step") {
    const Tensor x = Tensor::from_rows({{1.0, 2.0}});
    const Tensor v = Tensor::from_rows({{10.0, -10.0}});
    const Tensor y = euler_step(x, 0.2, 0.3, v);
    CHECK(y(0, 0) == doctest::Approx(2.0));
    CHECK(y(0, 1) == doctest::Approx(1.0));
    CHECK_THROWS_AS(euler_step(x, 0.3, 0.3, v), ContractError);
    CHECK_THROWS_AS(euler_step(x, 0.5, 0.3, v), ContractError);
}

TEST_CASE("constant velocity field integrates exactly") {
    // A zero network outputs its last bias, which we set to a constant.
    ModelSpec s;
    s.time_embed_dim = 4;
    s.hidden = {4};
    VelocityField m = VelocityField::zeros(s);
    m.layers().back().bias = Tensor::from_rows({{1.5, -2.0}});
    const Tensor z = noise(4);
    const PhasePartition p = partition(TimeGrid::uniform(50));
    const PhaseSchedule sched = allocate(TimeGrid::uniform(50), p, 5, 5);
    const Trajectory t = generate(m, ExpertSet::bare(), sched, z);
    for (std::size_t r = 0; r < 4; ++r) {
        CHECK(t.terminal()(r, 0) == doctest::Approx(z(r, 0) + 1.5));
        CHECK(t.terminal()(r, 1) == doctest::Approx(z(r, 1) - 2.0));
    }
}

TEST_CASE("the full schedule reproduces teacher sampling") {
    const VelocityField m = small_model();
    const Tensor z = noise(16);
    const TimeGrid grid = TimeGrid::uniform(50);
    const Trajectory full = generate(m, ExpertSet::bare(), full_schedule(grid, partition(grid)), z);
    const Trajectory teacher = teacher_sample(m, 50, z);
    CHECK(bit_equal(full.terminal(), teacher.terminal()));
    CHECK(teacher.nfe == 50);
    CHECK(teacher.states.size() == 51);
    CHECK(teacher.taus.front() == 0.0);
    CHECK(teacher.taus.back() == 1.0);
    CHECK(bit_equal(teacher.states.front(), z));
}

TEST_CASE("nfe and expert routing along a trajectory") {
    const VelocityField m = small_model();
    const TimeGrid grid = TimeGrid::uniform(50);
    const PhaseSchedule sched = allocate(grid, partition(grid), 5, 5);
    const LoraAdapter a = LoraAdapter::init(m, 4, 16.0, LoraInit::gaussian_a_zero_b, 1);
    const Trajectory t = generate(m, ExpertSet::slow_fast(a, a), sched, noise(3));
    CHECK(t.nfe == 10);
    REQUIRE(t.experts.size() == 10);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(t.experts[i] == ExpertTag::slow);
        CHECK(t.experts[i + 5] == ExpertTag::fast);
    }
    CHECK(t.taus == std::vector<double>{0.0, 0.08, 0.16, 0.24, 0.32, 0.4, 0.52, 0.64, 0.76, 0.88, 1.0});
}

TEST_CASE("zero-B experts on the full grid match the teacher exactly") {
    const VelocityField m = small_model(8);
    const Tensor z = noise(12);
    const std::vector<int> cls = {3};
    const TimeGrid grid = TimeGrid::uniform(50);
    const LoraAdapter s = LoraAdapter::init(m, 8, 32.0, LoraInit::gaussian_a_zero_b, 1);
    const LoraAdapter f = LoraAdapter::init(m, 8, 32.0, LoraInit::gaussian_a_zero_b, 2);
    const Trajectory student = generate(m, ExpertSet::slow_fast(s, f), full_schedule(grid, partition(grid)), z, cls);
    const Trajectory teacher = teacher_sample(m, 50, z, cls);
    CHECK(endpoint_mse(student, teacher) == 0.0);
}

TEST_CASE("routing configuration errors") {
    const VelocityField m = small_model();
    ExpertSet broken;
    broken.mode = RoutingMode::slow_fast;
    const TimeGrid grid = TimeGrid::uniform(50);
    CHECK_THROWS_AS(generate(m, broken, allocate(grid, partition(grid), 5, 5), noise(2)), ConfigError);
    CHECK_THROWS_AS(teacher_sample(small_model(8), 10, noise(2)), ConditionError);
}

TEST_CASE("trajectory csv") {
    const Trajectory t = teacher_sample(small_model(), 4, noise(2));
    const auto path = std::filesystem::temp_directory_path() / "slowfast_traj_test.csv";
    write_trajectory_csv(t, path);
    std::ifstream in(path);
    std::string line;
    std::size_t lines = 0;
    std::getline(in, line);
    CHECK(line == "step,tau,sample,x,y");
    while (std::getline(in, line)) {
        ++lines;
    }
    CHECK(lines == 5 * 2);
    std::filesystem::remove(path);
}

#include "slowfast/error.hpp"
#include "slowfast/schedule.hpp"

#include <doctest.h>

#include <numeric>

using namespace slowfast;

using Indices = std::vector<std::size_t>;

TEST_CASE("snr examples and domain") {
    CHECK(snr(0.5) == 1.0);
    CHECK(snr(0.8) == doctest::Approx(16.0).epsilon(1e-12));
    double prev = 0.0;
    for (int i = 1; i < 1000; ++i) {
        const double s = snr(i / 1000.0);
        CHECK(s > prev);
        prev = s;
    }
    CHECK_THROWS_AS(snr(0.0), DomainError);
    CHECK_THROWS_AS(snr(1.0), DomainError);
}

TEST_CASE("time grids") {
    const TimeGrid g = TimeGrid::uniform(50);
    CHECK(g.n_steps() == 50);
    CHECK(g.knot(0) == 0.0);
    CHECK(g.knot(50) == 1.0);
    CHECK(g.knot(20) == doctest::Approx(0.4));
    CHECK_THROWS_AS(TimeGrid::uniform(0), ConfigError);
    CHECK_THROWS_AS(TimeGrid::from_knots({0.0, 0.5, 0.5, 1.0}), ConfigError);
    CHECK_THROWS_AS(TimeGrid::from_knots({0.1, 1.0}), ConfigError);
    CHECK(TimeGrid::from_knots({0.0, 0.3, 1.0}).n_steps() == 2);
}

TEST_CASE("partition examples") {
    const PhasePartition p = partition(TimeGrid::uniform(50), PartitionMode::index_fraction(0.4));
    CHECK(p.boundary_index == 20);
    CHECK(p.boundary_tau == doctest::Approx(0.4));
    Indices slow(20);
    std::iota(slow.begin(), slow.end(), 0);
    CHECK(p.slow_indices() == slow);
    CHECK(p.fast_indices().front() == 20);
    CHECK(p.fast_indices().back() == 49);

    CHECK(partition(TimeGrid::uniform(10), PartitionMode::index_fraction(0.5)).boundary_index == 5);
    const PhasePartition s = partition(TimeGrid::uniform(50), PartitionMode::snr_threshold(1.0));
    CHECK(s.boundary_tau == doctest::Approx(0.5));
    CHECK(s.boundary_index == 25);

    CHECK_THROWS_AS(partition(TimeGrid::uniform(50), PartitionMode::index_fraction(1.0)), ConfigError);
    CHECK(partition(TimeGrid::uniform(50), PartitionMode::snr_threshold(1e-12)).boundary_index == 1);
    CHECK_THROWS_AS(partition(TimeGrid::uniform(50), PartitionMode::snr_threshold(1e12)), ConfigError);
}

TEST_CASE("allocate follows the stride rule") {
    const TimeGrid g = TimeGrid::uniform(50);
    const PhasePartition p = partition(g);
    const PhaseSchedule s55 = allocate(g, p, 5, 5);
    CHECK(s55.slow == Indices{0, 4, 8, 12, 16});
    CHECK(s55.fast == Indices{20, 26, 32, 38, 44});
    CHECK(nfe(s55) == 10);
    const PhaseSchedule s35 = allocate(g, p, 3, 5);
    CHECK(s35.slow == Indices{0, 6, 12});
    CHECK(nfe(s35) == 8);
    CHECK(nfe(allocate(g, p, 5, 10)) == 15);
    CHECK(allocate(g, p, 5, 10).slow == s55.slow);
    CHECK_THROWS_AS(allocate(g, p, 21, 5), ConfigError);
    CHECK_THROWS_AS(allocate(g, p, 5, 31), ConfigError);
    CHECK_THROWS_AS(allocate(g, p, 0, 5), ConfigError);
}

TEST_CASE("slow steps precede fast steps and the last step ends at one") {
    const TimeGrid g = TimeGrid::uniform(50);
    const PhasePartition p = partition(g);
    for (std::size_t ks = 1; ks <= 20; ++ks) {
        for (std::size_t kf = 1; kf <= 30; kf += 7) {
            const PhaseSchedule s = allocate(g, p, ks, kf);
            CHECK(s.slow.back() < s.fast.front());
            const auto steps = s.steps();
            CHECK(steps.size() == ks + kf);
            CHECK(steps.front().tau_from == 0.0);
            CHECK(steps.back().tau_to == 1.0);
            for (std::size_t i = 1; i < steps.size(); ++i) {
                CHECK(steps[i].tau_from == steps[i - 1].tau_to);
            }
        }
    }
}

TEST_CASE("full allocation equals the teacher grid") {
    const TimeGrid g = TimeGrid::uniform(50);
    const PhasePartition p = partition(g);
    const PhaseSchedule a = allocate(g, p, 20, 30);
    const PhaseSchedule f = full_schedule(g, p);
    CHECK(a.executed() == f.executed());
    Indices all(50);
    std::iota(all.begin(), all.end(), 0);
    CHECK(f.executed() == all);
    CHECK(nfe(f) == 50);
}

TEST_CASE("uniform schedule strides the whole grid") {
    const TimeGrid g = TimeGrid::uniform(50);
    const PhasePartition p = partition(g);
    const PhaseSchedule u = uniform_schedule(g, p, 8);
    CHECK(u.executed() == Indices{0, 6, 12, 18, 24, 30, 36, 42});
    CHECK(u.slow == Indices{0, 6, 12, 18});
    CHECK(nfe(u) == 8);
}

TEST_CASE("speedup arithmetic") {
    CHECK(speedup(50, 10) == 5.0);
    CHECK(speedup(50, 8) == 6.25);
}

TEST_CASE("schedule specs parse and build") {
    const TimeGrid g = TimeGrid::uniform(50);
    const PhasePartition p = partition(g);
    CHECK(nfe(ScheduleSpec::parse("slow5-fast5").build(g, p)) == 10);
    CHECK(nfe(ScheduleSpec::parse("uniform8").build(g, p)) == 8);
    CHECK(nfe(ScheduleSpec::parse("teacher").build(g, p)) == 50);
    CHECK(nfe(ScheduleSpec::parse("teacher10").build(g, p)) == 10);
    CHECK(ScheduleSpec::parse("slow3-fast5").str() == "slow3-fast5");
    CHECK_THROWS_AS(ScheduleSpec::parse("fast5-slow3"), ConfigError);
}

TEST_CASE("schedule JSON round trip") {
    const TimeGrid g = TimeGrid::uniform(50);
    const PhaseSchedule s = allocate(g, partition(g), 3, 5);
    const PhaseSchedule back = PhaseSchedule::from_json(s.to_json());
    CHECK(back.slow == s.slow);
    CHECK(back.fast == s.fast);
    CHECK(back.partition.boundary_index == 20);
}

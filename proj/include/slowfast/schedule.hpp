#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace slowfast {

// Time runs from pure noise at tau = 0 to data at tau = 1, matching the
// interpolant x_tau = tau·x0 + (1 − tau)·noise.
class TimeGrid {
public:
    // n uniform steps: knots i/n for i = 0..n.
    static TimeGrid uniform(std::size_t n_steps);
    // Arbitrary knots; must start at 0, end at 1, strictly increase.
    static TimeGrid from_knots(std::vector<double> knots);

    std::size_t n_steps() const noexcept { return knots_.size() - 1; }
    double knot(std::size_t i) const { return knots_.at(i); }
    const std::vector<double>& knots() const noexcept { return knots_; }

private:
    std::vector<double> knots_;
};

// Signal-to-noise ratio of the interpolant, (tau / (1 − tau))². Domain (0, 1).
double snr(double tau);

struct PartitionMode {
    enum class Kind { index_fraction, snr_threshold };
    Kind kind = Kind::index_fraction;
    // rho for index_fraction, SNR threshold for snr_threshold.
    double value = 0.4;

    static PartitionMode index_fraction(double rho) { return {Kind::index_fraction, rho}; }
    static PartitionMode snr_threshold(double s) { return {Kind::snr_threshold, s}; }
};

// Base steps [0, boundary) form the slow (high-noise) region, [boundary, n) the
// fast (low-noise) region.
struct PhasePartition {
    std::size_t n_steps = 0;
    std::size_t boundary_index = 0;
    double boundary_tau = 0.0;

    std::size_t slow_size() const noexcept { return boundary_index; }
    std::size_t fast_size() const noexcept { return n_steps - boundary_index; }
    std::vector<std::size_t> slow_indices() const;
    std::vector<std::size_t> fast_indices() const;
};

PhasePartition partition(const TimeGrid& grid, PartitionMode mode = {});

// Executed base-grid indices. Slow indices all precede fast indices; each Euler
// step runs from an executed knot to the next executed knot, the last one to 1.
struct PhaseSchedule {
    TimeGrid grid = TimeGrid::uniform(1);
    PhasePartition partition;
    std::vector<std::size_t> slow;
    std::vector<std::size_t> fast;

    std::vector<std::size_t> executed() const;
    std::size_t nfe() const noexcept { return slow.size() + fast.size(); }
    bool in_slow(std::size_t index) const;
    bool in_fast(std::size_t index) const;

    // (tau_from, tau_to, base index) per executed step.
    struct Step {
        double tau_from;
        double tau_to;
        std::size_t index;
    };
    std::vector<Step> steps() const;

    nlohmann::json to_json() const;
    static PhaseSchedule from_json(const nlohmann::json& j);
};

// Stride allocation: k evenly strided indices floor(region/k) apart in each region.
PhaseSchedule allocate(const TimeGrid& grid, const PhasePartition& partition, std::size_t k_slow, std::size_t k_fast);

// k indices strided floor(n/k) across the whole grid, split at the partition boundary.
PhaseSchedule uniform_schedule(const TimeGrid& grid, const PhasePartition& partition, std::size_t k);

// Every base step executed.
PhaseSchedule full_schedule(const TimeGrid& grid, const PhasePartition& partition);

std::size_t nfe(const PhaseSchedule& schedule) noexcept;

// teacher NFE / student NFE.
double speedup(std::size_t teacher_nfe, std::size_t student_nfe);

// Parses "slowK-fastM", "teacherN" or "uniformK". "teacher" alone means every
// step of the given grid; "teacherN" uses its own N-step grid.
struct ScheduleSpec {
    enum class Kind { slow_fast, uniform, full };
    Kind kind = Kind::slow_fast;
    std::size_t k_slow = 0;
    std::size_t k_fast = 0;
    std::size_t k = 0;

    static ScheduleSpec parse(const std::string& text);
    std::string str() const;
    PhaseSchedule build(const TimeGrid& grid, const PhasePartition& partition) const;
};

} // namespace slowfast

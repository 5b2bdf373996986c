#include "slowfast/schedule.hpp"

#include "slowfast/error.hpp"

#include <algorithm>
#include <cmath>
#include <regex>

namespace slowfast {

TimeGrid TimeGrid::uniform(std::size_t n_steps) {
    if (n_steps == 0) {
        throw ConfigError("time grid needs at least one step");
    }
    std::vector<double> knots(n_steps + 1);
    for (std::size_t i = 0; i <= n_steps; ++i) {
        knots[i] = static_cast<double>(i) / static_cast<double>(n_steps);
    }
    knots.back() = 1.0;
    return from_knots(std::move(knots));
}

TimeGrid TimeGrid::from_knots(std::vector<double> knots) {
    if (knots.size() < 2 || knots.front() != 0.0 || knots.back() != 1.0) {
        throw ConfigError("time grid must run from exactly 0 to exactly 1");
    }
    for (std::size_t i = 1; i < knots.size(); ++i) {
        if (!(knots[i] > knots[i - 1])) {
            throw ConfigError("time grid knots must strictly increase");
        }
    }
    TimeGrid g;
    g.knots_ = std::move(knots);
    return g;
}

double snr(double tau) {
    if (!(tau > 0.0 && tau < 1.0)) {
        throw DomainError("snr: tau must lie in (0,1), got " + std::to_string(tau));
    }
    const double r = tau / (1.0 - tau);
    return r * r;
}

std::vector<std::size_t> PhasePartition::slow_indices() const {
    std::vector<std::size_t> out(boundary_index);
    for (std::size_t i = 0; i < boundary_index; ++i) {
        out[i] = i;
    }
    return out;
}

std::vector<std::size_t> PhasePartition::fast_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = boundary_index; i < n_steps; ++i) {
        out.push_back(i);
    }
    return out;
}

PhasePartition partition(const TimeGrid& grid, PartitionMode mode) {
    const std::size_t n = grid.n_steps();
    std::size_t boundary = 0;
    switch (mode.kind) {
    case PartitionMode::Kind::index_fraction: {
        if (!(mode.value > 0.0 && mode.value < 1.0)) {
            throw ConfigError("index_fraction rho must lie in (0,1)");
        }
        // Guard against products such as 0.4·50 landing a hair above the integer.
        boundary = static_cast<std::size_t>(std::ceil(mode.value * static_cast<double>(n) - 1e-9));
        break;
    }
    case PartitionMode::Kind::snr_threshold: {
        if (!(mode.value > 0.0)) {
            throw ConfigError("snr threshold must be positive");
        }
        // Knot 0 is pure noise with SNR 0. SNR increases with tau, so the slow
        // region is a prefix.
        while (boundary < n && (grid.knot(boundary) == 0.0 || snr(grid.knot(boundary)) < mode.value)) {
            ++boundary;
        }
        break;
    }
    }
    if (boundary == 0 || boundary >= n) {
        throw ConfigError("phase partition leaves an empty phase (boundary " + std::to_string(boundary) +
                          " of " + std::to_string(n) + " steps)");
    }
    return {n, boundary, grid.knot(boundary)};
}

std::vector<std::size_t> PhaseSchedule::executed() const {
    std::vector<std::size_t> out = slow;
    out.insert(out.end(), fast.begin(), fast.end());
    return out;
}

bool PhaseSchedule::in_slow(std::size_t index) const {
    return std::binary_search(slow.begin(), slow.end(), index);
}

bool PhaseSchedule::in_fast(std::size_t index) const {
    return std::binary_search(fast.begin(), fast.end(), index);
}

std::vector<PhaseSchedule::Step> PhaseSchedule::steps() const {
    const auto idx = executed();
    std::vector<Step> out;
    out.reserve(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const double to = i + 1 < idx.size() ? grid.knot(idx[i + 1]) : 1.0;
        out.push_back({grid.knot(idx[i]), to, idx[i]});
    }
    return out;
}

nlohmann::json PhaseSchedule::to_json() const {
    return {{"n_steps", grid.n_steps()},
            {"boundary_index", partition.boundary_index},
            {"slow", slow},
            {"fast", fast}};
}

PhaseSchedule PhaseSchedule::from_json(const nlohmann::json& j) {
    PhaseSchedule s;
    s.grid = TimeGrid::uniform(j.at("n_steps").get<std::size_t>());
    const auto b = j.at("boundary_index").get<std::size_t>();
    if (b == 0 || b >= s.grid.n_steps()) {
        throw ConfigError("schedule boundary out of range");
    }
    s.partition = {s.grid.n_steps(), b, s.grid.knot(b)};
    s.slow = j.at("slow").get<std::vector<std::size_t>>();
    s.fast = j.at("fast").get<std::vector<std::size_t>>();
    for (std::size_t i : s.slow) {
        if (i >= b) {
            throw ConfigError("slow index beyond boundary");
        }
    }
    for (std::size_t i : s.fast) {
        if (i < b || i >= s.grid.n_steps()) {
            throw ConfigError("fast index outside fast region");
        }
    }
    if (!std::is_sorted(s.slow.begin(), s.slow.end()) || !std::is_sorted(s.fast.begin(), s.fast.end()) ||
        s.nfe() == 0) {
        throw ConfigError("schedule indices must be sorted and non-empty");
    }
    if (s.slow.empty() || s.slow.front() != 0) {
        throw ConfigError("schedule must start at step 0");
    }
    return s;
}

namespace {

std::vector<std::size_t> strided(std::size_t start, std::size_t region, std::size_t k, const char* name) {
    if (k == 0) {
        return {};
    }
    if (k > region) {
        throw ConfigError(std::string(name) + " allocation of " + std::to_string(k) + " exceeds region size " +
                          std::to_string(region));
    }
    const std::size_t stride = region / k;
    std::vector<std::size_t> out(k);
    for (std::size_t i = 0; i < k; ++i) {
        out[i] = start + i * stride;
    }
    return out;
}

} // namespace

PhaseSchedule allocate(const TimeGrid& grid, const PhasePartition& partition, std::size_t k_slow,
                       std::size_t k_fast) {
    if (partition.n_steps != grid.n_steps()) {
        throw ConfigError("partition does not belong to this grid");
    }
    if (k_slow == 0) {
        throw ConfigError("schedule must execute the first slow step");
    }
    PhaseSchedule s;
    s.grid = grid;
    s.partition = partition;
    s.slow = strided(0, partition.slow_size(), k_slow, "slow");
    s.fast = strided(partition.boundary_index, partition.fast_size(), k_fast, "fast");
    return s;
}

PhaseSchedule uniform_schedule(const TimeGrid& grid, const PhasePartition& partition, std::size_t k) {
    if (partition.n_steps != grid.n_steps()) {
        throw ConfigError("partition does not belong to this grid");
    }
    PhaseSchedule s;
    s.grid = grid;
    s.partition = partition;
    for (std::size_t i : strided(0, grid.n_steps(), k, "uniform")) {
        (i < partition.boundary_index ? s.slow : s.fast).push_back(i);
    }
    return s;
}

PhaseSchedule full_schedule(const TimeGrid& grid, const PhasePartition& partition) {
    return allocate(grid, partition, partition.slow_size(), partition.fast_size());
}

std::size_t nfe(const PhaseSchedule& schedule) noexcept {
    return schedule.nfe();
}

double speedup(std::size_t teacher_nfe, std::size_t student_nfe) {
    if (student_nfe == 0) {
        throw ContractError("student NFE must be positive");
    }
    return static_cast<double>(teacher_nfe) / static_cast<double>(student_nfe);
}

ScheduleSpec ScheduleSpec::parse(const std::string& text) {
    static const std::regex slow_fast(R"(slow(\d+)-fast(\d+))");
    static const std::regex uniform(R"(uniform(\d+))");
    static const std::regex teacher(R"(teacher(\d*))");
    std::smatch m;
    ScheduleSpec s;
    if (std::regex_match(text, m, slow_fast)) {
        s.kind = Kind::slow_fast;
        s.k_slow = std::stoul(m[1]);
        s.k_fast = std::stoul(m[2]);
    } else if (std::regex_match(text, m, uniform)) {
        s.kind = Kind::uniform;
        s.k = std::stoul(m[1]);
    } else if (std::regex_match(text, m, teacher)) {
        s.kind = Kind::full;
        s.k = m[1].length() > 0 ? std::stoul(m[1]) : 0;
    } else {
        throw ConfigError("unrecognized schedule '" + text + "' (expected slowK-fastM, uniformK or teacher)");
    }
    return s;
}

std::string ScheduleSpec::str() const {
    switch (kind) {
    case Kind::slow_fast:
        return "slow" + std::to_string(k_slow) + "-fast" + std::to_string(k_fast);
    case Kind::uniform:
        return "uniform" + std::to_string(k);
    case Kind::full:
        return k == 0 ? "teacher" : "teacher" + std::to_string(k);
    }
    return "?";
}

PhaseSchedule ScheduleSpec::build(const TimeGrid& grid, const PhasePartition& partition) const {
    switch (kind) {
    case Kind::slow_fast:
        return allocate(grid, partition, k_slow, k_fast);
    case Kind::uniform:
        return uniform_schedule(grid, partition, k);
    case Kind::full:
        if (k == 0 || k == grid.n_steps()) {
            return full_schedule(grid, partition);
        } else {
            const TimeGrid own = TimeGrid::uniform(k);
            return full_schedule(own, slowfast::partition(own));
        }
    }
    throw ConfigError("bad schedule kind");
}

} // namespace slowfast

#include "slowfast/rng.hpp"

#include <cmath>
#include <numbers>

namespace slowfast {

double CounterRng::normal_at(std::uint64_t counter) const noexcept {
    const double u1 = uniform_at(counter);
    const double u2 = uniform_at(counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

} // namespace slowfast

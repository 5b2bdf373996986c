#pragma once

#include "slowfast/sampling.hpp"
#include "slowfast/tensor.hpp"

#include <cstdint>

namespace slowfast {

// Mean over rows of the squared Euclidean distance between matching rows.
double endpoint_mse(const Tensor& student, const Tensor& teacher);
double endpoint_mse(const Trajectory& student, const Trajectory& teacher);

// 2·E‖x − y‖ − E‖x − x'‖ − E‖y − y'‖ with every expectation taken over all
// ordered pairs (self-pairs included), so energy_distance(X, X) = 0 exactly.
double energy_distance(const Tensor& x, const Tensor& y);

// Mean over n_proj random unit directions of the squared 1-D Wasserstein-2
// distance between the projected samples. The larger set is subsampled without
// replacement to the size of the smaller one.
double sliced_w2(const Tensor& x, const Tensor& y, std::size_t n_proj, std::uint64_t seed);

} // namespace slowfast

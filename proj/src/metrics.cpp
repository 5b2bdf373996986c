#include "slowfast/metrics.hpp"

#include "slowfast/error.hpp"
#include "slowfast/kernels.hpp"
#include "slowfast/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace slowfast {

double endpoint_mse(const Tensor& student, const Tensor& teacher) {
    if (!student.same_shape(teacher)) {
        throw ContractError("endpoint_mse batch mismatch: " + student.shape_str() + " vs " + teacher.shape_str());
    }
    if (student.rows() == 0) {
        throw ContractError("endpoint_mse of an empty batch");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < student.size(); ++i) {
        const double d = student[i] - teacher[i];
        acc += d * d;
    }
    return acc / static_cast<double>(student.rows());
}

double endpoint_mse(const Trajectory& student, const Trajectory& teacher) {
    if (!bit_equal(student.states.front(), teacher.states.front())) {
        throw ContractError("endpoint_mse: trajectories start from different noise");
    }
    return endpoint_mse(student.terminal(), teacher.terminal());
}

double energy_distance(const Tensor& x, const Tensor& y) {
    if (x.rows() < 2 || y.rows() < 2) {
        throw ContractError("energy_distance needs at least 2 samples per set");
    }
    if (x.cols() != y.cols()) {
        throw DimensionError("energy_distance dimension mismatch: " + x.shape_str() + " vs " + y.shape_str());
    }
    const double n = static_cast<double>(x.rows());
    const double m = static_cast<double>(y.rows());
    const double xy = kernels::pairwise_distance_sum(x, y) / (n * m);
    const double xx = kernels::pairwise_distance_sum(x, x) / (n * n);
    const double yy = kernels::pairwise_distance_sum(y, y) / (m * m);
    // Clamp the rounding residue on identical sets.
    return std::max(0.0, 2.0 * xy - xx - yy);
}

namespace {

Tensor subsample(const Tensor& t, std::size_t k, const CounterRng& rng) {
    if (t.rows() == k) {
        return t;
    }
    std::vector<std::size_t> idx(t.rows());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.bits_at(i) % (t.rows() - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return t.gather_rows(idx);
}

} // namespace

double sliced_w2(const Tensor& x, const Tensor& y, std::size_t n_proj, std::uint64_t seed) {
    if (x.rows() == 0 || y.rows() == 0) {
        throw ContractError("sliced_w2 of an empty sample set");
    }
    if (n_proj == 0) {
        throw ContractError("sliced_w2 needs at least one projection");
    }
    if (x.cols() != y.cols()) {
        throw DimensionError("sliced_w2 dimension mismatch: " + x.shape_str() + " vs " + y.shape_str());
    }
    const std::size_t n = std::min(x.rows(), y.rows());
    const CounterRng sub_rng(seed, Stream::subsample);
    const Tensor xs = subsample(x, n, sub_rng);
    const Tensor ys = subsample(y, n, sub_rng);
    const CounterRng dir_rng(seed, Stream::eval_projection);
    const std::size_t d = x.cols();

    std::vector<double> dir(d), px(n), py(n);
    double total = 0.0;
    for (std::size_t p = 0; p < n_proj; ++p) {
        double norm = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            dir[c] = dir_rng.normal_at((p * d + c) * 2);
            norm += dir[c] * dir[c];
        }
        norm = std::sqrt(norm);
        for (double& v : dir) {
            v /= norm;
        }
        for (std::size_t i = 0; i < n; ++i) {
            double a = 0.0;
            double b = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                a += xs(i, c) * dir[c];
                b += ys(i, c) * dir[c];
            }
            px[i] = a;
            py[i] = b;
        }
        std::sort(px.begin(), px.end());
        std::sort(py.begin(), py.end());
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double diff = px[i] - py[i];
            acc += diff * diff;
        }
        total += acc / static_cast<double>(n);
    }
    return total / static_cast<double>(n_proj);
}

} // namespace slowfast

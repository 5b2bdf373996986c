#include "slowfast/kernels.hpp"

#include "slowfast/error.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace slowfast::kernels {

namespace {

// Below this many multiply-adds the fork/join cost dominates.
constexpr std::size_t kParallelThreshold = 1u << 15;

bool use_parallel(Exec exec, std::size_t work) {
    switch (exec) {
    case Exec::serial:
        return false;
    case Exec::parallel:
        return true;
    case Exec::automatic:
        break;
    }
    return work >= kParallelThreshold && max_threads() > 1;
}

void prepare(Tensor& out, std::size_t rows, std::size_t cols, bool accumulate) {
    if (accumulate) {
        if (out.rows() != rows || out.cols() != cols) {
            throw DimensionError("gemm accumulate target has shape " + out.shape_str());
        }
    } else if (out.rows() != rows || out.cols() != cols) {
        out = Tensor(rows, cols);
    } else {
        out.fill(0.0);
    }
}

inline void row_nn(const double* __restrict a, const double* __restrict b, double* __restrict c, std::size_t k,
                   std::size_t n) {
    for (std::size_t p = 0; p < k; ++p) {
        const double s = a[p];
        const double* __restrict brow = b + p * n;
        for (std::size_t j = 0; j < n; ++j) {
            c[j] += s * brow[j];
        }
    }
}

// Output row i of aᵀ·b: column i of a against every row of b.
inline void row_tn(const double* __restrict a, const double* __restrict b, double* __restrict c, std::size_t i,
                   std::size_t k, std::size_t m, std::size_t n) {
    for (std::size_t p = 0; p < k; ++p) {
        const double s = a[p * m + i];
        const double* __restrict brow = b + p * n;
        for (std::size_t j = 0; j < n; ++j) {
            c[j] += s * brow[j];
        }
    }
}

Tensor transposed(const Tensor& t) {
    Tensor out(t.cols(), t.rows());
    for (std::size_t r = 0; r < t.rows(); ++r) {
        for (std::size_t c = 0; c < t.cols(); ++c) {
            out(c, r) = t(r, c);
        }
    }
    return out;
}

double row_distance_sum(const double* x, const Tensor& y, std::size_t d) {
    double acc = 0.0;
    const double* yd = y.data().data();
    for (std::size_t j = 0; j < y.rows(); ++j) {
        double sq = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            const double diff = x[c] - yd[j * d + c];
            sq += diff * diff;
        }
        acc += std::sqrt(sq);
    }
    return acc;
}

} // namespace

int max_threads() noexcept {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void gemm_nn(const Tensor& a, const Tensor& b, Tensor& out, bool accumulate, Exec exec) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul shape mismatch: " + a.shape_str() + " x " + b.shape_str());
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    prepare(out, m, n, accumulate);
    const double* ad = a.data().data();
    const double* bd = b.data().data();
    double* cd = out.data().data();
    const auto rows = static_cast<std::int64_t>(m);
    if (use_parallel(exec, m * k * n)) {
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < rows; ++i) {
            row_nn(ad + i * k, bd, cd + i * n, k, n);
        }
    } else {
        for (std::int64_t i = 0; i < rows; ++i) {
            row_nn(ad + i * k, bd, cd + i * n, k, n);
        }
    }
}

void gemm_nt(const Tensor& a, const Tensor& b, Tensor& out, bool accumulate, Exec exec) {
    if (a.cols() != b.cols()) {
        throw DimensionError("matmul shape mismatch: " + a.shape_str() + " x " + b.shape_str() + "^T");
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    prepare(out, m, n, accumulate);
    // bᵀ is materialized so the product runs in axpy form.
    const Tensor b_t = transposed(b);
    const double* ad = a.data().data();
    const double* bd = b_t.data().data();
    double* cd = out.data().data();
    const auto rows = static_cast<std::int64_t>(m);
    if (use_parallel(exec, m * k * n)) {
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < rows; ++i) {
            row_nn(ad + i * k, bd, cd + i * n, k, n);
        }
    } else {
        for (std::int64_t i = 0; i < rows; ++i) {
            row_nn(ad + i * k, bd, cd + i * n, k, n);
        }
    }
}

void gemm_tn(const Tensor& a, const Tensor& b, Tensor& out, bool accumulate, Exec exec) {
    if (a.rows() != b.rows()) {
        throw DimensionError("matmul shape mismatch: " + a.shape_str() + "^T x " + b.shape_str());
    }
    const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
    prepare(out, m, n, accumulate);
    const double* ad = a.data().data();
    const double* bd = b.data().data();
    double* cd = out.data().data();
    const auto rows = static_cast<std::int64_t>(m);
    if (use_parallel(exec, m * k * n)) {
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < rows; ++i) {
            row_tn(ad, bd, cd + i * n, static_cast<std::size_t>(i), k, m, n);
        }
    } else {
        for (std::int64_t i = 0; i < rows; ++i) {
            row_tn(ad, bd, cd + i * n, static_cast<std::size_t>(i), k, m, n);
        }
    }
}

double pairwise_distance_sum(const Tensor& x, const Tensor& y, Exec exec) {
    if (x.cols() != y.cols()) {
        throw DimensionError("pairwise distance dimension mismatch: " + x.shape_str() + " vs " + y.shape_str());
    }
    const std::size_t d = x.cols();
    std::vector<double> partial(x.rows(), 0.0);
    const double* xd = x.data().data();
    const auto rows = static_cast<std::int64_t>(x.rows());
    if (use_parallel(exec, x.rows() * y.rows() * d)) {
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < rows; ++i) {
            partial[i] = row_distance_sum(xd + i * d, y, d);
        }
    } else {
        for (std::int64_t i = 0; i < rows; ++i) {
            partial[i] = row_distance_sum(xd + i * d, y, d);
        }
    }
    double total = 0.0;
    for (double p : partial) {
        total += p;
    }
    return total;
}

} // namespace slowfast::kernels

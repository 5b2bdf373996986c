#pragma once

// Data-parallel inner loops. Every kernel has a serial reference and an OpenMP
// variant. Both variants partition work by output row and run the identical
// per-row loop, so their results are bit-identical for any thread count.

#include "slowfast/tensor.hpp"

#include <cmath>

namespace slowfast::kernels {

enum class Exec { serial, parallel, automatic };

// out (+)= a · b          a: m×k, b: k×n, out: m×n
void gemm_nn(const Tensor& a, const Tensor& b, Tensor& out, bool accumulate, Exec exec = Exec::automatic);
// out (+)= a · bᵀ         a: m×k, b: n×k, out: m×n
void gemm_nt(const Tensor& a, const Tensor& b, Tensor& out, bool accumulate, Exec exec = Exec::automatic);
// out (+)= aᵀ · b         a: k×m, b: k×n, out: m×n
void gemm_tn(const Tensor& a, const Tensor& b, Tensor& out, bool accumulate, Exec exec = Exec::automatic);

// Sum over all (i, j) of ‖x_i − y_j‖₂. Row partial sums are reduced serially in
// row order.
double pairwise_distance_sum(const Tensor& x, const Tensor& y, Exec exec = Exec::automatic);

// Logistic function, split by sign so exp never overflows.
inline double sigmoid(double x) noexcept {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Number of threads the parallel variants would use; 1 without OpenMP.
int max_threads() noexcept;

} // namespace slowfast::kernels

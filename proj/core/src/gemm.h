#pragma once

#include <cstddef>

namespace leafkit::detail {

// C[M,N] = op(A) * op(B)  (or C += ... when accumulate is set).
// op(A) is [M,K]: A is stored [M,K], or [K,M] when trans_a.
// op(B) is [K,N]: B is stored [K,N], or [N,K] when trans_b.
// Products are accumulated in double; the summation order is fixed.
void gemm(bool trans_a, bool trans_b, std::size_t M, std::size_t N, std::size_t K, const float* A,
          const float* B, float* C, bool accumulate);

}  // namespace leafkit::detail

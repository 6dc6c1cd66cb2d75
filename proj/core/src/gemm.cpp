#include "gemm.h"

#include <algorithm>
#include <vector>

namespace leafkit::detail {

namespace {

// Register tile and cache blocks. Every C element still sums its K products
// in ascending k order, and a product of two floats is exact in double, so
// the result does not depend on the blocking or on FMA contraction.
constexpr std::size_t kMr = 4, kNr = 8;
constexpr std::size_t kKc = 256, kNc = 512;

std::size_t round_up(std::size_t v, std::size_t m) { return (v + m - 1) / m * m; }

// Cw[mp, np] += Ap * Bp over kb steps. Ap holds mp/kMr panels of [kb][kMr],
// Bp holds np/kNr panels of [kb][kNr]; Cw is row-major with stride np.
[[gnu::target_clones("avx512f", "avx2", "default")]]
void block_kernel(std::size_t kb, std::size_t mp, std::size_t np, const double* Ap, const double* Bp, double* Cw) {
  for (std::size_t jp = 0; jp < np; jp += kNr) {
    const double* b = Bp + jp * kb;
    for (std::size_t ip = 0; ip < mp; ip += kMr) {
      const double* a = Ap + ip * kb;
      double acc[kMr][kNr];
      for (std::size_t r = 0; r < kMr; ++r)
        for (std::size_t c = 0; c < kNr; ++c) acc[r][c] = Cw[(ip + r) * np + jp + c];
      for (std::size_t k = 0; k < kb; ++k) {
        const double* bk = b + k * kNr;
        const double* ak = a + k * kMr;
        for (std::size_t r = 0; r < kMr; ++r)
          for (std::size_t c = 0; c < kNr; ++c) acc[r][c] += ak[r] * bk[c];
      }
      for (std::size_t r = 0; r < kMr; ++r)
        for (std::size_t c = 0; c < kNr; ++c) Cw[(ip + r) * np + jp + c] = acc[r][c];
    }
  }
}

}  // namespace

void gemm(bool trans_a, bool trans_b, std::size_t M, std::size_t N, std::size_t K, const float* A,
          const float* B, float* C, bool accumulate) {
  if (M == 0 || N == 0) return;
  auto a_at = [&](std::size_t i, std::size_t k) { return trans_a ? A[k * M + i] : A[i * K + k]; };
  auto b_at = [&](std::size_t k, std::size_t j) { return trans_b ? B[j * K + k] : B[k * N + j]; };

  const std::size_t mp = round_up(M, kMr);
  std::vector<double> Ap(mp * std::min(K, kKc));
  std::vector<double> Bp(round_up(std::min(N, kNc), kNr) * std::min(K, kKc));
  std::vector<double> Cw;

  for (std::size_t jc = 0; jc < N; jc += kNc) {
    const std::size_t nb = std::min(kNc, N - jc), np = round_up(nb, kNr);
    Cw.assign(mp * np, 0.0);
    for (std::size_t pc = 0; pc < K; pc += kKc) {
      const std::size_t kb = std::min(kKc, K - pc);
      for (std::size_t jp = 0; jp < np; jp += kNr)
        for (std::size_t k = 0; k < kb; ++k)
          for (std::size_t c = 0; c < kNr; ++c) {
            const std::size_t j = jp + c;
            Bp[jp * kb + k * kNr + c] = j < nb ? static_cast<double>(b_at(pc + k, jc + j)) : 0.0;
          }
      for (std::size_t ip = 0; ip < mp; ip += kMr)
        for (std::size_t k = 0; k < kb; ++k)
          for (std::size_t r = 0; r < kMr; ++r) {
            const std::size_t i = ip + r;
            Ap[ip * kb + k * kMr + r] = i < M ? static_cast<double>(a_at(i, pc + k)) : 0.0;
          }
      block_kernel(kb, mp, np, Ap.data(), Bp.data(), Cw.data());
    }
    for (std::size_t i = 0; i < M; ++i) {
      float* crow = C + i * N + jc;
      const double* wrow = Cw.data() + i * np;
      if (accumulate) {
        for (std::size_t j = 0; j < nb; ++j) crow[j] = static_cast<float>(static_cast<double>(crow[j]) + wrow[j]);
      } else {
        for (std::size_t j = 0; j < nb; ++j) crow[j] = static_cast<float>(wrow[j]);
      }
    }
  }
}

}  // namespace leafkit::detail

#pragma once

#include <cstddef>
#include <cstring>
#include <vector>

namespace dect::detail {

// C[M x N] += A[M x K] * B[K x N], all row-major and densely packed.
//
// Register-blocked microkernel: 4 rows x JB columns of accumulators, inner
// loops written so the compiler vectorizes the column dimension. Every output
// element is produced by exactly one fixed-order dot product, so results are
// bit-reproducible regardless of how callers parallelize over disjoint
// outputs.
template <typename T>
void gemm_acc(int M, int N, int K, const T* __restrict a, const T* __restrict b, T* __restrict c) {
    constexpr int JB = 64;
    T acc0[JB], acc1[JB], acc2[JB], acc3[JB];
    for (int j0 = 0; j0 < N; j0 += JB) {
        const int jn = (N - j0) < JB ? (N - j0) : JB;
        int i = 0;
        for (; i + 4 <= M; i += 4) {
            for (int j = 0; j < jn; ++j) acc0[j] = acc1[j] = acc2[j] = acc3[j] = T(0);
            const T* __restrict a0 = a + static_cast<size_t>(i + 0) * K;
            const T* __restrict a1 = a + static_cast<size_t>(i + 1) * K;
            const T* __restrict a2 = a + static_cast<size_t>(i + 2) * K;
            const T* __restrict a3 = a + static_cast<size_t>(i + 3) * K;
            for (int k = 0; k < K; ++k) {
                const T* __restrict brow = b + static_cast<size_t>(k) * N + j0;
                const T av0 = a0[k], av1 = a1[k], av2 = a2[k], av3 = a3[k];
                for (int j = 0; j < jn; ++j) {
                    const T bv = brow[j];
                    acc0[j] += av0 * bv;
                    acc1[j] += av1 * bv;
                    acc2[j] += av2 * bv;
                    acc3[j] += av3 * bv;
                }
            }
            T* __restrict c0 = c + static_cast<size_t>(i + 0) * N + j0;
            T* __restrict c1 = c + static_cast<size_t>(i + 1) * N + j0;
            T* __restrict c2 = c + static_cast<size_t>(i + 2) * N + j0;
            T* __restrict c3 = c + static_cast<size_t>(i + 3) * N + j0;
            for (int j = 0; j < jn; ++j) {
                c0[j] += acc0[j];
                c1[j] += acc1[j];
                c2[j] += acc2[j];
                c3[j] += acc3[j];
            }
        }
        for (; i < M; ++i) {
            for (int j = 0; j < jn; ++j) acc0[j] = T(0);
            const T* __restrict arow = a + static_cast<size_t>(i) * K;
            for (int k = 0; k < K; ++k) {
                const T* __restrict brow = b + static_cast<size_t>(k) * N + j0;
                const T av = arow[k];
                for (int j = 0; j < jn; ++j) acc0[j] += av * brow[j];
            }
            T* __restrict crow = c + static_cast<size_t>(i) * N + j0;
            for (int j = 0; j < jn; ++j) crow[j] += acc0[j];
        }
    }
}

// dst[N x M] = src[M x N] transposed; lets callers feed gemm_acc with
// plain row-major operands instead of strided access inside the kernel.
template <typename T>
void transpose(int M, int N, const T* __restrict src, T* __restrict dst) {
    constexpr int B = 32;
    for (int i0 = 0; i0 < M; i0 += B)
        for (int j0 = 0; j0 < N; j0 += B) {
            const int in = (M - i0) < B ? (M - i0) : B;
            const int jn = (N - j0) < B ? (N - j0) : B;
            for (int i = 0; i < in; ++i)
                for (int j = 0; j < jn; ++j)
                    dst[static_cast<size_t>(j0 + j) * M + (i0 + i)] =
                        src[static_cast<size_t>(i0 + i) * N + (j0 + j)];
        }
}

}  // namespace dect::detail

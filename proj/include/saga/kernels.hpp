#pragma once

#include <cstddef>

namespace saga::kernels {

// Dense kernels behind the graph ops. Each has a serial reference version
// (suffix _ref) kept for testing and an OpenMP version parallelized over
// output rows only. Every output element is accumulated in the same
// row-major k-order in both versions, so results are bit-identical for any
// thread count; tests assert that, and the bench tool compares wall time.

// C[m x n] = A[m x k] * B[k x n]
template <typename T>
void matmul_ref(const T* a, const T* b, T* c, size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; i++) {
        T* ci = c + i * n;
        for (size_t j = 0; j < n; j++) ci[j] = T(0);
        for (size_t l = 0; l < k; l++) {
            const T ail = a[i * k + l];
            const T* bl = b + l * n;
            for (size_t j = 0; j < n; j++) ci[j] += ail * bl[j];
        }
    }
}

template <typename T>
void matmul(const T* a, const T* b, T* c, size_t m, size_t k, size_t n) {
#pragma omp parallel for schedule(static) if (m * k * n > 16384)
    for (size_t i = 0; i < m; i++) {
        T* ci = c + i * n;
        for (size_t j = 0; j < n; j++) ci[j] = T(0);
        for (size_t l = 0; l < k; l++) {
            const T ail = a[i * k + l];
            const T* bl = b + l * n;
            for (size_t j = 0; j < n; j++) ci[j] += ail * bl[j];
        }
    }
}

// C[m x n] += A[m x k] * B[n x k]^T
template <typename T>
void matmul_nt_acc_ref(const T* a, const T* b, T* c, size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; i++) {
        const T* ai = a + i * k;
        T* ci = c + i * n;
        for (size_t j = 0; j < n; j++) {
            const T* bj = b + j * k;
            T sum = T(0);
            for (size_t l = 0; l < k; l++) sum += ai[l] * bj[l];
            ci[j] += sum;
        }
    }
}

template <typename T>
void matmul_nt_acc(const T* a, const T* b, T* c, size_t m, size_t k, size_t n) {
#pragma omp parallel for schedule(static) if (m * k * n > 16384)
    for (size_t i = 0; i < m; i++) {
        const T* ai = a + i * k;
        T* ci = c + i * n;
        for (size_t j = 0; j < n; j++) {
            const T* bj = b + j * k;
            T sum = T(0);
            for (size_t l = 0; l < k; l++) sum += ai[l] * bj[l];
            ci[j] += sum;
        }
    }
}

// C[k x n] += A[m x k]^T * B[m x n]. Parallel over output rows (columns of A).
template <typename T>
void matmul_tn_acc_ref(const T* a, const T* b, T* c, size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < k; i++) {
        T* ci = c + i * n;
        for (size_t l = 0; l < m; l++) {
            const T ali = a[l * k + i];
            const T* bl = b + l * n;
            for (size_t j = 0; j < n; j++) ci[j] += ali * bl[j];
        }
    }
}

template <typename T>
void matmul_tn_acc(const T* a, const T* b, T* c, size_t m, size_t k, size_t n) {
#pragma omp parallel for schedule(static) if (m * k * n > 16384)
    for (size_t i = 0; i < k; i++) {
        T* ci = c + i * n;
        for (size_t l = 0; l < m; l++) {
            const T ali = a[l * k + i];
            const T* bl = b + l * n;
            for (size_t j = 0; j < n; j++) ci[j] += ali * bl[j];
        }
    }
}

// out[i] = f(in[i]); independent elements.
template <typename T, typename F>
void map_ref(const T* in, T* out, size_t n, F f) {
    for (size_t i = 0; i < n; i++) out[i] = f(in[i]);
}

template <typename T, typename F>
void map(const T* in, T* out, size_t n, F f) {
#pragma omp parallel for schedule(static) if (n > 16384)
    for (size_t i = 0; i < n; i++) out[i] = f(in[i]);
}

}  // namespace saga::kernels

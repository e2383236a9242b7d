#include "mrcot/toylab/kernels.hpp"

#include <cmath>

namespace mrcot::toylab::kernels {

namespace {
thread_local bool g_parallel = true;

constexpr double kGeluC = 0.7978845608028654; // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

inline double gelu_one(double x) {
    double u = kGeluC * (x + kGeluA * x * x * x);
    return 0.5 * x * (1.0 + std::tanh(u));
}

inline double gelu_grad_one(double x) {
    double u = kGeluC * (x + kGeluA * x * x * x);
    double t = std::tanh(u);
    double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

} // namespace

void set_parallel(bool enabled) { g_parallel = enabled; }
bool parallel_enabled() { return g_parallel; }

namespace serial {

void matmul(double* C, const double* A, const double* B, std::size_t M, std::size_t K,
            std::size_t N) {
    for (std::size_t m = 0; m < M; ++m) {
        double* crow = C + m * N;
        for (std::size_t n = 0; n < N; ++n) crow[n] = 0.0;
        const double* arow = A + m * K;
        for (std::size_t k = 0; k < K; ++k) {
            double a = arow[k];
            const double* brow = B + k * N;
            for (std::size_t n = 0; n < N; ++n) crow[n] += a * brow[n];
        }
    }
}

void matmul_nt(double* C, const double* A, const double* B, std::size_t M, std::size_t K,
               std::size_t N) {
    for (std::size_t m = 0; m < M; ++m) {
        const double* arow = A + m * K;
        double* crow = C + m * N;
        for (std::size_t n = 0; n < N; ++n) {
            const double* brow = B + n * K;
            double acc = 0.0;
            for (std::size_t k = 0; k < K; ++k) acc += arow[k] * brow[k];
            crow[n] = acc;
        }
    }
}

void matmul_tn(double* C, const double* A, const double* B, std::size_t M, std::size_t K,
               std::size_t N) {
    for (std::size_t k = 0; k < K; ++k) {
        double* crow = C + k * N;
        for (std::size_t n = 0; n < N; ++n) crow[n] = 0.0;
        for (std::size_t m = 0; m < M; ++m) {
            double a = A[m * K + k];
            const double* brow = B + m * N;
            for (std::size_t n = 0; n < N; ++n) crow[n] += a * brow[n];
        }
    }
}

void add_inplace(double* y, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
}

void add_row_bias(double* Y, const double* b, std::size_t M, std::size_t N) {
    for (std::size_t m = 0; m < M; ++m) {
        double* row = Y + m * N;
        for (std::size_t n = 0; n < N; ++n) row[n] += b[n];
    }
}

void col_sum_acc(double* b, const double* Y, std::size_t M, std::size_t N) {
    for (std::size_t n = 0; n < N; ++n) {
        double acc = 0.0;
        for (std::size_t m = 0; m < M; ++m) acc += Y[m * N + n];
        b[n] += acc;
    }
}

void gelu(double* y, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = gelu_one(x[i]);
}

void gelu_backward(double* dx, const double* x, const double* dy, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dx[i] += gelu_grad_one(x[i]) * dy[i];
}

void softmax_causal(double* S, std::size_t T) {
    for (std::size_t t = 0; t < T; ++t) {
        double* row = S + t * T;
        double max_v = row[0];
        for (std::size_t u = 1; u <= t; ++u) max_v = std::max(max_v, row[u]);
        double sum = 0.0;
        for (std::size_t u = 0; u <= t; ++u) {
            row[u] = std::exp(row[u] - max_v);
            sum += row[u];
        }
        for (std::size_t u = 0; u <= t; ++u) row[u] /= sum;
        for (std::size_t u = t + 1; u < T; ++u) row[u] = 0.0;
    }
}

void softmax_causal_backward(double* dS, const double* A, const double* dA, std::size_t T) {
    for (std::size_t t = 0; t < T; ++t) {
        const double* arow = A + t * T;
        const double* darow = dA + t * T;
        double* drow = dS + t * T;
        double dot = 0.0;
        for (std::size_t u = 0; u <= t; ++u) dot += arow[u] * darow[u];
        for (std::size_t u = 0; u <= t; ++u) drow[u] = arow[u] * (darow[u] - dot);
        for (std::size_t u = t + 1; u < T; ++u) drow[u] = 0.0;
    }
}

} // namespace serial

// The parallel variants split the independent outer dimension across OpenMP
// threads; inner accumulation order matches the serial reference exactly.

void matmul(double* C, const double* A, const double* B, std::size_t M, std::size_t K,
            std::size_t N) {
    if (!g_parallel) return serial::matmul(C, A, B, M, K, N);
#pragma omp parallel for schedule(static)
    for (std::size_t m = 0; m < M; ++m) {
        double* crow = C + m * N;
        for (std::size_t n = 0; n < N; ++n) crow[n] = 0.0;
        const double* arow = A + m * K;
        for (std::size_t k = 0; k < K; ++k) {
            double a = arow[k];
            const double* brow = B + k * N;
            for (std::size_t n = 0; n < N; ++n) crow[n] += a * brow[n];
        }
    }
}

void matmul_nt(double* C, const double* A, const double* B, std::size_t M, std::size_t K,
               std::size_t N) {
    if (!g_parallel) return serial::matmul_nt(C, A, B, M, K, N);
#pragma omp parallel for schedule(static)
    for (std::size_t m = 0; m < M; ++m) {
        const double* arow = A + m * K;
        double* crow = C + m * N;
        for (std::size_t n = 0; n < N; ++n) {
            const double* brow = B + n * K;
            double acc = 0.0;
            for (std::size_t k = 0; k < K; ++k) acc += arow[k] * brow[k];
            crow[n] = acc;
        }
    }
}

void matmul_tn(double* C, const double* A, const double* B, std::size_t M, std::size_t K,
               std::size_t N) {
    if (!g_parallel) return serial::matmul_tn(C, A, B, M, K, N);
#pragma omp parallel for schedule(static)
    for (std::size_t k = 0; k < K; ++k) {
        double* crow = C + k * N;
        for (std::size_t n = 0; n < N; ++n) crow[n] = 0.0;
        for (std::size_t m = 0; m < M; ++m) {
            double a = A[m * K + k];
            const double* brow = B + m * N;
            for (std::size_t n = 0; n < N; ++n) crow[n] += a * brow[n];
        }
    }
}

void add_inplace(double* y, const double* x, std::size_t n) {
    if (!g_parallel) return serial::add_inplace(y, x, n);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
}

void add_row_bias(double* Y, const double* b, std::size_t M, std::size_t N) {
    if (!g_parallel) return serial::add_row_bias(Y, b, M, N);
#pragma omp parallel for schedule(static)
    for (std::size_t m = 0; m < M; ++m) {
        double* row = Y + m * N;
        for (std::size_t n = 0; n < N; ++n) row[n] += b[n];
    }
}

void col_sum_acc(double* b, const double* Y, std::size_t M, std::size_t N) {
    if (!g_parallel) return serial::col_sum_acc(b, Y, M, N);
#pragma omp parallel for schedule(static)
    for (std::size_t n = 0; n < N; ++n) {
        double acc = 0.0;
        for (std::size_t m = 0; m < M; ++m) acc += Y[m * N + n];
        b[n] += acc;
    }
}

void gelu(double* y, const double* x, std::size_t n) {
    if (!g_parallel) return serial::gelu(y, x, n);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) y[i] = gelu_one(x[i]);
}

void gelu_backward(double* dx, const double* x, const double* dy, std::size_t n) {
    if (!g_parallel) return serial::gelu_backward(dx, x, dy, n);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) dx[i] += gelu_grad_one(x[i]) * dy[i];
}

void softmax_causal(double* S, std::size_t T) {
    if (!g_parallel) return serial::softmax_causal(S, T);
#pragma omp parallel for schedule(static)
    for (std::size_t t = 0; t < T; ++t) {
        double* row = S + t * T;
        double max_v = row[0];
        for (std::size_t u = 1; u <= t; ++u) max_v = std::max(max_v, row[u]);
        double sum = 0.0;
        for (std::size_t u = 0; u <= t; ++u) {
            row[u] = std::exp(row[u] - max_v);
            sum += row[u];
        }
        for (std::size_t u = 0; u <= t; ++u) row[u] /= sum;
        for (std::size_t u = t + 1; u < T; ++u) row[u] = 0.0;
    }
}

void softmax_causal_backward(double* dS, const double* A, const double* dA, std::size_t T) {
    if (!g_parallel) return serial::softmax_causal_backward(dS, A, dA, T);
#pragma omp parallel for schedule(static)
    for (std::size_t t = 0; t < T; ++t) {
        const double* arow = A + t * T;
        const double* darow = dA + t * T;
        double* drow = dS + t * T;
        double dot = 0.0;
        for (std::size_t u = 0; u <= t; ++u) dot += arow[u] * darow[u];
        for (std::size_t u = 0; u <= t; ++u) drow[u] = arow[u] * (darow[u] - dot);
        for (std::size_t u = t + 1; u < T; ++u) drow[u] = 0.0;
    }
}

} // namespace mrcot::toylab::kernels

#pragma once

#include <cstddef>

namespace mrcot::toylab::kernels {

/// All kernels write each output element from exactly one thread with a
/// fixed accumulation order, so results are bit-identical for any thread
/// count and identical to the serial reference.
namespace serial {

/// C[M x N] = A[M x K] * B[K x N]
void matmul(double* C, const double* A, const double* B, std::size_t M, std::size_t K,
            std::size_t N);
/// C[M x N] = A[M x K] * B^T, B stored [N x K]
void matmul_nt(double* C, const double* A, const double* B, std::size_t M, std::size_t K,
               std::size_t N);
/// C[K x N] = A^T * B, A stored [M x K], B stored [M x N]
void matmul_tn(double* C, const double* A, const double* B, std::size_t M, std::size_t K,
               std::size_t N);
/// y[i] += x[i]
void add_inplace(double* y, const double* x, std::size_t n);
/// Y[M x N] row-wise += b[N]
void add_row_bias(double* Y, const double* b, std::size_t M, std::size_t N);
/// b[N] += column sums of Y[M x N]
void col_sum_acc(double* b, const double* Y, std::size_t M, std::size_t N);
void gelu(double* y, const double* x, std::size_t n);
/// dx[i] += gelu'(x[i]) * dy[i]
void gelu_backward(double* dx, const double* x, const double* dy, std::size_t n);
/// In-place causal row softmax of S[T x T]: row t normalizes columns <= t,
/// columns > t become exactly 0.
void softmax_causal(double* S, std::size_t T);
/// dS from softmax output A and upstream dA, causal rows. dS[T x T] is
/// overwritten.
void softmax_causal_backward(double* dS, const double* A, const double* dA, std::size_t T);

} // namespace serial

/// Parallel variants (OpenMP over independent output rows/elements). They
/// compute exactly what the serial reference computes.
void matmul(double* C, const double* A, const double* B, std::size_t M, std::size_t K,
            std::size_t N);
void matmul_nt(double* C, const double* A, const double* B, std::size_t M, std::size_t K,
               std::size_t N);
void matmul_tn(double* C, const double* A, const double* B, std::size_t M, std::size_t K,
               std::size_t N);
void add_inplace(double* y, const double* x, std::size_t n);
void add_row_bias(double* Y, const double* b, std::size_t M, std::size_t N);
void col_sum_acc(double* b, const double* Y, std::size_t M, std::size_t N);
void gelu(double* y, const double* x, std::size_t n);
void gelu_backward(double* dx, const double* x, const double* dy, std::size_t n);
void softmax_causal(double* S, std::size_t T);
void softmax_causal_backward(double* dS, const double* A, const double* dA, std::size_t T);

/// Thread-local switch; with parallel execution disabled every kernel call
/// runs the serial reference. Used when whole training runs are already
/// executing on worker threads.
void set_parallel(bool enabled);
bool parallel_enabled();

} // namespace mrcot::toylab::kernels

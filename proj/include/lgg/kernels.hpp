#pragma once

#include <cstdint>

// Low-level dense kernels. Every kernel has a serial reference and an
// OpenMP variant; the parallel variants split work per output element and
// keep each element's accumulation order identical to the serial loop, so
// both produce bit-identical results for any thread count.

namespace lgg::kernels {

enum class Exec { Serial, Parallel };

// Thread-local execution mode. Worker threads that already parallelize at
// the fold level switch themselves to Serial to avoid oversubscription.
Exec& exec_mode();

bool openmp_enabled();
int max_threads();

// y[t][r][o] = sum_k x[r][o*stride + k] * w[t][k] + b[t]
void conv1d_forward(const double* x, std::int64_t rows, std::int64_t len, const double* w,
                    const double* b, std::int64_t t, std::int64_t kw, std::int64_t stride,
                    double* y, std::int64_t out_len);
void conv1d_forward_serial(const double* x, std::int64_t rows, std::int64_t len, const double* w,
                           const double* b, std::int64_t t, std::int64_t kw, std::int64_t stride,
                           double* y, std::int64_t out_len);
void conv1d_forward_parallel(const double* x, std::int64_t rows, std::int64_t len, const double* w,
                             const double* b, std::int64_t t, std::int64_t kw, std::int64_t stride,
                             double* y, std::int64_t out_len);

// Gather-form gradients; dx/dw/db are accumulated into (caller zeroes).
void conv1d_backward_input(const double* dy, const double* w, std::int64_t rows, std::int64_t len,
                           std::int64_t t, std::int64_t kw, std::int64_t stride, double* dx,
                           std::int64_t out_len);
void conv1d_backward_weights(const double* dy, const double* x, std::int64_t rows, std::int64_t len,
                             std::int64_t t, std::int64_t kw, std::int64_t stride, double* dw,
                             double* db, std::int64_t out_len);

// c[m][n] = sum_k a[m][k] * b[k][n]
void matmul(const double* a, const double* b, double* c, std::int64_t m, std::int64_t k,
            std::int64_t n);
void matmul_serial(const double* a, const double* b, double* c, std::int64_t m, std::int64_t k,
                   std::int64_t n);
void matmul_parallel(const double* a, const double* b, double* c, std::int64_t m, std::int64_t k,
                     std::int64_t n);

// c = a * b^T, a: m x k, b: n x k -> c: m x n
void matmul_nt(const double* a, const double* b, double* c, std::int64_t m, std::int64_t k,
               std::int64_t n);
// c = a^T * b, a: k x m, b: k x n -> c: m x n
void matmul_tn(const double* a, const double* b, double* c, std::int64_t m, std::int64_t k,
               std::int64_t n);

// out[..., o] = mean(x[..., o*stride : o*stride+window]) over the last axis;
// `rows` is the product of all leading extents.
void avg_pool_forward(const double* x, std::int64_t rows, std::int64_t len, std::int64_t window,
                      std::int64_t stride, double* y, std::int64_t out_len);
void avg_pool_backward(const double* dy, std::int64_t rows, std::int64_t len, std::int64_t window,
                       std::int64_t stride, double* dx, std::int64_t out_len);

}  // namespace lgg::kernels

#include "lgg/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace lgg::kernels {

Exec& exec_mode() {
#ifdef _OPENMP
  thread_local Exec mode = Exec::Parallel;
#else
  thread_local Exec mode = Exec::Serial;
#endif
  return mode;
}

bool openmp_enabled() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void conv1d_forward_serial(const double* x, std::int64_t rows, std::int64_t len, const double* w,
                           const double* b, std::int64_t t, std::int64_t kw, std::int64_t stride,
                           double* y, std::int64_t out_len) {
  for (std::int64_t ti = 0; ti < t; ++ti) {
    const double* wk = w + ti * kw;
    const double bias = b ? b[ti] : 0.0;
    for (std::int64_t r = 0; r < rows; ++r) {
      const double* xr = x + r * len;
      double* yr = y + (ti * rows + r) * out_len;
      for (std::int64_t o = 0; o < out_len; ++o) {
        const double* win = xr + o * stride;
        double acc = 0.0;
        for (std::int64_t k = 0; k < kw; ++k) acc += win[k] * wk[k];
        yr[o] = acc + bias;
      }
    }
  }
}

void conv1d_forward_parallel(const double* x, std::int64_t rows, std::int64_t len, const double* w,
                             const double* b, std::int64_t t, std::int64_t kw, std::int64_t stride,
                             double* y, std::int64_t out_len) {
#ifdef _OPENMP
  const std::int64_t tr = t * rows;
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < tr; ++i) {
    const std::int64_t ti = i / rows;
    const std::int64_t r = i % rows;
    const double* wk = w + ti * kw;
    const double bias = b ? b[ti] : 0.0;
    const double* xr = x + r * len;
    double* yr = y + i * out_len;
    for (std::int64_t o = 0; o < out_len; ++o) {
      const double* win = xr + o * stride;
      double acc = 0.0;
      for (std::int64_t k = 0; k < kw; ++k) acc += win[k] * wk[k];
      yr[o] = acc + bias;
    }
  }
#else
  conv1d_forward_serial(x, rows, len, w, b, t, kw, stride, y, out_len);
#endif
}

void conv1d_forward(const double* x, std::int64_t rows, std::int64_t len, const double* w,
                    const double* b, std::int64_t t, std::int64_t kw, std::int64_t stride,
                    double* y, std::int64_t out_len) {
  if (exec_mode() == Exec::Parallel) {
    conv1d_forward_parallel(x, rows, len, w, b, t, kw, stride, y, out_len);
  } else {
    conv1d_forward_serial(x, rows, len, w, b, t, kw, stride, y, out_len);
  }
}

void conv1d_backward_input(const double* dy, const double* w, std::int64_t rows, std::int64_t len,
                           std::int64_t t, std::int64_t kw, std::int64_t stride, double* dx,
                           std::int64_t out_len) {
  // dx[r][p] = sum_t sum_{o : o*stride <= p < o*stride+kw} w[t][p-o*stride] * dy[t][r][o]
  const bool par = exec_mode() == Exec::Parallel;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
  for (std::int64_t r = 0; r < rows; ++r) {
    double* dxr = dx + r * len;
    for (std::int64_t p = 0; p < len; ++p) {
      // o*stride in (p-kw, p], o in [0, out_len)
      std::int64_t o_lo = (p - kw + stride) / stride;  // ceil((p-kw+1)/stride)
      if (o_lo < 0) o_lo = 0;
      std::int64_t o_hi = p / stride;
      if (o_hi > out_len - 1) o_hi = out_len - 1;
      double acc = 0.0;
      for (std::int64_t ti = 0; ti < t; ++ti) {
        const double* wk = w + ti * kw;
        const double* dyr = dy + (ti * rows + r) * out_len;
        for (std::int64_t o = o_lo; o <= o_hi; ++o) {
          acc += wk[p - o * stride] * dyr[o];
        }
      }
      dxr[p] += acc;
    }
  }
  (void)par;
}

void conv1d_backward_weights(const double* dy, const double* x, std::int64_t rows, std::int64_t len,
                             std::int64_t t, std::int64_t kw, std::int64_t stride, double* dw,
                             double* db, std::int64_t out_len) {
  const bool par = exec_mode() == Exec::Parallel;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
  for (std::int64_t ti = 0; ti < t; ++ti) {
    double* dwk = dw + ti * kw;
    for (std::int64_t k = 0; k < kw; ++k) {
      double acc = 0.0;
      for (std::int64_t r = 0; r < rows; ++r) {
        const double* xr = x + r * len;
        const double* dyr = dy + (ti * rows + r) * out_len;
        for (std::int64_t o = 0; o < out_len; ++o) acc += xr[o * stride + k] * dyr[o];
      }
      dwk[k] += acc;
    }
    if (db) {
      double acc = 0.0;
      for (std::int64_t r = 0; r < rows; ++r) {
        const double* dyr = dy + (ti * rows + r) * out_len;
        for (std::int64_t o = 0; o < out_len; ++o) acc += dyr[o];
      }
      db[ti] += acc;
    }
  }
  (void)par;
}

void matmul_serial(const double* a, const double* b, double* c, std::int64_t m, std::int64_t k,
                   std::int64_t n) {
  for (std::int64_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (std::int64_t j = 0; j < n; ++j) ci[j] = 0.0;
    for (std::int64_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* bp = b + p * n;
      for (std::int64_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void matmul_parallel(const double* a, const double* b, double* c, std::int64_t m, std::int64_t k,
                     std::int64_t n) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (std::int64_t j = 0; j < n; ++j) ci[j] = 0.0;
    for (std::int64_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* bp = b + p * n;
      for (std::int64_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
#else
  matmul_serial(a, b, c, m, k, n);
#endif
}

void matmul(const double* a, const double* b, double* c, std::int64_t m, std::int64_t k,
            std::int64_t n) {
  if (exec_mode() == Exec::Parallel) {
    matmul_parallel(a, b, c, m, k, n);
  } else {
    matmul_serial(a, b, c, m, k, n);
  }
}

void matmul_nt(const double* a, const double* b, double* c, std::int64_t m, std::int64_t k,
               std::int64_t n) {
  const bool par = exec_mode() == Exec::Parallel;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
  for (std::int64_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::int64_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double acc = 0.0;
      for (std::int64_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] = acc;
    }
  }
  (void)par;
}

void matmul_tn(const double* a, const double* b, double* c, std::int64_t m, std::int64_t k,
               std::int64_t n) {
  const bool par = exec_mode() == Exec::Parallel;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
  for (std::int64_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (std::int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::int64_t p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
      ci[j] = acc;
    }
  }
  (void)par;
}

void avg_pool_forward(const double* x, std::int64_t rows, std::int64_t len, std::int64_t window,
                      std::int64_t stride, double* y, std::int64_t out_len) {
  const double inv = 1.0 / static_cast<double>(window);
  const bool par = exec_mode() == Exec::Parallel;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* xr = x + r * len;
    double* yr = y + r * out_len;
    for (std::int64_t o = 0; o < out_len; ++o) {
      const double* win = xr + o * stride;
      double acc = 0.0;
      for (std::int64_t k = 0; k < window; ++k) acc += win[k];
      yr[o] = acc * inv;
    }
  }
  (void)par;
}

void avg_pool_backward(const double* dy, std::int64_t rows, std::int64_t len, std::int64_t window,
                       std::int64_t stride, double* dx, std::int64_t out_len) {
  const double inv = 1.0 / static_cast<double>(window);
  const bool par = exec_mode() == Exec::Parallel;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* dyr = dy + r * out_len;
    double* dxr = dx + r * len;
    for (std::int64_t p = 0; p < len; ++p) {
      std::int64_t o_lo = (p - window + stride) / stride;
      if (o_lo < 0) o_lo = 0;
      std::int64_t o_hi = p / stride;
      if (o_hi > out_len - 1) o_hi = out_len - 1;
      double acc = 0.0;
      for (std::int64_t o = o_lo; o <= o_hi; ++o) acc += dyr[o];
      dxr[p] += acc * inv;
    }
  }
  (void)par;
}

}  // namespace lgg::kernels

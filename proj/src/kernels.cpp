#include "treebridge/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <limits>

namespace treebridge {

bool Mat::all_finite() const {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

namespace kernels {

bool& parallel_enabled() {
  static bool enabled = true;
  return enabled;
}

namespace {
inline bool go_parallel(size_t work) {
  return parallel_enabled() && work >= 4096 && !omp_in_parallel();
}
}  // namespace

void linear_forward(const Mat& x, const double* W, const double* bias, int out, Mat& y) {
  const int batch = x.rows, in = x.cols;
  y.rows = batch;
  y.cols = out;
  y.a.resize(static_cast<size_t>(batch) * out);
  const size_t work = static_cast<size_t>(batch) * in * out;
#pragma omp parallel for schedule(static) if (go_parallel(work))
  for (int b = 0; b < batch; ++b)
    linear_forward_range(x.data(), in, W, bias, out, y.data(), b, b + 1);
}

void linear_backward_input(const Mat& dy, const double* W, int in, Mat& dx) {
  const int batch = dy.rows, out = dy.cols;
  dx.rows = batch;
  dx.cols = in;
  dx.a.resize(static_cast<size_t>(batch) * in);
  const size_t work = static_cast<size_t>(batch) * in * out;
#pragma omp parallel for schedule(static) if (go_parallel(work))
  for (int b = 0; b < batch; ++b)
    linear_backward_input_range(dy.data(), out, W, in, dx.data(), b, b + 1);
}

void linear_backward_params(const Mat& x, const Mat& dy, double* dW, double* db) {
  const int batch = x.rows, in = x.cols, out = dy.cols;
  const size_t work = static_cast<size_t>(batch) * in * out;
#pragma omp parallel for schedule(static) if (go_parallel(work))
  for (int o = 0; o < out; ++o)
    linear_backward_params_range(x.data(), in, dy.data(), out, batch, dW, db, o, o + 1);
}

void silu_apply(const Mat& z, Mat& y) {
  y.rows = z.rows;
  y.cols = z.cols;
  y.a.resize(z.a.size());
  const size_t n = z.a.size();
#pragma omp parallel for schedule(static) if (go_parallel(n * 8))
  for (long long i = 0; i < static_cast<long long>(n); ++i)
    y.a[i] = silu(z.a[i]);
}

void silu_backward(const Mat& z, const Mat& dy, Mat& dz) {
  dz.rows = z.rows;
  dz.cols = z.cols;
  dz.a.resize(z.a.size());
  const size_t n = z.a.size();
#pragma omp parallel for schedule(static) if (go_parallel(n * 8))
  for (long long i = 0; i < static_cast<long long>(n); ++i)
    dz.a[i] = dy.a[i] * silu_grad(z.a[i]);
}

double fast_exp(double z) {
  if (z < -745.0) return 0.0;
  // z = k*ln2 + r with |r| <= ln2/2; exp(z) = 2^k * exp(r)
  constexpr double inv_ln2 = 1.4426950408889634073599246810019;
  constexpr double ln2_hi = 6.93147180369123816490e-01;
  constexpr double ln2_lo = 1.90821492927058770002e-10;
  const double kd = std::nearbyint(z * inv_ln2);
  const int k = static_cast<int>(kd);
  const double r = (z - kd * ln2_hi) - kd * ln2_lo;
  // Taylor series to r^11/11!; truncation < 7e-15 relative for |r| <= 0.347
  double p = 1.0 / 39916800.0;
  p = p * r + 1.0 / 3628800.0;
  p = p * r + 1.0 / 362880.0;
  p = p * r + 1.0 / 40320.0;
  p = p * r + 1.0 / 5040.0;
  p = p * r + 1.0 / 720.0;
  p = p * r + 1.0 / 120.0;
  p = p * r + 1.0 / 24.0;
  p = p * r + 1.0 / 6.0;
  p = p * r + 0.5;
  p = p * r + 1.0;
  p = p * r + 1.0;
  // scale by 2^k; k in [-1075, 1] here, go through two steps for subnormals
  if (k >= -1021) {
    uint64_t bits = static_cast<uint64_t>(1023 + k) << 52;
    double s;
    __builtin_memcpy(&s, &bits, 8);
    return p * s;
  }
  return std::ldexp(p, k);
}

double logsumexp(const double* v, int n) {
  double m = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < n; ++j) m = std::max(m, v[j]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (int j = 0; j < n; ++j) s += fast_exp(v[j] - m);
  return m + std::log(s);
}

}  // namespace kernels
}  // namespace treebridge

#pragma once

#include <cmath>
#include <cstddef>

#include "treebridge/mat.hpp"

namespace treebridge::kernels {

// Runtime switch for the OpenMP paths. The serial range kernels below are the
// reference implementation; the OpenMP dispatchers split index ranges and call
// the same kernels, so parallel output is bit-identical to serial output.
bool& parallel_enabled();

// ---------------------------------------------------------------------------
// Serial range kernels, templated so tests can instantiate them in wide
// precision (long double) for finite-difference oracles.
// ---------------------------------------------------------------------------

// y[b,o] = bias[o] + sum_i x[b,i] * W[o,i], for b in [b0,b1). W is out x in.
template <class T>
void linear_forward_range(const T* x, int in, const T* W, const T* bias, int out,
                          T* y, int b0, int b1) {
  for (int b = b0; b < b1; ++b) {
    const T* xb = x + static_cast<size_t>(b) * in;
    T* yb = y + static_cast<size_t>(b) * out;
    for (int o = 0; o < out; ++o) {
      const T* w = W + static_cast<size_t>(o) * in;
      T acc = bias[o];
      for (int i = 0; i < in; ++i) acc += xb[i] * w[i];
      yb[o] = acc;
    }
  }
}

// dx[b,i] = sum_o dy[b,o] * W[o,i], for b in [b0,b1).
template <class T>
void linear_backward_input_range(const T* dy, int out, const T* W, int in, T* dx,
                                 int b0, int b1) {
  for (int b = b0; b < b1; ++b) {
    const T* db_ = dy + static_cast<size_t>(b) * out;
    T* dxb = dx + static_cast<size_t>(b) * in;
    for (int i = 0; i < in; ++i) dxb[i] = T(0);
    for (int o = 0; o < out; ++o) {
      const T g = db_[o];
      const T* w = W + static_cast<size_t>(o) * in;
      for (int i = 0; i < in; ++i) dxb[i] += g * w[i];
    }
  }
}

// Accumulates dW[o,i] += sum_b dy[b,o]*x[b,i] and db[o] += sum_b dy[b,o],
// for o in [o0,o1). Each output row is owned by one caller, so the OpenMP
// dispatcher can split over o without a reduction.
template <class T>
void linear_backward_params_range(const T* x, int in, const T* dy, int out,
                                  int batch, T* dW, T* db, int o0, int o1) {
  for (int o = o0; o < o1; ++o) {
    T* wrow = dW + static_cast<size_t>(o) * in;
    T bacc = T(0);
    for (int b = 0; b < batch; ++b) {
      const T g = dy[static_cast<size_t>(b) * out + o];
      bacc += g;
      const T* xb = x + static_cast<size_t>(b) * in;
      for (int i = 0; i < in; ++i) wrow[i] += g * xb[i];
    }
    db[o] += bacc;
  }
}

template <class T>
inline T silu(T z) {
  const T s = T(1) / (T(1) + std::exp(-z));
  return z * s;
}

template <class T>
inline T silu_grad(T z) {
  const T s = T(1) / (T(1) + std::exp(-z));
  return s * (T(1) + z * (T(1) - s));
}

template <class T>
void silu_range(const T* z, T* y, size_t i0, size_t i1) {
  for (size_t i = i0; i < i1; ++i) y[i] = silu(z[i]);
}

// dz = dy * silu'(z)
template <class T>
void silu_backward_range(const T* z, const T* dy, T* dz, size_t i0, size_t i1) {
  for (size_t i = i0; i < i1; ++i) dz[i] = dy[i] * silu_grad(z[i]);
}

// ---------------------------------------------------------------------------
// OpenMP dispatchers (double). Same semantics as the range kernels above.
// ---------------------------------------------------------------------------
void linear_forward(const Mat& x, const double* W, const double* bias, int out, Mat& y);
void linear_backward_input(const Mat& dy, const double* W, int in, Mat& dx);
void linear_backward_params(const Mat& x, const Mat& dy, double* dW, double* db);
void silu_apply(const Mat& z, Mat& y);
void silu_backward(const Mat& z, const Mat& dy, Mat& dz);

// exp(z) for z <= 0, relative error < 1e-12; returns 0 below -745.
// Used in the log-domain Sinkhorn inner loops where libm exp dominates.
double fast_exp(double z);

// log(sum_j exp(v[j])) over [j0,j1); -inf inputs are skipped.
double logsumexp(const double* v, int n);

}  // namespace treebridge::kernels

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "treebridge/kernels.hpp"
#include "treebridge/mat.hpp"
#include "treebridge/rng.hpp"

namespace treebridge {

// v_theta(x, t): spatial MLP embedding and sinusoidal-time MLP embedding are
// concatenated and passed through a trunk MLP back to spatial dimension.
// SiLU between layers; the final trunk layer is zero-initialised so the
// untrained drift is exactly 0.
struct NetArch {
  int d = 1;
  int time_features = 32;  // 16 log-spaced frequencies, sin/cos pairs
  std::vector<int> spatial_hidden{128, 256};
  std::vector<int> time_hidden{128, 256};
  int embed_dim = 32;
  std::vector<int> trunk_hidden{512, 256, 128};

  static NetArch standard(int d, double width_mult = 1.0);

  std::vector<int> spatial_dims() const;  // {d, ..., embed_dim}
  std::vector<int> time_dims() const;     // {time_features, ..., embed_dim}
  std::vector<int> trunk_dims() const;    // {2*embed_dim, ..., d}
  int param_count() const;
  bool operator==(const NetArch&) const = default;
};

struct LayerView {
  int in = 0, out = 0;
  size_t w_off = 0, b_off = 0;
};

std::vector<LayerView> chain_layers(const std::vector<int>& dims, size_t& offset);

struct DriftNet {
  NetArch arch;
  std::vector<double> theta;

  explicit DriftNet(NetArch a) : arch(std::move(a)), theta(arch.param_count(), 0.0) {}
  void init_params(Rng& rng);
};

struct ChainCache {
  std::vector<Mat> inputs;
  std::vector<Mat> pre;
  Mat out;
};

struct ForwardCache {
  Mat time_feats;
  ChainCache spatial, time, trunk;
  Mat concat;
};

// t must be pre-normalised to [0,1] by the caller (t / T^e).
Mat net_forward(const DriftNet& net, const Mat& x, const std::vector<double>& t);
Mat net_forward_cached(const DriftNet& net, const Mat& x, const std::vector<double>& t,
                       ForwardCache& cache);
// d(loss)/d(theta) given d(loss)/d(output); cache from net_forward_cached.
void net_backward(const DriftNet& net, const ForwardCache& cache, const Mat& d_out,
                  std::vector<double>& grad);

// Sinusoidal features for normalised times.
void time_features(int n_features, const std::vector<double>& t, Mat& out);

// Adam with bias correction plus an EMA shadow of the parameters.
struct OptimState {
  std::vector<double> m, v, ema;
  long step = 0;
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double ema_decay = 0.99;

  OptimState(const DriftNet& net, double lr_, double ema_decay_)
      : m(net.theta.size(), 0.0),
        v(net.theta.size(), 0.0),
        ema(net.theta),  // EMA initialised to theta at step 0
        lr(lr_),
        ema_decay(ema_decay_) {}
};

// Error: NonFiniteGradient (step aborted, state unchanged).
void grad_step(DriftNet& net, OptimState& opt, const std::vector<double>& grad);

// -------------------------------------------------------------------------
// Serial reference forward, templated for wide-precision oracles in tests.
// -------------------------------------------------------------------------
template <class T>
void time_features_ref(int n_features, const std::vector<T>& t, std::vector<T>& out) {
  const int nf = n_features / 2;
  out.assign(t.size() * n_features, T(0));
  for (size_t b = 0; b < t.size(); ++b) {
    for (int k = 0; k < nf; ++k) {
      const T w = nf > 1 ? T(std::pow(1000.0, static_cast<double>(k) / (nf - 1))) : T(1);
      out[b * n_features + 2 * k] = std::sin(w * t[b]);
      out[b * n_features + 2 * k + 1] = std::cos(w * t[b]);
    }
  }
}

template <class T>
std::vector<T> chain_forward_ref(const std::vector<int>& dims, const T* params,
                                 size_t offset, bool act_after_last,
                                 const std::vector<T>& x, int batch) {
  std::vector<T> cur = x;
  size_t off = offset;
  const int n_layers = static_cast<int>(dims.size()) - 1;
  for (int l = 0; l < n_layers; ++l) {
    const int in = dims[l], out = dims[l + 1];
    const T* W = params + off;
    const T* bias = params + off + static_cast<size_t>(in) * out;
    off += static_cast<size_t>(in) * out + out;
    std::vector<T> y(static_cast<size_t>(batch) * out);
    kernels::linear_forward_range(cur.data(), in, W, bias, out, y.data(), 0, batch);
    if (l + 1 < n_layers || act_after_last)
      kernels::silu_range(y.data(), y.data(), 0, y.size());
    cur = std::move(y);
  }
  return cur;
}

template <class T>
std::vector<T> net_forward_ref(const NetArch& arch, const std::vector<T>& theta,
                               const std::vector<T>& x, const std::vector<T>& t) {
  const int batch = static_cast<int>(t.size());
  std::vector<T> tf;
  time_features_ref(arch.time_features, t, tf);
  size_t off = 0;
  auto sdims = arch.spatial_dims();
  auto tdims = arch.time_dims();
  auto kdims = arch.trunk_dims();
  std::vector<LayerView> sl = chain_layers(sdims, off);
  const size_t t_off = off;
  std::vector<LayerView> tl = chain_layers(tdims, off);
  const size_t k_off = off;
  std::vector<T> se = chain_forward_ref(sdims, theta.data(), 0, true, x, batch);
  std::vector<T> te = chain_forward_ref(tdims, theta.data(), t_off, true, tf, batch);
  const int e = arch.embed_dim;
  std::vector<T> cat(static_cast<size_t>(batch) * 2 * e);
  for (int b = 0; b < batch; ++b) {
    for (int k = 0; k < e; ++k) {
      cat[static_cast<size_t>(b) * 2 * e + k] = se[static_cast<size_t>(b) * e + k];
      cat[static_cast<size_t>(b) * 2 * e + e + k] = te[static_cast<size_t>(b) * e + k];
    }
  }
  return chain_forward_ref(kdims, theta.data(), k_off, false, cat, batch);
}

}  // namespace treebridge

#include "treebridge/drift_net.hpp"

#include <algorithm>

#include "treebridge/errors.hpp"

namespace treebridge {

namespace {
int scaled(int w, double mult) { return std::max(4, static_cast<int>(std::lround(w * mult))); }
}  // namespace

NetArch NetArch::standard(int d, double width_mult) {
  NetArch a;
  a.d = d;
  a.spatial_hidden = {scaled(128, width_mult), scaled(256, width_mult)};
  a.time_hidden = {scaled(128, width_mult), scaled(256, width_mult)};
  a.embed_dim = scaled(32, width_mult);
  a.trunk_hidden = {scaled(512, width_mult), scaled(256, width_mult), scaled(128, width_mult)};
  return a;
}

std::vector<int> NetArch::spatial_dims() const {
  std::vector<int> dims{d};
  dims.insert(dims.end(), spatial_hidden.begin(), spatial_hidden.end());
  dims.push_back(embed_dim);
  return dims;
}

std::vector<int> NetArch::time_dims() const {
  std::vector<int> dims{time_features};
  dims.insert(dims.end(), time_hidden.begin(), time_hidden.end());
  dims.push_back(embed_dim);
  return dims;
}

std::vector<int> NetArch::trunk_dims() const {
  std::vector<int> dims{2 * embed_dim};
  dims.insert(dims.end(), trunk_hidden.begin(), trunk_hidden.end());
  dims.push_back(d);
  return dims;
}

std::vector<LayerView> chain_layers(const std::vector<int>& dims, size_t& offset) {
  std::vector<LayerView> layers;
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    LayerView v;
    v.in = dims[l];
    v.out = dims[l + 1];
    v.w_off = offset;
    v.b_off = offset + static_cast<size_t>(v.in) * v.out;
    offset = v.b_off + v.out;
    layers.push_back(v);
  }
  return layers;
}

int NetArch::param_count() const {
  size_t off = 0;
  chain_layers(spatial_dims(), off);
  chain_layers(time_dims(), off);
  chain_layers(trunk_dims(), off);
  return static_cast<int>(off);
}

void DriftNet::init_params(Rng& rng) {
  size_t off = 0;
  auto init_chain = [&](const std::vector<int>& dims, bool zero_last) {
    auto layers = chain_layers(dims, off);
    for (size_t l = 0; l < layers.size(); ++l) {
      const LayerView& lv = layers[l];
      const bool zero = zero_last && l + 1 == layers.size();
      const double bound = 1.0 / std::sqrt(static_cast<double>(lv.in));
      for (size_t i = lv.w_off; i < lv.b_off; ++i)
        theta[i] = zero ? 0.0 : rng.uniform(-bound, bound);
      for (size_t i = lv.b_off; i < lv.b_off + lv.out; ++i)
        theta[i] = zero ? 0.0 : rng.uniform(-bound, bound);
    }
  };
  init_chain(arch.spatial_dims(), false);
  init_chain(arch.time_dims(), false);
  init_chain(arch.trunk_dims(), true);
}

void time_features(int n_features, const std::vector<double>& t, Mat& out) {
  const int nf = n_features / 2;
  out = Mat(static_cast<int>(t.size()), n_features);
  for (int b = 0; b < out.rows; ++b) {
    for (int k = 0; k < nf; ++k) {
      const double w = nf > 1 ? std::pow(1000.0, static_cast<double>(k) / (nf - 1)) : 1.0;
      out(b, 2 * k) = std::sin(w * t[b]);
      out(b, 2 * k + 1) = std::cos(w * t[b]);
    }
  }
}

namespace {

void chain_forward(const std::vector<int>& dims, const double* theta, size_t offset,
                   bool act_after_last, const Mat& x, ChainCache& cache) {
  size_t off = offset;
  auto layers = chain_layers(dims, off);
  const int n_layers = static_cast<int>(layers.size());
  cache.inputs.assign(n_layers, Mat());
  cache.pre.assign(n_layers, Mat());
  Mat cur = x;
  for (int l = 0; l < n_layers; ++l) {
    const LayerView& lv = layers[l];
    cache.inputs[l] = cur;
    Mat z;
    kernels::linear_forward(cur, theta + lv.w_off, theta + lv.b_off, lv.out, z);
    cache.pre[l] = z;
    if (l + 1 < n_layers || act_after_last) {
      Mat a;
      kernels::silu_apply(z, a);
      cur = std::move(a);
    } else {
      cur = std::move(z);
    }
  }
  cache.out = std::move(cur);
}

// Returns gradient w.r.t. the chain input (needed for the trunk -> embeds hop).
Mat chain_backward(const std::vector<int>& dims, const double* theta, size_t offset,
                   bool act_after_last, const ChainCache& cache, const Mat& d_out,
                   double* grad, bool want_d_input) {
  size_t off = offset;
  auto layers = chain_layers(dims, off);
  const int n_layers = static_cast<int>(layers.size());
  Mat up = d_out;
  for (int l = n_layers - 1; l >= 0; --l) {
    const LayerView& lv = layers[l];
    Mat dz;
    if (l + 1 < n_layers || act_after_last)
      kernels::silu_backward(cache.pre[l], up, dz);
    else
      dz = std::move(up);
    kernels::linear_backward_params(cache.inputs[l], dz, grad + lv.w_off, grad + lv.b_off);
    if (l > 0 || want_d_input) {
      Mat dx;
      kernels::linear_backward_input(dz, theta + lv.w_off, lv.in, dx);
      up = std::move(dx);
    } else {
      up = Mat();
    }
  }
  return up;
}

}  // namespace

Mat net_forward_cached(const DriftNet& net, const Mat& x, const std::vector<double>& t,
                       ForwardCache& cache) {
  if (x.cols != net.arch.d || x.rows != static_cast<int>(t.size()))
    throw ConfigError("DimensionMismatch", "net input shape mismatch");
  time_features(net.arch.time_features, t, cache.time_feats);

  size_t off = 0;
  auto sdims = net.arch.spatial_dims();
  auto tdims = net.arch.time_dims();
  auto kdims = net.arch.trunk_dims();
  chain_layers(sdims, off);
  const size_t t_off = off;
  chain_layers(tdims, off);
  const size_t k_off = off;

  chain_forward(sdims, net.theta.data(), 0, true, x, cache.spatial);
  chain_forward(tdims, net.theta.data(), t_off, true, cache.time_feats, cache.time);

  const int e = net.arch.embed_dim;
  const int batch = x.rows;
  cache.concat = Mat(batch, 2 * e);
  for (int b = 0; b < batch; ++b) {
    const double* se = cache.spatial.out.row(b);
    const double* te = cache.time.out.row(b);
    double* c = cache.concat.row(b);
    std::copy(se, se + e, c);
    std::copy(te, te + e, c + e);
  }
  chain_forward(kdims, net.theta.data(), k_off, false, cache.concat, cache.trunk);
  return cache.trunk.out;
}

Mat net_forward(const DriftNet& net, const Mat& x, const std::vector<double>& t) {
  ForwardCache cache;
  return net_forward_cached(net, x, t, cache);
}

void net_backward(const DriftNet& net, const ForwardCache& cache, const Mat& d_out,
                  std::vector<double>& grad) {
  grad.assign(net.theta.size(), 0.0);
  size_t off = 0;
  auto sdims = net.arch.spatial_dims();
  auto tdims = net.arch.time_dims();
  auto kdims = net.arch.trunk_dims();
  chain_layers(sdims, off);
  const size_t t_off = off;
  chain_layers(tdims, off);
  const size_t k_off = off;

  Mat d_concat = chain_backward(kdims, net.theta.data(), k_off, false, cache.trunk, d_out,
                                grad.data(), true);
  const int e = net.arch.embed_dim;
  const int batch = d_concat.rows;
  Mat d_se(batch, e), d_te(batch, e);
  for (int b = 0; b < batch; ++b) {
    const double* c = d_concat.row(b);
    std::copy(c, c + e, d_se.row(b));
    std::copy(c + e, c + 2 * e, d_te.row(b));
  }
  chain_backward(sdims, net.theta.data(), 0, true, cache.spatial, d_se, grad.data(), false);
  chain_backward(tdims, net.theta.data(), t_off, true, cache.time, d_te, grad.data(), false);
}

void grad_step(DriftNet& net, OptimState& opt, const std::vector<double>& grad) {
  if (grad.size() != net.theta.size())
    throw ConfigError("DimensionMismatch", "gradient size mismatch");
  for (double g : grad)
    if (!std::isfinite(g))
      throw NumericError("NonFiniteGradient", "gradient contains NaN/Inf at step " +
                                                  std::to_string(opt.step + 1));
  opt.step += 1;
  const double b1t = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  const double b2t = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
  for (size_t i = 0; i < net.theta.size(); ++i) {
    opt.m[i] = opt.beta1 * opt.m[i] + (1.0 - opt.beta1) * grad[i];
    opt.v[i] = opt.beta2 * opt.v[i] + (1.0 - opt.beta2) * grad[i] * grad[i];
    const double mhat = opt.m[i] / b1t;
    const double vhat = opt.v[i] / b2t;
    net.theta[i] -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
  }
  const double g = opt.ema_decay;
  for (size_t i = 0; i < net.theta.size(); ++i)
    opt.ema[i] = g * opt.ema[i] + (1.0 - g) * net.theta[i];
}

}  // namespace treebridge

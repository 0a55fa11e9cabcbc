#include "treebridge/bridge_matching.hpp"

#include <cmath>
#include <string>

#include "treebridge/errors.hpp"

namespace treebridge {

std::vector<double> bm_target(const std::vector<double>& x_t, const std::vector<double>& x_end,
                              double t, double T) {
  if (t >= T - 1e-6 * T)
    throw NumericError("TimeAtTerminal", "t=" + std::to_string(t) + " too close to T=" +
                                             std::to_string(T));
  std::vector<double> g(x_t.size());
  for (size_t k = 0; k < g.size(); ++k) g[k] = (x_end[k] - x_t[k]) / (T - t);
  return g;
}

BmLoss bm_loss(const EdgeTrainer& trainer, const EdgeBridgeBatch& batch) {
  const int n = batch.xt.rows;
  const int d = batch.xt.cols;
  if (n == 0) throw ConfigError("DimensionMismatch", "empty bridge batch");
  const double T = batch.T;

  std::vector<double> t_fwd(n), t_bwd(n);
  for (int b = 0; b < n; ++b) {
    t_fwd[b] = batch.t[b] / T;
    t_bwd[b] = (T - batch.t[b]) / T;
  }

  BmLoss out;
  ForwardCache cache;

  // forward direction: target (x_v - x_t)/(T - t)
  Mat v = net_forward_cached(trainer.forward_net, batch.xt, t_fwd, cache);
  Mat d_out(n, d);
  double loss = 0.0;
  for (int b = 0; b < n; ++b) {
    for (int k = 0; k < d; ++k) {
      const double target = (batch.xv(b, k) - batch.xt(b, k)) / (T - batch.t[b]);
      const double r = v(b, k) - target;
      loss += r * r;
      d_out(b, k) = 2.0 * r / n;
    }
  }
  out.forward_loss = loss / n;
  net_backward(trainer.forward_net, cache, d_out, out.grad_forward);

  // backward direction: reflected time s = T - t, target (x_u - x_t)/t
  v = net_forward_cached(trainer.backward_net, batch.xt, t_bwd, cache);
  loss = 0.0;
  for (int b = 0; b < n; ++b) {
    for (int k = 0; k < d; ++k) {
      const double target = (batch.xu(b, k) - batch.xt(b, k)) / batch.t[b];
      const double r = v(b, k) - target;
      loss += r * r;
      d_out(b, k) = 2.0 * r / n;
    }
  }
  out.backward_loss = loss / n;
  net_backward(trainer.backward_net, cache, d_out, out.grad_backward);

  if (!std::isfinite(out.forward_loss) || !std::isfinite(out.backward_loss))
    throw NumericError("NonFiniteLoss", "bridge-matching loss is not finite");
  return out;
}

EdgeBatchSampler make_pool_sampler(const Tree& tree, const TreePrecision& prec,
                                   const Mat& pool_s, int d, int edge_id,
                                   int times_per_edge) {
  const int ns = static_cast<int>(tree.observed().size());
  const Edge edge = tree.edges()[edge_id];
  const double sigma = tree.sigma();

  return [&tree, &prec, &pool_s, d, ns, edge, edge_id, sigma, times_per_edge](int rows,
                                                                              Rng& rng) {
    EdgeBridgeBatch out;
    out.edge_id = edge_id;
    out.T = edge.length;
    const int total = rows * times_per_edge;
    out.xu = Mat(total, d);
    out.xv = Mat(total, d);
    out.xt = Mat(total, d);
    out.t.resize(total);

    Mat y_s(ns, d);
    std::vector<double> a(d), b(d);
    const bool u_obs = tree.is_observed(edge.u);
    const bool v_obs = tree.is_observed(edge.v);
    for (int r = 0; r < rows; ++r) {
      const int src = static_cast<int>(rng.next_below(static_cast<uint64_t>(pool_s.rows)));
      for (int j = 0; j < ns; ++j)
        for (int k = 0; k < d; ++k) y_s(j, k) = pool_s(src, j * d + k);
      Mat y_c;
      if (!u_obs || !v_obs) y_c = conditional_given_observed(tree, prec, y_s, rng);
      for (int k = 0; k < d; ++k) {
        a[k] = u_obs ? y_s(tree.observed_index(edge.u), k)
                     : y_c(tree.unobserved_index(edge.u), k);
        b[k] = v_obs ? y_s(tree.observed_index(edge.v), k)
                     : y_c(tree.unobserved_index(edge.v), k);
      }
      for (int m = 0; m < times_per_edge; ++m) {
        const int row = r * times_per_edge + m;
        const double t = draw_interior_time(edge.length, rng);
        out.t[row] = t;
        const double tau = t / edge.length;
        const double sd = sigma * std::sqrt(t * (edge.length - t) / edge.length);
        for (int k = 0; k < d; ++k) {
          out.xu(row, k) = a[k];
          out.xv(row, k) = b[k];
          out.xt(row, k) = a[k] + tau * (b[k] - a[k]) + sd * rng.normal();
        }
      }
    }
    return out;
  };
}

void train_edge(EdgeTrainer& trainer, const EdgeBatchSampler& sampler, int steps, Rng& rng) {
  for (int step = 1; step <= steps; ++step) {
    EdgeBridgeBatch batch = sampler(trainer.hp.batch, rng);
    BmLoss loss = bm_loss(trainer, batch);
    grad_step(trainer.forward_net, trainer.opt_forward, loss.grad_forward);
    grad_step(trainer.backward_net, trainer.opt_backward, loss.grad_backward);
    trainer.trace.push_back({step, loss.forward_loss, loss.backward_loss});
  }
}

}  // namespace treebridge

#pragma once

#include <functional>
#include <vector>

#include "treebridge/drift_net.hpp"
#include "treebridge/gaussian_reference.hpp"

namespace treebridge {

// Bridge-matching regression target (x_end - x_t)/(T - t).
// Error: TimeAtTerminal when t >= T - 1e-6*T.
std::vector<double> bm_target(const std::vector<double>& x_t, const std::vector<double>& x_end,
                              double t, double T);

struct TrainHParams {
  int steps = 10000;
  int batch = 4096;
  double lr = 1e-3;
  double ema_decay = 0.99;
  int times_per_edge = 1;
  bool warm_start = false;  // reuse previous-iteration weights instead of re-init
};

struct LossRecord {
  int step = 0;
  double forward_loss = 0.0;
  double backward_loss = 0.0;
};

// One drift net per direction along the edge. The forward net drives u -> v
// in time t/T; the backward net drives v -> u in reflected time (T-t)/T.
struct EdgeTrainer {
  int edge_id = 0;
  double T = 0.0;
  DriftNet forward_net, backward_net;
  OptimState opt_forward, opt_backward;
  TrainHParams hp;
  std::vector<LossRecord> trace;

  EdgeTrainer(int edge, double T_, const NetArch& arch, const TrainHParams& hp_,
              Rng init_fwd, Rng init_bwd)
      : edge_id(edge),
        T(T_),
        forward_net(arch),
        backward_net(arch),
        opt_forward(forward_net, hp_.lr, hp_.ema_decay),
        opt_backward(backward_net, hp_.lr, hp_.ema_decay),
        hp(hp_) {
    forward_net.init_params(init_fwd);
    backward_net.init_params(init_bwd);
    opt_forward.ema = forward_net.theta;
    opt_backward.ema = backward_net.theta;
  }
};

struct BmLoss {
  double forward_loss = 0.0;
  double backward_loss = 0.0;
  std::vector<double> grad_forward, grad_backward;
};

// Joint forward+backward loss on one batch: the same bridge samples are used
// for both directions with endpoint roles swapped and time reflected.
// Error: NonFiniteLoss.
BmLoss bm_loss(const EdgeTrainer& trainer, const EdgeBridgeBatch& batch);

using EdgeBatchSampler = std::function<EdgeBridgeBatch(int rows, Rng&)>;

// Fresh reciprocal batches from a fixed pool of observed-vertex samples:
// each call resamples pool rows, redraws the unobserved vertices and the
// bridge times/values for this edge. The sampler takes the number of pool
// rows and yields rows*times_per_edge samples, consecutive groups sharing
// one endpoint draw. Captures tree/prec/pool by reference; the caller keeps
// them alive for the sampler's lifetime.
EdgeBatchSampler make_pool_sampler(const Tree& tree, const TreePrecision& prec,
                                   const Mat& pool_s, int d, int edge_id,
                                   int times_per_edge);

// Runs `steps` optimiser steps; loss trace appended to trainer.trace.
// Aborts (rethrows NonFiniteLoss) leaving the trainer at the last good step.
void train_edge(EdgeTrainer& trainer, const EdgeBatchSampler& sampler, int steps, Rng& rng);

}  // namespace treebridge

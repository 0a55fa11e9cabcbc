#pragma once

#include <Eigen/Dense>

#include "treebridge/mat.hpp"

namespace treebridge {

struct SinkhornOptions {
  double tol = 1e-7;      // L1 marginal violation
  int max_iter = 2000;    // iterations at the target epsilon
  bool eps_scaling = true;
  bool debiased = true;   // raw entropic cost when false
};

struct SinkhornResult {
  double value = 0.0;
  bool converged = true;
  double marginal_err = 0.0;
  int iterations = 0;
};

// Entropic OT between uniform empirical measures, squared-Euclidean cost,
// log-domain with epsilon-scaling warm start. Returns the dual objective
// <f,a> + <g,b>. Inputs are canonically ordered internally so the value is
// exactly symmetric in (x, y). NotConverged is reported via the flag, with
// the value still returned.
SinkhornResult entropic_ot(const Mat& x, const Mat& y, double epsilon,
                           const SinkhornOptions& opt = {});

// Debiased divergence SD = OT(x,y) - (OT(x,x) + OT(y,y))/2 (raw OT cost when
// opt.debiased is false).
SinkhornResult sinkhorn_divergence(const Mat& x, const Mat& y, double epsilon,
                                   const SinkhornOptions& opt = {});

struct EmpiricalMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  long count = 0;
  double total_variance() const { return cov.trace(); }
};

EmpiricalMoments empirical_moments(const Mat& samples);

// Symmetric PSD square root; eigenvalues below -1e-8*||M|| raise NonPSDInput,
// small negatives are clipped to 0.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m);

// Gaussian W2^2 in closed form from means and covariances.
double bw2_squared(const EmpiricalMoments& p, const EmpiricalMoments& q);

// 100 * BW2^2(p, ref) / (Var(ref)/2) %. Error: DegenerateReference.
double bw2_uvp(const EmpiricalMoments& p, const EmpiricalMoments& ref);
double bw2_uvp(const Mat& samples, const Mat& reference);

// 100 * mean ||T_hat(x) - T*(x)||^2 / Var(ref) % over paired rows.
double l2_uvp(const Mat& mapped, const Mat& oracle_mapped, double reference_variance);

}  // namespace treebridge

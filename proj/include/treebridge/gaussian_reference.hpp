#pragma once

#include <Eigen/Dense>
#include <vector>

#include "treebridge/mat.hpp"
#include "treebridge/rng.hpp"
#include "treebridge/tree.hpp"

namespace treebridge {

// Precision matrix of the Brownian reference coupling over the tree vertices:
// a graph Laplacian weighted by 1/(sigma^2 T^e). The unobserved block is
// factorised once so conditional draws are cheap.
class TreePrecision {
 public:
  explicit TreePrecision(const Tree& tree);

  const Eigen::MatrixXd& L() const { return L_; }
  // mean map M with mu = M * y_S (rows: unobserved asc, cols: observed asc)
  const Eigen::MatrixXd& mean_map() const { return mean_map_; }
  // A with A A^T = (L_ScSc)^-1, per spatial coordinate
  const Eigen::MatrixXd& cov_factor() const { return cov_factor_; }
  const Eigen::MatrixXd& cond_cov() const { return cond_cov_; }

 private:
  Eigen::MatrixXd L_, mean_map_, cov_factor_, cond_cov_;
};

TreePrecision build_precision(const Tree& tree);

// Draws Y_{S^c} | Y_S = y_S. y_s is |S| x d with rows in ascending vertex-id
// order; the result is |S^c| x d in ascending vertex-id order.
Mat conditional_given_observed(const Tree& tree, const TreePrecision& prec,
                               const Mat& y_s, Rng& rng);

// One Brownian-bridge point: N(a + (t/T)(b-a), sigma^2 t(T-t)/T I).
// Error: TimeOutOfRange.
std::vector<double> sample_brownian_bridge(const std::vector<double>& a,
                                           const std::vector<double>& b, double T,
                                           double sigma, double t, Rng& rng);

// Per-edge batch of bridge-matching samples.
struct EdgeBridgeBatch {
  int edge_id = 0;
  double T = 0.0;
  Mat xu, xv, xt;         // n x d endpoint and interior values
  std::vector<double> t;  // interior times in (0, T)
};

// Interior training times are Uniform(0,T) excluding a 1e-6*T guard band at
// both ends (the bridge targets are singular at the endpoints).
double draw_interior_time(double T, Rng& rng);

// Full reciprocal-process draw for a batch of observed-vertex rows: one shared
// conditional draw of the unobserved vertices per row, then `times_per_edge`
// bridge points per edge. coupling_s is n x (|S|*d), ascending vertex order.
std::vector<EdgeBridgeBatch> sample_reciprocal(const Tree& tree, const TreePrecision& prec,
                                               const Mat& coupling_s, int d,
                                               int times_per_edge, Rng& rng);

}  // namespace treebridge

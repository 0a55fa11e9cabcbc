#pragma once

#include <Eigen/Dense>
#include <vector>

#include "treebridge/mat.hpp"
#include "treebridge/rng.hpp"

namespace treebridge {

struct GaussianSpec {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  int d() const { return static_cast<int>(mean.size()); }
};

// Random instance family used by the acceptance experiments: covariance
// Q diag(lambda) Q^T with Q random orthogonal and lambda log-uniform in
// [0.5, 2]; mean components standard normal.
GaussianSpec random_gaussian_spec(int d, Rng& rng);

Mat sample_gaussian(const GaussianSpec& spec, int n, Rng& rng);

// Fixed-point iteration for the Gaussian W2 barycentre covariance, from
// identity initialisation. Error: MaxIterExceeded.
GaussianSpec gaussian_fixed_point_barycentre(const std::vector<GaussianSpec>& specs,
                                             const std::vector<double>& weights,
                                             double tol = 1e-10, int max_iter = 1000);

// Optimal affine transport map T(x) = b + A(x - m_src) from source onto target.
struct AffineMap {
  Eigen::MatrixXd A;
  Eigen::VectorXd shift;  // T(x) = shift + A x
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return shift + A * x; }
};

AffineMap gaussian_ot_map(const GaussianSpec& source, const GaussianSpec& target);
Mat apply_affine(const AffineMap& map, const Mat& x);

struct Grid2D {
  int nx = 128, ny = 128;
  double x0 = 0.0, y0 = 0.0;  // centre of cell (0,0)
  double dx = 0.0, dy = 0.0;
  double cx(int i) const { return x0 + i * dx; }
  double cy(int j) const { return y0 + j * dy; }
};

// Grid spanning `expand` times the bounding box of all points.
Grid2D fit_grid(const std::vector<const Mat*>& clouds, int nx, int ny, double expand = 1.2);

// Histogram of a 2D point cloud on the grid (nearest cell), normalised.
std::vector<double> histogram_2d(const Mat& points, const Grid2D& grid);

struct GridBarycentre {
  Grid2D grid;
  std::vector<double> weights;  // nx*ny, row-major over (i,j)
  int iterations = 0;
};

// Fixed-support entropic barycentre via iterative Bregman projections in the
// log domain; the squared-cost kernel factorises over the two axes. Errors:
// MaxIterExceeded, GridTooSmall (boundary mass above 1e-6).
GridBarycentre grid_entropic_barycentre(const std::vector<Mat>& marginals,
                                        const std::vector<double>& weights,
                                        const Grid2D& grid, double epsilon_reg,
                                        int max_iter = 3000, double tol = 1e-7);

// Draws n samples from a grid histogram, jittered uniformly within cells.
Mat sample_grid(const GridBarycentre& bary, int n, Rng& rng);

struct Grid1D {
  int n = 0;
  double x0 = 0.0, dx = 0.0;
  double c(int i) const { return x0 + i * dx; }
};

struct GridCoupling1D {
  Grid1D grid;
  std::vector<double> mu, nu;     // input histograms
  std::vector<double> joint;      // n*n row-major P(i,j)
  bool converged = true;
  double correlation() const;     // Pearson correlation of the joint
  double mutual_information() const;  // nats
};

// Entropic coupling oracle on a common 1D grid, cost (x-y)^2, regularisation
// epsilon (pass 2 sigma^2 T for an edge of length T in the tree convention).
GridCoupling1D grid_entropic_coupling_1d(const std::vector<double>& mu,
                                         const std::vector<double>& nu, const Grid1D& grid,
                                         double epsilon, int max_iter = 20000,
                                         double tol = 1e-10);

// Gaussian density binned on a 1D grid.
std::vector<double> gaussian_histogram_1d(double mean, double std, const Grid1D& grid);

}  // namespace treebridge

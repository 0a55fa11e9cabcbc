#include "treebridge/oracles.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "treebridge/errors.hpp"
#include "treebridge/kernels.hpp"
#include "treebridge/metrics.hpp"

namespace treebridge {

GaussianSpec random_gaussian_spec(int d, Rng& rng) {
  Eigen::MatrixXd g(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  Eigen::VectorXd lambda(d);
  const double lo = std::log(0.5), hi = std::log(2.0);
  for (int i = 0; i < d; ++i) lambda(i) = std::exp(rng.uniform(lo, hi));
  GaussianSpec spec;
  spec.cov = q * lambda.asDiagonal() * q.transpose();
  spec.cov = 0.5 * (spec.cov + spec.cov.transpose()).eval();
  spec.mean = Eigen::VectorXd(d);
  for (int i = 0; i < d; ++i) spec.mean(i) = rng.normal();
  return spec;
}

Mat sample_gaussian(const GaussianSpec& spec, int n, Rng& rng) {
  const int d = spec.d();
  Eigen::LLT<Eigen::MatrixXd> llt(spec.cov);
  if (llt.info() != Eigen::Success)
    throw NumericError("NonPSDInput", "covariance is not positive definite");
  Eigen::MatrixXd chol = llt.matrixL();
  Mat out(n, d);
  Eigen::VectorXd z(d);
  for (int r = 0; r < n; ++r) {
    for (int k = 0; k < d; ++k) z(k) = rng.normal();
    Eigen::VectorXd x = spec.mean + chol * z;
    for (int k = 0; k < d; ++k) out(r, k) = x(k);
  }
  return out;
}

GaussianSpec gaussian_fixed_point_barycentre(const std::vector<GaussianSpec>& specs,
                                             const std::vector<double>& weights,
                                             double tol, int max_iter) {
  if (specs.empty() || specs.size() != weights.size())
    throw ConfigError("DimensionMismatch", "need one weight per Gaussian");
  const int d = specs[0].d();
  GaussianSpec out;
  out.mean = Eigen::VectorXd::Zero(d);
  for (size_t i = 0; i < specs.size(); ++i) out.mean += weights[i] * specs[i].mean;

  Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(d, d);
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::MatrixXd root = psd_sqrt(sigma);
    Eigen::MatrixXd mid = Eigen::MatrixXd::Zero(d, d);
    for (size_t i = 0; i < specs.size(); ++i)
      mid += weights[i] * psd_sqrt(root * specs[i].cov * root);
    // Sigma_{n+1} = Sigma_n^{-1/2} mid^2 Sigma_n^{-1/2}
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success)
      throw NumericError("NonPSDInput", "barycentre iterate lost positive definiteness");
    const Eigen::MatrixXd root_inv = psd_sqrt(sigma).inverse();
    Eigen::MatrixXd next = root_inv * mid * mid * root_inv;
    next = 0.5 * (next + next.transpose()).eval();
    const double delta = (next - sigma).norm();
    sigma = next;
    if (delta < tol) {
      out.cov = sigma;
      return out;
    }
  }
  throw NumericError("MaxIterExceeded", "fixed-point barycentre did not converge in " +
                                            std::to_string(max_iter) + " iterations");
}

AffineMap gaussian_ot_map(const GaussianSpec& source, const GaussianSpec& target) {
  const Eigen::MatrixXd s_root = psd_sqrt(source.cov);
  const Eigen::MatrixXd s_root_inv = s_root.inverse();
  const Eigen::MatrixXd mid = psd_sqrt(s_root * target.cov * s_root);
  AffineMap map;
  map.A = s_root_inv * mid * s_root_inv;
  map.A = 0.5 * (map.A + map.A.transpose()).eval();
  map.shift = target.mean - map.A * source.mean;
  return map;
}

Mat apply_affine(const AffineMap& map, const Mat& x) {
  const int n = x.rows, d = x.cols;
  Mat out(n, d);
  Eigen::VectorXd v(d);
  for (int r = 0; r < n; ++r) {
    for (int k = 0; k < d; ++k) v(k) = x(r, k);
    Eigen::VectorXd y = map.apply(v);
    for (int k = 0; k < d; ++k) out(r, k) = y(k);
  }
  return out;
}

Grid2D fit_grid(const std::vector<const Mat*>& clouds, int nx, int ny, double expand) {
  double lo_x = std::numeric_limits<double>::infinity(), hi_x = -lo_x;
  double lo_y = lo_x, hi_y = -lo_x;
  for (const Mat* c : clouds) {
    for (int r = 0; r < c->rows; ++r) {
      lo_x = std::min(lo_x, (*c)(r, 0));
      hi_x = std::max(hi_x, (*c)(r, 0));
      lo_y = std::min(lo_y, (*c)(r, 1));
      hi_y = std::max(hi_y, (*c)(r, 1));
    }
  }
  const double cx = 0.5 * (lo_x + hi_x), cy = 0.5 * (lo_y + hi_y);
  const double hx = 0.5 * expand * (hi_x - lo_x), hy = 0.5 * expand * (hi_y - lo_y);
  Grid2D g;
  g.nx = nx;
  g.ny = ny;
  g.dx = 2.0 * hx / (nx - 1);
  g.dy = 2.0 * hy / (ny - 1);
  g.x0 = cx - hx;
  g.y0 = cy - hy;
  return g;
}

std::vector<double> histogram_2d(const Mat& points, const Grid2D& grid) {
  std::vector<double> h(static_cast<size_t>(grid.nx) * grid.ny, 0.0);
  for (int r = 0; r < points.rows; ++r) {
    int i = static_cast<int>(std::lround((points(r, 0) - grid.x0) / grid.dx));
    int j = static_cast<int>(std::lround((points(r, 1) - grid.y0) / grid.dy));
    i = std::clamp(i, 0, grid.nx - 1);
    j = std::clamp(j, 0, grid.ny - 1);
    h[static_cast<size_t>(i) * grid.ny + j] += 1.0;
  }
  const double total = static_cast<double>(points.rows);
  for (double& v : h) v /= total;
  return h;
}

namespace {

// f(a,b) = LSE_{i,j} [ -((xa-xi)^2 + (yb-yj)^2)/eps + g(i,j) ], computed as two
// separable passes. All arrays are nx*ny row-major over (i, j).
class SeparableLse {
 public:
  SeparableLse(const Grid2D& grid, double eps) : nx_(grid.nx), ny_(grid.ny) {
    kx_.resize(static_cast<size_t>(nx_) * nx_);
    ky_.resize(static_cast<size_t>(ny_) * ny_);
    for (int a = 0; a < nx_; ++a)
      for (int i = 0; i < nx_; ++i) {
        const double dxv = (grid.cx(a) - grid.cx(i));
        kx_[static_cast<size_t>(a) * nx_ + i] = -dxv * dxv / eps;
      }
    for (int b = 0; b < ny_; ++b)
      for (int j = 0; j < ny_; ++j) {
        const double dyv = (grid.cy(b) - grid.cy(j));
        ky_[static_cast<size_t>(b) * ny_ + j] = -dyv * dyv / eps;
      }
    tmp_.resize(static_cast<size_t>(nx_) * ny_);
  }

  void apply(const std::vector<double>& g, std::vector<double>& out) {
    // pass 1 over y: tmp(i, b) = LSE_j [ ky(b,j) + g(i,j) ]
#pragma omp parallel for schedule(static) if (!omp_in_parallel())
    for (int i = 0; i < nx_; ++i) {
      const double* gi = g.data() + static_cast<size_t>(i) * ny_;
      double* ti = tmp_.data() + static_cast<size_t>(i) * ny_;
      for (int b = 0; b < ny_; ++b) {
        const double* kb = ky_.data() + static_cast<size_t>(b) * ny_;
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < ny_; ++j) mx = std::max(mx, kb[j] + gi[j]);
        if (!std::isfinite(mx)) {
          ti[b] = mx;
          continue;
        }
        double s = 0.0;
        for (int j = 0; j < ny_; ++j) s += kernels::fast_exp(kb[j] + gi[j] - mx);
        ti[b] = mx + std::log(s);
      }
    }
    // pass 2 over x: out(a, b) = LSE_i [ kx(a,i) + tmp(i,b) ]
    out.assign(static_cast<size_t>(nx_) * ny_, 0.0);
#pragma omp parallel for schedule(static) if (!omp_in_parallel())
    for (int a = 0; a < nx_; ++a) {
      const double* ka = kx_.data() + static_cast<size_t>(a) * nx_;
      double* oa = out.data() + static_cast<size_t>(a) * ny_;
      for (int b = 0; b < ny_; ++b) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < nx_; ++i)
          mx = std::max(mx, ka[i] + tmp_[static_cast<size_t>(i) * ny_ + b]);
        if (!std::isfinite(mx)) {
          oa[b] = mx;
          continue;
        }
        double s = 0.0;
        for (int i = 0; i < nx_; ++i)
          s += kernels::fast_exp(ka[i] + tmp_[static_cast<size_t>(i) * ny_ + b] - mx);
        oa[b] = mx + std::log(s);
      }
    }
  }

 private:
  int nx_, ny_;
  std::vector<double> kx_, ky_, tmp_;
};

double boundary_mass(const std::vector<double>& h, int nx, int ny) {
  double m = 0.0;
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j)
      if (i == 0 || j == 0 || i == nx - 1 || j == ny - 1)
        m += h[static_cast<size_t>(i) * ny + j];
  return m;
}

}  // namespace

GridBarycentre grid_entropic_barycentre(const std::vector<Mat>& marginals,
                                        const std::vector<double>& weights,
                                        const Grid2D& grid, double epsilon_reg,
                                        int max_iter, double tol) {
  const size_t ell = marginals.size();
  if (ell == 0 || ell != weights.size())
    throw ConfigError("DimensionMismatch", "need one weight per marginal");
  const size_t cells = static_cast<size_t>(grid.nx) * grid.ny;

  std::vector<std::vector<double>> log_q(ell);
  for (size_t i = 0; i < ell; ++i) {
    std::vector<double> h = histogram_2d(marginals[i], grid);
    if (boundary_mass(h, grid.nx, grid.ny) > 1e-6)
      throw ConfigError("GridTooSmall", "marginal mass on boundary cells");
    log_q[i].resize(cells);
    for (size_t c = 0; c < cells; ++c)
      log_q[i][c] = h[c] > 0.0 ? std::log(h[c]) : -std::numeric_limits<double>::infinity();
  }

  SeparableLse lse(grid, epsilon_reg);
  std::vector<std::vector<double>> log_v(ell, std::vector<double>(cells, 0.0));
  std::vector<double> log_ku(cells), log_u(cells), log_p(cells), prev_p(cells, 1.0 / cells),
      work(cells);

  GridBarycentre out;
  out.grid = grid;
  for (int it = 1; it <= max_iter; ++it) {
    std::fill(log_p.begin(), log_p.end(), 0.0);
    for (size_t i = 0; i < ell; ++i) {
      // u_i = q_i / K v_i ; contribution lambda_i * log(K^T u_i)
      lse.apply(log_v[i], work);
      for (size_t c = 0; c < cells; ++c) log_u[c] = log_q[i][c] - work[c];
      lse.apply(log_u, log_ku);
      // stash K^T u_i for the v-update below
      for (size_t c = 0; c < cells; ++c) {
        log_p[c] += weights[i] * log_ku[c];
        log_v[i][c] = log_ku[c];  // temporarily hold log(K^T u_i)
      }
    }
    // v_i = p / (K^T u_i)
    for (size_t i = 0; i < ell; ++i)
      for (size_t c = 0; c < cells; ++c) log_v[i][c] = log_p[c] - log_v[i][c];

    // normalise and check TV progress
    const double lz = kernels::logsumexp(log_p.data(), static_cast<int>(cells));
    double tv = 0.0;
    for (size_t c = 0; c < cells; ++c) {
      const double p = std::exp(log_p[c] - lz);
      tv += std::abs(p - prev_p[c]);
      prev_p[c] = p;
    }
    out.iterations = it;
    if (0.5 * tv < tol) {
      out.weights = prev_p;
      if (boundary_mass(out.weights, grid.nx, grid.ny) > 1e-6)
        throw ConfigError("GridTooSmall", "barycentre mass on boundary cells");
      return out;
    }
  }
  throw NumericError("MaxIterExceeded", "grid barycentre did not converge in " +
                                            std::to_string(max_iter) + " iterations");
}

Mat sample_grid(const GridBarycentre& bary, int n, Rng& rng) {
  const size_t cells = bary.weights.size();
  std::vector<double> cdf(cells);
  double acc = 0.0;
  for (size_t c = 0; c < cells; ++c) {
    acc += bary.weights[c];
    cdf[c] = acc;
  }
  Mat out(n, 2);
  for (int r = 0; r < n; ++r) {
    const double u = rng.uniform() * acc;
    const size_t c = std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
    const int i = static_cast<int>(c) / bary.grid.ny;
    const int j = static_cast<int>(c) % bary.grid.ny;
    out(r, 0) = bary.grid.cx(i) + (rng.uniform() - 0.5) * bary.grid.dx;
    out(r, 1) = bary.grid.cy(j) + (rng.uniform() - 0.5) * bary.grid.dy;
  }
  return out;
}

double GridCoupling1D::correlation() const {
  const int n = grid.n;
  double mx = 0, my = 0, vxx = 0, vyy = 0, vxy = 0, mass = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double p = joint[static_cast<size_t>(i) * n + j];
      mx += p * grid.c(i);
      my += p * grid.c(j);
      mass += p;
    }
  mx /= mass;
  my /= mass;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double p = joint[static_cast<size_t>(i) * n + j];
      vxx += p * (grid.c(i) - mx) * (grid.c(i) - mx);
      vyy += p * (grid.c(j) - my) * (grid.c(j) - my);
      vxy += p * (grid.c(i) - mx) * (grid.c(j) - my);
    }
  return vxy / std::sqrt(vxx * vyy);
}

double GridCoupling1D::mutual_information() const {
  const int n = grid.n;
  std::vector<double> pi(n, 0.0), pj(n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      pi[i] += joint[static_cast<size_t>(i) * n + j];
      pj[j] += joint[static_cast<size_t>(i) * n + j];
    }
  double mi = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double p = joint[static_cast<size_t>(i) * n + j];
      if (p > 0.0 && pi[i] > 0.0 && pj[j] > 0.0)
        mi += p * std::log(p / (pi[i] * pj[j]));
    }
  return mi;
}

GridCoupling1D grid_entropic_coupling_1d(const std::vector<double>& mu,
                                         const std::vector<double>& nu, const Grid1D& grid,
                                         double epsilon, int max_iter, double tol) {
  const int n = grid.n;
  if (static_cast<int>(mu.size()) != n || static_cast<int>(nu.size()) != n)
    throw ConfigError("DimensionMismatch", "histograms must match the grid");
  GridCoupling1D out;
  out.grid = grid;
  out.mu = mu;
  out.nu = nu;

  std::vector<double> log_mu(n), log_nu(n), f(n, 0.0), g(n, 0.0), arg(n);
  for (int i = 0; i < n; ++i) {
    log_mu[i] = mu[i] > 0.0 ? std::log(mu[i]) : -std::numeric_limits<double>::infinity();
    log_nu[i] = nu[i] > 0.0 ? std::log(nu[i]) : -std::numeric_limits<double>::infinity();
  }
  auto cost = [&](int i, int j) {
    const double dxy = grid.c(i) - grid.c(j);
    return dxy * dxy;
  };

  out.converged = false;
  for (int it = 0; it < max_iter; ++it) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) arg[j] = log_nu[j] + (g[j] - cost(i, j)) / epsilon;
      f[i] = mu[i] > 0.0 ? -epsilon * kernels::logsumexp(arg.data(), n) : 0.0;
    }
    double err = 0.0;
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) arg[i] = log_mu[i] + (f[i] - cost(i, j)) / epsilon;
      const double gj = nu[j] > 0.0 ? -epsilon * kernels::logsumexp(arg.data(), n) : 0.0;
      err += std::abs(std::exp((g[j] - gj) / epsilon) - 1.0) * nu[j];
      g[j] = gj;
    }
    if (err < tol) {
      out.converged = true;
      break;
    }
  }

  out.joint.assign(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (mu[i] > 0.0 && nu[j] > 0.0)
        out.joint[static_cast<size_t>(i) * n + j] =
            mu[i] * nu[j] * std::exp((f[i] + g[j] - cost(i, j)) / epsilon);
  return out;
}

std::vector<double> gaussian_histogram_1d(double mean, double std, const Grid1D& grid) {
  std::vector<double> h(grid.n);
  double total = 0.0;
  for (int i = 0; i < grid.n; ++i) {
    const double z = (grid.c(i) - mean) / std;
    h[i] = std::exp(-0.5 * z * z);
    total += h[i];
  }
  for (double& v : h) v /= total;
  return h;
}

}  // namespace treebridge

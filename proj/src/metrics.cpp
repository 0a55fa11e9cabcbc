#include "treebridge/metrics.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "treebridge/errors.hpp"
#include "treebridge/kernels.hpp"

namespace treebridge {

namespace {

// One half-iteration: new_f[i] = -eps * LSE_j(base[j] + (2/eps) <x_i, y_j>) + nx_i,
// where base[j] = log b_j + (g_j - ny_j)/eps. Parallel over rows; each row's
// reduction is serial, so results do not depend on thread count.
void update_potential(const Mat& x, const std::vector<double>& nx, const Mat& y,
                      const std::vector<double>& base, double eps,
                      std::vector<double>& out_f) {
  const int n = x.rows, m = y.rows, d = x.cols;
  const double inv_eps = 2.0 / eps;
#pragma omp parallel if (static_cast<size_t>(n) * m > 16384 && !omp_in_parallel())
  {
    std::vector<double> tmp(m);
#pragma omp for schedule(static)
    for (int i = 0; i < n; ++i) {
      const double* xi = x.row(i);
      double mx = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < m; ++j) {
        const double* yj = y.row(j);
        double dot = 0.0;
        for (int k = 0; k < d; ++k) dot += xi[k] * yj[k];
        const double v = base[j] + inv_eps * dot;
        tmp[j] = v;
        mx = std::max(mx, v);
      }
      double s = 0.0;
      for (int j = 0; j < m; ++j) s += kernels::fast_exp(tmp[j] - mx);
      out_f[i] = -eps * (mx + std::log(s)) + nx[i];
    }
  }
}

std::vector<double> sq_norms(const Mat& x) {
  std::vector<double> n(x.rows);
  for (int i = 0; i < x.rows; ++i) {
    const double* xi = x.row(i);
    double s = 0.0;
    for (int k = 0; k < x.cols; ++k) s += xi[k] * xi[k];
    n[i] = s;
  }
  return n;
}

// lexicographic order on (rows, cols, data) for canonical argument ordering
bool mat_less(const Mat& x, const Mat& y) {
  if (x.rows != y.rows) return x.rows < y.rows;
  if (x.cols != y.cols) return x.cols < y.cols;
  return std::lexicographical_compare(x.a.begin(), x.a.end(), y.a.begin(), y.a.end());
}

SinkhornResult entropic_ot_ordered(const Mat& x, const Mat& y, double eps_target,
                                   const SinkhornOptions& opt) {
  const int n = x.rows, m = y.rows;
  const std::vector<double> nx = sq_norms(x), ny = sq_norms(y);
  const double log_a = -std::log(static_cast<double>(n));
  const double log_b = -std::log(static_cast<double>(m));

  const double max_nx = *std::max_element(nx.begin(), nx.end());
  const double max_ny = *std::max_element(ny.begin(), ny.end());
  const double cost_scale =
      (std::sqrt(max_nx) + std::sqrt(max_ny)) * (std::sqrt(max_nx) + std::sqrt(max_ny));

  std::vector<double> f(n, 0.0), g(m, 0.0), g_new(m), base(std::max(n, m));

  auto run_eps = [&](double eps, int iters, bool check_tol, SinkhornResult& res) {
    for (int it = 0; it < iters; ++it) {
      // f-update
      for (int j = 0; j < m; ++j) base[j] = log_b + (g[j] - ny[j]) / eps;
      update_potential(x, nx, y, base, eps, f);
      // g-update; the previous g gives the column-marginal violation for free
      for (int i = 0; i < n; ++i) base[i] = log_a + (f[i] - nx[i]) / eps;
      update_potential(y, ny, x, base, eps, g_new);
      double err = 0.0;
      for (int j = 0; j < m; ++j)
        err += std::abs(std::exp((g[j] - g_new[j]) / eps) - 1.0) / m;
      std::swap(g, g_new);
      res.iterations += 1;
      if (check_tol && err < opt.tol) {
        res.marginal_err = err;
        res.converged = true;
        return;
      }
      res.marginal_err = err;
    }
    res.converged = !check_tol;
  };

  SinkhornResult res;
  res.converged = false;
  if (opt.eps_scaling && cost_scale > 4.0 * eps_target) {
    double eps = cost_scale;
    while (eps > eps_target) {
      run_eps(eps, 4, false, res);
      eps *= 0.5;
    }
  }
  run_eps(eps_target, opt.max_iter, true, res);

  double value = 0.0;
  for (int i = 0; i < n; ++i) value += f[i] / n;
  for (int j = 0; j < m; ++j) value += g[j] / m;
  res.value = value;
  return res;
}

}  // namespace

SinkhornResult entropic_ot(const Mat& x, const Mat& y, double epsilon,
                           const SinkhornOptions& opt) {
  if (x.rows < 1 || y.rows < 1)
    throw ConfigError("DimensionMismatch", "empty point cloud");
  if (x.cols != y.cols)
    throw ConfigError("DimensionMismatch", "point clouds have different dimension");
  if (!(epsilon > 0.0)) throw ConfigError("DimensionMismatch", "epsilon must be positive");
  return mat_less(y, x) ? entropic_ot_ordered(y, x, epsilon, opt)
                        : entropic_ot_ordered(x, y, epsilon, opt);
}

SinkhornResult sinkhorn_divergence(const Mat& x, const Mat& y, double epsilon,
                                   const SinkhornOptions& opt) {
  SinkhornResult xy = entropic_ot(x, y, epsilon, opt);
  if (!opt.debiased) return xy;
  if (x == y) {
    xy.value = 0.0;
    return xy;
  }
  SinkhornResult xx = entropic_ot(x, x, epsilon, opt);
  SinkhornResult yy = entropic_ot(y, y, epsilon, opt);
  SinkhornResult out;
  out.value = xy.value - 0.5 * (xx.value + yy.value);
  out.converged = xy.converged && xx.converged && yy.converged;
  out.marginal_err = std::max({xy.marginal_err, xx.marginal_err, yy.marginal_err});
  out.iterations = xy.iterations + xx.iterations + yy.iterations;
  return out;
}

EmpiricalMoments empirical_moments(const Mat& samples) {
  const int n = samples.rows, d = samples.cols;
  EmpiricalMoments mo;
  mo.count = n;
  mo.mean = Eigen::VectorXd::Zero(d);
  mo.cov = Eigen::MatrixXd::Zero(d, d);
  if (n == 0) return mo;
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k) mo.mean(k) += samples(i, k);
  mo.mean /= n;
  if (n < 2) return mo;
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) {
      const double ck = samples(i, k) - mo.mean(k);
      for (int l = k; l < d; ++l) mo.cov(k, l) += ck * (samples(i, l) - mo.mean(l));
    }
  }
  mo.cov /= (n - 1);
  mo.cov = mo.cov.selfadjointView<Eigen::Upper>();
  return mo;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const double scale = std::max(1e-300, es.eigenvalues().cwiseAbs().maxCoeff());
  Eigen::VectorXd ev = es.eigenvalues();
  for (int i = 0; i < ev.size(); ++i) {
    if (ev(i) < -1e-8 * scale)
      throw NumericError("NonPSDInput",
                         "matrix has eigenvalue " + std::to_string(ev(i)));
    ev(i) = std::sqrt(std::max(0.0, ev(i)));
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

double bw2_squared(const EmpiricalMoments& p, const EmpiricalMoments& q) {
  const Eigen::MatrixXd sp = psd_sqrt(p.cov);
  const Eigen::MatrixXd cross = psd_sqrt(sp * q.cov * sp);
  const double mean_term = (p.mean - q.mean).squaredNorm();
  // mathematically >= 0 for PSD inputs; clamp the fp noise
  const double trace_term = p.cov.trace() + q.cov.trace() - 2.0 * cross.trace();
  return mean_term + std::max(0.0, trace_term);
}

double bw2_uvp(const EmpiricalMoments& p, const EmpiricalMoments& ref) {
  const double var = ref.total_variance();
  if (!(var > 0.0)) throw NumericError("DegenerateReference", "reference has zero variance");
  return 100.0 * bw2_squared(p, ref) / (0.5 * var);
}

double bw2_uvp(const Mat& samples, const Mat& reference) {
  return bw2_uvp(empirical_moments(samples), empirical_moments(reference));
}

double l2_uvp(const Mat& mapped, const Mat& oracle_mapped, double reference_variance) {
  if (!(reference_variance > 0.0))
    throw NumericError("DegenerateReference", "reference variance must be positive");
  if (mapped.rows != oracle_mapped.rows || mapped.cols != oracle_mapped.cols)
    throw ConfigError("DimensionMismatch", "map sample shapes differ");
  double s = 0.0;
  for (int i = 0; i < mapped.rows; ++i)
    for (int k = 0; k < mapped.cols; ++k) {
      const double r = mapped(i, k) - oracle_mapped(i, k);
      s += r * r;
    }
  return 100.0 * (s / mapped.rows) / reference_variance;
}

}  // namespace treebridge

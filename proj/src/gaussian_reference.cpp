#include "treebridge/gaussian_reference.hpp"

#include <cmath>
#include <string>

namespace treebridge {

TreePrecision::TreePrecision(const Tree& tree) {
  const int n = tree.num_vertices();
  const double s2 = tree.sigma() * tree.sigma();
  L_ = Eigen::MatrixXd::Zero(n, n);
  for (const Edge& e : tree.edges()) {
    const double w = 1.0 / (s2 * e.length);
    L_(e.u, e.u) += w;
    L_(e.v, e.v) += w;
    L_(e.u, e.v) -= w;
    L_(e.v, e.u) -= w;
  }

  const auto& sc = tree.unobserved();
  const auto& s = tree.observed();
  const int nc = static_cast<int>(sc.size());
  const int ns = static_cast<int>(s.size());
  if (nc == 0) return;

  Eigen::MatrixXd Lcc(nc, nc), Lcs(nc, ns);
  for (int i = 0; i < nc; ++i) {
    for (int j = 0; j < nc; ++j) Lcc(i, j) = L_(sc[i], sc[j]);
    for (int j = 0; j < ns; ++j) Lcs(i, j) = L_(sc[i], s[j]);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(Lcc);
  if (llt.info() != Eigen::Success)
    throw NumericError("SingularUnobservedBlock",
                       "unobserved precision block is not positive definite");
  mean_map_ = -llt.solve(Lcs);
  cond_cov_ = llt.solve(Eigen::MatrixXd::Identity(nc, nc));
  // Sigma = (L Lt)^-1 = L^-T L^-1, so A = L^-T gives A A^T = Sigma
  Eigen::MatrixXd lower = llt.matrixL();
  cov_factor_ = lower.transpose()
                    .triangularView<Eigen::Upper>()
                    .solve(Eigen::MatrixXd::Identity(nc, nc));
}

TreePrecision build_precision(const Tree& tree) { return TreePrecision(tree); }

Mat conditional_given_observed(const Tree& tree, const TreePrecision& prec,
                               const Mat& y_s, Rng& rng) {
  const int ns = static_cast<int>(tree.observed().size());
  const int nc = static_cast<int>(tree.unobserved().size());
  if (y_s.rows != ns)
    throw ConfigError("DimensionMismatch", "expected " + std::to_string(ns) +
                                               " observed rows, got " + std::to_string(y_s.rows));
  const int d = y_s.cols;
  Mat out(nc, d);
  if (nc == 0) return out;

  const Eigen::MatrixXd& M = prec.mean_map();
  const Eigen::MatrixXd& A = prec.cov_factor();
  Eigen::VectorXd z(nc), ys(ns);
  for (int k = 0; k < d; ++k) {
    for (int j = 0; j < ns; ++j) ys(j) = y_s(j, k);
    for (int i = 0; i < nc; ++i) z(i) = rng.normal();
    Eigen::VectorXd x = M * ys + A * z;
    for (int i = 0; i < nc; ++i) out(i, k) = x(i);
  }
  return out;
}

std::vector<double> sample_brownian_bridge(const std::vector<double>& a,
                                           const std::vector<double>& b, double T,
                                           double sigma, double t, Rng& rng) {
  if (t < 0.0 || t > T)
    throw ConfigError("TimeOutOfRange",
                      "t=" + std::to_string(t) + " outside [0," + std::to_string(T) + "]");
  const size_t d = a.size();
  std::vector<double> x(d);
  const double tau = t / T;
  const double sd = sigma * std::sqrt(t * (T - t) / T);
  for (size_t k = 0; k < d; ++k)
    x[k] = a[k] + tau * (b[k] - a[k]) + (sd > 0.0 ? sd * rng.normal() : 0.0);
  return x;
}

double draw_interior_time(double T, Rng& rng) {
  const double guard = 1e-6 * T;
  double t;
  do {
    t = rng.uniform(0.0, T);
  } while (t < guard || t > T - guard);
  return t;
}

std::vector<EdgeBridgeBatch> sample_reciprocal(const Tree& tree, const TreePrecision& prec,
                                               const Mat& coupling_s, int d,
                                               int times_per_edge, Rng& rng) {
  const int n = coupling_s.rows;
  const int ns = static_cast<int>(tree.observed().size());
  if (coupling_s.cols != ns * d)
    throw ConfigError("DimensionMismatch", "coupling must have |S|*d columns");

  const int ne = static_cast<int>(tree.edges().size());
  const int rows_out = n * times_per_edge;
  std::vector<EdgeBridgeBatch> out(ne);
  for (int ei = 0; ei < ne; ++ei) {
    out[ei].edge_id = ei;
    out[ei].T = tree.edges()[ei].length;
    out[ei].xu = Mat(rows_out, d);
    out[ei].xv = Mat(rows_out, d);
    out[ei].xt = Mat(rows_out, d);
    out[ei].t.resize(rows_out);
  }

  Mat y_s(ns, d);
  std::vector<double> a(d), b(d);
  for (int r = 0; r < n; ++r) {
    for (int j = 0; j < ns; ++j)
      for (int k = 0; k < d; ++k) y_s(j, k) = coupling_s(r, j * d + k);
    // one shared draw of the unobserved vertices feeds all incident edges
    Mat y_c = conditional_given_observed(tree, prec, y_s, rng);

    auto vertex_value = [&](int v, int k) {
      return tree.is_observed(v) ? y_s(tree.observed_index(v), k)
                                 : y_c(tree.unobserved_index(v), k);
    };

    for (int ei = 0; ei < ne; ++ei) {
      const Edge& e = tree.edges()[ei];
      for (int k = 0; k < d; ++k) {
        a[k] = vertex_value(e.u, k);
        b[k] = vertex_value(e.v, k);
      }
      for (int m = 0; m < times_per_edge; ++m) {
        const int row = r * times_per_edge + m;
        const double t = draw_interior_time(e.length, rng);
        std::vector<double> xt = sample_brownian_bridge(a, b, e.length, tree.sigma(), t, rng);
        out[ei].t[row] = t;
        for (int k = 0; k < d; ++k) {
          out[ei].xu(row, k) = a[k];
          out[ei].xv(row, k) = b[k];
          out[ei].xt(row, k) = xt[k];
        }
      }
    }
  }
  return out;
}

}  // namespace treebridge

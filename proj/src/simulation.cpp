#include "treebridge/simulation.hpp"

#include <cmath>
#include <string>

#include "treebridge/errors.hpp"

namespace treebridge {

Mat CouplingSamples::vertex_block(int vertex) const {
  Mat out(values.rows, d);
  for (int r = 0; r < values.rows; ++r)
    for (int k = 0; k < d; ++k) out(r, k) = values(r, vertex * d + k);
  return out;
}

Mat CouplingSamples::observed_block(const Tree& tree) const {
  const auto& s = tree.observed();
  Mat out(values.rows, static_cast<int>(s.size()) * d);
  for (int r = 0; r < values.rows; ++r)
    for (size_t j = 0; j < s.size(); ++j)
      for (int k = 0; k < d; ++k) out(r, static_cast<int>(j) * d + k) = values(r, s[j] * d + k);
  return out;
}

Mat euler_maruyama_edge(const DriftNet& net, const Mat& x0, double T, double sigma,
                        int steps, Rng& rng) {
  if (steps < 1) throw ConfigError("DimensionMismatch", "steps must be >= 1");
  const int n = x0.rows, d = x0.cols;
  const double h = T / steps;
  const double noise_scale = sigma * std::sqrt(h);
  Mat x = x0;
  std::vector<double> t_norm(n);
  Mat z(n, d);
  for (int k = 0; k < steps; ++k) {
    const double t = k * h;
    std::fill(t_norm.begin(), t_norm.end(), t / T);
    Mat v = net_forward(net, x, t_norm);
    if (noise_scale > 0.0)
      for (auto& e : z.a) e = rng.normal();
    for (int r = 0; r < n; ++r) {
      double* xr = x.row(r);
      const double* vr = v.row(r);
      const double* zr = z.row(r);
      for (int j = 0; j < d; ++j)
        xr[j] += vr[j] * h + (noise_scale > 0.0 ? noise_scale * zr[j] : 0.0);
    }
  }
  if (!x.all_finite()) throw NumericError("NonFiniteState", "trajectory diverged");
  return x;
}

CouplingSamples simulate_tree(const Tree& tree, const DirectedTraversal& traversal,
                              const EdgeNets& nets, const Mat& x_root, int steps_per_edge,
                              Rng& rng) {
  const int n = x_root.rows, d = x_root.cols;
  CouplingSamples out;
  out.d = d;
  out.values = Mat(n, tree.num_vertices() * d);
  out.start.assign(n, traversal.root);
  out.interior_valid = true;

  std::vector<Mat> vertex_values(tree.num_vertices());
  vertex_values[traversal.root] = x_root;
  for (const DirectedEdge& de : traversal.ordered_edges) {
    const Edge& e = tree.edges()[de.edge_id];
    const DriftNet& net = nets.get(de.edge_id, de.forward);
    vertex_values[de.child] = euler_maruyama_edge(net, vertex_values[de.parent], e.length,
                                                  tree.sigma(), steps_per_edge, rng);
  }
  for (int v = 0; v < tree.num_vertices(); ++v)
    for (int r = 0; r < n; ++r)
      for (int k = 0; k < d; ++k) out.values(r, v * d + k) = vertex_values[v](r, k);
  return out;
}

CouplingSamples generate_coupling(const Tree& tree, const EdgeNets& nets,
                                  const MarginalSampler& marginals, int n, int d,
                                  StartPolicy policy, int iteration, int steps_per_edge,
                                  Rng& rng) {
  CouplingSamples out;
  out.d = d;
  out.iteration = iteration;
  out.interior_valid = true;
  out.values = Mat(n, tree.num_vertices() * d);
  if (n == 0) return out;

  const auto& s = tree.observed();
  std::vector<std::pair<int, int>> blocks;  // (start vertex, rows)
  if (policy == StartPolicy::equal_split) {
    if (n % static_cast<int>(s.size()) != 0)
      throw ConfigError("PolicyMismatch", "n=" + std::to_string(n) +
                                              " not divisible by |S|=" +
                                              std::to_string(s.size()));
    for (int v : s) blocks.emplace_back(v, n / static_cast<int>(s.size()));
  } else {
    blocks.emplace_back(s[iteration % static_cast<int>(s.size())], n);
  }

  out.start.clear();
  int row0 = 0;
  for (auto [start_vertex, rows] : blocks) {
    Mat x_root = marginals(start_vertex, rows, rng);
    if (x_root.cols != d)
      throw ConfigError("DimensionMismatch", "marginal sampler returned wrong dimension");
    DirectedTraversal tr = traversal_from(tree, start_vertex);
    CouplingSamples part = simulate_tree(tree, tr, nets, x_root, steps_per_edge, rng);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < out.values.cols; ++c) out.values(row0 + r, c) = part.values(r, c);
      out.start.push_back(start_vertex);
    }
    row0 += rows;
  }
  return out;
}

}  // namespace treebridge

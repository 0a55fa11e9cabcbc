#pragma once

#include <array>
#include <functional>
#include <vector>

#include "treebridge/drift_net.hpp"
#include "treebridge/tree.hpp"

namespace treebridge {

// Joint samples over all tree vertices plus per-row provenance.
struct CouplingSamples {
  Mat values;                   // n x (|V| * d)
  int d = 0;
  std::vector<int> start;       // start vertex per row
  int iteration = 0;
  bool interior_valid = false;  // false for couplings defined on S only

  int n() const { return values.rows; }
  double at(int row, int vertex, int k) const { return values(row, vertex * d + k); }
  double& at(int row, int vertex, int k) { return values(row, vertex * d + k); }

  // n x d block for one vertex
  Mat vertex_block(int vertex) const;
  // n x (|S|*d) block over observed vertices in ascending order
  Mat observed_block(const Tree& tree) const;
};

// x_{k+1} = x_k + v(x_k, t_k) h + sigma sqrt(h) Z_k, h = T/steps.
// Error: NonFiniteState.
Mat euler_maruyama_edge(const DriftNet& net, const Mat& x0, double T, double sigma,
                        int steps, Rng& rng);

// All 2|E| frozen nets, indexed [edge_id][direction] with 0 = forward (u->v).
struct EdgeNets {
  std::vector<std::array<DriftNet, 2>> nets;
  const DriftNet& get(int edge_id, bool forward) const {
    return nets[edge_id][forward ? 0 : 1];
  }
};

// Traverses the directed tree, picking the net trained in each edge's
// direction, and records values at every vertex.
CouplingSamples simulate_tree(const Tree& tree, const DirectedTraversal& traversal,
                              const EdgeNets& nets, const Mat& x_root, int steps_per_edge,
                              Rng& rng);

enum class StartPolicy { equal_split, rotation };

using MarginalSampler = std::function<Mat(int vertex, int n, Rng& rng)>;

// n joint samples; equal_split requires n divisible by |S| (PolicyMismatch),
// rotation starts all rows at S[(iteration mod |S|)] in ascending-id order.
CouplingSamples generate_coupling(const Tree& tree, const EdgeNets& nets,
                                  const MarginalSampler& marginals, int n, int d,
                                  StartPolicy policy, int iteration, int steps_per_edge,
                                  Rng& rng);

}  // namespace treebridge

#pragma once

#include <cstdint>
#include <vector>

#include "treebridge/errors.hpp"

namespace treebridge {

struct Edge {
  int u = 0;
  int v = 0;
  double length = 0.0;
};

// A validated metric tree with diffusion scale sigma and observed vertex set.
// Immutable after construction; validate_tree is the only way to build one.
class Tree {
 public:
  int num_vertices() const { return n_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<int>& observed() const { return observed_; }
  double sigma() const { return sigma_; }

  bool is_observed(int v) const { return observed_mask_[v]; }
  const std::vector<int>& unobserved() const { return unobserved_; }
  const std::vector<int>& adjacency(int v) const { return adj_[v]; }  // edge ids
  int degree(int v) const { return static_cast<int>(adj_[v].size()); }

  // Index of vertex within the ascending-id ordering of S (or S^c).
  int observed_index(int v) const { return obs_index_[v]; }
  int unobserved_index(int v) const { return unobs_index_[v]; }

  friend Tree validate_tree(int num_vertices, const std::vector<Edge>& edges,
                            const std::vector<int>& observed, double sigma);

 private:
  int n_ = 0;
  std::vector<Edge> edges_;
  std::vector<int> observed_;    // ascending
  std::vector<int> unobserved_;  // ascending
  std::vector<char> observed_mask_;
  std::vector<int> obs_index_, unobs_index_;
  std::vector<std::vector<int>> adj_;
  double sigma_ = 0.0;
};

struct DirectedEdge {
  int parent = 0;
  int child = 0;
  int edge_id = 0;
  bool forward = true;  // true if (parent,child) matches the stored (u,v) orientation
};

struct DirectedTraversal {
  int root = 0;
  std::vector<DirectedEdge> ordered_edges;  // depth-first, child after parent
};

// Errors: CycleDetected, Disconnected, NonPositiveLength, UnobservedLeaf,
// TooFewObserved, BadVertexId, DuplicateEdge, NonPositiveSigma.
Tree validate_tree(int num_vertices, const std::vector<Edge>& edges,
                   const std::vector<int>& observed, double sigma);

// Depth-first traversal rooted at an observed vertex; children visited in
// ascending vertex-id order. Error: RootNotObserved.
DirectedTraversal traversal_from(const Tree& tree, int root);

// Star tree for the barycentre problem: centre 0 unobserved, leaf i at edge
// length 1/lambda_i, sigma = sqrt(epsilon/2).
// Errors: WeightsNotNormalised, NonPositiveWeight.
Tree star_tree(const std::vector<double>& weights, double epsilon);

}  // namespace treebridge

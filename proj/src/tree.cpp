#include "treebridge/tree.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

namespace treebridge {

Tree validate_tree(int num_vertices, const std::vector<Edge>& edges,
                   const std::vector<int>& observed, double sigma) {
  if (num_vertices < 2)
    throw ConfigError("TooFewObserved", "a tree needs at least 2 vertices");
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw ConfigError("NonPositiveSigma", "sigma must be positive, got " + std::to_string(sigma));

  if (static_cast<int>(edges.size()) > num_vertices - 1)
    throw ConfigError("CycleDetected", "|E| > |V|-1");
  if (static_cast<int>(edges.size()) < num_vertices - 1)
    throw ConfigError("Disconnected", "|E| < |V|-1");

  std::set<std::pair<int, int>> seen;
  for (const Edge& e : edges) {
    if (e.u < 0 || e.u >= num_vertices || e.v < 0 || e.v >= num_vertices || e.u == e.v)
      throw ConfigError("BadVertexId", "edge (" + std::to_string(e.u) + "," +
                                           std::to_string(e.v) + ") out of range");
    if (!(e.length > 0.0) || !std::isfinite(e.length))
      throw ConfigError("NonPositiveLength", "edge (" + std::to_string(e.u) + "," +
                                                 std::to_string(e.v) + ") has length " +
                                                 std::to_string(e.length));
    auto key = std::minmax(e.u, e.v);
    if (!seen.insert(key).second)
      throw ConfigError("CycleDetected", "duplicate edge (" + std::to_string(e.u) + "," +
                                             std::to_string(e.v) + ")");
  }

  Tree t;
  t.n_ = num_vertices;
  t.edges_ = edges;
  t.adj_.assign(num_vertices, {});
  for (int ei = 0; ei < static_cast<int>(edges.size()); ++ei) {
    t.adj_[edges[ei].u].push_back(ei);
    t.adj_[edges[ei].v].push_back(ei);
  }

  // connectivity: |E| = |V|-1 plus reachability rules out cycles too
  std::vector<char> visited(num_vertices, 0);
  std::vector<int> stack{0};
  visited[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int ei : t.adj_[v]) {
      int w = edges[ei].u == v ? edges[ei].v : edges[ei].u;
      if (!visited[w]) {
        visited[w] = 1;
        ++count;
        stack.push_back(w);
      }
    }
  }
  if (count != num_vertices) throw ConfigError("Disconnected", "tree is not connected");

  t.observed_mask_.assign(num_vertices, 0);
  for (int v : observed) {
    if (v < 0 || v >= num_vertices)
      throw ConfigError("BadVertexId", "observed vertex " + std::to_string(v) + " out of range");
    t.observed_mask_[v] = 1;
  }
  for (int v = 0; v < num_vertices; ++v)
    (t.observed_mask_[v] ? t.observed_ : t.unobserved_).push_back(v);
  if (static_cast<int>(t.observed_.size()) < 2)
    throw ConfigError("TooFewObserved", "need |S| >= 2 observed vertices");

  for (int v = 0; v < num_vertices; ++v)
    if (t.degree(v) == 1 && !t.observed_mask_[v])
      throw ConfigError("UnobservedLeaf", "leaf vertex " + std::to_string(v) + " is not observed");

  t.obs_index_.assign(num_vertices, -1);
  t.unobs_index_.assign(num_vertices, -1);
  for (int i = 0; i < static_cast<int>(t.observed_.size()); ++i)
    t.obs_index_[t.observed_[i]] = i;
  for (int i = 0; i < static_cast<int>(t.unobserved_.size()); ++i)
    t.unobs_index_[t.unobserved_[i]] = i;

  t.sigma_ = sigma;
  return t;
}

DirectedTraversal traversal_from(const Tree& tree, int root) {
  if (root < 0 || root >= tree.num_vertices() || !tree.is_observed(root))
    throw ConfigError("RootNotObserved", "traversal root " + std::to_string(root) +
                                             " must be an observed vertex");
  DirectedTraversal tr;
  tr.root = root;

  // pre-order DFS, children visited in ascending vertex-id order
  struct Item {
    int v;
    DirectedEdge in;
    bool has_in;
  };
  std::vector<char> seen(tree.num_vertices(), 0);
  std::vector<Item> stack{{root, {}, false}};
  seen[root] = 1;
  while (!stack.empty()) {
    Item it = stack.back();
    stack.pop_back();
    if (it.has_in) tr.ordered_edges.push_back(it.in);
    std::vector<std::pair<int, int>> children;  // (child id, edge id)
    for (int ei : tree.adjacency(it.v)) {
      const Edge& e = tree.edges()[ei];
      int w = e.u == it.v ? e.v : e.u;
      if (!seen[w]) children.emplace_back(w, ei);
    }
    std::sort(children.begin(), children.end());
    for (auto c = children.rbegin(); c != children.rend(); ++c) {
      seen[c->first] = 1;
      stack.push_back({c->first,
                       {it.v, c->first, c->second, tree.edges()[c->second].u == it.v},
                       true});
    }
  }
  return tr;
}

Tree star_tree(const std::vector<double>& weights, double epsilon) {
  if (weights.size() < 2)
    throw ConfigError("TooFewObserved", "star tree needs at least 2 leaves");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w))
      throw ConfigError("NonPositiveWeight", "weight " + std::to_string(w));
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ConfigError("WeightsNotNormalised",
                      "weights sum to " + std::to_string(sum) + ", expected 1");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw ConfigError("NonPositiveLength", "epsilon must be positive");

  const int ell = static_cast<int>(weights.size());
  std::vector<Edge> edges;
  std::vector<int> observed;
  for (int i = 0; i < ell; ++i) {
    edges.push_back({0, i + 1, 1.0 / weights[i]});
    observed.push_back(i + 1);
  }
  return validate_tree(ell + 1, edges, observed, std::sqrt(epsilon / 2.0));
}

}  // namespace treebridge

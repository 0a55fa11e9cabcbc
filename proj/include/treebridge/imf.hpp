#pragma once

#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "treebridge/bridge_matching.hpp"
#include "treebridge/data_io.hpp"
#include "treebridge/simulation.hpp"
#include "treebridge/tree.hpp"

namespace treebridge {

struct TrainingConfig {
  int steps = 10000;
  int batch = 4096;
  double lr = 1e-3;
  double ema_decay = 0.99;
  double width_mult = 1.0;
  int times_per_edge = 1;
  bool warm_start = false;
};

struct ImfConfig {
  int iterations = 4;
  int pool_size = 10000;
  StartPolicy start_policy = StartPolicy::equal_split;
  std::string initial_coupling_csv;  // empty = independent coupling
};

struct SimulationConfig {
  int steps_per_edge = 50;
};

struct EvaluationConfig {
  double sinkhorn_epsilon = 0.01;
  double sinkhorn_tol = 1e-7;
  int sinkhorn_max_iter = 2000;
  int eval_samples = 2000;
  bool per_iteration_marginals = true;
};

struct ExperimentConfig {
  uint64_t seed = 0;
  std::string output_dir;
  Tree tree;
  std::map<int, MarginalSource> marginals;  // one per observed vertex
  TrainingConfig training;
  ImfConfig imf;
  SimulationConfig simulation;
  EvaluationConfig evaluation;
  int workers = 0;  // 0 = one per edge

  int spatial_dim() const;
  void validate() const;
};

// Initial coupling over S. Independent mode draws each column from its
// marginal; provided mode accepts external joint samples verbatim (the
// static-solver warmstart hook). Error: MarginalDimensionMismatch.
CouplingSamples init_coupling(const ExperimentConfig& cfg, int n,
                              const std::optional<Mat>& provided = std::nullopt);

struct IterationRecord {
  int iteration = 0;
  std::vector<LossRecord> final_losses;            // one per edge
  nlohmann::json marginal_sinkhorn;                // vertex -> start -> value
  double wall_seconds = 0.0;
};

struct RunResult {
  CouplingSamples pool;
  EdgeNets nets;  // EMA weights of the final iteration
  std::vector<IterationRecord> records;
  std::vector<std::vector<LossRecord>> traces;  // per edge, final iteration
};

// Algorithm: starting from the initial coupling, alternate per-edge
// bidirectional bridge-matching with tree simulation to regenerate the
// coupling pool, writing checkpoints/metrics per iteration when out_dir is
// nonempty. Any error aborts with the last completed iteration checkpointed.
RunResult run_imf(const ExperimentConfig& cfg, const std::string& out_dir);

// Eval-split sampler for a configured marginal, positioned by purpose tags.
Mat draw_marginal(const ExperimentConfig& cfg, int vertex, int n, Split split,
                  uint64_t purpose, uint64_t index);

// Empirical conditional-expectation map x -> E[X_target | X_start = x] under
// the learned process, estimated with k repeated simulations per row.
Mat conditional_mean_map(const Tree& tree, const EdgeNets& nets, int start_vertex,
                         int target_vertex, const Mat& x, int k, int steps_per_edge,
                         Rng& rng);

}  // namespace treebridge

#include "treebridge/imf.hpp"

#include <omp.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "treebridge/checkpoint.hpp"
#include "treebridge/errors.hpp"
#include "treebridge/metrics.hpp"

namespace treebridge {

namespace fs = std::filesystem;

namespace {
// purpose tags for marginal draw streams
constexpr uint64_t kPurposeInit = 1;
constexpr uint64_t kPurposePool = 2;
constexpr uint64_t kPurposeEvalSim = 3;
constexpr uint64_t kPurposeEvalHold = 4;
}  // namespace

int ExperimentConfig::spatial_dim() const {
  return marginals.empty() ? 0 : marginals.begin()->second.dim();
}

void ExperimentConfig::validate() const {
  if (marginals.size() != tree.observed().size())
    throw ConfigError("MarginalDimensionMismatch",
                      "need exactly one marginal source per observed vertex");
  const int d = spatial_dim();
  for (const auto& [v, src] : marginals) {
    if (!tree.is_observed(v))
      throw ConfigError("MarginalDimensionMismatch",
                        "marginal given for unobserved vertex " + std::to_string(v));
    if (src.dim() != d)
      throw ConfigError("MarginalDimensionMismatch",
                        "marginal dimensions disagree at vertex " + std::to_string(v));
  }
  if (imf.pool_size < 1) throw ConfigError("BadConfig", "pool_size must be >= 1");
  if (training.steps < 0 || training.batch < 1)
    throw ConfigError("BadConfig", "bad training budget");
}

Mat draw_marginal(const ExperimentConfig& cfg, int vertex, int n, Split split,
                  uint64_t purpose, uint64_t index) {
  const MarginalSource& src = cfg.marginals.at(vertex);
  Rng rng = derive_stream(src.seed,
                          split == Split::train ? StreamTag::data_train : StreamTag::data_eval,
                          {purpose, index});
  return sample_marginal(src, n, rng);
}

CouplingSamples init_coupling(const ExperimentConfig& cfg, int n,
                              const std::optional<Mat>& provided) {
  const int d = cfg.spatial_dim();
  const auto& s = cfg.tree.observed();
  CouplingSamples out;
  out.d = d;
  out.iteration = 0;
  out.interior_valid = false;
  out.values = Mat(n, cfg.tree.num_vertices() * d);
  out.start.assign(n, -1);
  if (n == 0) return out;

  if (provided) {
    if (provided->rows != n || provided->cols != static_cast<int>(s.size()) * d)
      throw ConfigError("MarginalDimensionMismatch",
                        "provided coupling must be n x (|S|*d)");
    for (int r = 0; r < n; ++r)
      for (size_t j = 0; j < s.size(); ++j)
        for (int k = 0; k < d; ++k)
          out.values(r, s[j] * d + k) = (*provided)(r, static_cast<int>(j) * d + k);
    return out;
  }

  for (size_t j = 0; j < s.size(); ++j) {
    Mat col = draw_marginal(cfg, s[j], n, Split::train, kPurposeInit, 0);
    for (int r = 0; r < n; ++r)
      for (int k = 0; k < d; ++k) out.values(r, s[j] * d + k) = col(r, k);
  }
  return out;
}

Mat conditional_mean_map(const Tree& tree, const EdgeNets& nets, int start_vertex,
                         int target_vertex, const Mat& x, int k, int steps_per_edge,
                         Rng& rng) {
  const int n = x.rows, d = x.cols;
  Mat x_rep(n * k, d);
  for (int r = 0; r < n; ++r)
    for (int rep = 0; rep < k; ++rep)
      for (int c = 0; c < d; ++c) x_rep(r * k + rep, c) = x(r, c);
  DirectedTraversal tr = traversal_from(tree, start_vertex);
  CouplingSamples sims = simulate_tree(tree, tr, nets, x_rep, steps_per_edge, rng);
  Mat out(n, d);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < d; ++c) {
      double acc = 0.0;
      for (int rep = 0; rep < k; ++rep) acc += sims.at(r * k + rep, target_vertex, c);
      out(r, c) = acc / k;
    }
  return out;
}

namespace {

struct OutputWriter {
  fs::path root;
  bool enabled = false;
  std::ofstream metrics, run_log;

  explicit OutputWriter(const std::string& dir) {
    if (dir.empty()) return;
    enabled = true;
    root = dir;
    fs::create_directories(root);
    metrics.open(root / "metrics.jsonl");
    run_log.open(root / "run_log.jsonl");
    if (!metrics || !run_log) throw IoError("FileOpen", "cannot write into " + dir);
  }

  fs::path iter_dir(int n) {
    fs::path p = root / ("iter_" + std::to_string(n));
    fs::create_directories(p);
    return p;
  }
};

void write_loss_trace(const fs::path& path, const std::vector<LossRecord>& trace) {
  std::ofstream f(path);
  f << "step,forward_loss,backward_loss\n";
  char buf[96];
  for (const LossRecord& r : trace) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", r.step, r.forward_loss,
                  r.backward_loss);
    f << buf;
  }
}

nlohmann::json marginal_metrics(const ExperimentConfig& cfg, const EdgeNets& nets,
                                int iteration) {
  const auto& s = cfg.tree.observed();
  const int n_eval = cfg.evaluation.eval_samples;
  const int d = cfg.spatial_dim();
  SinkhornOptions opt;
  opt.tol = cfg.evaluation.sinkhorn_tol;
  opt.max_iter = cfg.evaluation.sinkhorn_max_iter;

  // simulate once from each start vertex with eval-split start points
  std::map<int, CouplingSamples> sims;
  for (int start : s) {
    Mat x0 = draw_marginal(cfg, start, n_eval, Split::eval, kPurposeEvalSim,
                           static_cast<uint64_t>(iteration));
    Rng rng = derive_stream(cfg.seed, StreamTag::eval_sim,
                            {static_cast<uint64_t>(iteration), static_cast<uint64_t>(start)});
    sims.emplace(start,
                 simulate_tree(cfg.tree, traversal_from(cfg.tree, start), nets, x0,
                               cfg.simulation.steps_per_edge, rng));
  }

  nlohmann::json out = nlohmann::json::object();
  for (int target : s) {
    Mat held = draw_marginal(cfg, target, n_eval, Split::eval, kPurposeEvalHold,
                             static_cast<uint64_t>(iteration));
    nlohmann::json per_start = nlohmann::json::object();
    for (int start : s) {
      if (start == target) continue;
      Mat cloud = sims.at(start).vertex_block(target);
      SinkhornResult sd = sinkhorn_divergence(cloud, held, cfg.evaluation.sinkhorn_epsilon, opt);
      per_start[std::to_string(start)] = sd.value;
    }
    out[std::to_string(target)] = per_start;
  }
  (void)d;
  return out;
}

}  // namespace

RunResult run_imf(const ExperimentConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  const int d = cfg.spatial_dim();
  const int ne = static_cast<int>(cfg.tree.edges().size());
  const NetArch arch = NetArch::standard(d, cfg.training.width_mult);
  TreePrecision prec = build_precision(cfg.tree);
  OutputWriter out(out_dir);

  RunResult result;
  std::optional<Mat> provided;
  if (!cfg.imf.initial_coupling_csv.empty())
    provided = load_csv(cfg.imf.initial_coupling_csv);
  result.pool = init_coupling(cfg, cfg.imf.pool_size, provided);

  // frozen EMA nets, rebuilt after each iteration
  result.nets.nets.clear();
  for (int e = 0; e < ne; ++e)
    result.nets.nets.push_back({DriftNet(arch), DriftNet(arch)});

  std::vector<std::vector<double>> warm_fwd(ne), warm_bwd(ne);
  MarginalSampler pool_sampler = [&cfg](int vertex, int n, Rng& rng) {
    (void)rng;  // pool start draws use per-vertex derived streams
    return Mat();
  };

  for (int iter = 0; iter < cfg.imf.iterations; ++iter) {
    const auto t0 = std::chrono::steady_clock::now();
    Mat pool_s = result.pool.observed_block(cfg.tree);

    // --- train all edges on the current coupling (independent, parallel) ---
    std::vector<std::unique_ptr<EdgeTrainer>> trainers(ne);
    TrainHParams hp;
    hp.steps = cfg.training.steps;
    hp.batch = cfg.training.batch;
    hp.lr = cfg.training.lr;
    hp.ema_decay = cfg.training.ema_decay;
    hp.times_per_edge = cfg.training.times_per_edge;
    hp.warm_start = cfg.training.warm_start;

    const int workers = cfg.workers > 0 ? cfg.workers : ne;
    std::exception_ptr train_error;
#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(1, std::min(workers, ne))) if (workers > 1)
    for (int e = 0; e < ne; ++e) {
      try {
        Rng init_fwd = derive_stream(cfg.seed, StreamTag::net_init,
                                     {static_cast<uint64_t>(iter), static_cast<uint64_t>(e), 0});
        Rng init_bwd = derive_stream(cfg.seed, StreamTag::net_init,
                                     {static_cast<uint64_t>(iter), static_cast<uint64_t>(e), 1});
        auto trainer = std::make_unique<EdgeTrainer>(e, cfg.tree.edges()[e].length, arch, hp,
                                                     init_fwd, init_bwd);
        if (hp.warm_start && iter > 0) {
          trainer->forward_net.theta = warm_fwd[e];
          trainer->backward_net.theta = warm_bwd[e];
          trainer->opt_forward.ema = warm_fwd[e];
          trainer->opt_backward.ema = warm_bwd[e];
        }
        EdgeBatchSampler sampler =
            make_pool_sampler(cfg.tree, prec, pool_s, d, e, hp.times_per_edge);
        Rng train_rng = derive_stream(cfg.seed, StreamTag::train_edge,
                                      {static_cast<uint64_t>(iter), static_cast<uint64_t>(e)});
        train_edge(*trainer, sampler, hp.steps, train_rng);
        trainers[e] = std::move(trainer);
      } catch (...) {
#pragma omp critical
        if (!train_error) train_error = std::current_exception();
      }
    }
    if (train_error) std::rethrow_exception(train_error);

    for (int e = 0; e < ne; ++e) {
      result.nets.nets[e][0].theta = trainers[e]->opt_forward.ema;
      result.nets.nets[e][1].theta = trainers[e]->opt_backward.ema;
      warm_fwd[e] = trainers[e]->forward_net.theta;
      warm_bwd[e] = trainers[e]->backward_net.theta;
    }

    // --- checkpoints + loss traces ---
    if (out.enabled) {
      fs::path dir = out.iter_dir(iter);
      for (int e = 0; e < ne; ++e) {
        const Edge& edge = cfg.tree.edges()[e];
        const std::string stem =
            "edge_" + std::to_string(edge.u) + "_" + std::to_string(edge.v);
        save_checkpoint((dir / (stem + "_fwd.ckpt")).string(), arch,
                        trainers[e]->opt_forward.ema, trainers[e]->opt_forward.step,
                        cfg.training.ema_decay);
        save_checkpoint((dir / (stem + "_bwd.ckpt")).string(), arch,
                        trainers[e]->opt_backward.ema, trainers[e]->opt_backward.step,
                        cfg.training.ema_decay);
        write_loss_trace(dir / ("loss_" + stem + ".csv"), trainers[e]->trace);
      }
    }

    // --- regenerate the coupling pool by simulating the learned process ---
    MarginalSampler marginals = [&cfg, iter](int vertex, int n, Rng&) {
      return draw_marginal(cfg, vertex, n, Split::train, kPurposePool,
                           static_cast<uint64_t>(iter));
    };
    Rng sim_rng = derive_stream(cfg.seed, StreamTag::pool_sim, {static_cast<uint64_t>(iter)});
    result.pool = generate_coupling(cfg.tree, result.nets, marginals, cfg.imf.pool_size, d,
                                    cfg.imf.start_policy, iter, cfg.simulation.steps_per_edge,
                                    sim_rng);
    result.pool.iteration = iter + 1;

    // --- per-iteration metrics on held-out data ---
    IterationRecord rec;
    rec.iteration = iter;
    for (int e = 0; e < ne; ++e) {
      LossRecord last = trainers[e]->trace.empty() ? LossRecord{} : trainers[e]->trace.back();
      rec.final_losses.push_back(last);
    }
    if (cfg.evaluation.per_iteration_marginals)
      rec.marginal_sinkhorn = marginal_metrics(cfg, result.nets, iter);
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (out.enabled) {
      nlohmann::json edges_json = nlohmann::json::array();
      for (int e = 0; e < ne; ++e) {
        const Edge& edge = cfg.tree.edges()[e];
        edges_json.push_back({{"edge", {edge.u, edge.v}},
                              {"forward_loss", rec.final_losses[e].forward_loss},
                              {"backward_loss", rec.final_losses[e].backward_loss}});
      }
      nlohmann::json line = {{"iteration", iter},
                             {"edge_losses", edges_json},
                             {"marginal_sinkhorn", rec.marginal_sinkhorn}};
      out.metrics << line.dump() << "\n";
      out.metrics.flush();
      out.run_log << nlohmann::json({{"iteration", iter},
                                     {"wall_seconds", rec.wall_seconds}})
                         .dump()
                  << "\n";
      out.run_log.flush();
    }
    if (iter + 1 == cfg.imf.iterations)
      for (int e = 0; e < ne; ++e) result.traces.push_back(trainers[e]->trace);
    result.records.push_back(std::move(rec));
  }

  // --- export final coupling samples ---
  if (out.enabled) {
    fs::path dir = out.root / "samples";
    fs::create_directories(dir);
    for (int v = 0; v < cfg.tree.num_vertices(); ++v) {
      if (!result.pool.interior_valid && !cfg.tree.is_observed(v)) continue;
      write_csv((dir / ("vertex_" + std::to_string(v) + ".csv")).string(),
                result.pool.vertex_block(v));
    }
    nlohmann::json manifest = {
        {"n", result.pool.n()},
        {"d", d},
        {"seed", cfg.seed},
        {"start_policy",
         cfg.imf.start_policy == StartPolicy::equal_split ? "equal_split" : "rotation"},
        {"iteration", result.pool.iteration},
    };
    std::ofstream mf(dir / "manifest.json");
    mf << manifest.dump(2) << "\n";
  }
  return result;
}

}  // namespace treebridge

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "aip/model.hpp"

namespace aip {

struct SamplerConfig {
  int chains = 8;
  int iterations = 500;  // per chain, including warmup
  int warmup = 250;
  int thin = 4;
  double target_accept = 0.8;
  int max_tree_depth = 10;
  double init_sd = 0.1;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: one thread per chain (capped at hardware concurrency)

  int retained_per_chain() const { return (iterations - warmup + thin - 1) / thin; }
  void validate() const;
};

// Target density: value plus gradient at a point.
using LogDensity = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct ChainStats {
  int divergences = 0;
  int max_depth_hits = 0;
  double step_size = 0.0;
  double mean_accept = 0.0;
};

struct PosteriorDraws {
  BlockIndex index;
  // draws x dim, chain-major: chain c occupies rows [c * per_chain, (c+1) * per_chain)
  Eigen::MatrixXd draws;
  int chains = 0;
  std::vector<ChainStats> chain_stats;

  int per_chain() const { return static_cast<int>(draws.rows()) / chains; }
  Eigen::VectorXd column(const std::string& block, int within = 0) const;
};

// Runs NUTS chains (multi-threaded, bitwise-deterministic in `seed` regardless
// of thread count). Step size adapts by dual averaging, the diagonal mass
// matrix is estimated from the middle warmup window. Throws NumericalError
// when a chain diverges on every post-adaptation warmup step.
PosteriorDraws run_chains(const LogDensity& target, int dim, const BlockIndex& index,
                          const SamplerConfig& config);

PosteriorDraws run_chains(const ModelData& data, const ModelSpec& spec,
                          const SamplerConfig& config);

struct ScalarDiagnostics {
  double rhat = 0.0;
  double ess = 0.0;
  double q5 = 0.0, q50 = 0.0, q95 = 0.0;
  double mean = 0.0;
};

// Split R-hat and bulk ESS over chain-major draws of one scalar.
ScalarDiagnostics diagnose(const Eigen::VectorXd& scalar_draws, int chains);

// Sample percentile with linear interpolation between order statistics
// (R type 7). `p` in [0, 1].
double percentile(std::vector<double> values, double p);

// Columnar text serialization: <path> holds one named column per parameter,
// <path>.meta.json carries the block index, chain layout and chain stats.
void save_draws(const std::string& path, const PosteriorDraws& draws);
PosteriorDraws load_draws(const std::string& path);

}  // namespace aip

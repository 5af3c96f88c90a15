#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "aip/correction.hpp"
#include "aip/frame.hpp"
#include "aip/graph.hpp"
#include "aip/model.hpp"
#include "aip/sampler.hpp"

namespace aip {

struct PopulationConfig {
  long N = 1000000;
  int J = 3;
  int L = 51;
  int num_covariates = 3;
  std::vector<double> cutoffs = {-1.0, 0.0, 1.0};
  int sar_candidates = 1000;

  void validate() const;
  int levels_per_covariate() const { return static_cast<int>(cutoffs.size()) + 1; }
};

// A simulated population aggregated to cells: per-cell head counts by choice,
// the exact choice probabilities, and the realized choice prevalences.
struct Population {
  Schema schema;              // area attribute plus discretized covariates
  StratificationFrame frame;  // weight = cell head count
  Eigen::MatrixXd truth;      // cells x J softmax probabilities
  Eigen::MatrixXd counts;     // cells x J realized head counts
  std::vector<double> prevalence;  // realized per-choice share of N
  Eigen::VectorXd z;               // area-level covariate used in the DGP

  Eigen::MatrixXd area_truth() const;  // L x J head-count-weighted cell truth
  CovariateTables covariates() const;  // z as the single area covariate
};

// Moran's I with binary symmetric weights. Throws on zero variance.
double moran_i(const Eigen::VectorXd& values, const AdjacencyGraph& graph);

// Draws `candidates` SAR fields (I - lambda W)^-1 eps with lambda ~ U(0, 0.99)
// and W row-normalized, returning the one with the highest Moran's I.
Eigen::VectorXd sample_sar_psi(const AdjacencyGraph& graph, int candidates, Rng& rng);

Population gen_population(const PopulationConfig& cfg, const AdjacencyGraph& graph,
                          Rng& rng);

struct ScenarioSpec {
  std::string id;
  bool selected = false;
  Likelihood likelihood = Likelihood::Bernoulli;
  bool structured = true;
  bool corrected = false;
};

// "S.0" .. "S.9"; anything else is an error listing the valid ids.
ScenarioSpec scenario(const std::string& id);
const std::vector<ScenarioSpec>& all_scenarios();

struct Metrics {
  double bias = 0.0;
  double rmse = 0.0;
  double pearson = 0.0;   // NaN when either side is constant
  double coverage = 0.0;  // share of 90% intervals containing the truth
};

Metrics score(const Eigen::VectorXd& truth, const Eigen::VectorXd& estimate,
              const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);

struct ScenarioResult {
  std::string scenario;
  int replicate = 0;
  int choice = 0;
  long n = 0;
  double prevalence = 0.0;           // population share of the choice
  double penalty_mean = 0.0;         // selection penalty mean applied
  double sample_prevalence_bias = 0.0;  // sample share minus population share
  Metrics theta;  // stratified area estimates
  Metrics pi;     // cell-level estimates
  bool flagged = false;  // sampler divergences above threshold
};

struct SimOptions {
  long n = 2000;
  SamplerConfig sampler;
  // penalty means per choice; empty draws mu ~ U(0,1) per choice from the rng,
  // with variance at half its admissible bound
  std::vector<double> penalty_mean;
  int divergence_flag_threshold = 10;
};

// Samples, fits and scores one scenario on a population. Returns one row per
// choice.
std::vector<ScenarioResult> run_scenario(const Population& pop,
                                         const AdjacencyGraph& graph,
                                         const ScenarioSpec& spec,
                                         const SimOptions& opt, Rng& rng);

struct SweepRow {
  std::string scenario;
  double bin_center = 0.0;
  int count = 0;
  Metrics theta;
  Metrics pi;
};

// Bins result rows by one stimulus ("n", "prevalence", "penalty" or
// "sample_bias") and averages the metrics per (scenario, bin).
std::vector<SweepRow> stimulus_sweep(const std::vector<ScenarioResult>& rows,
                                     const std::string& stimulus, int bins);

// One row per (replicate, scenario, choice, target, metric).
void write_simreport(const std::string& path, const std::vector<ScenarioResult>& rows);

}  // namespace aip

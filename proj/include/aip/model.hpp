#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "aip/frame.hpp"
#include "aip/graph.hpp"
#include "aip/priors.hpp"

namespace aip {

enum class Likelihood { Bernoulli, Multinomial };
enum class EffectKind { Unstructured, RandomWalk, Bym2 };

struct EffectBlock {
  std::string name;
  EffectKind kind = EffectKind::Unstructured;
  int levels = 0;
  int attribute = -1;  // index into schema.attributes, or -1 for the day block
};

struct ParameterBlock {
  std::string name;
  int offset = 0;
  int size = 0;
};

// Named-block index over the flat unconstrained parameter vector.
struct BlockIndex {
  std::vector<ParameterBlock> blocks;
  int dim = 0;

  const ParameterBlock& at(const std::string& name) const;
  Eigen::VectorXd segment(const Eigen::VectorXd& params, const std::string& name) const;
};

struct ModelSpec {
  Likelihood likelihood = Likelihood::Bernoulli;
  int choice = 0;       // Bernoulli: the modeled choice j
  int num_choices = 2;  // J
  bool structured = true;
  double offset = 0.0;  // bias-correction offset; Bernoulli only
  int num_fixed = 0;    // P
  std::vector<EffectBlock> blocks;
  std::shared_ptr<const AdjacencyGraph> graph;
  ScalingFactors scaling;
  // Standardization constants frozen from the training survey.
  std::vector<double> x_mean, x_sd;

  int num_groups() const {
    return likelihood == Likelihood::Bernoulli ? 1 : num_choices - 1;
  }
  BlockIndex layout() const;
  void validate() const;
};

// Model spec over a schema: ordinal attributes get random walks, the area
// attribute gets the spatial convolution, everything else plain shared-scale
// intercepts; the unstructured variant flattens all of these.
ModelSpec make_model_spec(const Schema& schema, Likelihood likelihood, int choice,
                          bool structured, double offset,
                          std::shared_ptr<const AdjacencyGraph> graph);

// Replaces random-walk and spatial components with plain unstructured
// intercepts of the same cardinalities. Idempotent.
ModelSpec unstructured_variant(const ModelSpec& spec);

// Respondent- or cell-aligned evaluation data.
struct ModelData {
  Eigen::MatrixXd X;                        // n x P, standardized
  std::vector<std::vector<int>> level_ids;  // [block][row], 0-based
  std::vector<int> y;                       // Bernoulli 0/1; Multinomial 0..J-1
  int n() const { return static_cast<int>(X.rows()); }
};

// Builds training data; freezes standardization constants into the spec on
// first use so prediction applies identical transforms.
ModelData build_training_data(ModelSpec& spec, const Schema& schema,
                              const SurveyDataset& survey, const CovariateTables& cov);

// Cell-aligned data for posterior prediction at a fixed day (-1 when the
// schema has no day dimension).
ModelData build_cell_data(const ModelSpec& spec, const StratificationFrame& frame,
                          const CovariateTables& cov, int day);

// Latent propensities mu (n x groups): offset + alpha + random effects + X beta.
// `with_offset` false drops the bias-correction term (prediction path).
Eigen::MatrixXd linear_predictor(const Eigen::VectorXd& params, const ModelData& data,
                                 const ModelSpec& spec, bool with_offset = true);

double log_posterior(const Eigen::VectorXd& params, const ModelData& data,
                     const ModelSpec& spec);
Eigen::VectorXd grad_log_posterior(const Eigen::VectorXd& params, const ModelData& data,
                                   const ModelSpec& spec);
double log_posterior_with_grad(const Eigen::VectorXd& params, const ModelData& data,
                               const ModelSpec& spec, Eigen::VectorXd& grad);

inline double logistic(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline double log1p_exp(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace aip

#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "aip/error.hpp"
#include "aip/rng.hpp"

namespace aip {

enum class AlphaLevel { Nominal, Ordinal };

struct AlphaResult {
  double alpha = 0.0;
  // true when expected disagreement is zero (all labels identical); alpha is
  // then defined as 1 and callers should surface a warning
  bool degenerate = false;
};

// Krippendorff's alpha from per-unit rating vectors (one entry per rater,
// -1 = missing). Nominal distance is 1 for distinct labels; ordinal distance
// is the squared difference of category ranks. Requires at least two units
// with two or more ratings.
AlphaResult krippendorff_alpha(const std::vector<std::vector<int>>& units,
                               int num_labels, AlphaLevel level);

struct BootstrapSummary {
  std::vector<double> draws;
  double mean = 0.0, q5 = 0.0, q50 = 0.0, q95 = 0.0;
};

// Resamples whole units with replacement; replicate b uses stream
// make_stream(seed, b) so results are independent of evaluation order.
BootstrapSummary bootstrap_alpha(const std::vector<std::vector<int>>& units,
                                 int num_labels, AlphaLevel level,
                                 int replicates, std::uint64_t seed);

// Square label-by-label contingency table: rows are the first rater's label,
// columns the second rater's.
struct AgreementMatrix {
  Eigen::MatrixXd counts;
  std::vector<std::string> labels;

  void validate() const;
  int size() const { return static_cast<int>(counts.rows()); }
};

// Expands the table to one two-rating unit per count, for alpha.
std::vector<std::vector<int>> expand_to_units(const AgreementMatrix& a);

// Long-format ratings: unit, rater, variable, label.
struct RatingsTable {
  std::vector<std::string> unit_ids;
  std::vector<std::string> raters;
  std::vector<std::string> labels;            // label universe, in first-seen order
  std::vector<std::vector<int>> values;       // [unit][rater], -1 missing
};

std::map<std::string, RatingsTable> load_ratings(const std::string& path);

// Cross-tabulates two raters of one variable into an AgreementMatrix.
AgreementMatrix tabulate_pair(const RatingsTable& t, int rater_a, int rater_b);

// Square matrix stored as CSV with a "label" column plus one column per label.
AgreementMatrix load_agreement_matrix(const std::string& path);

struct NetworkConfig {
  int iterations = 6000;
  int warmup = 2000;
  int thin = 2;
  double beta_step = 0.15;   // random-walk scale for the Poisson regression terms
  double sigma_step = 0.25;  // random-walk scale for the two scale parameters
  double r_step = 0.4;       // random-walk scale on log r
  std::uint64_t seed = 1;
  bool fix_r_zero = false;   // degenerate variant: the link premium is off

  int retained() const { return (iterations - warmup) / thin; }
  void validate() const;
};

// Posterior of the latent-link Poisson model
//   A_ij ~ Poisson(exp(b0 + b1_i + b2_j) * (1 + r * B_ij)),
//   B_ij ~ Bernoulli(pi_ij), pi_ij ~ Beta(1/2, 1/2),
//   b0 ~ N(0, 10), b1_i ~ N(0, s1^2), b2_j ~ N(0, s2^2),
//   s1, s2 ~ U(0, 5), r ~ Exponential(rate 0.01).
struct NetworkPosterior {
  int size = 0;
  std::vector<double> beta0, sigma1, sigma2, r;
  std::vector<Eigen::VectorXd> beta1, beta2;
  std::vector<Eigen::MatrixXd> pi;
  std::vector<Eigen::MatrixXd> link;   // 0/1 draws of B
  Eigen::MatrixXd mean_incidence;      // posterior mean of B
  double accept_beta = 0.0, accept_sigma = 0.0, accept_r = 0.0;
  bool converged = true;  // false when a Metropolis acceptance rate collapses
};

// Gibbs for B and pi, random-walk Metropolis for the regression terms, the
// scales and log r. Derivation of the exact B conditional: docs/latent_link_gibbs.md.
NetworkPosterior fit_agreement_network(const AgreementMatrix& a,
                                       const NetworkConfig& config);

// Monte Carlo mean of stored link draws.
Eigen::MatrixXd posterior_incidence(const std::vector<Eigen::MatrixXd>& link_draws);

void write_incidence(const std::string& path, const Eigen::MatrixXd& incidence,
                     const std::vector<std::string>& labels);

}  // namespace aip

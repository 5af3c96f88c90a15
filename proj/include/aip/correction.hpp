#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "aip/rng.hpp"
#include "aip/schema.hpp"

namespace aip {

// Beta-distributed per-(cell, choice) selection penalties, parametrized by
// mean and variance per choice. Zero variance makes the penalty deterministic.
struct SelectionConfig {
  std::vector<double> mean;      // per choice, in [0, 1)
  std::vector<double> variance;  // per choice, >= 0

  void validate() const;
  // Beta shapes for one choice; requires variance < mean * (1 - mean).
  std::pair<double, double> beta_shapes(int choice) const;
};

// Maximum admissible penalty variance for a given mean (exclusive bound).
inline double max_penalty_variance(double mean) { return mean * (1.0 - mean); }

struct SelectedSample {
  Eigen::MatrixXd counts;   // cells x choices, selected respondents
  Eigen::MatrixXd penalty;  // cells x choices, the drawn penalties
};

// Draws n respondents without replacement from a population with
// `population(m, j)` members of cell m holding choice j. Each (cell, choice)
// group survives with weight (1 - penalty) * remaining count.
SelectedSample draw_online_selected_sample(const Eigen::MatrixXd& population,
                                           const SelectionConfig& config, long n,
                                           Rng& rng);

// Log-odds of the selection rates of cases versus non-cases:
//   log((n1 / N1) / (n0 / N0)).
// Requires at least one sampled case and one sampled non-case.
double king_zeng_offset(double n1, double n0, double N1, double N0);

// Offset from sample counts plus exogenous prevalence pi = N1 / N.
double king_zeng_offset(long n1, long n, double pi, double population_size);

// Intercept net of the selection offset.
inline double corrected_intercept(double alpha, double offset) { return alpha - offset; }

// Exogenous prevalence per choice, averaged over a day series.
struct PrevalenceTable {
  std::vector<double> pi;  // per choice, in (0, 1)

  double at(int choice) const;
};

// CSV with columns choice,day,share; one row per (choice, day). Every choice
// in the schema must appear; shares are averaged across the series.
PrevalenceTable load_prevalence(const std::string& path, const Schema& schema);

}  // namespace aip

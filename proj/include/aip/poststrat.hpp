#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "aip/frame.hpp"
#include "aip/sampler.hpp"

namespace aip {

// Posterior cell-level choice probabilities, draws x cells, one matrix per
// choice. A Bernoulli fit yields the single modeled choice; a multinomial fit
// yields all J at once (softmax with the last choice as reference).
struct CellPosterior {
  std::vector<int> choice;          // choice index per entry
  std::vector<Eigen::MatrixXd> prob;  // parallel to `choice`
};

// Cell probabilities from the draws; the bias-correction offset is omitted.
CellPosterior predict_cells(const PosteriorDraws& draws, const ModelSpec& spec,
                            const ModelData& cells);

// Renormalizes party probabilities to shares conditional on turning out:
// the stay-home entry is dropped and each remaining choice is divided by the
// per-draw, per-cell sum over the parties. Needs every choice present.
CellPosterior normalize_turnout(const CellPosterior& cells, int stay_home_choice,
                                int num_choices);

// Frame-weighted aggregation of cell probabilities:
//   theta_u = sum_{m in u} pi_m w_m / sum_{m in u} w_m
// `attribute` selects the margin levels; -1 collapses to one national margin.
// A margin level with zero total weight is an error.
Eigen::MatrixXd aggregate(const Eigen::MatrixXd& cell_prob,
                          const StratificationFrame& frame, int attribute = -1);

struct Summary {
  double mean = 0.0;
  double q5 = 0.0, q50 = 0.0, q95 = 0.0;
};

// Column-wise summaries of draws x margins values.
std::vector<Summary> summarize(const Eigen::MatrixXd& draws);

struct SwingResult {
  Eigen::VectorXd values;
  std::vector<bool> clamped;  // entries pushed back into [0, 1]
};

// Shifts every margin by (target - national) and clamps to [0, 1], flagging
// the entries that needed clamping.
SwingResult uniform_swing(const Eigen::VectorXd& margins, double national,
                          double target);

// One row per (margin level, choice): margin,level,choice,mean,q5,q50,q95.
struct EstimateRow {
  std::string margin;
  std::string level;
  std::string choice;
  Summary summary;
};

void write_estimates(const std::string& path, const std::vector<EstimateRow>& rows);

}  // namespace aip

#include "aip/poststrat.hpp"

#include <cmath>
#include <fstream>

#include "aip/csv.hpp"
#include "aip/error.hpp"

namespace aip {

CellPosterior predict_cells(const PosteriorDraws& draws, const ModelSpec& spec,
                            const ModelData& cells) {
  const Eigen::Index D = draws.draws.rows();
  const int M = cells.n();
  CellPosterior out;
  if (spec.likelihood == Likelihood::Bernoulli) {
    out.choice = {spec.choice};
    out.prob.emplace_back(D, M);
    for (Eigen::Index d = 0; d < D; ++d) {
      Eigen::MatrixXd mu = linear_predictor(draws.draws.row(d), cells, spec, false);
      for (int m = 0; m < M; ++m) out.prob[0](d, m) = logistic(mu(m, 0));
    }
    return out;
  }
  const int J = spec.num_choices;
  for (int j = 0; j < J; ++j) {
    out.choice.push_back(j);
    out.prob.emplace_back(D, M);
  }
  for (Eigen::Index d = 0; d < D; ++d) {
    Eigen::MatrixXd mu = linear_predictor(draws.draws.row(d), cells, spec, false);
    for (int m = 0; m < M; ++m) {
      double mx = 0.0;
      for (int g = 0; g < J - 1; ++g) mx = std::max(mx, mu(m, g));
      double denom = std::exp(-mx);
      for (int g = 0; g < J - 1; ++g) denom += std::exp(mu(m, g) - mx);
      for (int g = 0; g < J - 1; ++g)
        out.prob[g](d, m) = std::exp(mu(m, g) - mx) / denom;
      out.prob[J - 1](d, m) = std::exp(-mx) / denom;
    }
  }
  return out;
}

CellPosterior normalize_turnout(const CellPosterior& cells, int stay_home_choice,
                                int num_choices) {
  if (cells.prob.empty()) throw DataError("no cell probabilities to normalize");
  std::vector<int> where(num_choices, -1);
  for (size_t k = 0; k < cells.choice.size(); ++k) {
    int j = cells.choice[k];
    if (j < 0 || j >= num_choices) throw DataError("choice index outside the choice set");
    where[j] = static_cast<int>(k);
  }
  for (int j = 0; j < num_choices; ++j)
    if (where[j] < 0)
      throw DataError("turnout normalization needs cell probabilities for every choice");
  if (stay_home_choice < 0 || stay_home_choice >= num_choices)
    throw DataError("stay-home choice outside the choice set");

  Eigen::MatrixXd denom =
      Eigen::MatrixXd::Zero(cells.prob[0].rows(), cells.prob[0].cols());
  for (int j = 0; j < num_choices; ++j)
    if (j != stay_home_choice) denom += cells.prob[where[j]];
  if ((denom.array() <= 0.0).any())
    throw NumericalError("zero party probability mass in a cell");

  CellPosterior out;
  for (int j = 0; j < num_choices; ++j) {
    if (j == stay_home_choice) continue;
    out.choice.push_back(j);
    out.prob.push_back(cells.prob[where[j]].cwiseQuotient(denom));
  }
  return out;
}

Eigen::MatrixXd aggregate(const Eigen::MatrixXd& cell_prob,
                          const StratificationFrame& frame, int attribute) {
  const int M = static_cast<int>(frame.cells.size());
  if (cell_prob.cols() != M)
    throw DataError("cell probability column count != frame cell count");
  int levels = 1;
  if (attribute >= 0) {
    if (attribute >= static_cast<int>(frame.schema.attributes.size()))
      throw DataError("margin attribute out of range");
    levels = frame.schema.attributes[attribute].cardinality;
  }
  Eigen::VectorXd weight = Eigen::VectorXd::Zero(levels);
  std::vector<int> level_of(M, 0);
  for (int m = 0; m < M; ++m) {
    if (attribute >= 0) level_of[m] = frame.cells[m].levels[attribute];
    weight[level_of[m]] += frame.cells[m].weight;
  }
  for (int u = 0; u < levels; ++u)
    if (!(weight[u] > 0.0))
      throw DataError("margin level " + std::to_string(u + 1) + " has zero weight");

  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(cell_prob.rows(), levels);
  for (int m = 0; m < M; ++m)
    out.col(level_of[m]) += (frame.cells[m].weight / weight[level_of[m]]) * cell_prob.col(m);
  return out;
}

std::vector<Summary> summarize(const Eigen::MatrixXd& draws) {
  std::vector<Summary> out;
  for (Eigen::Index c = 0; c < draws.cols(); ++c) {
    Summary s;
    s.mean = draws.col(c).mean();
    std::vector<double> v(draws.col(c).data(), draws.col(c).data() + draws.rows());
    s.q5 = percentile(v, 0.05);
    s.q50 = percentile(v, 0.50);
    s.q95 = percentile(v, 0.95);
    out.push_back(s);
  }
  return out;
}

SwingResult uniform_swing(const Eigen::VectorXd& margins, double national,
                          double target) {
  SwingResult out;
  out.values = margins.array() + (target - national);
  out.clamped.assign(margins.size(), false);
  for (Eigen::Index i = 0; i < out.values.size(); ++i) {
    if (out.values[i] < 0.0) {
      out.values[i] = 0.0;
      out.clamped[i] = true;
    } else if (out.values[i] > 1.0) {
      out.values[i] = 1.0;
      out.clamped[i] = true;
    }
  }
  return out;
}

void write_estimates(const std::string& path, const std::vector<EstimateRow>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.precision(17);
  out << "margin,level,choice,mean,q5,q50,q95\n";
  for (const auto& r : rows) {
    out << csv::quote(r.margin) << ',' << csv::quote(r.level) << ','
        << csv::quote(r.choice) << ',' << r.summary.mean << ',' << r.summary.q5 << ','
        << r.summary.q50 << ',' << r.summary.q95 << '\n';
  }
}

}  // namespace aip

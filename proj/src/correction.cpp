#include "aip/correction.hpp"

#include <cmath>
#include <map>

#include "aip/csv.hpp"
#include "aip/error.hpp"

namespace aip {

void SelectionConfig::validate() const {
  if (mean.size() != variance.size())
    throw DataError("selection means and variances differ in length");
  if (mean.empty()) throw DataError("selection config has no choices");
  for (size_t j = 0; j < mean.size(); ++j) {
    if (!(mean[j] >= 0.0 && mean[j] < 1.0))
      throw DataError("selection penalty mean for choice " + std::to_string(j + 1) +
                      " outside [0, 1)");
    if (variance[j] < 0.0)
      throw DataError("negative selection penalty variance for choice " +
                      std::to_string(j + 1));
    if (variance[j] > 0.0 && variance[j] >= max_penalty_variance(mean[j]))
      throw DataError("selection penalty variance for choice " + std::to_string(j + 1) +
                      " is too large for its mean (needs a positive Beta sample size)");
  }
}

std::pair<double, double> SelectionConfig::beta_shapes(int choice) const {
  const double mu = mean.at(choice), v = variance.at(choice);
  const double nu = mu * (1.0 - mu) / v - 1.0;
  if (!(nu > 0.0))
    throw DataError("selection penalty variance implies a non-positive Beta sample size");
  return {mu * nu, (1.0 - mu) * nu};
}

SelectedSample draw_online_selected_sample(const Eigen::MatrixXd& population,
                                           const SelectionConfig& config, long n,
                                           Rng& rng) {
  config.validate();
  const Eigen::Index M = population.rows(), J = population.cols();
  if (static_cast<size_t>(J) != config.mean.size())
    throw DataError("selection config choice count != population choice count");
  if (n < 1) throw DataError("sample size must be positive");
  if ((population.array() < 0.0).any())
    throw DataError("negative population count");

  SelectedSample out;
  out.counts = Eigen::MatrixXd::Zero(M, J);
  out.penalty.resize(M, J);
  for (Eigen::Index j = 0; j < J; ++j) {
    if (config.variance[j] > 0.0) {
      auto [a, b] = config.beta_shapes(static_cast<int>(j));
      for (Eigen::Index m = 0; m < M; ++m) out.penalty(m, j) = rbeta(rng, a, b);
    } else {
      out.penalty.col(j).setConstant(config.mean[j]);
    }
  }

  Eigen::MatrixXd remaining = population.array().floor();
  Eigen::ArrayXXd survive = 1.0 - out.penalty.array();
  double total = (remaining.array() * survive).sum();
  for (long draw = 0; draw < n; ++draw) {
    if (!(total > 0.0))
      throw DataError("population exhausted after " + std::to_string(draw) +
                      " of " + std::to_string(n) + " draws");
    double u = runif(rng) * total;
    double acc = 0.0;
    Eigen::Index pm = M - 1, pj = J - 1;
    bool found = false;
    for (Eigen::Index m = 0; m < M && !found; ++m) {
      for (Eigen::Index j = 0; j < J; ++j) {
        acc += remaining(m, j) * survive(m, j);
        if (u < acc) {
          pm = m;
          pj = j;
          found = true;
          break;
        }
      }
    }
    remaining(pm, pj) -= 1.0;
    out.counts(pm, pj) += 1.0;
    total -= survive(pm, pj);
  }
  return out;
}

double king_zeng_offset(double n1, double n0, double N1, double N0) {
  if (n1 < 1.0 || n0 < 1.0)
    throw DataError("the selection offset needs at least one sampled case and one "
                    "sampled non-case");
  if (!(N1 > 0.0) || !(N0 > 0.0))
    throw DataError("population case and non-case counts must be positive");
  if (n1 > N1 || n0 > N0)
    throw DataError("sample counts exceed the population");
  return std::log((n1 / N1) / (n0 / N0));
}

double king_zeng_offset(long n1, long n, double pi, double population_size) {
  if (!(pi > 0.0 && pi < 1.0)) throw DataError("prevalence must lie in (0, 1)");
  if (!(population_size > 0.0)) throw DataError("population size must be positive");
  if (n1 < 0 || n1 > n) throw DataError("case count outside [0, n]");
  return king_zeng_offset(static_cast<double>(n1), static_cast<double>(n - n1),
                          pi * population_size, (1.0 - pi) * population_size);
}

double PrevalenceTable::at(int choice) const {
  if (choice < 0 || choice >= static_cast<int>(pi.size()))
    throw DataError("no prevalence for choice " + std::to_string(choice + 1));
  return pi[choice];
}

PrevalenceTable load_prevalence(const std::string& path, const Schema& schema) {
  auto t = csv::read_file(path);
  int ccol = t.column("choice");
  int scol = t.column("share");
  std::vector<double> sum(schema.choices.size(), 0.0);
  std::vector<int> count(schema.choices.size(), 0);
  for (const auto& row : t.rows) {
    int j = schema.choice_index(row[ccol]);
    double v = csv::to_double(row[scol], "share");
    if (!(v > 0.0 && v < 1.0))
      throw DataError("prevalence share " + row[scol] + " outside (0, 1)");
    sum[j] += v;
    ++count[j];
  }
  PrevalenceTable out;
  for (size_t j = 0; j < sum.size(); ++j) {
    if (count[j] == 0)
      throw DataError("no prevalence series for choice '" + schema.choices[j] + "'");
    out.pi.push_back(sum[j] / count[j]);
  }
  return out;
}

}  // namespace aip

#include "aip/priors.hpp"

#include <cmath>
#include <numbers>

#include "aip/error.hpp"

namespace aip {

namespace {
constexpr double kLogSqrt2Pi = 0.9189385332046727;  // log(sqrt(2*pi))

double log_normal_pdf(double x, double mean, double sd) {
  double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - kLogSqrt2Pi;
}
}  // namespace

ScalingFactors compute_scaling_factor(const AdjacencyGraph& graph) {
  ScalingFactors sf;
  sf.epsilon.assign(graph.num_components, 1.0);
  sf.inv_sqrt.assign(graph.num_components, 1.0);

  for (int c = 0; c < graph.num_components; ++c) {
    const int k = graph.component_size[c];
    if (k < 2) continue;  // island: epsilon = 1 by convention

    // Local index of the component's nodes.
    std::vector<int> local(graph.num_nodes, -1);
    int next = 0;
    for (int v = 0; v < graph.num_nodes; ++v)
      if (graph.component[v] == c) local[v] = next++;

    // Laplacian Q = D - A restricted to the component, ridged for
    // invertibility; the component mean is projected out afterwards, which
    // removes the ridge-dominated constant eigenvector.
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(k, k);
    for (auto [a, b] : graph.edges) {
      if (graph.component[a] != c) continue;
      int la = local[a], lb = local[b];
      Q(la, la) += 1.0;
      Q(lb, lb) += 1.0;
      Q(la, lb) -= 1.0;
      Q(lb, la) -= 1.0;
    }
    Q.diagonal().array() += 1e-9;
    Eigen::MatrixXd Qinv = Q.ldlt().solve(Eigen::MatrixXd::Identity(k, k));
    Eigen::MatrixXd P = Eigen::MatrixXd::Identity(k, k) -
                        Eigen::MatrixXd::Constant(k, k, 1.0 / k);
    Eigen::VectorXd diag = (P * Qinv * P).diagonal();

    double log_sum = 0.0;
    for (int i = 0; i < k; ++i) {
      if (!(diag[i] > 0.0))
        throw NumericalError("non-positive marginal variance in scaling factor");
      log_sum += std::log(diag[i]);
    }
    sf.epsilon[c] = std::exp(log_sum / k);
    sf.inv_sqrt[c] = 1.0 / std::sqrt(sf.epsilon[c]);
  }
  return sf;
}

double icar_logdensity(const Eigen::VectorXd& psi, const AdjacencyGraph& graph,
                       Eigen::VectorXd* grad) {
  if (psi.size() != graph.num_nodes)
    throw DataError("psi length != number of graph nodes");
  if (grad) grad->setZero(psi.size());
  double lp = 0.0;
  for (auto [a, b] : graph.edges) {
    double d = psi[a] - psi[b];
    lp -= 0.5 * d * d;
    if (grad) {
      (*grad)[a] -= d;
      (*grad)[b] += d;
    }
  }
  return lp;
}

Eigen::VectorXd bym2_convolve(const Eigen::VectorXd& phi, const Eigen::VectorXd& psi,
                              double xi, double scale, const AdjacencyGraph& graph,
                              const ScalingFactors& sf) {
  if (!(scale > 0.0)) throw NumericalError("bym2 scale must be positive");
  if (phi.size() != graph.num_nodes || psi.size() != graph.num_nodes)
    throw DataError("phi/psi length != number of graph nodes");
  Eigen::VectorXd gamma(graph.num_nodes);
  const double sq1 = std::sqrt(1.0 - xi);
  const double sqxi = std::sqrt(xi);
  for (int l = 0; l < graph.num_nodes; ++l) {
    if (graph.is_island(l))
      gamma[l] = scale * phi[l];
    else
      gamma[l] = scale * (phi[l] * sq1 + psi[l] * sqxi * sf.inv_sqrt[graph.component[l]]);
  }
  return gamma;
}

double random_walk_logdensity(const Eigen::VectorXd& gamma, Eigen::VectorXd* grad) {
  const int u = static_cast<int>(gamma.size());
  if (u < 2) throw DataError("random walk needs length >= 2");
  if (grad) grad->setZero(u);
  double lp = 0.0;
  for (int i = 1; i < u; ++i) {
    double d = gamma[i] - gamma[i - 1];
    lp += log_normal_pdf(d, 0.0, 1.0);
    if (grad) {
      (*grad)[i] -= d;
      (*grad)[i - 1] += d;
    }
  }
  const double s0 = sum_to_zero_sd(u);
  const double total = gamma.sum();
  lp += log_normal_pdf(total, 0.0, s0);
  if (grad) grad->array() -= total / (s0 * s0);
  return lp;
}

}  // namespace aip

#pragma once

#include <Eigen/Dense>
#include <vector>

#include "aip/graph.hpp"

namespace aip {

// Per-component variance scaling for the spatial convolution. `epsilon` is the
// geometric mean of the marginal ICAR variances within a component; islands
// carry the value 1, and only `inv_sqrt` (1/sqrt(epsilon)) enters the model.
struct ScalingFactors {
  std::vector<double> epsilon;   // per graph component
  std::vector<double> inv_sqrt;  // 1/sqrt(epsilon), islands exactly 1
};

ScalingFactors compute_scaling_factor(const AdjacencyGraph& graph);

// Pairwise-difference penalty over graph edges:
//   -0.5 * sum_edges (psi_a - psi_b)^2
// with gradient -Q psi on non-island entries; islands contribute 0.
double icar_logdensity(const Eigen::VectorXd& psi, const AdjacencyGraph& graph,
                       Eigen::VectorXd* grad = nullptr);

// Spatial convolution of unstructured and ICAR effects sharing one scale:
//   gamma_l = scale * (phi_l sqrt(1-xi) + psi_l sqrt(xi/epsilon_comp(l)))
// island entries collapse to scale * phi_l.
Eigen::VectorXd bym2_convolve(const Eigen::VectorXd& phi, const Eigen::VectorXd& psi,
                              double xi, double scale, const AdjacencyGraph& graph,
                              const ScalingFactors& sf);

// Standardized random-walk innovations plus the soft sum-to-zero term
//   sum_{u>1} logNormal(g_u | g_{u-1}, 1) + logNormal(sum g | 0, 0.01 * U).
double random_walk_logdensity(const Eigen::VectorXd& gamma,
                              Eigen::VectorXd* grad = nullptr);

// Soft sum-to-zero tightness used throughout (0.01 * level count).
inline double sum_to_zero_sd(int levels) { return 0.01 * levels; }

}  // namespace aip

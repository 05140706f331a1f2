#pragma once

// Closed-form estimating-equation estimator with a fixed working weight and
// its sandwich variance.

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

#include "swqif/basis.hpp"
#include "swqif/design.hpp"

namespace swqif {

struct GeeEstimate {
  Eigen::VectorXd beta;
  Eigen::MatrixXd covariance;      // Var(beta_hat) = Sigma_hat / I
  Eigen::MatrixXd vhat;            // (1/I) sum_i (D-mu)^T S^T Q S (D-mu)
  Eigen::MatrixXd psi_per_cluster; // I x p, evaluated at beta_hat
  double vhat_rcond = 0.0;
  int clusters = 0;
  int empty_clusters = 0;
};

// (D-mu)^T S^T S (y - (D-mu) beta - g_hat)
Eigen::VectorXd psi(const StackedCluster& cluster, const Eigen::VectorXd& beta);
Eigen::VectorXd psi(const StackedCluster& cluster, const Eigen::VectorXd& beta, const WeightingSpec& weighting);

// labels (optional) name coefficients in SingularDesign messages.
GeeEstimate solve_independence(std::span<const StackedCluster> clusters,
                               const std::vector<std::string>& labels = {});

GeeEstimate solve_fixed_q(std::span<const StackedCluster> clusters, const WeightingSpec& weighting,
                          const std::vector<std::string>& labels = {});

// Throws SingularDesign when the reciprocal condition number of a symmetric
// PSD Gram matrix is below 1e-12; returns that reciprocal condition number.
double check_design_rank(const Eigen::MatrixXd& gram, const std::vector<std::string>& labels);

}  // namespace swqif

#pragma once

// Quadratic inference functions: stacked estimating functions over several
// correlation bases, combined through the inverse of their empirical second
// moment, minimized by Gauss-Newton, with the GMM variance.

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

#include "swqif/basis.hpp"
#include "swqif/design.hpp"

namespace swqif {

struct QifOptions {
  double tol = 1e-10;
  int max_iter = 100;
  double ridge = 1e-10;  // relative to tr(C) / (number of moments)
  bool two_step = false; // hold C at the initial estimate instead of updating it
  bool small_sample_inflation = false;  // multiply covariance by I / (I - p)
};

struct ExtendedScore {
  Eigen::VectorXd psi_bar;          // L*p
  Eigen::MatrixXd psi_per_cluster;  // I x L*p
  Eigen::MatrixXd jacobian;         // L*p x p, does not depend on beta
};

// Moment layout and precomputed S^T Q_l S (D - mu) products for a fixed data set.
class QifProblem {
 public:
  QifProblem(std::span<const StackedCluster> clusters, std::vector<BasisKind> bases,
             bool drop_degenerate = true);

  int clusters() const { return static_cast<int>(clusters_.size()); }
  int params() const { return p_; }
  int moment_count() const { return static_cast<int>(kept_.size()); }
  const std::vector<BasisKind>& bases() const { return bases_; }
  // Indices into the full L*p layout of the moments in use.
  const std::vector<int>& kept_moments() const { return kept_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  ExtendedScore score(const Eigen::VectorXd& beta) const;
  // (1/I) sum_i psi_i psi_i^T
  Eigen::MatrixXd second_moment(const Eigen::MatrixXd& psi_per_cluster) const;
  // C + ridge * tr(C) / m * Id
  static Eigen::MatrixXd regularize(const Eigen::MatrixXd& c, double ridge);

  // I * psi_bar^T C^{-1} psi_bar with C evaluated at the same beta.
  double objective(const Eigen::VectorXd& beta, double ridge) const;
  // Same quadratic form with a caller-supplied (already regularized) C.
  double objective_fixed(const Eigen::VectorXd& beta, const Eigen::MatrixXd& c_reg) const;
  // 2 I J^T C^{-1} psi_bar, the gradient of objective_fixed.
  Eigen::VectorXd gradient_fixed(const Eigen::VectorXd& beta, const Eigen::MatrixXd& c_reg) const;

 private:
  std::span<const StackedCluster> clusters_;
  std::vector<BasisKind> bases_;
  int p_ = 0;
  std::vector<int> kept_;
  // weighted_[i][l] = S^T Q_l S (D - mu) for cluster i, basis l; construction only
  std::vector<std::vector<Eigen::MatrixXd>> weighted_;
  // packed_[i]: rows x kept moments, the kept columns of weighted_[i]
  std::vector<Eigen::MatrixXd> packed_;
  Eigen::MatrixXd jacobian_;
  std::vector<std::string> warnings_;
};

ExtendedScore extended_score(std::span<const StackedCluster> clusters, const std::vector<BasisKind>& bases,
                             const Eigen::VectorXd& beta);

double qif_objective(std::span<const StackedCluster> clusters, const std::vector<BasisKind>& bases,
                     const Eigen::VectorXd& beta, double ridge);

struct QifEstimate {
  Eigen::VectorXd beta;
  Eigen::MatrixXd covariance;  // (1/I) (J^T C^{-1} J)^{-1}
  double objective_value = 0.0;
  int iterations = 0;
  bool converged = false;
  double c_rcond = 0.0;
  std::vector<BasisKind> bases;
  int moments_used = 0;
  std::vector<std::string> warnings;
};

QifEstimate solve_qif(std::span<const StackedCluster> clusters, const std::vector<BasisKind>& bases,
                      const QifOptions& options = {}, const std::vector<std::string>& labels = {});

struct OrderingCertificate {
  Eigen::VectorXd eigenvalues;  // of info_large - info_small
  double min_eigenvalue = 0.0;
  double trace = 0.0;           // of info_large
  bool holds = false;           // min_eigenvalue >= -1e-8 * trace
};

// Compares J^T C^{-1} J for a basis set and a prefix of it, both from the same
// per-cluster scores at beta; the smaller set uses the principal sub-block of C.
OrderingCertificate variance_ordering_check(std::span<const StackedCluster> clusters, const Eigen::VectorXd& beta,
                                            const std::vector<BasisKind>& bases_small,
                                            const std::vector<BasisKind>& bases_large, double ridge = 1e-10);

}  // namespace swqif

#include "swqif/gee.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace swqif {

namespace {

void check_dimensions(const StackedCluster& c, const Eigen::VectorXd& beta) {
  if (beta.size() != c.params()) {
    throw Error(ErrorCode::DimensionMismatch, "beta has length " + std::to_string(beta.size()) + ", design has " +
                                                  std::to_string(c.params()) + " columns");
  }
  if (c.g_hat.size() != c.rows() || c.weights.size() != c.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "cluster '" + c.cluster_id + "' has misaligned row vectors");
  }
}

int param_dim(std::span<const StackedCluster> clusters) {
  if (clusters.empty()) throw Error(ErrorCode::DimensionMismatch, "no clusters to estimate from");
  const int p = clusters.front().params();
  for (const auto& c : clusters) {
    if (c.params() != p) throw Error(ErrorCode::DimensionMismatch, "clusters disagree on parameter dimension");
  }
  return p;
}

}  // namespace

Eigen::VectorXd psi(const StackedCluster& c, const Eigen::VectorXd& beta) {
  check_dimensions(c, beta);
  const Eigen::VectorXd resid = c.y - c.centered * beta - c.g_hat;
  return c.centered.transpose() * (c.weights.array().square() * resid.array()).matrix();
}

Eigen::VectorXd psi(const StackedCluster& c, const Eigen::VectorXd& beta, const WeightingSpec& weighting) {
  check_dimensions(c, beta);
  const Eigen::VectorXd resid = c.y - c.centered * beta - c.g_hat;
  return c.centered.transpose() * weighting.apply_weighted(c, resid);
}

double check_design_rank(const Eigen::MatrixXd& gram, const std::vector<std::string>& labels) {
  const Eigen::VectorXd values = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram, Eigen::EigenvaluesOnly).eigenvalues();
  const double top = values.maxCoeff();
  const double rcond = top > 0.0 ? std::max(values.minCoeff(), 0.0) / top : 0.0;
  if (rcond >= 1e-12) return rcond;

  // only pay for eigenvectors when naming the culprits
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const Eigen::VectorXd& ev = eig.eigenvalues();

  std::set<int> offending;
  for (int i = 0; i < ev.size(); ++i) {
    if (top > 0.0 && ev(i) >= 1e-12 * top) continue;
    const Eigen::VectorXd v = eig.eigenvectors().col(i);
    for (int k = 0; k < v.size(); ++k) {
      if (std::abs(v(k)) > 0.1) offending.insert(k);
    }
  }
  std::string names;
  for (int k : offending) {
    if (!names.empty()) names += ", ";
    names += (k < static_cast<int>(labels.size())) ? labels[k] : "beta[" + std::to_string(k) + "]";
  }
  throw Error(ErrorCode::SingularDesign,
              "design is rank deficient (reciprocal condition " + std::to_string(rcond) +
                  "); unidentified coefficients: " + names);
}

GeeEstimate solve_fixed_q(std::span<const StackedCluster> clusters, const WeightingSpec& weighting,
                          const std::vector<std::string>& labels) {
  const int p = param_dim(clusters);
  const int n_clusters = static_cast<int>(clusters.size());

  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
  std::vector<Eigen::MatrixXd> weighted(clusters.size());
  GeeEstimate est;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const auto& c = clusters[i];
    if (c.rows() == 0) {
      ++est.empty_clusters;
      continue;
    }
    weighted[i] = weighting.apply_weighted(c, c.centered);  // S^T Q S (D - mu)
    gram.noalias() += weighted[i].transpose() * c.centered;
    rhs.noalias() += weighted[i].transpose() * (c.y - c.g_hat);
  }
  gram = (0.5 * (gram + gram.transpose())).eval();
  est.vhat_rcond = check_design_rank(gram, labels);
  est.beta = gram.colPivHouseholderQr().solve(rhs);
  est.clusters = n_clusters;
  est.vhat = gram / n_clusters;

  est.psi_per_cluster = Eigen::MatrixXd::Zero(n_clusters, p);
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const auto& c = clusters[i];
    if (c.rows() == 0) continue;
    const Eigen::VectorXd resid = c.y - c.centered * est.beta - c.g_hat;
    est.psi_per_cluster.row(static_cast<Eigen::Index>(i)) = (weighted[i].transpose() * resid).transpose();
  }
  const Eigen::MatrixXd meat = est.psi_per_cluster.transpose() * est.psi_per_cluster / n_clusters;
  const Eigen::MatrixXd vinv = est.vhat.colPivHouseholderQr().inverse();
  Eigen::MatrixXd sigma = vinv * meat * vinv.transpose();
  sigma = (0.5 * (sigma + sigma.transpose())).eval();
  est.covariance = sigma / n_clusters;
  return est;
}

GeeEstimate solve_independence(std::span<const StackedCluster> clusters, const std::vector<std::string>& labels) {
  return solve_fixed_q(clusters, WeightingSpec::identity(), labels);
}

}  // namespace swqif

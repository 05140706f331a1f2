#include "swqif/qif.hpp"

#include <algorithm>
#include <cmath>

#include "swqif/gee.hpp"

namespace swqif {

QifProblem::QifProblem(std::span<const StackedCluster> clusters, std::vector<BasisKind> bases,
                       bool drop_degenerate)
    : clusters_(clusters), bases_(std::move(bases)) {
  if (clusters_.empty()) throw Error(ErrorCode::DimensionMismatch, "no clusters to estimate from");
  if (bases_.empty()) throw Error(ErrorCode::ConfigError, "QIF needs at least one correlation basis");
  p_ = clusters_.front().params();
  const int L = static_cast<int>(bases_.size());
  const int n = static_cast<int>(clusters_.size());

  Eigen::MatrixXd full_jacobian = Eigen::MatrixXd::Zero(L * p_, p_);
  std::vector<bool> nonzero(static_cast<std::size_t>(L * p_), false);
  weighted_.resize(clusters_.size());
  for (std::size_t i = 0; i < clusters_.size(); ++i) {
    const auto& c = clusters_[i];
    if (c.params() != p_) throw Error(ErrorCode::DimensionMismatch, "clusters disagree on parameter dimension");
    weighted_[i].resize(bases_.size());
    if (c.rows() == 0) continue;
    for (int l = 0; l < L; ++l) {
      weighted_[i][l] = apply_weighted_basis(bases_[l], c, c.centered);
      full_jacobian.middleRows(l * p_, p_).noalias() -= weighted_[i][l].transpose() * c.centered;
      for (int k = 0; k < p_; ++k) {
        if (!nonzero[l * p_ + k] && (weighted_[i][l].col(k).array() != 0.0).any()) nonzero[l * p_ + k] = true;
      }
    }
  }
  full_jacobian /= n;

  for (int l = 0; l < L; ++l) {
    int dropped = 0;
    for (int k = 0; k < p_; ++k) {
      if (drop_degenerate && !nonzero[l * p_ + k]) {
        ++dropped;
      } else {
        kept_.push_back(l * p_ + k);
      }
    }
    if (dropped == p_) {
      warnings_.push_back("basis " + std::string(basis_name(bases_[l])) +
                          " is identically zero for these data; its moments were dropped");
    } else if (dropped > 0) {
      warnings_.push_back(std::to_string(dropped) + " all-zero moment(s) of basis " +
                          std::string(basis_name(bases_[l])) + " dropped");
    }
  }
  if (kept_.empty()) throw Error(ErrorCode::SingularC, "every QIF moment is identically zero");

  jacobian_.resize(static_cast<Eigen::Index>(kept_.size()), p_);
  for (std::size_t m = 0; m < kept_.size(); ++m) jacobian_.row(static_cast<Eigen::Index>(m)) = full_jacobian.row(kept_[m]);

  // pack the kept columns side by side so a cluster's score is one product
  packed_.resize(clusters_.size());
  for (std::size_t i = 0; i < clusters_.size(); ++i) {
    const auto& c = clusters_[i];
    if (c.rows() == 0) continue;
    Eigen::MatrixXd& w = packed_[i];
    w.resize(c.rows(), static_cast<Eigen::Index>(kept_.size()));
    for (std::size_t m = 0; m < kept_.size(); ++m) {
      w.col(static_cast<Eigen::Index>(m)) = weighted_[i][kept_[m] / p_].col(kept_[m] % p_);
    }
  }
  weighted_.clear();
}

ExtendedScore QifProblem::score(const Eigen::VectorXd& beta) const {
  if (beta.size() != p_) {
    throw Error(ErrorCode::DimensionMismatch, "beta has length " + std::to_string(beta.size()) + ", expected " +
                                                  std::to_string(p_));
  }
  const int n = clusters();
  ExtendedScore s;
  // filled column-per-cluster, then transposed: contiguous writes
  Eigen::MatrixXd psi_t = Eigen::MatrixXd::Zero(moment_count(), n);
  Eigen::VectorXd resid;
  for (int i = 0; i < n; ++i) {
    const auto& c = clusters_[static_cast<std::size_t>(i)];
    if (c.rows() == 0) continue;
    if (c.g_hat.size() != c.rows()) throw Error(ErrorCode::DimensionMismatch, "g_hat not aligned with rows");
    resid = c.y - c.g_hat;
    resid.noalias() -= c.centered * beta;
    psi_t.col(i).noalias() = packed_[static_cast<std::size_t>(i)].transpose() * resid;
  }
  s.psi_per_cluster = psi_t.transpose();
  s.psi_bar = s.psi_per_cluster.colwise().mean().transpose();
  s.jacobian = jacobian_;
  return s;
}

Eigen::MatrixXd QifProblem::second_moment(const Eigen::MatrixXd& psi_per_cluster) const {
  const Eigen::Index m = psi_per_cluster.cols();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(m, m);
  c.selfadjointView<Eigen::Lower>().rankUpdate(psi_per_cluster.transpose());
  c.triangularView<Eigen::StrictlyUpper>() = c.transpose();
  return c / static_cast<double>(psi_per_cluster.rows());
}

Eigen::MatrixXd QifProblem::regularize(const Eigen::MatrixXd& c, double ridge) {
  Eigen::MatrixXd out = c;
  const double shift = ridge * c.trace() / static_cast<double>(c.rows());
  out.diagonal().array() += shift;
  return out;
}

namespace {

Eigen::LLT<Eigen::MatrixXd> factor_c(const Eigen::MatrixXd& c_reg, double* rcond_out = nullptr) {
  Eigen::LLT<Eigen::MatrixXd> llt(c_reg);
  const double rc = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
  if (rcond_out) *rcond_out = rc;
  if (llt.info() != Eigen::Success || !(rc >= 1e-14)) {
    throw Error(ErrorCode::SingularC, "moment covariance C is singular (reciprocal condition " +
                                          std::to_string(rc) + "); try fewer bases or a larger ridge");
  }
  return llt;
}

}  // namespace

double QifProblem::objective_fixed(const Eigen::VectorXd& beta, const Eigen::MatrixXd& c_reg) const {
  const ExtendedScore s = score(beta);
  const auto llt = factor_c(c_reg);
  return clusters() * s.psi_bar.dot(llt.solve(s.psi_bar));
}

double QifProblem::objective(const Eigen::VectorXd& beta, double ridge) const {
  const ExtendedScore s = score(beta);
  if ((s.psi_per_cluster.array() == 0.0).all()) return 0.0;
  const auto llt = factor_c(regularize(second_moment(s.psi_per_cluster), ridge));
  return clusters() * s.psi_bar.dot(llt.solve(s.psi_bar));
}

Eigen::VectorXd QifProblem::gradient_fixed(const Eigen::VectorXd& beta, const Eigen::MatrixXd& c_reg) const {
  const ExtendedScore s = score(beta);
  const auto llt = factor_c(c_reg);
  return 2.0 * clusters() * s.jacobian.transpose() * llt.solve(s.psi_bar);
}

ExtendedScore extended_score(std::span<const StackedCluster> clusters, const std::vector<BasisKind>& bases,
                             const Eigen::VectorXd& beta) {
  return QifProblem(clusters, bases, false).score(beta);
}

double qif_objective(std::span<const StackedCluster> clusters, const std::vector<BasisKind>& bases,
                     const Eigen::VectorXd& beta, double ridge) {
  return QifProblem(clusters, bases).objective(beta, ridge);
}

QifEstimate solve_qif(std::span<const StackedCluster> clusters, const std::vector<BasisKind>& bases,
                      const QifOptions& options, const std::vector<std::string>& labels) {
  const GeeEstimate init = solve_independence(clusters, labels);
  const QifProblem problem(clusters, bases);
  const int n = problem.clusters();
  const int p = problem.params();

  QifEstimate est;
  est.bases = bases;
  est.moments_used = problem.moment_count();
  est.warnings = problem.warnings();
  est.beta = init.beta;

  Eigen::MatrixXd c_fixed;
  Eigen::MatrixXd info;
  ExtendedScore s;
  for (int iter = 1; iter <= options.max_iter; ++iter) {
    est.iterations = iter;
    s = problem.score(est.beta);
    if ((s.psi_per_cluster.array() == 0.0).all()) {
      // exact fit: every cluster's score vanishes, nothing left to weight
      est.converged = true;
      est.covariance = Eigen::MatrixXd::Zero(p, p);
      est.objective_value = 0.0;
      est.c_rcond = 1.0;
      return est;
    }
    Eigen::MatrixXd c_reg;
    if (options.two_step) {
      if (iter == 1) c_fixed = QifProblem::regularize(problem.second_moment(s.psi_per_cluster), options.ridge);
      c_reg = c_fixed;
    } else {
      c_reg = QifProblem::regularize(problem.second_moment(s.psi_per_cluster), options.ridge);
    }
    const auto llt = factor_c(c_reg, &est.c_rcond);
    const Eigen::MatrixXd cinv_j = llt.solve(s.jacobian);
    info = s.jacobian.transpose() * cinv_j;
    info = (0.5 * (info + info.transpose())).eval();
    check_design_rank(info, labels);
    const Eigen::VectorXd grad = cinv_j.transpose() * s.psi_bar;
    const Eigen::VectorXd step = -info.ldlt().solve(grad);
    est.beta += step;
    if (step.lpNorm<Eigen::Infinity>() < options.tol) {
      est.converged = true;
      break;
    }
  }

  s = problem.score(est.beta);
  Eigen::MatrixXd c_reg = options.two_step && c_fixed.size() > 0
                              ? c_fixed
                              : QifProblem::regularize(problem.second_moment(s.psi_per_cluster), options.ridge);
  const auto llt = factor_c(c_reg, &est.c_rcond);
  info = s.jacobian.transpose() * llt.solve(s.jacobian);
  info = (0.5 * (info + info.transpose())).eval();
  check_design_rank(info, labels);
  est.objective_value = n * s.psi_bar.dot(llt.solve(s.psi_bar));
  Eigen::MatrixXd cov = info.ldlt().solve(Eigen::MatrixXd::Identity(p, p)) / n;
  cov = (0.5 * (cov + cov.transpose())).eval();
  if (options.small_sample_inflation) {
    if (n <= p) throw Error(ErrorCode::InsufficientDF, "small-sample inflation needs I > p");
    cov *= static_cast<double>(n) / (n - p);
  }
  est.covariance = cov;
  if (!est.converged) {
    est.warnings.push_back("Gauss-Newton did not converge in " + std::to_string(options.max_iter) + " iterations");
  }
  return est;
}

OrderingCertificate variance_ordering_check(std::span<const StackedCluster> clusters, const Eigen::VectorXd& beta,
                                            const std::vector<BasisKind>& bases_small,
                                            const std::vector<BasisKind>& bases_large, double ridge) {
  if (bases_small.size() > bases_large.size() ||
      !std::equal(bases_small.begin(), bases_small.end(), bases_large.begin())) {
    throw Error(ErrorCode::ConfigError, "the smaller basis set must be a prefix of the larger one");
  }
  const QifProblem large(clusters, bases_large, false);
  const int p = large.params();
  const int m_small = static_cast<int>(bases_small.size()) * p;
  const ExtendedScore s = large.score(beta);
  const Eigen::MatrixXd c = QifProblem::regularize(large.second_moment(s.psi_per_cluster), ridge);

  const auto llt_large = factor_c(c);
  const auto llt_small = factor_c(c.topLeftCorner(m_small, m_small));
  const Eigen::MatrixXd info_large = s.jacobian.transpose() * llt_large.solve(s.jacobian);
  const Eigen::MatrixXd j_small = s.jacobian.topRows(m_small);
  const Eigen::MatrixXd info_small = j_small.transpose() * llt_small.solve(j_small);
  Eigen::MatrixXd diff = info_large - info_small;
  diff = (0.5 * (diff + diff.transpose())).eval();

  OrderingCertificate cert;
  cert.eigenvalues = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(diff, Eigen::EigenvaluesOnly).eigenvalues();
  cert.min_eigenvalue = cert.eigenvalues.minCoeff();
  cert.trace = info_large.trace();
  cert.holds = cert.min_eigenvalue >= -1e-8 * std::abs(cert.trace);
  return cert;
}

}  // namespace swqif

#pragma once

// Working-correlation basis matrices over a cluster's enrolled (period, individual)
// cells. Each basis is a symmetric 0/1 pattern; the estimators only ever need
// products with it, which are computed from group sums in O(rows * cols).

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

#include "swqif/design.hpp"

namespace swqif {

enum class BasisKind {
  Identity,
  WithinPeriodExchangeable,      // same period, different individuals
  WithinIndividualAcrossPeriods, // same individual, different periods
  CrossPeriodCrossIndividual,    // different period and different individual
  AR1Adjacency,                  // same individual, adjacent periods
};

std::string_view basis_name(BasisKind kind);
BasisKind parse_basis(std::string_view name);

// Q * m for the unweighted basis pattern.
Eigen::MatrixXd apply_basis(BasisKind kind, const StackedCluster& cluster, const Eigen::MatrixXd& m);

// S^T Q S applied to m, i.e. diag(w) Q diag(w) m.
Eigen::MatrixXd apply_weighted_basis(BasisKind kind, const StackedCluster& cluster, const Eigen::MatrixXd& m);

// Dense rows x rows pattern; used for diagnostics and small fixed-Q problems.
Eigen::MatrixXd materialize_basis(BasisKind kind, const StackedCluster& cluster);

// A fixed working weight Q = sum_l a_l Q_l.
struct WeightingSpec {
  std::vector<std::pair<BasisKind, double>> terms;

  static WeightingSpec identity() { return {{{BasisKind::Identity, 1.0}}}; }
  // 1 on the diagonal, rho on every off-diagonal cell of the cluster.
  static WeightingSpec exchangeable(double rho);

  Eigen::MatrixXd apply_weighted(const StackedCluster& cluster, const Eigen::MatrixXd& m) const;
};

std::vector<BasisKind> default_bases(bool individual_randomized);

}  // namespace swqif

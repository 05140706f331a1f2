#include "swqif/basis.hpp"

namespace swqif {

std::string_view basis_name(BasisKind kind) {
  switch (kind) {
    case BasisKind::Identity: return "identity";
    case BasisKind::WithinPeriodExchangeable: return "within_period_exchangeable";
    case BasisKind::WithinIndividualAcrossPeriods: return "within_individual_across_periods";
    case BasisKind::CrossPeriodCrossIndividual: return "cross_period_cross_individual";
    case BasisKind::AR1Adjacency: return "ar1_adjacency";
  }
  return "identity";
}

BasisKind parse_basis(std::string_view name) {
  for (BasisKind k : {BasisKind::Identity, BasisKind::WithinPeriodExchangeable,
                      BasisKind::WithinIndividualAcrossPeriods, BasisKind::CrossPeriodCrossIndividual,
                      BasisKind::AR1Adjacency}) {
    if (basis_name(k) == name) return k;
  }
  throw Error(ErrorCode::ConfigError, "unknown correlation basis '" + std::string(name) + "'");
}

namespace {

Eigen::MatrixXd period_sums(const StackedCluster& c, const Eigen::MatrixXd& m) {
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(c.last_period, m.cols());
  for (int r = 0; r < c.rows(); ++r) sums.row(c.period[r] - 1) += m.row(r);
  return sums;
}

Eigen::MatrixXd member_sums(const StackedCluster& c, const Eigen::MatrixXd& m) {
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(c.member_count, m.cols());
  for (int r = 0; r < c.rows(); ++r) sums.row(c.member[r]) += m.row(r);
  return sums;
}

}  // namespace

Eigen::MatrixXd apply_basis(BasisKind kind, const StackedCluster& c, const Eigen::MatrixXd& m) {
  if (m.rows() != c.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "basis product needs " + std::to_string(c.rows()) + " rows, got " +
                                                  std::to_string(m.rows()));
  }
  const int n = c.rows();
  Eigen::MatrixXd out(n, m.cols());
  switch (kind) {
    case BasisKind::Identity:
      return m;
    case BasisKind::WithinPeriodExchangeable: {
      const Eigen::MatrixXd ps = period_sums(c, m);
      for (int r = 0; r < n; ++r) out.row(r) = ps.row(c.period[r] - 1) - m.row(r);
      return out;
    }
    case BasisKind::WithinIndividualAcrossPeriods: {
      const Eigen::MatrixXd ms = member_sums(c, m);
      for (int r = 0; r < n; ++r) out.row(r) = ms.row(c.member[r]) - m.row(r);
      return out;
    }
    case BasisKind::CrossPeriodCrossIndividual: {
      const Eigen::MatrixXd ps = period_sums(c, m);
      const Eigen::MatrixXd ms = member_sums(c, m);
      const Eigen::RowVectorXd total = m.colwise().sum();
      for (int r = 0; r < n; ++r) out.row(r) = total - ps.row(c.period[r] - 1) - ms.row(c.member[r]) + m.row(r);
      return out;
    }
    case BasisKind::AR1Adjacency: {
      out.setZero();
      for (int r = 0; r < n; ++r) {
        const int k = c.member[r];
        const int j = c.period[r];
        if (j > c.first_period) {
          const int prev = c.cell_row(k, j - 2);
          if (prev >= 0) out.row(r) += m.row(prev);
        }
        if (j < c.last_period) {
          const int next = c.cell_row(k, j);
          if (next >= 0) out.row(r) += m.row(next);
        }
      }
      return out;
    }
  }
  return out;
}

Eigen::MatrixXd apply_weighted_basis(BasisKind kind, const StackedCluster& c, const Eigen::MatrixXd& m) {
  if (kind == BasisKind::Identity) return c.weights.array().square().matrix().asDiagonal() * m;
  const Eigen::MatrixXd scaled = c.weights.asDiagonal() * m;
  return c.weights.asDiagonal() * apply_basis(kind, c, scaled);
}

Eigen::MatrixXd materialize_basis(BasisKind kind, const StackedCluster& c) {
  return apply_basis(kind, c, Eigen::MatrixXd::Identity(c.rows(), c.rows()));
}

WeightingSpec WeightingSpec::exchangeable(double rho) {
  return {{{BasisKind::Identity, 1.0},
           {BasisKind::WithinPeriodExchangeable, rho},
           {BasisKind::WithinIndividualAcrossPeriods, rho},
           {BasisKind::CrossPeriodCrossIndividual, rho}}};
}

Eigen::MatrixXd WeightingSpec::apply_weighted(const StackedCluster& c, const Eigen::MatrixXd& m) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m.rows(), m.cols());
  for (const auto& [kind, coef] : terms) {
    if (coef == 0.0) continue;
    out += coef * apply_weighted_basis(kind, c, m);
  }
  return out;
}

std::vector<BasisKind> default_bases(bool individual_randomized) {
  if (individual_randomized) {
    return {BasisKind::Identity, BasisKind::WithinIndividualAcrossPeriods, BasisKind::AR1Adjacency};
  }
  return {BasisKind::Identity, BasisKind::WithinPeriodExchangeable, BasisKind::WithinIndividualAcrossPeriods,
          BasisKind::CrossPeriodCrossIndividual};
}

}  // namespace swqif

#include <doctest.h>

#include "../support/oracle.hpp"
#include "swqif/basis.hpp"

using namespace swqif;

namespace {

const std::vector<BasisKind> kAll = {BasisKind::Identity, BasisKind::WithinPeriodExchangeable,
                                     BasisKind::WithinIndividualAcrossPeriods, BasisKind::CrossPeriodCrossIndividual,
                                     BasisKind::AR1Adjacency};

}  // namespace

TEST_CASE("materialized bases match the cell-pattern definitions and are symmetric") {
  const auto ds = oracle::random_trial(21, 6, 6, 4, 4, 4);
  const auto cfg = DesignConfig::make(TreatmentStructure::Duration, 4, oracle::random_probs(21, 4));
  const auto stacked = stack_dataset(ds, cfg);
  for (std::size_t i = 0; i < ds.clusters.size(); ++i) {
    const auto cells = oracle::enrolled_cells(ds.clusters[i], 4);
    for (BasisKind b : kAll) {
      const Eigen::MatrixXd q = materialize_basis(b, stacked.clusters[i]);
      CHECK(q == oracle::basis_matrix(b, cells));
      CHECK(q == q.transpose());
    }
  }
}

TEST_CASE("weighted products equal diag(w) Q diag(w) m") {
  const auto ds = oracle::random_trial(22, 5, 5, 3, 3, 6);
  const auto cfg = DesignConfig::make(TreatmentStructure::Saturated, 3, oracle::random_probs(22, 3), true);
  const auto stacked = stack_dataset(ds, cfg);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  for (const auto& sc : stacked.clusters) {
    Eigen::MatrixXd m(sc.rows(), 3);
    for (Eigen::Index a = 0; a < m.size(); ++a) m.data()[a] = normal(rng);
    for (BasisKind b : kAll) {
      const Eigen::MatrixXd dense = sc.weights.asDiagonal() * materialize_basis(b, sc) * sc.weights.asDiagonal() * m;
      CHECK((apply_weighted_basis(b, sc, m) - dense).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("individual-level data: within-period and cross-individual bases vanish") {
  const auto ds = oracle::random_trial(23, 6, 6, 4, 4, 1);
  const auto cfg = DesignConfig::make(TreatmentStructure::Constant, 4, oracle::random_probs(23, 4));
  for (const auto& sc : stack_dataset(ds, cfg).clusters) {
    CHECK(materialize_basis(BasisKind::WithinPeriodExchangeable, sc).isZero());
    CHECK(materialize_basis(BasisKind::CrossPeriodCrossIndividual, sc).isZero());
  }
}

TEST_CASE("exchangeable weighting") {
  const auto ds = oracle::random_trial(24, 3, 3, 3, 3, 3);
  const auto cfg = DesignConfig::make(TreatmentStructure::Constant, 3, oracle::random_probs(24, 3));
  for (const auto& sc : stack_dataset(ds, cfg).clusters) {
    const Eigen::MatrixXd m = Eigen::MatrixXd::Ones(sc.rows(), 1);
    Eigen::MatrixXd q = Eigen::MatrixXd::Constant(sc.rows(), sc.rows(), 0.3);
    q.diagonal().setOnes();
    const Eigen::MatrixXd dense = sc.weights.asDiagonal() * q * sc.weights.asDiagonal() * m;
    CHECK((WeightingSpec::exchangeable(0.3).apply_weighted(sc, m) - dense).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("default basis sets and names") {
  CHECK(default_bases(false) == std::vector<BasisKind>{BasisKind::Identity, BasisKind::WithinPeriodExchangeable,
                                                       BasisKind::WithinIndividualAcrossPeriods,
                                                       BasisKind::CrossPeriodCrossIndividual});
  CHECK(default_bases(true) ==
        std::vector<BasisKind>{BasisKind::Identity, BasisKind::WithinIndividualAcrossPeriods, BasisKind::AR1Adjacency});
  for (BasisKind b : kAll) CHECK(parse_basis(basis_name(b)) == b);
}

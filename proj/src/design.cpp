#include "swqif/design.hpp"

#include <cmath>


namespace swqif {

int parameter_count(TreatmentStructure structure, int periods, bool include_period_j) {
  const int J = periods;
  switch (structure) {
    case TreatmentStructure::Constant: return 1;
    case TreatmentStructure::Duration: return J;
    case TreatmentStructure::Period: return J - 1 + (include_period_j ? 1 : 0);
    case TreatmentStructure::Saturated: return (J - 1) * J / 2 + (include_period_j ? J : 0);
  }
  return 0;
}

DesignConfig DesignConfig::make(TreatmentStructure structure, int periods, Eigen::VectorXd probs,
                                bool include_period_j) {
  if (periods < 1) throw Error(ErrorCode::ConfigError, "J must be positive");
  if (probs.size() != periods + 1) {
    throw Error(ErrorCode::ConfigError, "sequence probabilities need J+1 entries, got " + std::to_string(probs.size()));
  }
  if ((probs.array() < 0.0).any() || std::abs(probs.sum() - 1.0) > 1e-9) {
    throw Error(ErrorCode::ConfigError, "sequence probabilities must be nonnegative and sum to 1");
  }
  const bool varies_by_period =
      structure == TreatmentStructure::Period || structure == TreatmentStructure::Saturated;
  if (include_period_j && !varies_by_period) {
    throw Error(ErrorCode::ConfigError, "includePeriodJ applies only to period/saturated structures");
  }
  if (include_period_j && probs(periods) <= 0.0) {
    throw Error(ErrorCode::ConfigError, "period-J effects need never-treated clusters (P(Z=inf) > 0)");
  }
  DesignConfig c;
  c.structure = structure;
  c.periods = periods;
  c.sequence_probs = std::move(probs);
  c.include_period_j = include_period_j;
  if (c.parameter_count() < 1) throw Error(ErrorCode::ConfigError, "structure has no estimable parameters for this J");
  return c;
}

int DesignConfig::last_period() const {
  const bool varies_by_period =
      structure == TreatmentStructure::Period || structure == TreatmentStructure::Saturated;
  return (varies_by_period && !include_period_j) ? periods - 1 : periods;
}

namespace {

int saturated_offset(int period) { return (period - 1) * period / 2; }

void check_period(TreatmentStructure structure, int periods, int period, bool include_period_j) {
  const bool varies_by_period =
      structure == TreatmentStructure::Period || structure == TreatmentStructure::Saturated;
  const int last = (varies_by_period && !include_period_j) ? periods - 1 : periods;
  if (period < 1 || period > last) {
    throw Error(ErrorCode::PeriodOutOfRange,
                "period " + std::to_string(period) + " outside 1.." + std::to_string(last) + " for " +
                    std::string(structure_name(structure)) + " structure");
  }
}

}  // namespace

Eigen::VectorXd treatment_row(TreatmentStructure structure, int periods, Sequence z, int period,
                              bool include_period_j) {
  check_period(structure, periods, period, include_period_j);
  Eigen::VectorXd row = Eigen::VectorXd::Zero(parameter_count(structure, periods, include_period_j));
  const int j = period;
  switch (structure) {
    case TreatmentStructure::Constant:
      row(0) = z.treated_by(j) ? 1.0 : 0.0;
      break;
    case TreatmentStructure::Duration:
      // coordinate d-1 holds 1{Z = j-d+1}
      if (z.treated_by(j)) row(j - z.start()) = 1.0;
      break;
    case TreatmentStructure::Period:
      row(j - 1) = z.treated_by(j) ? 1.0 : 0.0;
      break;
    case TreatmentStructure::Saturated:
      if (z.treated_by(j)) row(saturated_offset(j) + (j - z.start())) = 1.0;
      break;
  }
  return row;
}

Eigen::VectorXd mean_row(TreatmentStructure structure, int periods, const Eigen::VectorXd& probs, int period,
                         bool include_period_j) {
  check_period(structure, periods, period, include_period_j);
  if (probs.size() != periods + 1) {
    throw Error(ErrorCode::DimensionMismatch, "sequence probabilities need J+1 entries");
  }
  Eigen::VectorXd row = Eigen::VectorXd::Zero(parameter_count(structure, periods, include_period_j));
  for (int z = 1; z <= periods; ++z) {
    if (probs(z - 1) == 0.0) continue;
    row += probs(z - 1) * treatment_row(structure, periods, Sequence::starting_at(z), period, include_period_j);
  }
  return row;
}

std::vector<std::string> param_labels(const DesignConfig& config) {
  std::vector<std::string> labels;
  const int J = config.periods;
  switch (config.structure) {
    case TreatmentStructure::Constant:
      labels.push_back("Delta");
      break;
    case TreatmentStructure::Duration:
      for (int d = 1; d <= J; ++d) labels.push_back("Delta(d=" + std::to_string(d) + ")");
      break;
    case TreatmentStructure::Period:
      for (int j = 1; j <= config.last_period(); ++j) labels.push_back("Delta_" + std::to_string(j));
      break;
    case TreatmentStructure::Saturated:
      for (int j = 1; j <= config.last_period(); ++j) {
        for (int d = 1; d <= j; ++d) labels.push_back("Delta_" + std::to_string(j) + "(" + std::to_string(d) + ")");
      }
      break;
  }
  return labels;
}

StackedCluster stack_cluster(const ClusterData& cluster, const DesignConfig& config) {
  const int last = config.last_period();
  const int p = config.parameter_count();
  if (cluster.periods() != config.periods) {
    throw Error(ErrorCode::DimensionMismatch, "cluster '" + cluster.id + "' has " +
                                                  std::to_string(cluster.periods()) + " periods, design expects " +
                                                  std::to_string(config.periods));
  }

  StackedCluster sc;
  sc.cluster_id = cluster.id;
  sc.first_period = 1;
  sc.last_period = last;

  const int n = cluster.population_size();
  std::vector<int> member_of(n, -1);
  int rows = 0;
  for (int j = 1; j <= last; ++j) {
    for (int k = 0; k < n; ++k) {
      if (!cluster.enrolled(j - 1, k)) continue;
      ++rows;
      if (member_of[k] < 0) member_of[k] = 0;
    }
  }
  if (rows == 0) {
    throw Error(ErrorCode::EmptyCluster, "cluster '" + cluster.id + "' has no enrolled cells in periods 1.." +
                                             std::to_string(last));
  }
  int members = 0;
  for (int k = 0; k < n; ++k) {
    if (member_of[k] >= 0) member_of[k] = members++;
  }
  sc.member_count = members;
  sc.cell_row = Eigen::MatrixXi::Constant(members, last, -1);

  sc.design.resize(rows, p);
  sc.mean.resize(rows, p);
  sc.weights.resize(rows);
  sc.y.resize(rows);
  sc.g_hat = Eigen::VectorXd::Zero(rows);
  sc.period.reserve(rows);
  sc.individual.reserve(rows);
  sc.member.reserve(rows);

  int r = 0;
  for (int j = 1; j <= last; ++j) {
    const int nij = cluster.enrolled_count(j);
    if (nij == 0) continue;
    const Eigen::VectorXd d = treatment_row(config.structure, config.periods, cluster.sequence, j,
                                            config.include_period_j);
    const Eigen::VectorXd mu = mean_row(config.structure, config.periods, config.sequence_probs, j,
                                        config.include_period_j);
    const double w = 1.0 / std::sqrt(static_cast<double>(nij));
    for (int k = 0; k < n; ++k) {
      if (!cluster.enrolled(j - 1, k)) continue;
      sc.design.row(r) = d.transpose();
      sc.mean.row(r) = mu.transpose();
      sc.weights(r) = w;
      sc.y(r) = cluster.outcomes(j - 1, k);
      sc.period.push_back(j);
      sc.individual.push_back(k);
      sc.member.push_back(member_of[k]);
      sc.cell_row(member_of[k], j - 1) = r;
      ++r;
    }
  }
  sc.centered = sc.design - sc.mean;
  return sc;
}

StackedDataset stack_dataset(const TrialDataset& dataset, const DesignConfig& config) {
  StackedDataset out;
  out.clusters.reserve(dataset.clusters.size());
  for (const auto& c : dataset.clusters) {
    try {
      out.clusters.push_back(stack_cluster(c, config));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptyCluster) throw;
      StackedCluster empty;
      empty.cluster_id = c.id;
      empty.last_period = config.last_period();
      empty.cell_row.resize(0, config.last_period());
      empty.design.resize(0, config.parameter_count());
      empty.mean.resize(0, config.parameter_count());
      empty.centered.resize(0, config.parameter_count());
      out.clusters.push_back(std::move(empty));
      ++out.empty_clusters;
    }
  }
  return out;
}

}  // namespace swqif

#pragma once

// Treatment design rows D*_ij, their expectations under the randomization
// probabilities, and the per-cluster stacked layout used by the estimators.

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "swqif/trial.hpp"

namespace swqif {

int parameter_count(TreatmentStructure structure, int periods, bool include_period_j);

struct DesignConfig {
  TreatmentStructure structure = TreatmentStructure::Constant;
  int periods = 0;                 // J
  Eigen::VectorXd sequence_probs;  // over {1..J, never}
  bool include_period_j = false;

  // Checks probability length/sum and that period J is identifiable when requested.
  static DesignConfig make(TreatmentStructure structure, int periods, Eigen::VectorXd probs,
                           bool include_period_j = false);

  int parameter_count() const { return swqif::parameter_count(structure, periods, include_period_j); }
  // Last period that enters the estimating equations.
  int last_period() const;
};

Eigen::VectorXd treatment_row(TreatmentStructure structure, int periods, Sequence z, int period,
                              bool include_period_j = false);

Eigen::VectorXd mean_row(TreatmentStructure structure, int periods, const Eigen::VectorXd& probs, int period,
                         bool include_period_j = false);

std::vector<std::string> param_labels(const DesignConfig& config);

// One cluster's enrolled cells in period-major order with everything the
// estimating equations need. Row r is cell (period[r], individual[r]).
struct StackedCluster {
  std::string cluster_id;
  std::vector<int> period;      // 1-based
  std::vector<int> individual;  // position k in the cluster population
  std::vector<int> member;      // dense index over individuals that own at least one row
  int member_count = 0;
  int first_period = 1;
  int last_period = 0;
  // member_count x (last_period - first_period + 1); row index or -1.
  Eigen::MatrixXi cell_row;

  Eigen::MatrixXd design;    // D*_i rows
  Eigen::MatrixXd mean;      // mu*_i rows
  Eigen::MatrixXd centered;  // design - mean
  Eigen::VectorXd weights;   // N_ij^{-1/2}
  Eigen::VectorXd y;
  Eigen::VectorXd g_hat;     // nuisance predictions, zero until filled

  int rows() const { return static_cast<int>(y.size()); }
  int params() const { return static_cast<int>(centered.cols()); }
};

StackedCluster stack_cluster(const ClusterData& cluster, const DesignConfig& config);

// Clusters with no enrolled cell in range are kept as zero-row entries: their
// estimating function is identically zero, but they still count towards I.
struct StackedDataset {
  std::vector<StackedCluster> clusters;
  int empty_clusters = 0;
};

StackedDataset stack_dataset(const TrialDataset& dataset, const DesignConfig& config);

}  // namespace swqif

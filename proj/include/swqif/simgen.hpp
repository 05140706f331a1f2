#pragma once

// Simulated stepped-wedge trials: cluster-randomized (I = 20, 100) and
// individually randomized (I = 1000) designs under each treatment structure.

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "swqif/design.hpp"
#include "swqif/trial.hpp"

namespace swqif {

enum class Randomization { Cluster, Individual };

struct Scenario {
  std::string name;
  Randomization design = Randomization::Cluster;
  TreatmentStructure structure = TreatmentStructure::Constant;
  int clusters = 20;    // I
  int periods = 3;      // J
  int population = 20;  // N_i
  int nij_min = 5;      // N_ij ~ Uniform{nij_min..nij_max}
  int nij_max = 15;
  double nij_bernoulli = 0.0;  // > 0: each individual enrolled per period with this probability instead
  double sigma = 0.1;   // cluster
  double alpha = 0.1;   // cluster-period
  double tau = 0.1;     // individual
  double epsilon = 0.7; // residual
  bool param_is_sd = false;  // read the four scales above as SDs instead of variances
  std::uint64_t seed = 1;

  void check() const;
  Eigen::VectorXd sequence_probs() const;  // uniform over 1..J, none never-treated
  DesignConfig design_config() const;
};

std::vector<std::string> preset_names();
Scenario preset(const std::string& name);

// Deterministic part of Y_ijk for a cluster starting treatment at z (may be
// never). x = (X1, X2, X3, X4); x3_bar and x4_cube_bar are within-cluster
// population means of X3 and X4^3.
double outcome_mean(Randomization design, TreatmentStructure structure, int periods, const Eigen::Vector4d& x,
                    double x3_bar, double x4_cube_bar, int period, Sequence z);

// Same seed and replicate give bit-identical data; replicates use disjoint streams.
TrialDataset generate(const Scenario& scenario, std::uint64_t replicate);

// Also returns every potential outcome: potential[i](j-1, k) for sequence z is
// potential[i][z-1], with index J holding never-treated.
struct PotentialOutcomes {
  TrialDataset observed;
  std::vector<std::vector<Eigen::MatrixXd>> potential;
};
PotentialOutcomes generate_with_potential(const Scenario& scenario, std::uint64_t replicate);

// The cluster-average effect vector; every preset's effect functions average to
// one within each cluster, so this is all ones.
Eigen::VectorXd true_estimands(const Scenario& scenario);

Scenario scenario_from_json(const std::string& json_text);
std::string scenario_to_json(const Scenario& scenario);

}  // namespace swqif

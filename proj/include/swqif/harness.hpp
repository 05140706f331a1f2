#pragma once

// Monte Carlo runner: replicate generation, per-arm estimation, and
// Bias / ESE / ASE / CP summaries.

#include <cstdint>
#include <string>
#include <vector>

#include "swqif/pipeline.hpp"
#include "swqif/simgen.hpp"

namespace swqif {

struct ExperimentConfig {
  Scenario scenario;
  std::vector<ArmConfig> arms;
  int replications = 1000;
  std::uint64_t seed = 1;
  double alpha = 0.05;
  int threads = 1;
  std::string output;  // directory; empty skips writing

  void check() const;
};

// SWQIF_SEED, when set, replaces the seed given in the file.
ExperimentConfig experiment_from_json(const std::string& json_text);

// One estimate of one coefficient or contrast in one replicate.
struct ReplicateRecord {
  int replicate = 0;
  std::string arm;
  std::string label;
  double truth = 0.0;
  double estimate = 0.0;
  double se = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool converged = false;
  std::string error;  // empty unless the arm failed on this replicate
};

struct MetricsRow {
  std::string arm;
  std::string label;
  double bias = 0.0;
  double ese = 0.0;
  double ase = 0.0;
  double cp = 0.0;
  int n_converged = 0;
  int n_failed = 0;  // replicates excluded: errors or non-convergence
};

struct ArmRuntime {
  std::string arm;
  double mean_seconds = 0.0;
};

struct ExperimentResult {
  std::vector<MetricsRow> metrics;
  std::vector<ReplicateRecord> replicates;
  std::vector<ArmRuntime> runtime;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

// Aggregates replicate records (in order) into one row per (arm, label);
// rows follow first appearance.
std::vector<MetricsRow> compute_metrics(const std::vector<ReplicateRecord>& records);

std::string metrics_to_csv(const std::vector<MetricsRow>& rows);
std::string replicates_to_csv(const std::vector<ReplicateRecord>& records);
std::vector<ReplicateRecord> replicates_from_csv(const std::string& text);
std::string runtime_to_csv(const std::vector<ArmRuntime>& rows);

// Writes summary.csv, replicates.csv and runtime.csv into dir (created if needed).
void write_experiment(const ExperimentResult& result, const std::string& dir);

}  // namespace swqif

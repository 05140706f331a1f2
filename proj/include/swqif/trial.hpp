#pragma once

// Observed stepped-wedge trial data: clusters, treatment sequences, enrollment
// and outcomes, plus validation and long-format CSV ingestion/export.

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "swqif/error.hpp"

namespace swqif {

enum class TreatmentStructure { Constant, Duration, Period, Saturated };

std::string_view structure_name(TreatmentStructure s);
TreatmentStructure parse_structure(std::string_view name);

using BoolArray = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Period at which a cluster crosses to treatment; never-treated is its own state.
class Sequence {
 public:
  static Sequence starting_at(int period);
  static Sequence never() { return Sequence{}; }

  bool is_never() const noexcept { return start_ == 0; }
  int start() const;
  bool treated_by(int period) const noexcept { return start_ != 0 && start_ <= period; }

  // Position in a probability vector over {1..J, never}: start-1, or J for never.
  int index(int periods) const noexcept { return is_never() ? periods : start_ - 1; }

  std::string to_string() const;
  friend bool operator==(const Sequence&, const Sequence&) = default;

 private:
  int start_ = 0;
};

struct ClusterData {
  std::string id;
  Sequence sequence;
  std::vector<std::string> individual_ids;  // length N_i
  Eigen::MatrixXd covariates;               // N_i x q, row k = X_ik
  BoolArray enrolled;                       // J x N_i, S_ijk
  Eigen::MatrixXd outcomes;                 // J x N_i, NaN where not enrolled

  int population_size() const { return static_cast<int>(covariates.rows()); }
  int periods() const { return static_cast<int>(enrolled.rows()); }
  // N_ij for 1-based period j.
  int enrolled_count(int period) const;
};

struct TrialDataset {
  std::vector<ClusterData> clusters;
  int periods = 0;  // J
  std::vector<std::string> covariate_names;
  // Probabilities over {1..J, never}; nullopt means "use observed frequencies".
  std::optional<Eigen::VectorXd> sequence_probs;

  int covariate_count() const { return static_cast<int>(covariate_names.size()); }
  int cluster_count() const { return static_cast<int>(clusters.size()); }
};

enum class ViolationRule {
  EmptyDataset,
  PeriodCountMismatch,
  CovariateDimension,
  NonFiniteCovariate,
  PopulationMismatch,
  SequenceOutOfRange,
  OrphanOutcome,
  MissingOutcome,
  ProbLength,
  NegativeProb,
  ProbSumViolation,
  SingleSequence,
};

std::string_view rule_name(ViolationRule rule);

struct Violation {
  ViolationRule rule;
  std::string cluster;  // empty for dataset-level rules
  int period = 0;       // 1-based, 0 when not applicable
  int individual = -1;  // 0-based position, -1 when not applicable
  std::string message;
};

std::vector<Violation> validate(const TrialDataset& dataset);

// Observed frequencies of Z over {1..J, never}.
Eigen::VectorXd empirical_sequence_probs(const TrialDataset& dataset);

// Design probabilities when set, observed frequencies otherwise.
Eigen::VectorXd resolved_sequence_probs(const TrialDataset& dataset);

struct SchemaConfig {
  std::string cluster = "cluster";
  std::string period = "period";
  std::string individual = "individual";
  std::string sequence = "z";
  std::string outcome = "y";
  std::optional<std::vector<std::string>> covariates;  // default: all remaining columns
  std::optional<std::string> baseline_covariate;       // name given to the period-0 outcome
  std::optional<int> periods;                          // default: max observed period
  std::optional<std::vector<double>> sequence_probs;   // default: empirical
};

SchemaConfig schema_from_json(const std::string& json_text);

TrialDataset ingest_csv(const std::string& path, const SchemaConfig& schema = {});

// Long format with the default column names. Individuals never enrolled in any
// period have no row and are therefore not written.
void export_csv(const TrialDataset& dataset, const std::string& path);

}  // namespace swqif

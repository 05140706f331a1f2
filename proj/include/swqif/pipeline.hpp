#pragma once

// Analysis arms (correlation modeling + learner) and the single-dataset
// estimation pipeline: validate, centre, cross-fit, stack, solve, report.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "swqif/basis.hpp"
#include "swqif/inference.hpp"
#include "swqif/nuisance.hpp"
#include "swqif/qif.hpp"
#include "swqif/trial.hpp"

namespace swqif {

enum class Correlation { Independence, Qif, FixedQ };

std::string_view correlation_name(Correlation c);

struct ArmConfig {
  std::string label = "arm";
  Correlation correlation = Correlation::Independence;
  std::vector<BasisKind> bases;  // QIF; empty picks the default set for the data
  WeightingSpec weighting = WeightingSpec::identity();  // FixedQ
  LearnerSpec learner;
  int folds = 5;  // M; forced to 1 for the None and Mean learners
  std::optional<std::uint64_t> seed;
  QifOptions qif;
  double alpha = 0.05;
  std::optional<TreatmentStructure> structure;  // required by analyze on files
  bool include_period_j = false;
};

LearnerSpec learner_from_json(const std::string& json_text);
std::string learner_to_json(const LearnerSpec& spec);

ArmConfig arm_from_json(const std::string& json_text);
std::string arm_to_json(const ArmConfig& arm);

// Defaults for cluster-randomized data, or the individual set when every N_i = 1.
std::vector<BasisKind> bases_for(const TrialDataset& dataset);

// Runs one arm on one dataset. Violations other than a single observed
// sequence abort with SchemaError; that one surfaces as SingularDesign.
EstimateReport analyze(const TrialDataset& dataset, const ArmConfig& arm, std::uint64_t seed = 1);

// Ingests the CSV described by the schema and analyzes it.
EstimateReport analyze_file(const std::string& path, const SchemaConfig& schema, const ArmConfig& arm);

}  // namespace swqif

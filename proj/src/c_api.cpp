#include "swqif/swqif.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "swqif/harness.hpp"
#include "swqif/pipeline.hpp"
#include "swqif/simgen.hpp"
#include "swqif/validation.hpp"

struct swqif_dataset {
  swqif::TrialDataset data;
};

struct swqif_report {
  swqif::EstimateReport report;
};

namespace {

thread_local std::string g_last_error;

swqif_status status_of(swqif::ErrorCode code) {
  using swqif::ErrorCode;
  switch (code) {
    case ErrorCode::ParseError: return SWQIF_PARSE_ERROR;
    case ErrorCode::SchemaError: return SWQIF_SCHEMA_ERROR;
    case ErrorCode::InconsistentSequence: return SWQIF_INCONSISTENT_SEQUENCE;
    case ErrorCode::PeriodOutOfRange: return SWQIF_PERIOD_OUT_OF_RANGE;
    case ErrorCode::EmptyCluster: return SWQIF_EMPTY_CLUSTER;
    case ErrorCode::TooManyFolds: return SWQIF_TOO_MANY_FOLDS;
    case ErrorCode::EmptyTraining: return SWQIF_EMPTY_TRAINING;
    case ErrorCode::UnknownCluster: return SWQIF_UNKNOWN_CLUSTER;
    case ErrorCode::DimensionMismatch: return SWQIF_DIMENSION_MISMATCH;
    case ErrorCode::SingularDesign: return SWQIF_SINGULAR_DESIGN;
    case ErrorCode::SingularC: return SWQIF_SINGULAR_C;
    case ErrorCode::NonConvergence: return SWQIF_NON_CONVERGENCE;
    case ErrorCode::InsufficientDF: return SWQIF_INSUFFICIENT_DF;
    case ErrorCode::ConfigError: return SWQIF_CONFIG_ERROR;
    case ErrorCode::IoError: return SWQIF_IO_ERROR;
  }
  return SWQIF_INTERNAL_ERROR;
}

swqif_status fail(swqif_status s, const std::string& message) {
  g_last_error = message;
  return s;
}

template <class F>
swqif_status guard(F&& body) {
  try {
    g_last_error.clear();
    return body();
  } catch (const swqif::Error& e) {
    return fail(status_of(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(SWQIF_INTERNAL_ERROR, "out of memory");
  } catch (const std::exception& e) {
    return fail(SWQIF_INTERNAL_ERROR, e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

swqif_status copy_vector(const Eigen::VectorXd& v, double* out, size_t n) {
  if (out == nullptr) return fail(SWQIF_INVALID_ARGUMENT, "output buffer is NULL");
  if (n < static_cast<size_t>(v.size())) {
    return fail(SWQIF_DIMENSION_MISMATCH, "buffer holds " + std::to_string(n) + " values, need " + std::to_string(v.size()));
  }
  for (Eigen::Index k = 0; k < v.size(); ++k) out[k] = v(k);
  return SWQIF_OK;
}

}  // namespace

extern "C" {

const char* swqif_version(void) { return "0.1.0"; }

const char* swqif_last_error(void) { return g_last_error.c_str(); }

const char* swqif_status_name(swqif_status status) {
  switch (status) {
    case SWQIF_OK: return "OK";
    case SWQIF_INVALID_ARGUMENT: return "InvalidArgument";
    case SWQIF_PARSE_ERROR: return "ParseError";
    case SWQIF_SCHEMA_ERROR: return "SchemaError";
    case SWQIF_INCONSISTENT_SEQUENCE: return "InconsistentSequence";
    case SWQIF_PERIOD_OUT_OF_RANGE: return "PeriodOutOfRange";
    case SWQIF_EMPTY_CLUSTER: return "EmptyCluster";
    case SWQIF_TOO_MANY_FOLDS: return "TooManyFolds";
    case SWQIF_EMPTY_TRAINING: return "EmptyTraining";
    case SWQIF_UNKNOWN_CLUSTER: return "UnknownCluster";
    case SWQIF_DIMENSION_MISMATCH: return "DimensionMismatch";
    case SWQIF_SINGULAR_DESIGN: return "SingularDesign";
    case SWQIF_SINGULAR_C: return "SingularC";
    case SWQIF_NON_CONVERGENCE: return "NonConvergence";
    case SWQIF_INSUFFICIENT_DF: return "InsufficientDF";
    case SWQIF_CONFIG_ERROR: return "ConfigError";
    case SWQIF_IO_ERROR: return "IoError";
    case SWQIF_VALIDATION_FAILED: return "ValidationFailed";
    case SWQIF_INTERNAL_ERROR: return "InternalError";
  }
  return "Unknown";
}

int swqif_status_is_config(swqif_status status) {
  switch (status) {
    case SWQIF_INVALID_ARGUMENT:
    case SWQIF_PARSE_ERROR:
    case SWQIF_SCHEMA_ERROR:
    case SWQIF_INCONSISTENT_SEQUENCE:
    case SWQIF_CONFIG_ERROR:
    case SWQIF_IO_ERROR:
      return 1;
    default:
      return 0;
  }
}

void swqif_string_free(char* s) { std::free(s); }

swqif_status swqif_dataset_read_csv(const char* path, const char* schema_json, swqif_dataset** out) {
  if (path == nullptr || out == nullptr) return fail(SWQIF_INVALID_ARGUMENT, "path and out must not be NULL");
  *out = nullptr;
  return guard([&] {
    const swqif::SchemaConfig schema = schema_json ? swqif::schema_from_json(schema_json) : swqif::SchemaConfig{};
    *out = new swqif_dataset{swqif::ingest_csv(path, schema)};
    return SWQIF_OK;
  });
}

swqif_status swqif_dataset_generate(const char* scenario_json, uint64_t replicate, swqif_dataset** out) {
  if (scenario_json == nullptr || out == nullptr) return fail(SWQIF_INVALID_ARGUMENT, "scenario and out must not be NULL");
  *out = nullptr;
  return guard([&] {
    *out = new swqif_dataset{swqif::generate(swqif::scenario_from_json(scenario_json), replicate)};
    return SWQIF_OK;
  });
}

swqif_status swqif_dataset_write_csv(const swqif_dataset* dataset, const char* path) {
  if (dataset == nullptr || path == nullptr) return fail(SWQIF_INVALID_ARGUMENT, "dataset and path must not be NULL");
  return guard([&] {
    swqif::export_csv(dataset->data, path);
    return SWQIF_OK;
  });
}

swqif_status swqif_dataset_clusters(const swqif_dataset* dataset, int* out) {
  if (dataset == nullptr || out == nullptr) return fail(SWQIF_INVALID_ARGUMENT, "NULL argument");
  *out = dataset->data.cluster_count();
  return SWQIF_OK;
}

swqif_status swqif_dataset_periods(const swqif_dataset* dataset, int* out) {
  if (dataset == nullptr || out == nullptr) return fail(SWQIF_INVALID_ARGUMENT, "NULL argument");
  *out = dataset->data.periods;
  return SWQIF_OK;
}

swqif_status swqif_dataset_set_sequence_probs(swqif_dataset* dataset, const double* probs, size_t n) {
  if (dataset == nullptr || probs == nullptr) return fail(SWQIF_INVALID_ARGUMENT, "NULL argument");
  if (n != static_cast<size_t>(dataset->data.periods) + 1) {
    return fail(SWQIF_DIMENSION_MISMATCH, "need J+1 = " + std::to_string(dataset->data.periods + 1) + " probabilities");
  }
  dataset->data.sequence_probs = Eigen::Map<const Eigen::VectorXd>(probs, static_cast<Eigen::Index>(n));
  return SWQIF_OK;
}

void swqif_dataset_free(swqif_dataset* dataset) { delete dataset; }

swqif_status swqif_analyze(const swqif_dataset* dataset, const char* arm_json, swqif_report** out) {
  if (dataset == nullptr || arm_json == nullptr || out == nullptr) return fail(SWQIF_INVALID_ARGUMENT, "NULL argument");
  *out = nullptr;
  return guard([&] {
    const swqif::ArmConfig arm = swqif::arm_from_json(arm_json);
    *out = new swqif_report{swqif::analyze(dataset->data, arm, arm.seed.value_or(1))};
    return SWQIF_OK;
  });
}

swqif_status swqif_report_num_params(const swqif_report* report, int* out) {
  if (report == nullptr || out == nullptr) return fail(SWQIF_INVALID_ARGUMENT, "NULL argument");
  *out = static_cast<int>(report->report.beta.size());
  return SWQIF_OK;
}

swqif_status swqif_report_beta(const swqif_report* report, double* out, size_t n) {
  if (report == nullptr) return fail(SWQIF_INVALID_ARGUMENT, "NULL report");
  return copy_vector(report->report.beta, out, n);
}

swqif_status swqif_report_std_errors(const swqif_report* report, double* out, size_t n) {
  if (report == nullptr) return fail(SWQIF_INVALID_ARGUMENT, "NULL report");
  return copy_vector(report->report.std_errors, out, n);
}

swqif_status swqif_report_ci(const swqif_report* report, double* lower, double* upper, size_t n) {
  if (report == nullptr) return fail(SWQIF_INVALID_ARGUMENT, "NULL report");
  const swqif_status s = copy_vector(report->report.ci_lower, lower, n);
  return s != SWQIF_OK ? s : copy_vector(report->report.ci_upper, upper, n);
}

swqif_status swqif_report_covariance(const swqif_report* report, double* out, size_t n) {
  if (report == nullptr) return fail(SWQIF_INVALID_ARGUMENT, "NULL report");
  const auto& c = report->report.covariance;
  Eigen::VectorXd flat(c.size());
  for (Eigen::Index a = 0; a < c.rows(); ++a) {
    for (Eigen::Index b = 0; b < c.cols(); ++b) flat(a * c.cols() + b) = c(a, b);
  }
  return copy_vector(flat, out, n);
}

swqif_status swqif_report_df(const swqif_report* report, int* out) {
  if (report == nullptr || out == nullptr) return fail(SWQIF_INVALID_ARGUMENT, "NULL argument");
  *out = report->report.df;
  return SWQIF_OK;
}

swqif_status swqif_report_to_json(const swqif_report* report, char** out) {
  if (report == nullptr || out == nullptr) return fail(SWQIF_INVALID_ARGUMENT, "NULL argument");
  return guard([&] {
    *out = dup_string(swqif::report_to_json(report->report));
    return SWQIF_OK;
  });
}

swqif_status swqif_report_to_csv(const swqif_report* report, char** out) {
  if (report == nullptr || out == nullptr) return fail(SWQIF_INVALID_ARGUMENT, "NULL argument");
  return guard([&] {
    *out = dup_string(swqif::report_to_csv(report->report));
    return SWQIF_OK;
  });
}

void swqif_report_free(swqif_report* report) { delete report; }

swqif_status swqif_simulate(const char* config_json, const char* out_dir, int reps, int threads, char** summary_csv) {
  if (config_json == nullptr) return fail(SWQIF_INVALID_ARGUMENT, "config must not be NULL");
  if (summary_csv) *summary_csv = nullptr;
  return guard([&] {
    swqif::ExperimentConfig cfg = swqif::experiment_from_json(config_json);
    if (out_dir != nullptr) cfg.output = out_dir;
    if (reps > 0) cfg.replications = reps;
    if (threads > 0) cfg.threads = threads;
    const swqif::ExperimentResult result = swqif::run_experiment(cfg);
    if (summary_csv) *summary_csv = dup_string(swqif::metrics_to_csv(result.metrics));
    return SWQIF_OK;
  });
}

swqif_status swqif_validate(int verbose, char** text) {
  if (text) *text = nullptr;
  return guard([&] {
    const auto checks = swqif::run_validation();
    if (text) *text = dup_string(swqif::format_checks(checks, verbose != 0));
    for (const auto& c : checks) {
      if (!c.passed) return fail(SWQIF_VALIDATION_FAILED, "self-check failed: " + c.name);
    }
    return SWQIF_OK;
  });
}

}  // extern "C"

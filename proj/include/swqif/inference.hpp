#pragma once

// t-based Wald intervals, linear summary contrasts and the assembled report.

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

#include "swqif/design.hpp"

namespace swqif {

// Upper 1 - alpha/2 quantile of Student's t with df degrees of freedom.
double t_multiplier(double df, double alpha);

// beta -/+ t_{1-alpha/2, I-p} se. Throws InsufficientDF when I <= p.
std::pair<double, double> wald_ci(double beta, double se, int clusters, int params, double alpha = 0.05);

struct ContrastValue {
  double value = 0.0;
  double se = 0.0;
};

ContrastValue summary_contrast(const Eigen::VectorXd& beta, const Eigen::MatrixXd& covariance,
                               const Eigen::VectorXd& contrast);

struct NamedContrast {
  std::string label;
  Eigen::VectorXd weights;
};

// Uniform averages: over durations, periods, or all (period, duration) cells.
// Empty for the constant structure.
std::vector<NamedContrast> builtin_contrasts(const DesignConfig& config);

struct ReportEntry {
  std::string label;
  double estimate = 0.0;
  double se = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct EstimateReport {
  std::string structure;
  std::vector<std::string> labels;
  Eigen::VectorXd beta;
  Eigen::MatrixXd covariance;
  Eigen::VectorXd std_errors;
  Eigen::VectorXd ci_lower;
  Eigen::VectorXd ci_upper;
  double alpha = 0.05;
  int df = 0;
  std::vector<ReportEntry> contrasts;

  // method
  std::string correlation;  // independence, qif or fixed_q
  std::vector<std::string> bases;
  std::string learner;
  int folds = 1;
  unsigned long long seed = 0;

  // diagnostics
  int clusters = 0;
  int empty_clusters = 0;
  int iterations = 0;
  bool converged = true;
  double objective = 0.0;
  double condition = 0.0;  // reciprocal condition of V-hat or C-hat
  std::vector<std::string> warnings;

  std::vector<ReportEntry> coefficients() const;
};

// Fills standard errors, intervals and built-in contrasts from beta/covariance.
void finalize_report(EstimateReport& report, const DesignConfig& config, int clusters, double alpha);

std::string report_to_json(const EstimateReport& report, int indent = 2);
// One row per coefficient or contrast.
std::string report_to_csv(const EstimateReport& report);

}  // namespace swqif

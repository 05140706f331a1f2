#pragma once

// Self-checks run by `swqif validate`: dense-oracle equivalence, QIF
// reduction, gradient, PSD, centering, unbiased score, nested-basis ordering.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "swqif/design.hpp"
#include "swqif/qif.hpp"
#include "swqif/trial.hpp"

namespace swqif {

// Small random trial with a random structure and randomization probabilities,
// random outcomes and random g_hat. The independence Gram matrix is full rank.
struct RandomInstance {
  TrialDataset data;
  DesignConfig config;
  StackedDataset stacked;
};

RandomInstance random_instance(std::uint64_t seed, int max_population = 4);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Analytic gradient of the fixed-C QIF objective; swappable for fault injection.
using GradientFn =
    std::function<Eigen::VectorXd(const QifProblem&, const Eigen::VectorXd& beta, const Eigen::MatrixXd& c_reg)>;

GradientFn default_gradient();

// Worst relative error between the analytic gradient and central differences
// (step 1e-6) over `instances` random problems.
double gradient_check_error(int instances, std::uint64_t seed, const GradientFn& gradient = default_gradient());

std::vector<CheckResult> run_validation(std::uint64_t seed = 20240601, const GradientFn& gradient = default_gradient());

std::string format_checks(const std::vector<CheckResult>& checks, bool verbose);

}  // namespace swqif

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "swqif/trial.hpp"

namespace testutil {

inline std::filesystem::path temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "swqif_unit";
  std::filesystem::create_directories(dir);
  return dir / name;
}

inline std::string write_temp(const std::string& name, const std::string& content) {
  const auto p = temp_path(name);
  std::ofstream(p) << content;
  return p.string();
}

inline double max_abs(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

// One cluster, fully enrolled, covariate x = individual index.
inline swqif::ClusterData full_cluster(const std::string& id, swqif::Sequence z, int J, int n) {
  swqif::ClusterData c;
  c.id = id;
  c.sequence = z;
  c.covariates.resize(n, 1);
  c.enrolled = swqif::BoolArray::Constant(J, n, true);
  c.outcomes = Eigen::MatrixXd::Zero(J, n);
  for (int k = 0; k < n; ++k) {
    c.individual_ids.push_back(std::to_string(k + 1));
    c.covariates(k, 0) = k;
  }
  return c;
}

}  // namespace testutil

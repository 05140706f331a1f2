#include "swqif/inference.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include <cmath>
#include <sstream>

#include "swqif/error.hpp"
#include "swqif/format.hpp"

namespace swqif {

double t_multiplier(double df, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::ConfigError, "alpha must lie in (0, 1)");
  if (!(df > 0.0)) throw Error(ErrorCode::InsufficientDF, "degrees of freedom must be positive");
  const boost::math::students_t dist(df);
  return boost::math::quantile(boost::math::complement(dist, alpha / 2.0));
}

std::pair<double, double> wald_ci(double beta, double se, int clusters, int params, double alpha) {
  if (clusters <= params) {
    throw Error(ErrorCode::InsufficientDF, "t interval needs I > p (I=" + std::to_string(clusters) +
                                               ", p=" + std::to_string(params) + ")");
  }
  if (!(se >= 0.0)) throw Error(ErrorCode::DimensionMismatch, "standard error must be nonnegative");
  if (se == 0.0) return {beta, beta};
  const double half = t_multiplier(clusters - params, alpha) * se;
  return {beta - half, beta + half};
}

ContrastValue summary_contrast(const Eigen::VectorXd& beta, const Eigen::MatrixXd& covariance,
                               const Eigen::VectorXd& contrast) {
  if (contrast.size() != beta.size() || covariance.rows() != beta.size() || covariance.cols() != beta.size()) {
    throw Error(ErrorCode::DimensionMismatch, "contrast of length " + std::to_string(contrast.size()) +
                                                  " for " + std::to_string(beta.size()) + " coefficients");
  }
  ContrastValue out;
  out.value = contrast.dot(beta);
  out.se = std::sqrt(std::max(0.0, contrast.dot(covariance * contrast)));
  return out;
}

std::vector<NamedContrast> builtin_contrasts(const DesignConfig& config) {
  const int p = config.parameter_count();
  if (config.structure == TreatmentStructure::Constant || p < 2) return {};
  const char* what = config.structure == TreatmentStructure::Duration ? "average over durations"
                     : config.structure == TreatmentStructure::Period ? "average over periods"
                                                                      : "average over cells";
  return {{what, Eigen::VectorXd::Constant(p, 1.0 / p)}};
}

std::vector<ReportEntry> EstimateReport::coefficients() const {
  std::vector<ReportEntry> out;
  for (Eigen::Index k = 0; k < beta.size(); ++k) {
    out.push_back({labels[static_cast<std::size_t>(k)], beta(k), std_errors(k), ci_lower(k), ci_upper(k)});
  }
  return out;
}

void finalize_report(EstimateReport& report, const DesignConfig& config, int clusters, double alpha) {
  const int p = config.parameter_count();
  report.structure = std::string(structure_name(config.structure));
  report.labels = param_labels(config);
  report.alpha = alpha;
  report.df = clusters - p;
  report.clusters = clusters;
  report.std_errors = report.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  report.ci_lower.resize(p);
  report.ci_upper.resize(p);
  for (int k = 0; k < p; ++k) {
    const auto [lo, hi] = wald_ci(report.beta(k), report.std_errors(k), clusters, p, alpha);
    report.ci_lower(k) = lo;
    report.ci_upper(k) = hi;
  }
  report.contrasts.clear();
  for (const auto& c : builtin_contrasts(config)) {
    const ContrastValue v = summary_contrast(report.beta, report.covariance, c.weights);
    const auto [lo, hi] = wald_ci(v.value, v.se, clusters, p, alpha);
    report.contrasts.push_back({c.label, v.value, v.se, lo, hi});
  }
}

namespace {

nlohmann::json entry_json(const ReportEntry& e) {
  return {{"label", e.label}, {"estimate", e.estimate}, {"se", e.se}, {"lower", e.lower}, {"upper", e.upper}};
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

std::string report_to_json(const EstimateReport& r, int indent) {
  nlohmann::json j;
  j["structure"] = r.structure;
  j["alpha"] = r.alpha;
  j["df"] = r.df;
  j["dfRule"] = "I - p, also for contrasts";
  nlohmann::json coefs = nlohmann::json::array();
  for (const auto& e : r.coefficients()) coefs.push_back(entry_json(e));
  j["coefficients"] = coefs;
  nlohmann::json contrasts = nlohmann::json::array();
  for (const auto& e : r.contrasts) contrasts.push_back(entry_json(e));
  j["contrasts"] = contrasts;
  nlohmann::json cov = nlohmann::json::array();
  for (Eigen::Index a = 0; a < r.covariance.rows(); ++a) {
    std::vector<double> row(r.covariance.cols());
    for (Eigen::Index b = 0; b < r.covariance.cols(); ++b) row[b] = r.covariance(a, b);
    cov.push_back(row);
  }
  j["covariance"] = cov;
  j["method"] = {{"correlation", r.correlation}, {"bases", r.bases}, {"learner", r.learner},
                 {"folds", r.folds}, {"seed", r.seed}};
  j["diagnostics"] = {{"clusters", r.clusters},     {"emptyClusters", r.empty_clusters},
                      {"iterations", r.iterations}, {"converged", r.converged},
                      {"objective", r.objective},   {"reciprocalCondition", r.condition},
                      {"warnings", r.warnings}};
  return j.dump(indent);
}

std::string report_to_csv(const EstimateReport& r) {
  std::ostringstream out;
  out << "kind,label,estimate,se,lower,upper,df\n";
  auto row = [&](const char* kind, const ReportEntry& e) {
    out << kind << ',' << csv_field(e.label) << ',' << format_double(e.estimate) << ',' << format_double(e.se) << ','
        << format_double(e.lower) << ',' << format_double(e.upper) << ',' << r.df << '\n';
  };
  for (const auto& e : r.coefficients()) row("coefficient", e);
  for (const auto& e : r.contrasts) row("contrast", e);
  return out.str();
}

}  // namespace swqif

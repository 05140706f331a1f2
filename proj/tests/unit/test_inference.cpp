#include <doctest.h>

#include <cmath>
#include <numbers>

#include "swqif/inference.hpp"

using namespace swqif;

namespace {

// P(|T| < t) for integer df by the finite trigonometric series, in long double.
long double t_two_sided(long double t, int df) {
  const long double theta = std::atan(t / std::sqrt(static_cast<long double>(df)));
  const long double c2 = std::cos(theta) * std::cos(theta);
  const long double s = std::sin(theta);
  long double term = 1.0L;
  long double sum = 1.0L;
  if (df % 2 == 1) {
    if (df == 1) return 2.0L * theta / std::numbers::pi_v<long double>;
    // sin(theta)cos(theta) * (1 + 2/3 c^2 + 2*4/(3*5) c^4 + ...)
    for (int k = 1; 2 * k + 1 <= df - 2; ++k) {
      term *= c2 * (2.0L * k) / (2.0L * k + 1.0L);
      sum += term;
    }
    return 2.0L / std::numbers::pi_v<long double> * (theta + s * std::cos(theta) * sum);
  }
  for (int k = 1; 2 * k <= df - 2; ++k) {
    term *= c2 * (2.0L * k - 1.0L) / (2.0L * k);
    sum += term;
  }
  return s * sum;
}

long double t_quantile_oracle(int df, long double alpha) {
  const long double target = 1.0L - alpha;
  long double lo = 0.0L, hi = 1.0L;
  while (t_two_sided(hi, df) < target) hi *= 2.0L;
  for (int it = 0; it < 200; ++it) {
    const long double mid = 0.5L * (lo + hi);
    (t_two_sided(mid, df) < target ? lo : hi) = mid;
  }
  return 0.5L * (lo + hi);
}

DesignConfig duration_config(int J) {
  return DesignConfig::make(TreatmentStructure::Duration, J, Eigen::VectorXd::Constant(J + 1, 1.0 / (J + 1)));
}

}  // namespace

TEST_CASE("t multiplier against the series oracle") {
  for (int df : {1, 2, 3, 4, 5, 7, 10, 19, 30, 57, 100, 333, 1000, 4000, 10000}) {
    for (double alpha : {0.05, 0.1, 0.01}) {
      const double expect = static_cast<double>(t_quantile_oracle(df, alpha));
      CHECK(std::abs(t_multiplier(df, alpha) - expect) <= 1e-10 * expect);
    }
  }
  CHECK(std::abs(t_multiplier(19, 0.05) - 2.093024) <= 1e-5);
  CHECK(std::abs(t_multiplier(1e6 - 1, 0.05) - 1.959964) <= 1e-4);
}

TEST_CASE("wald interval") {
  const auto [lo, hi] = wald_ci(0.7, 0.0, 20, 1);
  CHECK(lo == 0.7);
  CHECK(hi == 0.7);

  const auto ci = wald_ci(1.0, 0.5, 20, 1);
  CHECK(ci.first == doctest::Approx(1.0 - 0.5 * t_multiplier(19, 0.05)));
  CHECK(ci.second == doctest::Approx(1.0 + 0.5 * t_multiplier(19, 0.05)));
  CHECK(ci.first < ci.second);

  try {
    wald_ci(1.0, 0.5, 3, 3);
    FAIL("expected InsufficientDF");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientDF);
  }
}

TEST_CASE("narrower alpha gives nested intervals") {
  double prev_lo = -1e300, prev_hi = 1e300;
  for (double alpha : {0.001, 0.01, 0.05, 0.1, 0.2, 0.5}) {
    const auto [lo, hi] = wald_ci(0.3, 0.2, 12, 2, alpha);
    CHECK(lo >= prev_lo);
    CHECK(hi <= prev_hi);
    prev_lo = lo;
    prev_hi = hi;
  }
}

TEST_CASE("summary contrast") {
  const Eigen::Vector2d beta(1.0, 3.0);
  const Eigen::Matrix2d cov = Eigen::Matrix2d::Identity() / 4.0;
  const auto contrasts = builtin_contrasts(duration_config(2));
  REQUIRE(contrasts.size() == 1);
  CHECK(contrasts[0].label == "average over durations");
  const ContrastValue v = summary_contrast(beta, cov, contrasts[0].weights);
  CHECK(v.value == doctest::Approx(2.0));
  CHECK(std::abs(v.se - 0.35355) <= 1e-5);

  Eigen::Matrix3d c3;
  c3 << 2.0, 0.3, -0.1, 0.3, 1.0, 0.2, -0.1, 0.2, 0.5;
  const Eigen::Vector3d b3(0.4, -1.2, 2.5);
  for (int k = 0; k < 3; ++k) {
    const ContrastValue e = summary_contrast(b3, c3, Eigen::Vector3d::Unit(k));
    CHECK(e.value == b3(k));
    CHECK(e.se == doctest::Approx(std::sqrt(c3(k, k))));
  }

  const Eigen::Vector3d a(0.25, -1.0, 0.5), b(1.5, 0.125, -0.75);
  CHECK(summary_contrast(b3, c3, a + b).value ==
        doctest::Approx(summary_contrast(b3, c3, a).value + summary_contrast(b3, c3, b).value).epsilon(1e-15));

  try {
    summary_contrast(b3, c3, Eigen::Vector2d(1, 1));
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("builtin contrasts per structure") {
  const auto probs = [](int J) { return Eigen::VectorXd::Constant(J + 1, 1.0 / (J + 1)); };
  CHECK(builtin_contrasts(DesignConfig::make(TreatmentStructure::Constant, 3, probs(3))).empty());

  const auto per = builtin_contrasts(DesignConfig::make(TreatmentStructure::Period, 4, probs(4)));
  REQUIRE(per.size() == 1);
  CHECK(per[0].label == "average over periods");
  CHECK(per[0].weights.isApprox(Eigen::VectorXd::Constant(3, 1.0 / 3.0)));

  const auto sat = builtin_contrasts(DesignConfig::make(TreatmentStructure::Saturated, 4, probs(4)));
  REQUIRE(sat.size() == 1);
  CHECK(sat[0].label == "average over cells");
  CHECK(sat[0].weights.isApprox(Eigen::VectorXd::Constant(6, 1.0 / 6.0)));
}

TEST_CASE("finalize_report fills errors, intervals and contrasts") {
  const DesignConfig cfg = duration_config(3);
  EstimateReport r;
  r.beta = Eigen::Vector3d(1.0, 2.0, 4.0);
  r.covariance = Eigen::Vector3d(0.04, 0.09, 0.16).asDiagonal();
  finalize_report(r, cfg, 25, 0.1);
  CHECK(r.df == 22);
  CHECK(r.std_errors.isApprox(Eigen::Vector3d(0.2, 0.3, 0.4)));
  const double t = t_multiplier(22, 0.1);
  CHECK(r.ci_lower(2) == doctest::Approx(4.0 - 0.4 * t));
  CHECK(r.ci_upper(0) == doctest::Approx(1.0 + 0.2 * t));
  REQUIRE(r.contrasts.size() == 1);
  CHECK(r.contrasts[0].estimate == doctest::Approx(7.0 / 3.0));
  CHECK(r.contrasts[0].se == doctest::Approx(std::sqrt(0.29) / 3.0));

  const std::string json = report_to_json(r);
  CHECK(json.find("average over durations") != std::string::npos);
  const std::string csv = report_to_csv(r);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}

#include <doctest.h>

#include "swqif/validation.hpp"

using namespace swqif;

TEST_CASE("self-checks pass and are deterministic") {
  const auto a = run_validation(7);
  const auto b = run_validation(7);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK_MESSAGE(a[i].passed, a[i].name << ": " << a[i].detail);
    CHECK(a[i].name == b[i].name);
    CHECK(a[i].detail == b[i].detail);
  }
  CHECK(format_checks(a, true) == format_checks(b, true));
}

TEST_CASE("a sign-flipped gradient fails the gradient check") {
  const GradientFn good = default_gradient();
  const GradientFn flipped = [good](const QifProblem& p, const Eigen::VectorXd& beta, const Eigen::MatrixXd& c) {
    return Eigen::VectorXd(-good(p, beta, c));
  };
  CHECK(gradient_check_error(5, 3) <= 1e-5);
  CHECK(gradient_check_error(5, 3, flipped) > 1e-2);

  const auto checks = run_validation(7, flipped);
  bool gradient_failed = false;
  for (const auto& c : checks) {
    if (c.name.find("gradient") != std::string::npos) gradient_failed = !c.passed;
  }
  CHECK(gradient_failed);
}

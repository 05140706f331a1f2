#include <doctest.h>

#include "../support/oracle.hpp"
#include "helpers.hpp"
#include "swqif/design.hpp"

using namespace swqif;
using TS = TreatmentStructure;

TEST_CASE("parameter counts") {
  CHECK(parameter_count(TS::Constant, 5, false) == 1);
  CHECK(parameter_count(TS::Duration, 4, false) == 4);
  CHECK(parameter_count(TS::Period, 4, false) == 3);
  CHECK(parameter_count(TS::Period, 4, true) == 4);
  CHECK(parameter_count(TS::Saturated, 4, false) == 6);
  CHECK(parameter_count(TS::Saturated, 4, true) == 10);
}

TEST_CASE("treatment rows") {
  const auto z2 = Sequence::starting_at(2);
  CHECK(treatment_row(TS::Constant, 3, z2, 1)(0) == 0.0);
  CHECK(treatment_row(TS::Constant, 3, z2, 2)(0) == 1.0);
  CHECK(treatment_row(TS::Constant, 3, z2, 3)(0) == 1.0);
  CHECK(treatment_row(TS::Duration, 3, z2, 3) == Eigen::Vector3d(0, 1, 0));
  CHECK(treatment_row(TS::Saturated, 3, Sequence::starting_at(1), 2) == Eigen::Vector3d(0, 0, 1));
  CHECK(treatment_row(TS::Duration, 3, Sequence::never(), 3).isZero());
}

TEST_CASE("mean rows") {
  const Eigen::Vector4d uniform(1.0 / 3, 1.0 / 3, 1.0 / 3, 0.0);
  CHECK(mean_row(TS::Constant, 3, uniform, 1)(0) == doctest::Approx(1.0 / 3));
  CHECK(mean_row(TS::Constant, 3, uniform, 2)(0) == doctest::Approx(2.0 / 3));
  CHECK(mean_row(TS::Constant, 3, uniform, 3)(0) == doctest::Approx(1.0));
  CHECK(mean_row(TS::Duration, 2, Eigen::Vector3d(0.5, 0.5, 0.0), 2).isApprox(Eigen::Vector2d(0.5, 0.5)));
  CHECK(mean_row(TS::Constant, 1, Eigen::Vector2d(0.5, 0.5), 1)(0) == doctest::Approx(0.5));
}

TEST_CASE("centering identity and duration one-hot, every structure") {
  const int J = 4;
  const Eigen::VectorXd probs = oracle::random_probs(3, J);
  for (TS s : {TS::Constant, TS::Duration, TS::Period, TS::Saturated}) {
    for (bool inc : {false, true}) {
      if (inc && (s == TS::Constant || s == TS::Duration)) continue;
      const int last = oracle::last_period(s, J, inc);
      for (int j = 1; j <= last; ++j) {
        Eigen::VectorXd avg = Eigen::VectorXd::Zero(parameter_count(s, J, inc));
        for (int z = 1; z <= J + 1; ++z) {
          const Sequence seq = z <= J ? Sequence::starting_at(z) : Sequence::never();
          const Eigen::VectorXd row = treatment_row(s, J, seq, j, inc);
          CHECK(row == oracle::design_row(s, J, inc, z <= J ? z : 0, j));
          avg += probs(z - 1) * row;
          if (s == TS::Duration) {
            const bool on = z <= j;
            CHECK(row.sum() == (on ? 1.0 : 0.0));
          }
          if (s == TS::Saturated) {
            // block j touches only its own j coordinates
            int offset = 0;
            for (int jj = 1; jj < j; ++jj) offset += jj;
            CHECK(row.head(offset).isZero());
            CHECK(row.tail(row.size() - offset - j).isZero());
          }
        }
        CHECK((avg - mean_row(s, J, probs, j, inc)).cwiseAbs().maxCoeff() <= 1e-15);
      }
    }
  }
}

TEST_CASE("labels") {
  const Eigen::Vector3d p2(0.5, 0.5, 0.0);
  const Eigen::Vector4d p3(1.0 / 3, 1.0 / 3, 1.0 / 3, 0.0);
  CHECK(param_labels(DesignConfig::make(TS::Duration, 2, p2)) == std::vector<std::string>{"Delta(d=1)", "Delta(d=2)"});
  CHECK(param_labels(DesignConfig::make(TS::Saturated, 3, p3)) ==
        std::vector<std::string>{"Delta_1(1)", "Delta_2(1)", "Delta_2(2)"});
  Eigen::VectorXd p5 = Eigen::VectorXd::Constant(6, 0.2);
  p5(5) = 0.0;
  CHECK(param_labels(DesignConfig::make(TS::Constant, 5, p5)) == std::vector<std::string>{"Delta"});
}

TEST_CASE("stack_cluster: period with no enrollment is dropped") {
  auto c = testutil::full_cluster("a", Sequence::starting_at(1), 2, 2);
  c.enrolled.row(1).setConstant(false);
  c.outcomes.row(1).setConstant(std::nan(""));
  const auto cfg = DesignConfig::make(TS::Constant, 2, Eigen::Vector3d(0.5, 0.5, 0.0));
  const StackedCluster sc = stack_cluster(c, cfg);
  REQUIRE(sc.rows() == 2);
  CHECK(sc.period == std::vector<int>{1, 1});
  CHECK(sc.weights(0) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(sc.weights(1) == doctest::Approx(1.0 / std::sqrt(2.0)));
}

TEST_CASE("stack_cluster: duration rows for a single individual") {
  for (int z = 1; z <= 2; ++z) {
    const auto c = testutil::full_cluster("a", Sequence::starting_at(z), 2, 1);
    const auto cfg = DesignConfig::make(TS::Duration, 2, Eigen::Vector3d(0.5, 0.5, 0.0));
    const StackedCluster sc = stack_cluster(c, cfg);
    Eigen::Matrix2d expect;
    expect << (z == 1), 0, (z == 2), (z == 1);
    CHECK(sc.design == expect);
  }
}

TEST_CASE("stack_cluster: only the excluded period enrolled") {
  auto c = testutil::full_cluster("a", Sequence::starting_at(1), 3, 1);
  c.enrolled.topRows(2).setConstant(false);
  c.outcomes.topRows(2).setConstant(std::nan(""));
  const auto cfg = DesignConfig::make(TS::Period, 3, Eigen::Vector4d(1.0 / 3, 1.0 / 3, 1.0 / 3, 0.0));
  try {
    stack_cluster(c, cfg);
    FAIL("expected EmptyCluster");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyCluster);
  }
}

TEST_CASE("stacked rows and per-period weights") {
  const auto ds = oracle::random_trial(17, 8, 8, 3, 3, 5);
  const Eigen::VectorXd probs = oracle::random_probs(17, 3);
  for (TS s : {TS::Constant, TS::Duration, TS::Period, TS::Saturated}) {
    const auto cfg = DesignConfig::make(s, 3, probs);
    const auto stacked = stack_dataset(ds, cfg);
    for (std::size_t i = 0; i < ds.clusters.size(); ++i) {
      const auto& c = ds.clusters[i];
      const auto& sc = stacked.clusters[i];
      int expect = 0;
      for (int j = 1; j <= cfg.last_period(); ++j) expect += c.enrolled_count(j);
      CHECK(sc.rows() == expect);
      for (int j = 1; j <= cfg.last_period(); ++j) {
        if (c.enrolled_count(j) == 0) continue;
        double sum = 0.0;
        for (int r = 0; r < sc.rows(); ++r) {
          if (sc.period[r] == j) sum += sc.weights(r) * sc.weights(r);
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
      }
    }
  }
}

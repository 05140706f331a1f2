#include <doctest.h>

#include <cmath>

#include "swqif/simgen.hpp"

using namespace swqif;
using TS = TreatmentStructure;

namespace {

bool same_dataset(const TrialDataset& a, const TrialDataset& b) {
  if (a.clusters.size() != b.clusters.size() || a.periods != b.periods) return false;
  for (std::size_t i = 0; i < a.clusters.size(); ++i) {
    const auto& x = a.clusters[i];
    const auto& y = b.clusters[i];
    if (x.id != y.id || x.sequence != y.sequence || x.individual_ids != y.individual_ids) return false;
    if ((x.enrolled != y.enrolled).any()) return false;
    if (x.covariates != y.covariates) return false;
    for (int j = 0; j < x.outcomes.rows(); ++j) {
      for (int k = 0; k < x.outcomes.cols(); ++k) {
        if (x.enrolled(j, k) && x.outcomes(j, k) != y.outcomes(j, k)) return false;
      }
    }
  }
  return true;
}

}  // namespace

TEST_CASE("preset shapes") {
  CHECK(preset_names().size() == 12);
  const Scenario s20 = preset("cluster-constant-20");
  CHECK(s20.clusters == 20);
  CHECK(s20.periods == 3);
  CHECK(s20.population == 20);
  CHECK(s20.nij_min == 5);
  CHECK(s20.nij_max == 15);
  const Scenario s100 = preset("cluster-saturated-100");
  CHECK(s100.clusters == 100);
  CHECK(s100.periods == 5);
  CHECK(s100.population == 500);
  CHECK(s100.nij_max == 35);
  const Scenario ind = preset("individual-period-1000");
  CHECK(ind.clusters == 1000);
  CHECK(ind.periods == 20);
  CHECK(ind.population == 1);
  CHECK(ind.nij_bernoulli == 0.5);
  CHECK_THROWS_AS(preset("cluster-constant-21"), Error);

  for (const auto& name : preset_names()) {
    const Scenario sc = preset(name);
    const Eigen::VectorXd t = true_estimands(sc);
    CHECK(t.size() == sc.design_config().parameter_count());
    CHECK((t.array() == 1.0).all());
  }
}

TEST_CASE("degenerate covariates: treated minus never-treated is exactly one") {
  for (auto design : {Randomization::Cluster, Randomization::Individual}) {
    for (TS s : {TS::Constant, TS::Duration, TS::Period, TS::Saturated}) {
      for (int j = 1; j <= 3; ++j) {
        const double treated = outcome_mean(design, s, 3, Eigen::Vector4d::Zero(), 0.0, 0.0, j, Sequence::starting_at(1));
        const double never = outcome_mean(design, s, 3, Eigen::Vector4d::Zero(), 0.0, 0.0, j, Sequence::never());
        CHECK(treated - never == 1.0);
      }
    }
  }
}

TEST_CASE("same seed and replicate reproduce the dataset; replicates differ") {
  for (const char* name : {"cluster-duration-20", "individual-saturated-1000"}) {
    const Scenario sc = preset(name);
    CHECK(same_dataset(generate(sc, 3), generate(sc, 3)));
    CHECK_FALSE(same_dataset(generate(sc, 3), generate(sc, 4)));
  }
}

TEST_CASE("enrollment sizes and cluster-level covariate") {
  const Scenario sc = preset("cluster-period-20");
  const TrialDataset ds = generate(sc, 0);
  REQUIRE(ds.clusters.size() == 20);
  REQUIRE(ds.covariate_names.size() == 4);
  for (const auto& c : ds.clusters) {
    CHECK(c.population_size() == 20);
    CHECK_FALSE(c.sequence.is_never());
    for (int j = 0; j < 3; ++j) {
      const int n = static_cast<int>(c.enrolled.row(j).count());
      CHECK(n >= 5);
      CHECK(n <= 15);
    }
    CHECK((c.covariates.col(0).array() == c.covariates(0, 0)).all());
    CHECK((c.covariates.col(1).array() * (1.0 - c.covariates.col(1).array()) == 0.0).all());
  }
}

TEST_CASE("noise scales leave enrollment, covariates and sequences untouched") {
  Scenario a = preset("cluster-saturated-20");
  Scenario b = a;
  b.sigma = 2.0;
  b.alpha = 0.0;
  b.tau = 5.0;
  b.epsilon = 0.01;
  const TrialDataset da = generate(a, 7);
  const TrialDataset db = generate(b, 7);
  for (std::size_t i = 0; i < da.clusters.size(); ++i) {
    CHECK(da.clusters[i].sequence == db.clusters[i].sequence);
    CHECK((da.clusters[i].enrolled == db.clusters[i].enrolled).all());
    CHECK(da.clusters[i].covariates == db.clusters[i].covariates);
  }
}

TEST_CASE("potential outcomes: consistency and no anticipation") {
  for (const char* name : {"cluster-constant-20", "cluster-duration-20", "cluster-period-20", "cluster-saturated-20"}) {
    const Scenario sc = preset(name);
    const PotentialOutcomes po = generate_with_potential(sc, 2);
    const int J = sc.periods;
    for (std::size_t i = 0; i < po.observed.clusters.size(); ++i) {
      const auto& c = po.observed.clusters[i];
      const auto& pot = po.potential[i];
      REQUIRE(static_cast<int>(pot.size()) == J + 1);
      const Eigen::MatrixXd& chosen = pot[static_cast<std::size_t>(c.sequence.index(J))];
      for (int j = 0; j < J; ++j) {
        for (int k = 0; k < c.population_size(); ++k) {
          if (c.enrolled(j, k)) CHECK(c.outcomes(j, k) == chosen(j, k));
        }
      }
      // z > j: untreated at j, so Y_j(z) equals the never-treated outcome
      for (int z = 1; z <= J; ++z) {
        for (int j = 1; j < z; ++j) {
          CHECK((pot[z - 1].row(j - 1).array() == pot[J].row(j - 1).array()).all());
        }
      }
    }
  }
}

TEST_CASE("covariate moment E exp(X1 X2)") {
  Scenario sc = preset("cluster-constant-20");
  sc.clusters = 100000;
  sc.population = 10;
  sc.nij_min = 1;
  sc.nij_max = 1;
  const TrialDataset ds = generate(sc, 0);
  // X1 is shared within a cluster, so the Monte Carlo error is computed on cluster means
  double sum = 0.0, sq = 0.0;
  for (const auto& c : ds.clusters) {
    const double m = (c.covariates.col(0).array() * c.covariates.col(1).array()).exp().mean();
    sum += m;
    sq += m * m;
  }
  const double n = static_cast<double>(ds.clusters.size());
  const double mean = sum / n;
  const double mcse = std::sqrt((sq / n - mean * mean) / (n - 1));
  const double expect = 0.5 * (1.0 + std::exp(0.5));
  CHECK(std::abs(expect - 1.32436) <= 1e-5);
  CHECK(std::abs(mean - expect) <= 3.0 * mcse);
}

TEST_CASE("cluster-average effects from potential outcomes average to one") {
  for (TS s : {TS::Constant, TS::Duration, TS::Period, TS::Saturated}) {
    Scenario sc = preset("cluster-constant-20");
    sc.structure = s;
    sc.clusters = 10000;
    // every (period j, start z <= j) cell has effect 1 on average
    const int J = sc.periods;
    const int cells = J * (J + 1) / 2;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(cells), sq = Eigen::VectorXd::Zero(cells);
    int n = 0;
    for (std::uint64_t rep = 0; rep < 10; ++rep) {
      const PotentialOutcomes po = generate_with_potential(sc, rep);
      for (const auto& pot : po.potential) {
        int cell = 0;
        for (int j = 1; j <= J; ++j) {
          for (int z = 1; z <= j; ++z, ++cell) {
            const double v = (pot[z - 1].row(j - 1) - pot[J].row(j - 1)).mean();
            sum(cell) += v;
            sq(cell) += v * v;
          }
        }
        ++n;
      }
    }
    for (int cell = 0; cell < cells; ++cell) {
      const double mean = sum(cell) / n;
      const double mcse = std::sqrt((sq(cell) / n - mean * mean) / (n - 1));
      CHECK(std::abs(mean - 1.0) <= 3.0 * mcse + 1e-12);
    }
  }
}

TEST_CASE("scenario JSON round trip") {
  Scenario sc = preset("cluster-duration-100");
  sc.seed = 99;
  sc.param_is_sd = true;
  const Scenario back = scenario_from_json(scenario_to_json(sc));
  CHECK(back.clusters == sc.clusters);
  CHECK(back.periods == sc.periods);
  CHECK(back.population == sc.population);
  CHECK(back.structure == sc.structure);
  CHECK(back.seed == 99);
  CHECK(back.param_is_sd);
  CHECK(scenario_to_json(back) == scenario_to_json(sc));
  CHECK(scenario_from_json("\"cluster-period-20\"").structure == TS::Period);
}

#include <doctest.h>

#include <algorithm>
#include <random>

#include "helpers.hpp"
#include "swqif/trial.hpp"

using namespace swqif;

namespace {

TrialDataset two_clusters() {
  TrialDataset ds;
  ds.periods = 2;
  ds.covariate_names = {"x"};
  ds.clusters.push_back(testutil::full_cluster("a", Sequence::starting_at(1), 2, 2));
  ds.clusters.push_back(testutil::full_cluster("b", Sequence::starting_at(2), 2, 2));
  ds.sequence_probs = Eigen::Vector3d(0.5, 0.5, 0.0);
  return ds;
}

bool has_rule(const std::vector<Violation>& v, ViolationRule r) {
  return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.rule == r; });
}

}  // namespace

TEST_CASE("validate: well-formed dataset has no violations") {
  CHECK(validate(two_clusters()).empty());
}

TEST_CASE("validate: probabilities summing to 0.9") {
  auto ds = two_clusters();
  ds.sequence_probs = Eigen::Vector3d(0.5, 0.4, 0.0);
  const auto v = validate(ds);
  REQUIRE(v.size() == 1);
  CHECK(v[0].rule == ViolationRule::ProbSumViolation);
}

TEST_CASE("validate: outcome where not enrolled is an orphan") {
  auto ds = two_clusters();
  ds.clusters[1].enrolled(0, 1) = false;  // outcome 0.0 stays
  const auto v = validate(ds);
  REQUIRE(v.size() == 1);
  CHECK(v[0].rule == ViolationRule::OrphanOutcome);
  CHECK(v[0].cluster == "b");
  CHECK(v[0].period == 1);
  CHECK(v[0].individual == 1);
}

TEST_CASE("validate: enrolled cell without outcome, single sequence") {
  auto ds = two_clusters();
  ds.clusters[0].outcomes(1, 0) = std::nan("");
  CHECK(has_rule(validate(ds), ViolationRule::MissingOutcome));

  auto one = two_clusters();
  one.clusters[1].sequence = Sequence::starting_at(1);
  CHECK(has_rule(validate(one), ViolationRule::SingleSequence));
}

TEST_CASE("validate is pure") {
  auto ds = two_clusters();
  ds.sequence_probs = Eigen::Vector3d(0.2, 0.2, 0.2);
  ds.clusters[0].covariates(0, 0) = std::nan("");
  const auto a = validate(ds);
  const auto b = validate(ds);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].rule == b[i].rule);
    CHECK(a[i].message == b[i].message);
  }
  CHECK(has_rule(a, ViolationRule::NonFiniteCovariate));
}

TEST_CASE("ingest: one cluster, one individual in both periods") {
  const auto path = testutil::write_temp("three.csv",
                                         "cluster,period,individual,z,y,x\n"
                                         "c1,1,i1,1,0.5,2\n"
                                         "c1,2,i1,1,1.5,2\n"
                                         "c2,1,i9,inf,0.25,3\n");
  const TrialDataset ds = ingest_csv(path);
  REQUIRE(ds.cluster_count() == 2);
  CHECK(ds.periods == 2);
  const auto& c = ds.clusters[0];
  CHECK(c.population_size() == 1);
  CHECK(c.enrolled_count(1) == 1);
  CHECK(c.enrolled_count(2) == 1);
  CHECK(c.outcomes(1, 0) == 1.5);
  CHECK(ds.clusters[1].sequence.is_never());
}

TEST_CASE("ingest: inconsistent sequence within a cluster") {
  const auto path = testutil::write_temp("incons.csv",
                                         "cluster,period,individual,z,y,x\n"
                                         "c1,1,i1,1,0.5,2\n"
                                         "c1,2,i1,2,1.5,2\n");
  try {
    ingest_csv(path);
    FAIL("expected InconsistentSequence");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InconsistentSequence);
  }
}

TEST_CASE("ingest: missing file and missing column") {
  try {
    ingest_csv(testutil::temp_path("nope.csv").string());
    FAIL("expected IoError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IoError);
  }
  const auto path = testutil::write_temp("nocol.csv", "cluster,period,z,y\nc1,1,1,0\n");
  try {
    ingest_csv(path);
    FAIL("expected SchemaError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SchemaError);
  }
}

TEST_CASE("empirical sequence probabilities") {
  TrialDataset ds;
  ds.periods = 3;
  for (int z = 1; z <= 3; ++z) ds.clusters.push_back(testutil::full_cluster(std::to_string(z), Sequence::starting_at(z), 3, 1));
  CHECK(empirical_sequence_probs(ds).isApprox(Eigen::Vector4d(1.0 / 3, 1.0 / 3, 1.0 / 3, 0.0), 1e-15));

  TrialDataset two;
  two.periods = 2;
  two.clusters.push_back(testutil::full_cluster("a", Sequence::starting_at(1), 2, 1));
  two.clusters.push_back(testutil::full_cluster("b", Sequence::starting_at(1), 2, 1));
  CHECK(empirical_sequence_probs(two).isApprox(Eigen::Vector3d(1, 0, 0)));

  TrialDataset nev;
  nev.periods = 1;
  nev.clusters.push_back(testutil::full_cluster("a", Sequence::starting_at(1), 1, 1));
  nev.clusters.push_back(testutil::full_cluster("b", Sequence::never(), 1, 1));
  CHECK(empirical_sequence_probs(nev).isApprox(Eigen::Vector2d(0.5, 0.5)));

  // sums to one whatever the mix
  TrialDataset mix;
  mix.periods = 4;
  for (int i = 0; i < 7; ++i) {
    mix.clusters.push_back(testutil::full_cluster(std::to_string(i), i % 5 == 4 ? Sequence::never() : Sequence::starting_at(i % 5 + 1), 4, 1));
  }
  CHECK(std::abs(empirical_sequence_probs(mix).sum() - 1.0) <= 1e-12);
}

TEST_CASE("export then ingest reproduces the dataset exactly") {
  TrialDataset ds;
  ds.periods = 3;
  ds.covariate_names = {"u", "v"};
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  for (int i = 0; i < 4; ++i) {
    ClusterData c;
    c.id = "c" + std::to_string(i);
    c.sequence = i == 3 ? Sequence::never() : Sequence::starting_at(i + 1);
    const int n = 2 + i;
    c.covariates.resize(n, 2);
    c.enrolled = BoolArray::Constant(3, n, false);
    c.outcomes = Eigen::MatrixXd::Constant(3, n, std::nan(""));
    for (int k = 0; k < n; ++k) {
      c.individual_ids.push_back("p" + std::to_string(k));
      c.covariates(k, 0) = normal(rng);
      c.covariates(k, 1) = normal(rng) * 1e-7;
      for (int j = 0; j < 3; ++j) {
        if ((j + k) % 3 == 2) continue;
        c.enrolled(j, k) = true;
        c.outcomes(j, k) = normal(rng) / 3.0;
      }
    }
    ds.clusters.push_back(std::move(c));
  }
  const auto path = testutil::temp_path("roundtrip.csv").string();
  export_csv(ds, path);
  const TrialDataset back = ingest_csv(path);
  REQUIRE(back.cluster_count() == ds.cluster_count());
  CHECK(back.covariate_names == ds.covariate_names);
  for (int i = 0; i < ds.cluster_count(); ++i) {
    const auto& a = ds.clusters[i];
    const auto& b = back.clusters[i];
    CHECK(a.id == b.id);
    CHECK(a.sequence == b.sequence);
    CHECK(a.individual_ids == b.individual_ids);
    CHECK((a.covariates.array() == b.covariates.array()).all());
    CHECK((a.enrolled == b.enrolled).all());
    for (int j = 0; j < 3; ++j) {
      for (int k = 0; k < a.population_size(); ++k) {
        if (a.enrolled(j, k)) CHECK(a.outcomes(j, k) == b.outcomes(j, k));
      }
    }
  }
}

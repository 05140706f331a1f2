#include "swqif/pipeline.hpp"

#include <algorithm>

#include <json.hpp>

#include "swqif/gee.hpp"

namespace swqif {

using nlohmann::json;

std::string_view correlation_name(Correlation c) {
  switch (c) {
    case Correlation::Independence: return "independence";
    case Correlation::Qif: return "qif";
    case Correlation::FixedQ: return "fixed_q";
  }
  return "?";
}

namespace {

json parse(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string(what) + " is not valid JSON: " + e.what());
  }
}

void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> allowed, const char* what) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw Error(ErrorCode::ConfigError, std::string("unknown ") + what + " field '" + key + "'");
    }
  }
}

LearnerSpec learner_from(const json& j) {
  if (j.is_string()) {
    const LearnerKind k = parse_learner(j.get<std::string>());
    if (k == LearnerKind::Ensemble) return LearnerSpec::default_ensemble();
    LearnerSpec s;
    s.kind = k;
    return s;
  }
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "learner must be a name or an object");
  reject_unknown_keys(j,
                      {"kind", "maxDepth", "minLeaf", "nTrees", "mtry", "bootstrapSeed", "members", "innerFolds",
                       "pooling", "clusterSummaries"},
                      "learner");
  LearnerSpec s;
  s.kind = parse_learner(j.value("kind", std::string("none")));
  if (s.kind == LearnerKind::Ensemble) s.members = LearnerSpec::default_ensemble().members;
  s.tree.max_depth = j.value("maxDepth", s.tree.max_depth);
  s.tree.min_leaf = j.value("minLeaf", s.tree.min_leaf);
  if (s.kind == LearnerKind::Forest) {
    s.forest.max_depth = j.value("maxDepth", s.forest.max_depth);
    s.forest.min_leaf = j.value("minLeaf", s.forest.min_leaf);
  }
  s.forest.n_trees = j.value("nTrees", s.forest.n_trees);
  s.forest.mtry = j.value("mtry", s.forest.mtry);
  s.forest.bootstrap_seed = j.value("bootstrapSeed", s.forest.bootstrap_seed);
  if (j.contains("members")) {
    s.members.clear();
    for (const auto& m : j["members"]) s.members.push_back(learner_from(m));
  }
  s.inner_folds = j.value("innerFolds", s.inner_folds);
  const std::string pooling = j.value("pooling", std::string("per_period"));
  if (pooling == "per_period") s.pooling = Pooling::PerPeriod;
  else if (pooling == "pooled") s.pooling = Pooling::PooledWithPeriodFeature;
  else throw Error(ErrorCode::ConfigError, "pooling must be 'per_period' or 'pooled'");
  s.cluster_summaries = j.value("clusterSummaries", false);
  s.check();
  return s;
}

json learner_json(const LearnerSpec& s) {
  json j;
  j["kind"] = std::string(learner_name(s.kind));
  switch (s.kind) {
    case LearnerKind::Tree:
      j["maxDepth"] = s.tree.max_depth;
      j["minLeaf"] = s.tree.min_leaf;
      break;
    case LearnerKind::Forest:
      j["nTrees"] = s.forest.n_trees;
      j["maxDepth"] = s.forest.max_depth;
      j["minLeaf"] = s.forest.min_leaf;
      j["mtry"] = s.forest.mtry;
      j["bootstrapSeed"] = s.forest.bootstrap_seed;
      break;
    case LearnerKind::Ensemble: {
      json members = json::array();
      for (const auto& m : s.members) members.push_back(learner_json(m));
      j["members"] = members;
      j["innerFolds"] = s.inner_folds;
      break;
    }
    default:
      break;
  }
  j["pooling"] = s.pooling == Pooling::PerPeriod ? "per_period" : "pooled";
  j["clusterSummaries"] = s.cluster_summaries;
  return j;
}

std::string describe_learner(const LearnerSpec& s) {
  std::string out(learner_name(s.kind));
  if (s.kind == LearnerKind::Ensemble) {
    out += "(";
    for (std::size_t m = 0; m < s.members.size(); ++m) out += (m ? "+" : "") + std::string(learner_name(s.members[m].kind));
    out += ")";
  }
  return out;
}

}  // namespace

LearnerSpec learner_from_json(const std::string& text) { return learner_from(parse(text, "learner")); }

std::string learner_to_json(const LearnerSpec& spec) { return learner_json(spec).dump(2); }

ArmConfig arm_from_json(const std::string& text) {
  const json j = parse(text, "arm config");
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "arm config must be an object");
  // "schema" belongs to the CLI's analyze file and is read there
  reject_unknown_keys(j,
                      {"label", "correlation", "bases", "rho", "weighting", "learner", "folds", "seed", "tol",
                       "maxIter", "ridge", "twoStep", "smallSampleInflation", "alpha", "structure", "includePeriodJ",
                       "schema"},
                      "arm");
  ArmConfig a;
  try {
    a.label = j.value("label", a.label);
    const std::string corr = j.value("correlation", std::string("independence"));
    if (corr == "independence") a.correlation = Correlation::Independence;
    else if (corr == "qif") a.correlation = Correlation::Qif;
    else if (corr == "fixed_q") a.correlation = Correlation::FixedQ;
    else throw Error(ErrorCode::ConfigError, "correlation must be independence, qif or fixed_q");
    if (j.contains("bases")) {
      for (const auto& b : j["bases"]) a.bases.push_back(parse_basis(b.get<std::string>()));
    }
    if (j.contains("rho")) a.weighting = WeightingSpec::exchangeable(j["rho"].get<double>());
    if (j.contains("weighting")) {
      a.weighting.terms.clear();
      for (const auto& t : j["weighting"]) {
        a.weighting.terms.emplace_back(parse_basis(t.at("basis").get<std::string>()), t.at("weight").get<double>());
      }
    }
    if (j.contains("learner")) a.learner = learner_from(j["learner"]);
    a.folds = j.value("folds", a.folds);
    if (j.contains("seed")) a.seed = j["seed"].get<std::uint64_t>();
    a.qif.tol = j.value("tol", a.qif.tol);
    a.qif.max_iter = j.value("maxIter", a.qif.max_iter);
    a.qif.ridge = j.value("ridge", a.qif.ridge);
    a.qif.two_step = j.value("twoStep", a.qif.two_step);
    a.qif.small_sample_inflation = j.value("smallSampleInflation", a.qif.small_sample_inflation);
    a.alpha = j.value("alpha", a.alpha);
    if (j.contains("structure")) a.structure = parse_structure(j["structure"].get<std::string>());
    a.include_period_j = j.value("includePeriodJ", false);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("bad arm field: ") + e.what());
  }
  if (a.folds < 1) throw Error(ErrorCode::ConfigError, "folds must be at least 1");
  if (!(a.alpha > 0.0 && a.alpha < 1.0)) throw Error(ErrorCode::ConfigError, "alpha must lie in (0, 1)");
  return a;
}

std::string arm_to_json(const ArmConfig& a) {
  json j;
  j["label"] = a.label;
  j["correlation"] = std::string(correlation_name(a.correlation));
  json bases = json::array();
  for (BasisKind b : a.bases) bases.push_back(std::string(basis_name(b)));
  j["bases"] = bases;
  json w = json::array();
  for (const auto& [b, v] : a.weighting.terms) w.push_back({{"basis", std::string(basis_name(b))}, {"weight", v}});
  j["weighting"] = w;
  j["learner"] = learner_json(a.learner);
  j["folds"] = a.folds;
  if (a.seed) j["seed"] = *a.seed;
  j["tol"] = a.qif.tol;
  j["maxIter"] = a.qif.max_iter;
  j["ridge"] = a.qif.ridge;
  j["twoStep"] = a.qif.two_step;
  j["smallSampleInflation"] = a.qif.small_sample_inflation;
  j["alpha"] = a.alpha;
  if (a.structure) j["structure"] = std::string(structure_name(*a.structure));
  j["includePeriodJ"] = a.include_period_j;
  return j.dump(2);
}

std::vector<BasisKind> bases_for(const TrialDataset& dataset) {
  bool individual = !dataset.clusters.empty();
  for (const auto& c : dataset.clusters) individual = individual && c.population_size() == 1;
  return default_bases(individual);
}

EstimateReport analyze(const TrialDataset& dataset, const ArmConfig& arm, std::uint64_t seed) {
  if (!arm.structure) throw Error(ErrorCode::ConfigError, "arm '" + arm.label + "' has no treatment structure");
  std::string problems;
  int count = 0;
  for (const auto& v : validate(dataset)) {
    if (v.rule == ViolationRule::SingleSequence) continue;
    if (++count <= 5) problems += "\n  " + std::string(rule_name(v.rule)) + ": " + v.message;
  }
  if (count > 0) {
    throw Error(ErrorCode::SchemaError, std::to_string(count) + " data violation(s):" + problems);
  }

  const DesignConfig config =
      DesignConfig::make(*arm.structure, dataset.periods, resolved_sequence_probs(dataset), arm.include_period_j);
  const std::vector<std::string> labels = param_labels(config);
  const std::uint64_t s = arm.seed.value_or(seed);
  // a constant fit has nothing to overfit, so these use every cluster
  const bool fixed = arm.learner.kind == LearnerKind::None || arm.learner.kind == LearnerKind::Mean;
  const int folds = fixed ? 1 : arm.folds;

  const NuisanceFit nuisance = cross_fit(dataset, arm.learner, folds, s);
  StackedDataset stacked = stack_dataset(dataset, config);
  fill_predictions(nuisance, dataset, stacked);
  const std::span<const StackedCluster> span(stacked.clusters);

  EstimateReport report;
  report.correlation = std::string(correlation_name(arm.correlation));
  report.learner = describe_learner(arm.learner);
  report.folds = folds;
  report.seed = s;
  report.warnings = nuisance.warnings;
  switch (arm.correlation) {
    case Correlation::Independence:
    case Correlation::FixedQ: {
      const GeeEstimate est = arm.correlation == Correlation::Independence
                                  ? solve_independence(span, labels)
                                  : solve_fixed_q(span, arm.weighting, labels);
      if (arm.correlation == Correlation::FixedQ) {
        for (const auto& [b, w] : arm.weighting.terms) {
          report.bases.push_back(std::string(basis_name(b)) + "*" + std::to_string(w));
        }
      }
      report.beta = est.beta;
      report.covariance = est.covariance;
      report.condition = est.vhat_rcond;
      report.iterations = 0;
      report.converged = true;
      break;
    }
    case Correlation::Qif: {
      const std::vector<BasisKind> bases = arm.bases.empty() ? bases_for(dataset) : arm.bases;
      const QifEstimate est = solve_qif(span, bases, arm.qif, labels);
      for (BasisKind b : bases) report.bases.push_back(std::string(basis_name(b)));
      report.beta = est.beta;
      report.covariance = est.covariance;
      report.condition = est.c_rcond;
      report.iterations = est.iterations;
      report.converged = est.converged;
      report.objective = est.objective_value;
      report.warnings.insert(report.warnings.end(), est.warnings.begin(), est.warnings.end());
      break;
    }
  }
  report.empty_clusters = stacked.empty_clusters;
  finalize_report(report, config, dataset.cluster_count(), arm.alpha);
  return report;
}

EstimateReport analyze_file(const std::string& path, const SchemaConfig& schema, const ArmConfig& arm) {
  return analyze(ingest_csv(path, schema), arm, arm.seed.value_or(1));
}

}  // namespace swqif

#include "swqif/simgen.hpp"

#include <json.hpp>

#include <cmath>
#include <numeric>

#include "swqif/error.hpp"
#include "swqif/rng.hpp"

namespace swqif {

namespace {

enum Role : std::uint64_t { kCovariates = 1, kSequence, kEnrollment, kEffects, kNoise };

constexpr TreatmentStructure kStructures[] = {TreatmentStructure::Constant, TreatmentStructure::Duration,
                                              TreatmentStructure::Period, TreatmentStructure::Saturated};

double sd_of(double v, bool is_sd) { return is_sd ? v : std::sqrt(v); }

}  // namespace

void Scenario::check() const {
  if (clusters < 1 || periods < 1 || population < 1) {
    throw Error(ErrorCode::ConfigError, "scenario needs I, J and N_i positive");
  }
  if (nij_bernoulli > 0.0) {
    if (nij_bernoulli > 1.0) throw Error(ErrorCode::ConfigError, "enrollment probability must be in (0, 1]");
  } else if (nij_min < 0 || nij_max < nij_min || nij_max > population) {
    throw Error(ErrorCode::ConfigError, "need 0 <= nijMin <= nijMax <= N_i");
  }
  if (sigma < 0 || alpha < 0 || tau < 0 || epsilon < 0) {
    throw Error(ErrorCode::ConfigError, "random-effect scales must be nonnegative");
  }
}

Eigen::VectorXd Scenario::sequence_probs() const {
  Eigen::VectorXd p = Eigen::VectorXd::Constant(periods + 1, 1.0 / periods);
  p(periods) = 0.0;
  return p;
}

DesignConfig Scenario::design_config() const { return DesignConfig::make(structure, periods, sequence_probs()); }

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const char* size : {"20", "100"}) {
    for (TreatmentStructure s : kStructures) out.push_back("cluster-" + std::string(structure_name(s)) + "-" + size);
  }
  for (TreatmentStructure s : kStructures) out.push_back("individual-" + std::string(structure_name(s)) + "-1000");
  return out;
}

Scenario preset(const std::string& name) {
  for (TreatmentStructure s : kStructures) {
    const std::string st(structure_name(s));
    Scenario sc;
    sc.name = name;
    sc.structure = s;
    if (name == "cluster-" + st + "-20") {
      return sc;
    }
    if (name == "cluster-" + st + "-100") {
      sc.clusters = 100;
      sc.periods = 5;
      sc.population = 500;
      sc.nij_min = 5;
      sc.nij_max = 35;
      return sc;
    }
    if (name == "individual-" + st + "-1000") {
      sc.design = Randomization::Individual;
      sc.clusters = 1000;
      sc.periods = 20;
      sc.population = 1;
      sc.nij_min = 0;
      sc.nij_max = 1;
      sc.nij_bernoulli = 0.5;
      sc.sigma = 0.0;
      sc.alpha = 0.0;
      sc.tau = 0.1;
      sc.epsilon = 0.9;
      return sc;
    }
  }
  throw Error(ErrorCode::ConfigError, "unknown preset '" + name + "'");
}

double outcome_mean(Randomization design, TreatmentStructure structure, int periods, const Eigen::Vector4d& x,
                    double x3_bar, double x4_cube_bar, int period, Sequence z) {
  const double J = periods;
  const double j = period;
  const double x1 = x(0), x2 = x(1), x3 = x(2), x4 = x(3);
  const double c3 = x3 - x3_bar;
  const double c4 = x4 * x4 * x4 - x4_cube_bar;
  const bool treated = z.treated_by(period);
  const double d = treated ? static_cast<double>(period - z.start() + 1) : 0.0;
  auto ind = [](bool b) { return b ? 1.0 : 0.0; };

  // shared by the cluster constant/period and individual constant/period outcomes
  const double base = std::exp(x1 * x2) + 0.5 * x4 * x4 + ind(x4 > -1.0) + 2.0 * ind(x3 > 1.0) + ind(x1 > 0.5) * (j + 1.0);
  // individual duration/saturated outcomes
  const double poly = 0.5 * x3 * x3 * x3 + 0.5 * x4 * x4 * x4 + (J + 1.0) / 2.0 * x1 * x2 + ind(x4 > 0.5);

  if (design == Randomization::Cluster) {
    switch (structure) {
      case TreatmentStructure::Constant:
        return ind(treated) * (1.0 + c3 + c4 / 2.0) + base;
      case TreatmentStructure::Duration:
        return ind(treated) * (1.0 + c3 * d / (J + 1.0) + c4 / (J + 1.0)) + 0.5 * std::exp(x1 * x2) +
               ind(x4 > -1.0) + ind(x1 > 0.5) * (j + 1.0) + 2.0 * ind(x3 > 1.0);
      case TreatmentStructure::Period:
        return ind(treated) * (1.0 + c3 * j / 2.0 + c4 * j / J) + base;
      case TreatmentStructure::Saturated:
        return ind(treated) * (1.0 + c3 * (J - j) / 4.0 + c4 * d / 8.0) + std::exp(x1 * x2) + x4 + ind(x4 > -1.0) +
               ind(x3 > 1.0) + ind(x1 > 0.5) * (j + 1.0) / 2.0;
    }
  } else {
    switch (structure) {
      case TreatmentStructure::Constant:
        return ind(treated) * (1.0 + c3 + c4 / 2.0) + base;
      case TreatmentStructure::Duration:
        return ind(treated) * (1.0 + c3 + c4 * d) + poly;
      case TreatmentStructure::Period:
        return ind(treated) * (1.0 + c3 * j / J + c4 / J) + base - 0.5 * std::exp(x1 * x2);
      case TreatmentStructure::Saturated:
        return ind(treated) * (1.0 + c3 * j + c4 * d) + poly;
    }
  }
  return 0.0;
}

namespace {

PotentialOutcomes generate_impl(const Scenario& sc, std::uint64_t rep, bool keep_potential) {
  sc.check();
  const int J = sc.periods;
  const int n = sc.population;
  PotentialOutcomes out;
  TrialDataset& ds = out.observed;
  ds.periods = J;
  ds.covariate_names = {"X1", "X2", "X3", "X4"};
  ds.sequence_probs = sc.sequence_probs();
  ds.clusters.reserve(static_cast<std::size_t>(sc.clusters));
  if (keep_potential) out.potential.resize(static_cast<std::size_t>(sc.clusters));

  const double s_sigma = sd_of(sc.sigma, sc.param_is_sd);
  const double s_alpha = sd_of(sc.alpha, sc.param_is_sd);
  const double s_tau = sd_of(sc.tau, sc.param_is_sd);
  const double s_eps = sd_of(sc.epsilon, sc.param_is_sd);

  for (int i = 0; i < sc.clusters; ++i) {
    const auto key = [&](Role role) {
      return derive_seed({sc.seed, rep, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(role)});
    };
    ClusterData c;
    c.id = std::to_string(i + 1);

    Rng cov_rng(key(kCovariates));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    c.covariates.resize(n, 4);
    const double x1 = normal(cov_rng);
    for (int k = 0; k < n; ++k) {
      c.covariates(k, 0) = x1;
      c.covariates(k, 1) = coin(cov_rng) ? 1.0 : 0.0;
      c.covariates(k, 2) = normal(cov_rng);
      c.covariates(k, 3) = normal(cov_rng);
    }
    const double x3_bar = c.covariates.col(2).mean();
    const double x4_cube_bar = c.covariates.col(3).array().cube().mean();
    c.individual_ids.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) c.individual_ids.push_back(std::to_string(k + 1));

    Rng z_rng(key(kSequence));
    c.sequence = Sequence::starting_at(std::uniform_int_distribution<int>(1, J)(z_rng));

    Rng enroll_rng(key(kEnrollment));
    c.enrolled = BoolArray::Constant(J, n, false);
    std::vector<int> pool(static_cast<std::size_t>(n));
    for (int j = 0; j < J; ++j) {
      if (sc.nij_bernoulli > 0.0) {
        std::bernoulli_distribution take(sc.nij_bernoulli);
        for (int k = 0; k < n; ++k) c.enrolled(j, k) = take(enroll_rng);
      } else {
        const int nij = std::uniform_int_distribution<int>(sc.nij_min, sc.nij_max)(enroll_rng);
        std::iota(pool.begin(), pool.end(), 0);
        // first nij of a partial Fisher-Yates shuffle: uniform subset without replacement
        for (int a = 0; a < nij; ++a) {
          std::swap(pool[a], pool[std::uniform_int_distribution<int>(a, n - 1)(enroll_rng)]);
          c.enrolled(j, pool[a]) = true;
        }
      }
    }

    Rng effect_rng(key(kEffects));
    const double sigma_i = s_sigma * normal(effect_rng);
    Eigen::VectorXd alpha_ij(J);
    for (int j = 0; j < J; ++j) alpha_ij(j) = s_alpha * normal(effect_rng);
    Eigen::VectorXd tau_ik(n);
    for (int k = 0; k < n; ++k) tau_ik(k) = s_tau * normal(effect_rng);

    Rng noise_rng(key(kNoise));
    Eigen::MatrixXd noise(J, n);
    for (int j = 0; j < J; ++j) {
      for (int k = 0; k < n; ++k) noise(j, k) = s_eps * normal(noise_rng);
    }

    auto outcome = [&](Sequence z, int j, int k) {
      const Eigen::Vector4d x = c.covariates.row(k).transpose();
      return outcome_mean(sc.design, sc.structure, J, x, x3_bar, x4_cube_bar, j + 1, z) + sigma_i + alpha_ij(j) +
             tau_ik(k) + noise(j, k);
    };

    c.outcomes = Eigen::MatrixXd::Constant(J, n, std::numeric_limits<double>::quiet_NaN());
    for (int j = 0; j < J; ++j) {
      for (int k = 0; k < n; ++k) {
        if (c.enrolled(j, k)) c.outcomes(j, k) = outcome(c.sequence, j, k);
      }
    }
    if (keep_potential) {
      auto& pot = out.potential[static_cast<std::size_t>(i)];
      for (int zi = 0; zi <= J; ++zi) {
        const Sequence z = zi < J ? Sequence::starting_at(zi + 1) : Sequence::never();
        Eigen::MatrixXd m(J, n);
        for (int j = 0; j < J; ++j) {
          for (int k = 0; k < n; ++k) m(j, k) = outcome(z, j, k);
        }
        pot.push_back(std::move(m));
      }
    }
    ds.clusters.push_back(std::move(c));
  }
  return out;
}

}  // namespace

TrialDataset generate(const Scenario& scenario, std::uint64_t replicate) {
  return generate_impl(scenario, replicate, false).observed;
}

PotentialOutcomes generate_with_potential(const Scenario& scenario, std::uint64_t replicate) {
  return generate_impl(scenario, replicate, true);
}

Eigen::VectorXd true_estimands(const Scenario& scenario) {
  return Eigen::VectorXd::Ones(parameter_count(scenario.structure, scenario.periods, false));
}

Scenario scenario_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("scenario is not valid JSON: ") + e.what());
  }
  if (j.is_string()) return preset(j.get<std::string>());
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "scenario must be a preset name or an object");
  try {
    Scenario sc = j.contains("preset") ? preset(j["preset"].get<std::string>()) : Scenario{};
    if (j.contains("name")) sc.name = j["name"].get<std::string>();
    if (j.contains("design")) {
      const auto d = j["design"].get<std::string>();
      if (d == "cluster") sc.design = Randomization::Cluster;
      else if (d == "individual") sc.design = Randomization::Individual;
      else throw Error(ErrorCode::ConfigError, "design must be 'cluster' or 'individual'");
    }
    if (j.contains("structure")) sc.structure = parse_structure(j["structure"].get<std::string>());
    if (j.contains("clusters")) sc.clusters = j["clusters"].get<int>();
    if (j.contains("periods")) sc.periods = j["periods"].get<int>();
    if (j.contains("population")) sc.population = j["population"].get<int>();
    if (j.contains("nijMin")) sc.nij_min = j["nijMin"].get<int>();
    if (j.contains("nijMax")) sc.nij_max = j["nijMax"].get<int>();
    if (j.contains("nijBernoulli")) sc.nij_bernoulli = j["nijBernoulli"].get<double>();
    if (j.contains("sigma")) sc.sigma = j["sigma"].get<double>();
    if (j.contains("alpha")) sc.alpha = j["alpha"].get<double>();
    if (j.contains("tau")) sc.tau = j["tau"].get<double>();
    if (j.contains("epsilon")) sc.epsilon = j["epsilon"].get<double>();
    if (j.contains("paramIsSd")) sc.param_is_sd = j["paramIsSd"].get<bool>();
    if (j.contains("seed")) sc.seed = j["seed"].get<std::uint64_t>();
    sc.check();
    return sc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("bad scenario field: ") + e.what());
  }
}

std::string scenario_to_json(const Scenario& sc) {
  nlohmann::json j;
  j["name"] = sc.name;
  j["design"] = sc.design == Randomization::Cluster ? "cluster" : "individual";
  j["structure"] = std::string(structure_name(sc.structure));
  j["clusters"] = sc.clusters;
  j["periods"] = sc.periods;
  j["population"] = sc.population;
  j["nijMin"] = sc.nij_min;
  j["nijMax"] = sc.nij_max;
  j["nijBernoulli"] = sc.nij_bernoulli;
  j["sigma"] = sc.sigma;
  j["alpha"] = sc.alpha;
  j["tau"] = sc.tau;
  j["epsilon"] = sc.epsilon;
  j["paramIsSd"] = sc.param_is_sd;
  j["seed"] = sc.seed;
  return j.dump(2);
}

}  // namespace swqif

#include "swqif/validation.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "swqif/gee.hpp"
#include "swqif/rng.hpp"
#include "swqif/simgen.hpp"

namespace swqif {

RandomInstance random_instance(std::uint64_t seed, int max_population) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng(derive_seed({seed, attempt, 0x1A5ULL}));
    std::uniform_int_distribution<int> pick_i(12, 30), pick_j(2, 4), pick_n(1, std::max(1, max_population)),
        pick_s(0, 3);
    std::uniform_real_distribution<double> unif(0.2, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::bernoulli_distribution enrolled(0.75), coin(0.5);

    const int I = pick_i(rng);
    const int J = pick_j(rng);
    const auto structure = static_cast<TreatmentStructure>(pick_s(rng));
    Eigen::VectorXd probs(J + 1);
    for (int z = 0; z <= J; ++z) probs(z) = unif(rng);
    probs /= probs.sum();
    const bool varies = structure == TreatmentStructure::Period || structure == TreatmentStructure::Saturated;
    const bool include_j = varies && coin(rng);

    RandomInstance inst;
    inst.data.periods = J;
    inst.data.covariate_names = {"x"};
    inst.data.sequence_probs = probs;
    std::set<int> seen;
    for (int i = 0; i < I; ++i) {
      ClusterData c;
      c.id = "c" + std::to_string(i);
      const int z = std::uniform_int_distribution<int>(1, J + 1)(rng);
      c.sequence = z <= J ? Sequence::starting_at(z) : Sequence::never();
      seen.insert(z);
      const int n = pick_n(rng);
      c.covariates.resize(n, 1);
      c.enrolled = BoolArray::Constant(J, n, false);
      c.outcomes = Eigen::MatrixXd::Constant(J, n, std::numeric_limits<double>::quiet_NaN());
      for (int k = 0; k < n; ++k) {
        c.individual_ids.push_back(std::to_string(k));
        c.covariates(k, 0) = normal(rng);
        for (int j = 0; j < J; ++j) {
          if (!enrolled(rng)) continue;
          c.enrolled(j, k) = true;
          c.outcomes(j, k) = normal(rng) + (c.sequence.treated_by(j + 1) ? 1.0 : 0.0);
        }
      }
      inst.data.clusters.push_back(std::move(c));
    }
    if (seen.size() < 2) continue;
    inst.config = DesignConfig::make(structure, J, probs, include_j);
    inst.stacked = stack_dataset(inst.data, inst.config);
    for (auto& sc : inst.stacked.clusters) {
      for (int r = 0; r < sc.rows(); ++r) sc.g_hat(r) = 0.5 * normal(rng);
    }
    try {
      solve_independence(inst.stacked.clusters);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::SingularDesign) continue;
      throw;
    }
    return inst;
  }
}

namespace {

// Independence estimator from explicitly materialized S_i on the full J x N_i grid.
Eigen::VectorXd dense_independence(const RandomInstance& inst) {
  const int p = inst.config.parameter_count();
  const int last = inst.config.last_period();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  for (std::size_t i = 0; i < inst.data.clusters.size(); ++i) {
    const auto& c = inst.data.clusters[i];
    const auto& sc = inst.stacked.clusters[i];
    const int n = c.population_size();
    const int cells = last * n;
    Eigen::MatrixXd x(cells, p);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(cells);
    for (int j = 1; j <= last; ++j) {
      const Eigen::VectorXd d = treatment_row(inst.config.structure, inst.config.periods, c.sequence, j,
                                              inst.config.include_period_j) -
                                mean_row(inst.config.structure, inst.config.periods, inst.config.sequence_probs, j,
                                         inst.config.include_period_j);
      for (int k = 0; k < n; ++k) x.row((j - 1) * n + k) = d.transpose();
    }
    for (int r = 0; r < sc.rows(); ++r) v((sc.period[r] - 1) * n + sc.individual[r]) = sc.y(r) - sc.g_hat(r);
    int rows = 0;
    for (int j = 1; j <= last; ++j) rows += c.enrolled_count(j);
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(rows, cells);
    int r = 0;
    for (int j = 1; j <= last; ++j) {
      const double nij = c.enrolled_count(j);
      for (int k = 0; k < n; ++k) {
        if (c.enrolled(j - 1, k)) s(r++, (j - 1) * n + k) = 1.0 / std::sqrt(nij);
      }
    }
    const Eigen::MatrixXd sx = s * x;
    a += sx.transpose() * sx;
    b += sx.transpose() * (s * v);
  }
  return a.fullPivLu().solve(b);
}

std::string fmt(double v) {
  std::ostringstream o;
  o.precision(3);
  o << std::scientific << v;
  return o.str();
}

double min_eig_ratio(const Eigen::MatrixXd& m) {
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues();
  const double tr = std::max(std::abs(m.trace()), 1e-300);
  return ev.minCoeff() / tr;
}

}  // namespace

GradientFn default_gradient() {
  return [](const QifProblem& problem, const Eigen::VectorXd& beta, const Eigen::MatrixXd& c_reg) {
    return problem.gradient_fixed(beta, c_reg);
  };
}

double gradient_check_error(int instances, std::uint64_t seed, const GradientFn& gradient) {
  double worst = 0.0;
  for (int t = 0; t < instances; ++t) {
    const RandomInstance inst = random_instance(derive_seed({seed, static_cast<std::uint64_t>(t), 0x6AADULL}));
    const std::span<const StackedCluster> span(inst.stacked.clusters);
    const bool individual = inst.data.clusters.front().population_size() == 1;
    const QifProblem problem(span, default_bases(individual));
    const GeeEstimate init = solve_independence(span);
    Rng rng(derive_seed({seed, static_cast<std::uint64_t>(t), 0xBE7AULL}));
    std::normal_distribution<double> normal(0.0, 0.5);
    Eigen::VectorXd beta = init.beta;
    for (Eigen::Index k = 0; k < beta.size(); ++k) beta(k) += normal(rng);
    const ExtendedScore s0 = problem.score(beta);
    const Eigen::MatrixXd c_reg = QifProblem::regularize(problem.second_moment(s0.psi_per_cluster), 1e-6);

    const Eigen::VectorXd g = gradient(problem, beta, c_reg);
    Eigen::VectorXd fd(beta.size());
    const double h = 1e-6;
    for (Eigen::Index k = 0; k < beta.size(); ++k) {
      Eigen::VectorXd up = beta, dn = beta;
      up(k) += h;
      dn(k) -= h;
      fd(k) = (problem.objective_fixed(up, c_reg) - problem.objective_fixed(dn, c_reg)) / (2.0 * h);
    }
    const double err = (g - fd).norm() / std::max(fd.norm(), 1e-12);
    worst = std::max(worst, err);
  }
  return worst;
}

std::vector<CheckResult> run_validation(std::uint64_t seed, const GradientFn& gradient) {
  std::vector<CheckResult> out;

  {
    double worst = 0.0;
    for (int t = 0; t < 25; ++t) {
      const RandomInstance inst = random_instance(derive_seed({seed, static_cast<std::uint64_t>(t), 1}));
      const GeeEstimate est = solve_independence(inst.stacked.clusters);
      worst = std::max(worst, (est.beta - dense_independence(inst)).lpNorm<Eigen::Infinity>());
    }
    out.push_back({"independence matches dense S_i oracle", worst <= 1e-10, "max |dbeta| = " + fmt(worst)});
  }

  {
    double worst_beta = 0.0, worst_se = 0.0;
    for (int t = 0; t < 25; ++t) {
      const RandomInstance inst = random_instance(derive_seed({seed, static_cast<std::uint64_t>(t), 2}));
      const GeeEstimate gee = solve_independence(inst.stacked.clusters);
      const QifEstimate qif = solve_qif(inst.stacked.clusters, {BasisKind::Identity});
      worst_beta = std::max(worst_beta, (gee.beta - qif.beta).lpNorm<Eigen::Infinity>());
      const Eigen::ArrayXd se_g = gee.covariance.diagonal().array().sqrt();
      const Eigen::ArrayXd se_q = qif.covariance.diagonal().array().sqrt();
      worst_se = std::max(worst_se, ((se_g - se_q).abs() / se_g.max(1e-300)).maxCoeff());
    }
    out.push_back({"QIF with the identity basis reduces to independence", worst_beta <= 1e-8 && worst_se <= 1e-6,
                   "max |dbeta| = " + fmt(worst_beta) + ", max relative dSE = " + fmt(worst_se)});
  }

  {
    const double err = gradient_check_error(10, seed, gradient);
    out.push_back({"QIF gradient matches central differences", err <= 1e-5, "max relative error = " + fmt(err)});
  }

  {
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
      const RandomInstance inst = random_instance(derive_seed({seed, static_cast<std::uint64_t>(t), 4}));
      const GeeEstimate gee = solve_independence(inst.stacked.clusters);
      worst = std::min(worst, min_eig_ratio(gee.covariance));
      const bool individual = inst.data.clusters.front().population_size() == 1;
      const QifEstimate qif = solve_qif(inst.stacked.clusters, default_bases(individual));
      if (qif.covariance.trace() > 0.0) worst = std::min(worst, min_eig_ratio(qif.covariance));
    }
    out.push_back({"sandwich and QIF covariances are PSD", worst >= -1e-10,
                   "min eigenvalue / trace = " + fmt(worst)});
  }

  {
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
      const RandomInstance inst = random_instance(derive_seed({seed, static_cast<std::uint64_t>(t), 5}));
      const auto& cfg = inst.config;
      for (int j = 1; j <= cfg.last_period(); ++j) {
        Eigen::VectorXd acc = -mean_row(cfg.structure, cfg.periods, cfg.sequence_probs, j, cfg.include_period_j);
        for (int z = 1; z <= cfg.periods; ++z) {
          acc += cfg.sequence_probs(z - 1) *
                 treatment_row(cfg.structure, cfg.periods, Sequence::starting_at(z), j, cfg.include_period_j);
        }
        acc += cfg.sequence_probs(cfg.periods) *
               treatment_row(cfg.structure, cfg.periods, Sequence::never(), j, cfg.include_period_j);
        worst = std::max(worst, acc.lpNorm<Eigen::Infinity>());
      }
    }
    out.push_back({"design centering has zero mean under pi", worst <= 1e-14, "max |E[D] - mu| = " + fmt(worst)});
  }

  {
    double worst = 0.0;
    for (TreatmentStructure s : {TreatmentStructure::Constant, TreatmentStructure::Duration,
                                 TreatmentStructure::Period, TreatmentStructure::Saturated}) {
      Scenario sc = preset("cluster-" + std::string(structure_name(s)) + "-20");
      sc.clusters = 2000;
      sc.seed = seed;
      const TrialDataset data = generate(sc, 0);
      const DesignConfig cfg = sc.design_config();
      const StackedDataset stacked = stack_dataset(data, cfg);
      const Eigen::VectorXd truth = true_estimands(sc);
      Eigen::MatrixXd psis(static_cast<Eigen::Index>(stacked.clusters.size()), cfg.parameter_count());
      for (std::size_t i = 0; i < stacked.clusters.size(); ++i) {
        psis.row(static_cast<Eigen::Index>(i)) = psi(stacked.clusters[i], truth).transpose();
      }
      const Eigen::RowVectorXd mean = psis.colwise().mean();
      const Eigen::RowVectorXd sd =
          ((psis.rowwise() - mean).array().square().colwise().sum() / (psis.rows() - 1)).sqrt();
      const Eigen::RowVectorXd z = mean.array().abs() / (sd.array() / std::sqrt(static_cast<double>(psis.rows())));
      worst = std::max(worst, z.maxCoeff());
    }
    out.push_back({"score is unbiased at the true effects", worst <= 3.0, "max |mean psi| / MCSE = " + fmt(worst)});
  }

  {
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
      const RandomInstance inst = random_instance(derive_seed({seed, static_cast<std::uint64_t>(t), 7}));
      const GeeEstimate gee = solve_independence(inst.stacked.clusters);
      const bool individual = inst.data.clusters.front().population_size() == 1;
      const auto cert =
          variance_ordering_check(inst.stacked.clusters, gee.beta, {BasisKind::Identity}, default_bases(individual));
      worst = std::min(worst, cert.min_eigenvalue / std::max(std::abs(cert.trace), 1e-300));
    }
    out.push_back({"more bases never lose information", worst >= -1e-8, "min eigenvalue / trace = " + fmt(worst)});
  }
  return out;
}

std::string format_checks(const std::vector<CheckResult>& checks, bool verbose) {
  std::ostringstream o;
  int failed = 0;
  for (const auto& c : checks) {
    if (!c.passed) ++failed;
    o << (c.passed ? "PASS " : "FAIL ") << c.name;
    if (verbose || !c.passed) o << "  (" << c.detail << ")";
    o << '\n';
  }
  o << (checks.size() - failed) << "/" << checks.size() << " checks passed\n";
  return o.str();
}

}  // namespace swqif

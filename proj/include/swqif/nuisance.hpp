#pragma once

// Outcome-regression learners and cluster-level cross-fitting of g_j(X).

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "swqif/design.hpp"
#include "swqif/trial.hpp"

namespace swqif {

// Mean: training-sample mean outcome, i.e. an intercept-only (covariate-free) fit.
enum class LearnerKind { None, Mean, Linear, Tree, Forest, Ensemble };
enum class Pooling { PerPeriod, PooledWithPeriodFeature };

std::string_view learner_name(LearnerKind kind);
LearnerKind parse_learner(std::string_view name);

struct TreeParams {
  int max_depth = 6;
  int min_leaf = 10;
};

struct ForestParams {
  int n_trees = 60;
  int max_depth = 10;
  int min_leaf = 5;
  int mtry = 0;  // 0: ceil(features / 3)
  std::uint64_t bootstrap_seed = 1;
};

struct LearnerSpec {
  LearnerKind kind = LearnerKind::None;
  TreeParams tree;
  ForestParams forest;
  std::vector<LearnerSpec> members;  // Ensemble only
  int inner_folds = 5;
  Pooling pooling = Pooling::PerPeriod;
  bool cluster_summaries = false;

  static LearnerSpec none() { return {}; }
  static LearnerSpec mean();
  static LearnerSpec linear();
  static LearnerSpec tree_learner(TreeParams params = {});
  static LearnerSpec forest_learner(ForestParams params = {});
  // Linear + tree + forest, stacked on the simplex.
  static LearnerSpec default_ensemble();

  void check() const;
};

// Rows for one learner fit. group holds the owning cluster's index; bootstrap
// and inner cross-validation resample groups, never individual rows.
struct TrainingSet {
  Eigen::MatrixXd features;
  Eigen::VectorXd y;
  std::vector<int> group;

  int rows() const { return static_cast<int>(y.size()); }
};

class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual double predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const = 0;
  Eigen::VectorXd predict_all(const Eigen::MatrixXd& x) const;
};

using PredictorPtr = std::shared_ptr<const Predictor>;

class LinearPredictor final : public Predictor {
 public:
  LinearPredictor(double intercept, Eigen::VectorXd coef) : intercept_(intercept), coef_(std::move(coef)) {}
  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const override;
  double intercept() const { return intercept_; }
  const Eigen::VectorXd& coefficients() const { return coef_; }

 private:
  double intercept_;
  Eigen::VectorXd coef_;
};

class TreePredictor final : public Predictor {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };
  explicit TreePredictor(std::vector<Node> nodes) : nodes_(std::move(nodes)) {}
  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const override;
  const std::vector<Node>& nodes() const { return nodes_; }

 private:
  std::vector<Node> nodes_;
};

class ForestPredictor final : public Predictor {
 public:
  explicit ForestPredictor(std::vector<std::shared_ptr<const TreePredictor>> trees) : trees_(std::move(trees)) {}
  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const override;
  const std::vector<std::shared_ptr<const TreePredictor>>& trees() const { return trees_; }

 private:
  std::vector<std::shared_ptr<const TreePredictor>> trees_;
};

class EnsemblePredictor final : public Predictor {
 public:
  EnsemblePredictor(std::vector<PredictorPtr> members, Eigen::VectorXd weights, Eigen::VectorXd member_cv_loss,
                    double ensemble_cv_loss)
      : members_(std::move(members)),
        weights_(std::move(weights)),
        member_cv_loss_(std::move(member_cv_loss)),
        ensemble_cv_loss_(ensemble_cv_loss) {}
  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const override;
  const Eigen::VectorXd& weights() const { return weights_; }
  // Mean squared inner-CV error of each member and of the weighted combination.
  const Eigen::VectorXd& member_cv_loss() const { return member_cv_loss_; }
  double ensemble_cv_loss() const { return ensemble_cv_loss_; }

 private:
  std::vector<PredictorPtr> members_;
  Eigen::VectorXd weights_;
  Eigen::VectorXd member_cv_loss_;
  double ensemble_cv_loss_;
};

// Minimizes ||y - P w||^2 over w >= 0, sum(w) = 1 by exhaustive active-set
// search (exact for the small member counts used here).
Eigen::VectorXd simplex_stacking_weights(const Eigen::MatrixXd& predictions, const Eigen::VectorXd& y);

PredictorPtr fit_learner(const LearnerSpec& spec, const TrainingSet& data, std::uint64_t seed);

// Random partition of cluster indices 0..I-1 into M folds whose sizes differ by at most one.
std::vector<std::vector<int>> partition_clusters(int cluster_count, int folds, std::uint64_t seed);

struct NuisanceFit {
  LearnerSpec spec;
  int periods = 0;
  int covariates = 0;
  std::vector<std::vector<int>> folds;
  std::vector<int> fold_of;  // by cluster index
  std::unordered_map<std::string, int> cluster_index;
  Eigen::MatrixXd cluster_means;  // I x q, present when spec.cluster_summaries
  // models[m][j-1]; empty for the None learner
  std::vector<std::vector<PredictorPtr>> models;
  std::vector<std::string> warnings;
};

NuisanceFit cross_fit(const TrialDataset& dataset, const LearnerSpec& spec, int folds, std::uint64_t seed);

double predict(const NuisanceFit& fit, const std::string& cluster_id, int period,
               const Eigen::Ref<const Eigen::RowVectorXd>& x);

// Writes cross-fitted predictions into g_hat of every stacked cluster.
void fill_predictions(const NuisanceFit& fit, const TrialDataset& dataset, StackedDataset& stacked);

}  // namespace swqif

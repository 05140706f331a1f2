#include "swqif/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "swqif/error.hpp"
#include "swqif/rng.hpp"

namespace swqif {

std::string_view learner_name(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::None: return "none";
    case LearnerKind::Mean: return "mean";
    case LearnerKind::Linear: return "linear";
    case LearnerKind::Tree: return "tree";
    case LearnerKind::Forest: return "forest";
    case LearnerKind::Ensemble: return "ensemble";
  }
  return "?";
}

LearnerKind parse_learner(std::string_view name) {
  for (LearnerKind k : {LearnerKind::None, LearnerKind::Mean, LearnerKind::Linear, LearnerKind::Tree, LearnerKind::Forest,
                        LearnerKind::Ensemble}) {
    if (learner_name(k) == name) return k;
  }
  if (name == "unadjusted") return LearnerKind::Mean;
  throw Error(ErrorCode::ConfigError, "unknown learner '" + std::string(name) + "'");
}

LearnerSpec LearnerSpec::mean() {
  LearnerSpec s;
  s.kind = LearnerKind::Mean;
  return s;
}

LearnerSpec LearnerSpec::linear() {
  LearnerSpec s;
  s.kind = LearnerKind::Linear;
  return s;
}

LearnerSpec LearnerSpec::tree_learner(TreeParams params) {
  LearnerSpec s;
  s.kind = LearnerKind::Tree;
  s.tree = params;
  return s;
}

LearnerSpec LearnerSpec::forest_learner(ForestParams params) {
  LearnerSpec s;
  s.kind = LearnerKind::Forest;
  s.forest = params;
  return s;
}

LearnerSpec LearnerSpec::default_ensemble() {
  LearnerSpec s;
  s.kind = LearnerKind::Ensemble;
  s.members = {linear(), tree_learner(), forest_learner()};
  return s;
}

void LearnerSpec::check() const {
  switch (kind) {
    case LearnerKind::Tree:
      if (tree.max_depth < 0 || tree.min_leaf < 1) throw Error(ErrorCode::ConfigError, "tree needs maxDepth >= 0, minLeaf >= 1");
      break;
    case LearnerKind::Forest:
      if (forest.n_trees < 1 || forest.max_depth < 0 || forest.min_leaf < 1 || forest.mtry < 0) {
        throw Error(ErrorCode::ConfigError, "forest needs nTrees >= 1, maxDepth >= 0, minLeaf >= 1, mtry >= 0");
      }
      break;
    case LearnerKind::Ensemble:
      if (members.empty()) throw Error(ErrorCode::ConfigError, "ensemble needs at least one member");
      if (members.size() > 10) throw Error(ErrorCode::ConfigError, "ensemble supports at most 10 members");
      if (inner_folds < 2) throw Error(ErrorCode::ConfigError, "ensemble needs innerFolds >= 2");
      for (const auto& m : members) {
        if (m.kind == LearnerKind::Ensemble) throw Error(ErrorCode::ConfigError, "nested ensembles are not supported");
        m.check();
      }
      break;
    default:
      break;
  }
}

Eigen::VectorXd Predictor::predict_all(const Eigen::MatrixXd& x) const {
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) out(r) = predict(x.row(r));
  return out;
}

double LinearPredictor::predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  return intercept_ + x.dot(coef_.transpose());
}

double TreePredictor::predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  int n = 0;
  while (nodes_[n].feature >= 0) {
    const Node& node = nodes_[n];
    n = x(node.feature) <= node.threshold ? node.left : node.right;
  }
  return nodes_[n].value;
}

double ForestPredictor::predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  double s = 0.0;
  for (const auto& t : trees_) s += t->predict(x);
  return s / static_cast<double>(trees_.size());
}

double EnsemblePredictor::predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  double s = 0.0;
  for (std::size_t m = 0; m < members_.size(); ++m) {
    if (weights_(static_cast<Eigen::Index>(m)) != 0.0) s += weights_(static_cast<Eigen::Index>(m)) * members_[m]->predict(x);
  }
  return s;
}

namespace {

// Appends a one-hot period indicator before delegating.
class PeriodFeaturePredictor final : public Predictor {
 public:
  PeriodFeaturePredictor(PredictorPtr base, int period, int periods)
      : base_(std::move(base)), period_(period), periods_(periods) {}
  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const override {
    Eigen::RowVectorXd full = Eigen::RowVectorXd::Zero(x.size() + periods_);
    full.head(x.size()) = x;
    full(x.size() + period_ - 1) = 1.0;
    return base_->predict(full);
  }

 private:
  PredictorPtr base_;
  int period_;
  int periods_;
};

PredictorPtr fit_linear(const TrainingSet& data) {
  const Eigen::Index n = data.rows();
  const Eigen::Index q = data.features.cols();
  Eigen::MatrixXd design(n, q + 1);
  design.col(0).setOnes();
  design.rightCols(q) = data.features;
  const Eigen::VectorXd coef = design.completeOrthogonalDecomposition().solve(data.y);
  return std::make_shared<LinearPredictor>(coef(0), coef.tail(q));
}

class CartBuilder {
 public:
  CartBuilder(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w, int max_depth,
              double min_leaf, int mtry, Rng* rng)
      : x_(x), y_(y), w_(w), max_depth_(max_depth), min_leaf_(min_leaf), mtry_(mtry), rng_(rng) {}

  std::shared_ptr<TreePredictor> build() {
    const int q = static_cast<int>(x_.cols());
    std::vector<int> active;
    for (int r = 0; r < static_cast<int>(y_.size()); ++r) {
      if (w_(r) > 0.0) active.push_back(r);
    }
    if (active.empty()) throw Error(ErrorCode::EmptyTraining, "tree has no rows with positive weight");
    order_.assign(static_cast<std::size_t>(q), active);
    for (int f = 0; f < q; ++f) {
      std::stable_sort(order_[f].begin(), order_[f].end(), [&](int a, int b) { return x_(a, f) < x_(b, f); });
    }
    base_ = active;
    goes_left_.assign(y_.size(), 0);
    features_.resize(static_cast<std::size_t>(q));
    std::iota(features_.begin(), features_.end(), 0);
    grow(0, static_cast<int>(active.size()), 0);
    return std::make_shared<TreePredictor>(std::move(nodes_));
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  int grow(int begin, int end, int depth) {
    double sw = 0.0, sy = 0.0, syy = 0.0;
    for (int i = begin; i < end; ++i) {
      const int r = base_[i];
      sw += w_(r);
      sy += w_(r) * y_(r);
      syy += w_(r) * y_(r) * y_(r);
    }
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    nodes_[id].value = sy / sw;

    const double sse = syy - sy * sy / sw;
    if (depth >= max_depth_ || sw < 2.0 * min_leaf_ || x_.cols() == 0 || sse <= 1e-12 * std::max(syy, 1e-300)) {
      return id;
    }
    const Split best = find_split(begin, end, sw, sy);
    if (best.feature < 0 || best.gain <= 1e-12 * sse) return id;

    int n_left = 0;
    for (int i = begin; i < end; ++i) {
      const int r = base_[i];
      goes_left_[r] = x_(r, best.feature) <= best.threshold ? 1 : 0;
      n_left += goes_left_[r];
    }
    auto left_first = [&](int r) { return goes_left_[r] == 1; };
    std::stable_partition(base_.begin() + begin, base_.begin() + end, left_first);
    for (auto& ord : order_) std::stable_partition(ord.begin() + begin, ord.begin() + end, left_first);

    nodes_[id].feature = best.feature;
    nodes_[id].threshold = best.threshold;
    const int left = grow(begin, begin + n_left, depth + 1);
    const int right = grow(begin + n_left, end, depth + 1);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  Split find_split(int begin, int end, double sw, double sy) {
    const int q = static_cast<int>(x_.cols());
    int candidates = q;
    if (mtry_ > 0 && mtry_ < q && rng_ != nullptr) {
      // partial Fisher-Yates over the feature list
      for (int i = 0; i < mtry_; ++i) {
        std::uniform_int_distribution<int> pick(i, q - 1);
        std::swap(features_[i], features_[pick(*rng_)]);
      }
      candidates = mtry_;
    }
    Split best;
    const double parent = sy * sy / sw;
    for (int c = 0; c < candidates; ++c) {
      const int f = features_[c];
      const auto& ord = order_[f];
      double wl = 0.0, yl = 0.0;
      for (int i = begin; i + 1 < end; ++i) {
        const int r = ord[i];
        wl += w_(r);
        yl += w_(r) * y_(r);
        const double xv = x_(r, f);
        const double xn = x_(ord[i + 1], f);
        if (!(xn > xv)) continue;
        const double wr = sw - wl;
        if (wl < min_leaf_ || wr < min_leaf_) continue;
        const double yr = sy - yl;
        const double gain = yl * yl / wl + yr * yr / wr - parent;
        if (gain > best.gain) {
          best.gain = gain;
          best.feature = f;
          best.threshold = 0.5 * (xv + xn);
          if (!(best.threshold < xn) || best.threshold < xv) best.threshold = xv;
        }
      }
    }
    return best;
  }

  const Eigen::MatrixXd& x_;
  const Eigen::VectorXd& y_;
  const Eigen::VectorXd& w_;
  int max_depth_;
  double min_leaf_;
  int mtry_;
  Rng* rng_;
  std::vector<std::vector<int>> order_;  // per feature, node ranges sorted by that feature
  std::vector<int> base_;                // node ranges in arbitrary order
  std::vector<char> goes_left_;
  std::vector<int> features_;
  std::vector<TreePredictor::Node> nodes_;
};

PredictorPtr fit_tree(const LearnerSpec& spec, const TrainingSet& data) {
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(data.rows());
  return CartBuilder(data.features, data.y, w, spec.tree.max_depth, spec.tree.min_leaf, 0, nullptr).build();
}

PredictorPtr fit_forest(const LearnerSpec& spec, const TrainingSet& data, std::uint64_t seed) {
  const int q = static_cast<int>(data.features.cols());
  const int mtry = spec.forest.mtry > 0 ? std::min(spec.forest.mtry, std::max(q, 1))
                                        : std::max(1, (q + 2) / 3);
  // dense relabelling of the groups present
  std::map<int, int> dense;
  for (int g : data.group) dense.emplace(g, 0);
  int next = 0;
  for (auto& [g, idx] : dense) idx = next++;
  std::vector<int> row_group(data.group.size());
  for (std::size_t r = 0; r < data.group.size(); ++r) row_group[r] = dense.at(data.group[r]);
  const int groups = next;

  std::vector<std::shared_ptr<const TreePredictor>> trees;
  trees.reserve(static_cast<std::size_t>(spec.forest.n_trees));
  std::vector<int> draws(static_cast<std::size_t>(groups));
  Eigen::VectorXd w(data.rows());
  for (int t = 0; t < spec.forest.n_trees; ++t) {
    Rng rng(derive_seed({seed, spec.forest.bootstrap_seed, static_cast<std::uint64_t>(t)}));
    std::fill(draws.begin(), draws.end(), 0);
    std::uniform_int_distribution<int> pick(0, groups - 1);
    for (int b = 0; b < groups; ++b) ++draws[pick(rng)];
    for (int r = 0; r < data.rows(); ++r) w(r) = draws[row_group[r]];
    trees.push_back(
        CartBuilder(data.features, data.y, w, spec.forest.max_depth, spec.forest.min_leaf, mtry, &rng).build());
  }
  return std::make_shared<ForestPredictor>(std::move(trees));
}

TrainingSet subset(const TrainingSet& data, const std::vector<int>& rows) {
  TrainingSet out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), data.features.cols());
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  out.group.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = data.features.row(rows[i]);
    out.y(static_cast<Eigen::Index>(i)) = data.y(rows[i]);
    out.group.push_back(data.group[rows[i]]);
  }
  return out;
}

PredictorPtr fit_ensemble(const LearnerSpec& spec, const TrainingSet& data, std::uint64_t seed) {
  const int n = data.rows();
  const int members = static_cast<int>(spec.members.size());

  // inner folds over groups; fall back to rows when there is a single group
  std::map<int, int> dense;
  for (int g : data.group) dense.emplace(g, 0);
  int next = 0;
  for (auto& [g, idx] : dense) idx = next++;
  std::vector<int> unit(static_cast<std::size_t>(n));
  int units = next;
  if (units >= 2) {
    for (int r = 0; r < n; ++r) unit[r] = dense.at(data.group[r]);
  } else {
    std::iota(unit.begin(), unit.end(), 0);
    units = n;
  }

  Eigen::MatrixXd cv = Eigen::MatrixXd::Zero(n, members);
  if (units >= 2) {
    const int k = std::min(spec.inner_folds, units);
    const auto folds = partition_clusters(units, k, derive_seed({seed, 0x5EEDULL}));
    std::vector<int> fold_of(static_cast<std::size_t>(units));
    for (int f = 0; f < k; ++f) {
      for (int u : folds[f]) fold_of[u] = f;
    }
    for (int f = 0; f < k; ++f) {
      std::vector<int> train, test;
      for (int r = 0; r < n; ++r) (fold_of[unit[r]] == f ? test : train).push_back(r);
      const TrainingSet tr = subset(data, train);
      const TrainingSet te = subset(data, test);
      for (int m = 0; m < members; ++m) {
        const auto model = fit_learner(spec.members[m], tr,
                                       derive_seed({seed, static_cast<std::uint64_t>(f), static_cast<std::uint64_t>(m)}));
        const Eigen::VectorXd pred = model->predict_all(te.features);
        for (std::size_t i = 0; i < test.size(); ++i) cv(test[i], m) = pred(static_cast<Eigen::Index>(i));
      }
    }
  }

  Eigen::VectorXd weights = Eigen::VectorXd::Zero(members);
  Eigen::VectorXd member_loss = Eigen::VectorXd::Zero(members);
  double ensemble_loss = 0.0;
  if (units >= 2) {
    weights = simplex_stacking_weights(cv, data.y);
    for (int m = 0; m < members; ++m) member_loss(m) = (data.y - cv.col(m)).squaredNorm() / n;
    ensemble_loss = (data.y - cv * weights).squaredNorm() / n;
  } else {
    weights(0) = 1.0;
  }

  std::vector<PredictorPtr> fitted;
  fitted.reserve(spec.members.size());
  for (int m = 0; m < members; ++m) {
    fitted.push_back(fit_learner(spec.members[m], data, derive_seed({seed, 0xF011ULL, static_cast<std::uint64_t>(m)})));
  }
  return std::make_shared<EnsemblePredictor>(std::move(fitted), std::move(weights), std::move(member_loss),
                                             ensemble_loss);
}

}  // namespace

Eigen::VectorXd simplex_stacking_weights(const Eigen::MatrixXd& predictions, const Eigen::VectorXd& y) {
  const int m = static_cast<int>(predictions.cols());
  if (m < 1 || m > 20) throw Error(ErrorCode::DimensionMismatch, "stacking needs between 1 and 20 members");
  if (predictions.rows() != y.size()) throw Error(ErrorCode::DimensionMismatch, "prediction rows differ from y");
  // With sum(w) = 1 the residual is E w, E = y 1^T - P.
  const Eigen::MatrixXd e = (-predictions).colwise() + y;
  const Eigen::MatrixXd r = e.transpose() * e;

  Eigen::VectorXd best = Eigen::VectorXd::Zero(m);
  double best_loss = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask < (1U << m); ++mask) {
    std::vector<int> idx;
    for (int k = 0; k < m; ++k) {
      if (mask & (1U << k)) idx.push_back(k);
    }
    const int s = static_cast<int>(idx.size());
    // KKT system of min w^T R_S w subject to 1^T w = 1
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(s + 1, s + 1);
    for (int a = 0; a < s; ++a) {
      for (int b = 0; b < s; ++b) kkt(a, b) = 2.0 * r(idx[a], idx[b]);
      kkt(a, s) = 1.0;
      kkt(s, a) = 1.0;
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(s + 1);
    rhs(s) = 1.0;
    const Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
    bool feasible = true;
    for (int a = 0; a < s; ++a) {
      if (!std::isfinite(sol(a)) || sol(a) < -1e-12) feasible = false;
      w(idx[a]) = std::max(sol(a), 0.0);
    }
    if (!feasible || w.sum() <= 0.0) continue;
    w /= w.sum();
    const double loss = (e * w).squaredNorm();
    if (loss < best_loss) {
      best_loss = loss;
      best = w;
    }
  }
  return best;
}

PredictorPtr fit_learner(const LearnerSpec& spec, const TrainingSet& data, std::uint64_t seed) {
  spec.check();
  if (data.rows() == 0) throw Error(ErrorCode::EmptyTraining, "learner '" + std::string(learner_name(spec.kind)) + "' got no training rows");
  if (data.features.rows() != data.rows() || static_cast<int>(data.group.size()) != data.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "training features, outcomes and groups differ in length");
  }
  switch (spec.kind) {
    case LearnerKind::None: return std::make_shared<LinearPredictor>(0.0, Eigen::VectorXd::Zero(data.features.cols()));
    case LearnerKind::Mean:
      return std::make_shared<LinearPredictor>(data.y.mean(), Eigen::VectorXd::Zero(data.features.cols()));
    case LearnerKind::Linear: return fit_linear(data);
    case LearnerKind::Tree: return fit_tree(spec, data);
    case LearnerKind::Forest: return fit_forest(spec, data, seed);
    case LearnerKind::Ensemble: return fit_ensemble(spec, data, seed);
  }
  throw Error(ErrorCode::ConfigError, "unknown learner kind");
}

std::vector<std::vector<int>> partition_clusters(int cluster_count, int folds, std::uint64_t seed) {
  if (folds < 1) throw Error(ErrorCode::ConfigError, "number of folds must be at least 1");
  if (folds > cluster_count) {
    throw Error(ErrorCode::TooManyFolds, std::to_string(folds) + " folds requested for " + std::to_string(cluster_count) +
                                             " clusters");
  }
  std::vector<int> perm(static_cast<std::size_t>(cluster_count));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed({seed, 0xF01DULL}));
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<int>> out(static_cast<std::size_t>(folds));
  for (int pos = 0; pos < cluster_count; ++pos) out[pos % folds].push_back(perm[pos]);
  for (auto& f : out) std::sort(f.begin(), f.end());
  return out;
}

namespace {

Eigen::RowVectorXd feature_row(const NuisanceFit& fit, int cluster, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  if (!fit.spec.cluster_summaries) return x;
  Eigen::RowVectorXd out(x.size() + fit.cluster_means.cols());
  out << x, fit.cluster_means.row(cluster);
  return out;
}

bool is_flexible(LearnerKind kind) {
  return kind == LearnerKind::Tree || kind == LearnerKind::Forest || kind == LearnerKind::Ensemble;
}

}  // namespace

NuisanceFit cross_fit(const TrialDataset& dataset, const LearnerSpec& spec, int folds, std::uint64_t seed) {
  spec.check();
  const int n_clusters = dataset.cluster_count();
  const int J = dataset.periods;
  const int q = dataset.covariate_count();

  NuisanceFit fit;
  fit.spec = spec;
  fit.periods = J;
  fit.covariates = q;
  fit.folds = partition_clusters(n_clusters, folds, seed);
  fit.fold_of.assign(static_cast<std::size_t>(n_clusters), 0);
  for (int m = 0; m < folds; ++m) {
    for (int i : fit.folds[m]) fit.fold_of[i] = m;
  }
  for (int i = 0; i < n_clusters; ++i) fit.cluster_index.emplace(dataset.clusters[i].id, i);
  if (spec.kind == LearnerKind::None) return fit;

  if (spec.cluster_summaries) {
    fit.cluster_means.resize(n_clusters, q);
    for (int i = 0; i < n_clusters; ++i) {
      const auto& x = dataset.clusters[i].covariates;
      fit.cluster_means.row(i) = x.rows() > 0 ? Eigen::RowVectorXd(x.colwise().mean()) : Eigen::RowVectorXd::Zero(q);
    }
  }
  const int width = q + (spec.cluster_summaries ? q : 0);

  // rows per period, then concatenated for pooled fits
  auto training = [&](int fold, bool with_period) {
    std::vector<Eigen::RowVectorXd> feats;
    std::vector<double> ys;
    std::vector<int> groups;
    std::vector<int> periods;
    for (int i = 0; i < n_clusters; ++i) {
      if (folds > 1 && fit.fold_of[i] == fold) continue;
      const auto& c = dataset.clusters[i];
      for (int j = 1; j <= J; ++j) {
        for (int k = 0; k < c.population_size(); ++k) {
          if (!c.enrolled(j - 1, k)) continue;
          feats.push_back(feature_row(fit, i, c.covariates.row(k)));
          ys.push_back(c.outcomes(j - 1, k));
          groups.push_back(i);
          periods.push_back(j);
        }
      }
    }
    std::vector<TrainingSet> per(static_cast<std::size_t>(with_period ? 1 : J));
    std::vector<std::vector<int>> rows_of(per.size());
    for (std::size_t r = 0; r < ys.size(); ++r) rows_of[with_period ? 0 : periods[r] - 1].push_back(static_cast<int>(r));
    for (std::size_t s = 0; s < per.size(); ++s) {
      auto& ts = per[s];
      const auto& rows = rows_of[s];
      const int extra = with_period ? J : 0;
      ts.features = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), width + extra);
      ts.y.resize(static_cast<Eigen::Index>(rows.size()));
      for (std::size_t a = 0; a < rows.size(); ++a) {
        const int r = rows[a];
        ts.features.row(static_cast<Eigen::Index>(a)).head(width) = feats[r];
        if (with_period) ts.features(static_cast<Eigen::Index>(a), width + periods[r] - 1) = 1.0;
        ts.y(static_cast<Eigen::Index>(a)) = ys[r];
        ts.group.push_back(groups[r]);
      }
    }
    return per;
  };

  auto note_small = [&](int fold, int period, int rows) {
    if (is_flexible(spec.kind) && rows < 50) {
      fit.warnings.push_back("fold " + std::to_string(fold + 1) + (period > 0 ? " period " + std::to_string(period) : " pooled") +
                             ": only " + std::to_string(rows) +
                             " training rows for a flexible learner; a parametric learner is advisable");
    }
  };

  fit.models.resize(static_cast<std::size_t>(folds));
  for (int m = 0; m < folds; ++m) {
    auto& models = fit.models[m];
    models.resize(static_cast<std::size_t>(J));
    PredictorPtr pooled;
    auto get_pooled = [&]() {
      if (!pooled) {
        const TrainingSet all = training(m, true).front();
        if (all.rows() == 0) {
          throw Error(ErrorCode::EmptyTraining, "fold " + std::to_string(m + 1) + " has no training rows outside it");
        }
        note_small(m, 0, all.rows());
        pooled = fit_learner(spec, all, derive_seed({seed, static_cast<std::uint64_t>(m), 0xB001ULL}));
      }
      return pooled;
    };
    if (spec.pooling == Pooling::PooledWithPeriodFeature) {
      for (int j = 1; j <= J; ++j) models[j - 1] = std::make_shared<PeriodFeaturePredictor>(get_pooled(), j, J);
      continue;
    }
    const auto per = training(m, false);
    for (int j = 1; j <= J; ++j) {
      const TrainingSet& ts = per[j - 1];
      if (ts.rows() == 0) {
        fit.warnings.push_back("fold " + std::to_string(m + 1) + " period " + std::to_string(j) +
                               " has no training rows; using the pooled model with a period feature");
        models[j - 1] = std::make_shared<PeriodFeaturePredictor>(get_pooled(), j, J);
        continue;
      }
      note_small(m, j, ts.rows());
      models[j - 1] = fit_learner(spec, ts, derive_seed({seed, static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(j)}));
    }
  }
  return fit;
}

double predict(const NuisanceFit& fit, const std::string& cluster_id, int period,
               const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  const auto it = fit.cluster_index.find(cluster_id);
  if (it == fit.cluster_index.end()) throw Error(ErrorCode::UnknownCluster, "cluster '" + cluster_id + "' is not in any fold");
  if (period < 1 || period > fit.periods) {
    throw Error(ErrorCode::PeriodOutOfRange, "period " + std::to_string(period) + " outside 1.." + std::to_string(fit.periods));
  }
  if (x.size() != fit.covariates) {
    throw Error(ErrorCode::DimensionMismatch, "covariate row has " + std::to_string(x.size()) + " entries, expected " +
                                                  std::to_string(fit.covariates));
  }
  if (fit.models.empty()) return 0.0;
  const int i = it->second;
  return fit.models[fit.fold_of[i]][period - 1]->predict(feature_row(fit, i, x));
}

void fill_predictions(const NuisanceFit& fit, const TrialDataset& dataset, StackedDataset& stacked) {
  if (stacked.clusters.size() != dataset.clusters.size()) {
    throw Error(ErrorCode::DimensionMismatch, "stacked data and dataset have different cluster counts");
  }
  for (std::size_t i = 0; i < stacked.clusters.size(); ++i) {
    auto& sc = stacked.clusters[i];
    const auto& c = dataset.clusters[i];
    sc.g_hat = Eigen::VectorXd::Zero(sc.rows());
    if (fit.models.empty()) continue;
    for (int r = 0; r < sc.rows(); ++r) {
      sc.g_hat(r) = predict(fit, c.id, sc.period[r], c.covariates.row(sc.individual[r]));
    }
  }
}

}  // namespace swqif

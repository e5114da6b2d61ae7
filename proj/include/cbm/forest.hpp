#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "cbm/error.hpp"
#include "cbm/types.hpp"

namespace cbm {

struct ForestParams {
  int n_trees = 100;
  int max_depth = 0;          // 0 = unbounded
  int min_samples_split = 2;
  int features_per_split = 0; // 0 = ceil(sqrt(F))
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

/// Internal node (feature >= 0) or leaf (feature == -1, class counts set).
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;  // x <= threshold goes left
  int left = -1;
  int right = -1;
  std::vector<double> counts;  // leaf class-count distribution

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  const TreeNode& leaf_for(const Matrix& x, long row) const;
};

struct ForestModel {
  std::vector<Tree> trees;
  ForestParams params;
  int n_classes = 0;
  int n_features = 0;
  Vector importances;  // normalized total Gini decrease per feature
};

/// CART/bagging fit with Gini impurity, midpoint thresholds between
/// consecutive distinct sorted values, and a random feature subset per split.
/// Deterministic given params.seed regardless of n_threads.
ForestModel fit_forest(const Matrix& x, const std::vector<int>& y, int n_classes,
                       const ForestParams& params, int n_threads = 1);

/// Mean over trees of the reached leaf's normalized class distribution.
Matrix predict_proba(const ForestModel& model, const Matrix& x);
/// Row-wise argmax of predict_proba; ties break toward the lower class index.
std::vector<int> predict(const ForestModel& model, const Matrix& x);
std::vector<int> argmax_rows(const Matrix& proba);

/// (feature index, importance), sorted by importance descending.
std::vector<std::pair<int, double>> gini_importance_ranked(const ForestModel& model);

struct HyperGrid {
  std::vector<int> n_trees{50, 100};
  std::vector<int> max_depth{0, 10};
  std::vector<int> min_samples_split{2, 5};
  int folds = 3;  // stratified k-fold, scored by accuracy
};

struct GridSearchResult {
  ForestParams best;
  struct Row {
    ForestParams params;
    std::vector<double> fold_accuracy;
    double mean_accuracy = 0.0;
  };
  std::vector<Row> table;  // enumeration order: n_trees, max_depth, min_samples_split
};

/// Exhaustive CV over the Cartesian product; argmax mean accuracy, ties to
/// the first candidate in enumeration order.
GridSearchResult grid_search(const Matrix& x, const std::vector<int>& y, int n_classes,
                             const HyperGrid& grid, std::uint64_t seed);

/// Minimal classifier surface so alternate model types can plug in.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual void fit(const Matrix& x, const std::vector<int>& y, int n_classes) = 0;
  virtual Matrix predict_proba(const Matrix& x) const = 0;
  std::vector<int> predict(const Matrix& x) const { return argmax_rows(predict_proba(x)); }
  virtual const ForestModel* model() const { return nullptr; }
};

class ForestClassifier : public Classifier {
 public:
  explicit ForestClassifier(ForestParams params) : params_(params) {}
  void fit(const Matrix& x, const std::vector<int>& y, int n_classes) override;
  Matrix predict_proba(const Matrix& x) const override;
  const ForestModel* model() const override { return &model_; }

 private:
  ForestParams params_;
  ForestModel model_;
};

/// Always predicts the modal training class (ties to the lower class index).
class MajorityClassifier : public Classifier {
 public:
  void fit(const Matrix& x, const std::vector<int>& y, int n_classes) override;
  Matrix predict_proba(const Matrix& x) const override;
  int modal_class() const { return modal_; }

 private:
  int modal_ = 0;
  int n_classes_ = 0;
};

/// JSON dump of trees, params and importances, for audit.
std::string model_to_json(const ForestModel& model, const std::vector<std::string>& feature_names);

}  // namespace cbm

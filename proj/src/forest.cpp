#include "cbm/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cbm/parallel.hpp"
#include "cbm/rng.hpp"
#include "json.hpp"

namespace cbm {

namespace {

double gini(const std::vector<double>& counts, double total) {
  if (total <= 0) return 0.0;
  double sum_sq = 0;
  for (double c : counts) sum_sq += c * c;
  return 1.0 - sum_sq / (total * total);
}

/// Presorted CART builder: each feature's sample order is sorted once per
/// tree and kept sorted through stable partitions, so every node evaluates
/// candidate thresholds (midpoints between consecutive distinct values) with
/// a single linear scan.
struct TreeBuilder {
  int n_classes;
  const ForestParams& params;
  int n_features;
  int features_per_split;
  Rng rng;
  Tree tree;
  Vector importance;  // raw weighted Gini decrease per feature
  double n_root = 0;

  int n = 0;
  std::vector<int> sample_class;          // bootstrap position -> class
  std::vector<std::vector<double>> vals;  // per feature, value at each position
  std::vector<std::vector<int>> order;    // per feature, positions sorted by value
  std::vector<std::uint8_t> side;         // position -> goes left at the current split
  std::vector<int> scratch;

  TreeBuilder(const Matrix& x, const std::vector<int>& y, int n_classes_,
              const ForestParams& params_, int features_per_split_, std::uint64_t seed,
              const std::vector<int>& sample_rows)
      : n_classes(n_classes_), params(params_), n_features(static_cast<int>(x.cols())),
        features_per_split(features_per_split_), rng(seed),
        importance(Vector::Zero(x.cols())) {
    n = static_cast<int>(sample_rows.size());
    n_root = static_cast<double>(n);
    sample_class.resize(static_cast<std::size_t>(n));
    for (int p = 0; p < n; ++p)
      sample_class[static_cast<std::size_t>(p)] =
          y[static_cast<std::size_t>(sample_rows[static_cast<std::size_t>(p)])];
    vals.assign(static_cast<std::size_t>(n_features), std::vector<double>(static_cast<std::size_t>(n)));
    order.assign(static_cast<std::size_t>(n_features), std::vector<int>(static_cast<std::size_t>(n)));
    for (int f = 0; f < n_features; ++f) {
      auto& v = vals[static_cast<std::size_t>(f)];
      auto& o = order[static_cast<std::size_t>(f)];
      for (int p = 0; p < n; ++p) v[static_cast<std::size_t>(p)] = x(sample_rows[static_cast<std::size_t>(p)], f);
      std::iota(o.begin(), o.end(), 0);
      std::sort(o.begin(), o.end(), [&](int a, int b) {
        return v[static_cast<std::size_t>(a)] < v[static_cast<std::size_t>(b)];
      });
    }
    side.resize(static_cast<std::size_t>(n));
    scratch.resize(static_cast<std::size_t>(n));
  }

  int build(int begin, int end, int depth) {
    const int size = end - begin;
    std::vector<double> counts(static_cast<std::size_t>(n_classes), 0.0);
    {
      const auto& o = order[0];
      for (int i = begin; i < end; ++i)
        counts[static_cast<std::size_t>(sample_class[static_cast<std::size_t>(o[static_cast<std::size_t>(i)])])] += 1.0;
    }

    const double node_gini = gini(counts, static_cast<double>(size));
    const bool at_depth_limit = params.max_depth > 0 && depth >= params.max_depth;
    if (node_gini == 0.0 || size < params.min_samples_split || at_depth_limit)
      return make_leaf(std::move(counts));

    int best_feature = -1;
    int best_boundary = -1;  // absolute index into the chosen feature's order
    double best_threshold = 0;
    double best_score = node_gini;  // only strict improvements are accepted
    const auto feats = rng.sample_indices(n_features, features_per_split);
    std::vector<double> left(static_cast<std::size_t>(n_classes));
    for (int f : feats) {
      const auto& v = vals[static_cast<std::size_t>(f)];
      const auto& o = order[static_cast<std::size_t>(f)];
      if (v[static_cast<std::size_t>(o[static_cast<std::size_t>(begin)])] ==
          v[static_cast<std::size_t>(o[static_cast<std::size_t>(end - 1)])])
        continue;
      std::fill(left.begin(), left.end(), 0.0);
      for (int i = begin; i < end - 1; ++i) {
        const int p = o[static_cast<std::size_t>(i)];
        left[static_cast<std::size_t>(sample_class[static_cast<std::size_t>(p)])] += 1.0;
        const double value = v[static_cast<std::size_t>(p)];
        const double next = v[static_cast<std::size_t>(o[static_cast<std::size_t>(i + 1)])];
        if (value == next) continue;
        const double nl = static_cast<double>(i + 1 - begin);
        const double nr = static_cast<double>(end - i - 1);
        double left_sq = 0, right_sq = 0;
        for (int c = 0; c < n_classes; ++c) {
          const double lc = left[static_cast<std::size_t>(c)];
          const double rc = counts[static_cast<std::size_t>(c)] - lc;
          left_sq += lc * lc;
          right_sq += rc * rc;
        }
        const double score = (nl - left_sq / nl + nr - right_sq / nr) / static_cast<double>(size);
        if (score < best_score) {
          best_score = score;
          best_feature = f;
          best_boundary = i;
          double t = 0.5 * (value + next);
          // keep the partition consistent with x <= t under rounding
          if (t >= next) t = value;
          best_threshold = t;
        }
      }
    }
    if (best_feature < 0) return make_leaf(std::move(counts));

    importance[best_feature] += (static_cast<double>(size) / n_root) * (node_gini - best_score);

    // Mark membership from the chosen feature's slice, then stable-partition
    // every other feature's slice so sorted order survives.
    const auto& chosen = order[static_cast<std::size_t>(best_feature)];
    for (int i = begin; i < end; ++i)
      side[static_cast<std::size_t>(chosen[static_cast<std::size_t>(i)])] =
          i <= best_boundary ? 1 : 0;
    const int mid = begin + (best_boundary - begin + 1);
    for (int f = 0; f < n_features; ++f) {
      if (f == best_feature) continue;
      auto& o = order[static_cast<std::size_t>(f)];
      int lo = begin, hi = mid;
      for (int i = begin; i < end; ++i) {
        const int p = o[static_cast<std::size_t>(i)];
        if (side[static_cast<std::size_t>(p)])
          scratch[static_cast<std::size_t>(lo++)] = p;
        else
          scratch[static_cast<std::size_t>(hi++)] = p;
      }
      std::copy(scratch.begin() + begin, scratch.begin() + end, o.begin() + begin);
    }

    const int node_index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[static_cast<std::size_t>(node_index)].feature = best_feature;
    tree.nodes[static_cast<std::size_t>(node_index)].threshold = best_threshold;
    const int left_child = build(begin, mid, depth + 1);
    const int right_child = build(mid, end, depth + 1);
    tree.nodes[static_cast<std::size_t>(node_index)].left = left_child;
    tree.nodes[static_cast<std::size_t>(node_index)].right = right_child;
    return node_index;
  }

  int make_leaf(std::vector<double> counts) {
    const int node_index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[static_cast<std::size_t>(node_index)].counts = std::move(counts);
    return node_index;
  }
};

}  // namespace

const TreeNode& Tree::leaf_for(const Matrix& x, long row) const {
  const TreeNode* node = &nodes[0];
  while (!node->is_leaf())
    node = x(row, node->feature) <= node->threshold ? &nodes[static_cast<std::size_t>(node->left)]
                                                    : &nodes[static_cast<std::size_t>(node->right)];
  return *node;
}

ForestModel fit_forest(const Matrix& x, const std::vector<int>& y, int n_classes,
                       const ForestParams& params, int n_threads) {
  if (x.rows() == 0) fail(ErrorCode::EmptyTrainingSet, "no training rows");
  if (x.rows() != static_cast<long>(y.size()))
    fail(ErrorCode::LengthMismatch, "feature/label row counts differ");
  if (x.hasNaN()) fail(ErrorCode::Precondition, "training rows contain missing values");
  if (params.n_trees < 1 || params.min_samples_split < 1)
    fail(ErrorCode::ConfigError, "forest parameters must be positive");

  const int n = static_cast<int>(x.rows());
  const int nf = static_cast<int>(x.cols());
  const int fps = params.features_per_split > 0
                      ? std::min(params.features_per_split, nf)
                      : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(nf))));

  ForestModel model;
  model.params = params;
  model.n_classes = n_classes;
  model.n_features = nf;
  model.trees.resize(static_cast<std::size_t>(params.n_trees));
  std::vector<Vector> tree_importance(static_cast<std::size_t>(params.n_trees));

  parallel_for(params.n_trees, n_threads, [&](int t) {
    // Per-tree stream, so tree order and thread schedule cannot matter.
    Rng boot(mix_seed(params.seed, {static_cast<std::uint64_t>(t), 0}));
    std::vector<int> rows(static_cast<std::size_t>(n));
    if (params.bootstrap) {
      for (int i = 0; i < n; ++i)
        rows[static_cast<std::size_t>(i)] = static_cast<int>(boot.below(static_cast<std::uint64_t>(n)));
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    TreeBuilder builder(x, y, n_classes, params, fps,
                        mix_seed(params.seed, {static_cast<std::uint64_t>(t), 1}), rows);
    builder.build(0, n, 0);
    model.trees[static_cast<std::size_t>(t)] = std::move(builder.tree);
    tree_importance[static_cast<std::size_t>(t)] = std::move(builder.importance);
  });

  Vector raw = Vector::Zero(nf);
  for (const auto& imp : tree_importance) raw += imp;
  const double total = raw.sum();
  model.importances = total > 0 ? Vector(raw / total) : Vector(Vector::Zero(nf));
  return model;
}

Matrix predict_proba(const ForestModel& model, const Matrix& x) {
  if (x.cols() != model.n_features)
    fail(ErrorCode::WidthMismatch, "expected " + std::to_string(model.n_features) +
                                       " features, got " + std::to_string(x.cols()));
  Matrix proba = Matrix::Zero(x.rows(), model.n_classes);
  for (long i = 0; i < x.rows(); ++i) {
    for (const Tree& tree : model.trees) {
      const TreeNode& leaf = tree.leaf_for(x, i);
      double total = 0;
      for (double c : leaf.counts) total += c;
      for (int c = 0; c < model.n_classes; ++c)
        proba(i, c) += leaf.counts[static_cast<std::size_t>(c)] / total;
    }
    proba.row(i) /= static_cast<double>(model.trees.size());
  }
  return proba;
}

std::vector<int> argmax_rows(const Matrix& proba) {
  std::vector<int> out(static_cast<std::size_t>(proba.rows()));
  for (long i = 0; i < proba.rows(); ++i) {
    int best = 0;
    for (int c = 1; c < proba.cols(); ++c)
      if (proba(i, c) > proba(i, best)) best = c;
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

std::vector<int> predict(const ForestModel& model, const Matrix& x) {
  return argmax_rows(predict_proba(model, x));
}

std::vector<std::pair<int, double>> gini_importance_ranked(const ForestModel& model) {
  std::vector<std::pair<int, double>> out;
  out.reserve(static_cast<std::size_t>(model.n_features));
  for (int f = 0; f < model.n_features; ++f) out.emplace_back(f, model.importances[f]);
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

GridSearchResult grid_search(const Matrix& x, const std::vector<int>& y, int n_classes,
                             const HyperGrid& grid, std::uint64_t seed) {
  if (grid.folds < 2) fail(ErrorCode::ConfigError, "grid search needs >= 2 folds");
  std::vector<long> counts(static_cast<std::size_t>(n_classes), 0);
  for (int c : y) counts[static_cast<std::size_t>(c)]++;
  for (int c = 0; c < n_classes; ++c)
    if (counts[static_cast<std::size_t>(c)] > 0 &&
        counts[static_cast<std::size_t>(c)] < grid.folds)
      fail(ErrorCode::InsufficientRows, "class " + std::to_string(c) + " has fewer rows than folds");

  // Stratified fold assignment: per class, shuffle then deal round-robin.
  std::vector<int> fold_of(y.size(), 0);
  Rng rng(mix_seed(seed, {seed_purpose::folds}));
  for (int c = 0; c < n_classes; ++c) {
    std::vector<int> members;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] == c) members.push_back(static_cast<int>(i));
    rng.shuffle(members);
    for (std::size_t i = 0; i < members.size(); ++i)
      fold_of[static_cast<std::size_t>(members[i])] = static_cast<int>(i) % grid.folds;
  }

  GridSearchResult result;
  int candidate = 0;
  for (int nt : grid.n_trees)
    for (int md : grid.max_depth)
      for (int mss : grid.min_samples_split) {
        GridSearchResult::Row row;
        row.params.n_trees = nt;
        row.params.max_depth = md;
        row.params.min_samples_split = mss;
        for (int fold = 0; fold < grid.folds; ++fold) {
          std::vector<int> train_idx, eval_idx;
          for (std::size_t i = 0; i < y.size(); ++i)
            (fold_of[i] == fold ? eval_idx : train_idx).push_back(static_cast<int>(i));
          Matrix xt(static_cast<long>(train_idx.size()), x.cols());
          std::vector<int> yt(train_idx.size());
          for (std::size_t i = 0; i < train_idx.size(); ++i) {
            xt.row(static_cast<long>(i)) = x.row(train_idx[i]);
            yt[i] = y[static_cast<std::size_t>(train_idx[i])];
          }
          Matrix xe(static_cast<long>(eval_idx.size()), x.cols());
          std::vector<int> ye(eval_idx.size());
          for (std::size_t i = 0; i < eval_idx.size(); ++i) {
            xe.row(static_cast<long>(i)) = x.row(eval_idx[i]);
            ye[i] = y[static_cast<std::size_t>(eval_idx[i])];
          }
          ForestParams p = row.params;
          p.seed = mix_seed(seed, {static_cast<std::uint64_t>(candidate),
                                   static_cast<std::uint64_t>(fold)});
          const ForestModel m = fit_forest(xt, yt, n_classes, p);
          const auto pred = predict(m, xe);
          long correct = 0;
          for (std::size_t i = 0; i < ye.size(); ++i) correct += pred[i] == ye[i] ? 1 : 0;
          row.fold_accuracy.push_back(static_cast<double>(correct) /
                                      static_cast<double>(ye.size()));
        }
        double sum = 0;
        for (double a : row.fold_accuracy) sum += a;
        row.mean_accuracy = sum / static_cast<double>(row.fold_accuracy.size());
        result.table.push_back(std::move(row));
        ++candidate;
      }

  std::size_t best = 0;
  for (std::size_t i = 1; i < result.table.size(); ++i)
    if (result.table[i].mean_accuracy > result.table[best].mean_accuracy) best = i;
  result.best = result.table[best].params;
  result.best.seed = seed;
  return result;
}

void ForestClassifier::fit(const Matrix& x, const std::vector<int>& y, int n_classes) {
  model_ = fit_forest(x, y, n_classes, params_);
}

Matrix ForestClassifier::predict_proba(const Matrix& x) const {
  return cbm::predict_proba(model_, x);
}

void MajorityClassifier::fit(const Matrix& x, const std::vector<int>& y, int n_classes) {
  (void)x;
  if (y.empty()) fail(ErrorCode::EmptyTrainingSet, "no training rows");
  n_classes_ = n_classes;
  std::vector<long> counts(static_cast<std::size_t>(n_classes), 0);
  for (int c : y) counts[static_cast<std::size_t>(c)]++;
  modal_ = 0;
  for (int c = 1; c < n_classes; ++c)
    if (counts[static_cast<std::size_t>(c)] > counts[static_cast<std::size_t>(modal_)]) modal_ = c;
}

Matrix MajorityClassifier::predict_proba(const Matrix& x) const {
  Matrix proba = Matrix::Zero(x.rows(), n_classes_);
  proba.col(modal_).setOnes();
  return proba;
}

std::string model_to_json(const ForestModel& model, const std::vector<std::string>& feature_names) {
  nlohmann::json j;
  j["params"] = {{"n_trees", model.params.n_trees},
                 {"max_depth", model.params.max_depth},
                 {"min_samples_split", model.params.min_samples_split},
                 {"features_per_split", model.params.features_per_split},
                 {"bootstrap", model.params.bootstrap},
                 {"seed", model.params.seed}};
  j["n_classes"] = model.n_classes;
  nlohmann::json imps = nlohmann::json::array();
  for (int f = 0; f < model.n_features; ++f) {
    nlohmann::json e;
    e["feature"] = f;
    if (f < static_cast<int>(feature_names.size()))
      e["name"] = feature_names[static_cast<std::size_t>(f)];
    e["importance"] = model.importances[f];
    imps.push_back(std::move(e));
  }
  j["importances"] = std::move(imps);
  nlohmann::json trees = nlohmann::json::array();
  for (const Tree& tree : model.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const TreeNode& node : tree.nodes) {
      if (node.is_leaf())
        nodes.push_back({{"counts", node.counts}});
      else
        nodes.push_back({{"feature", node.feature},
                         {"threshold", node.threshold},
                         {"left", node.left},
                         {"right", node.right}});
    }
    trees.push_back(std::move(nodes));
  }
  j["trees"] = std::move(trees);
  return j.dump(2);
}

}  // namespace cbm

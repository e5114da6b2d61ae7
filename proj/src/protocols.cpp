#include "cbm/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>

#include "cbm/parallel.hpp"
#include "cbm/profile.hpp"

namespace cbm {

void ProtocolConfig::validate() const {
  if (protocol == Protocol::CBM) {
    if (!threshold_policy) fail(ErrorCode::ConfigError, "CBM requires a threshold policy");
  } else if (threshold_policy) {
    fail(ErrorCode::ConfigError, "threshold policy is only valid for CBM");
  }
  if (split.repeats < 1) fail(ErrorCode::ConfigError, "repeats must be >= 1");
  if (!(split.population_fraction > 0.0 && split.population_fraction <= 1.0))
    fail(ErrorCode::ConfigError, "population_fraction must be in (0,1]");
  if (!(split.target_train_fraction > 0.0 && split.target_train_fraction < 1.0))
    fail(ErrorCode::ConfigError, "target_train_fraction must be in (0,1)");
  if (smote.k_neighbors < 1) fail(ErrorCode::ConfigError, "k_neighbors must be >= 1");
  if (ulm_min_per_class < 1) fail(ErrorCode::ConfigError, "ulm_min_per_class must be >= 1");
}

namespace {

void check_no_leakage(const Split& split) {
  std::vector<int> overlap;
  std::set_intersection(split.train_rows.begin(), split.train_rows.end(),
                        split.test_rows.begin(), split.test_rows.end(),
                        std::back_inserter(overlap));
  if (!overlap.empty()) throw std::logic_error("train/test row sets overlap");
}

Matrix rows_matrix(const Cohort& cohort, const std::vector<int>& rows) {
  Matrix x(static_cast<long>(rows.size()), cohort.n_features());
  for (std::size_t i = 0; i < rows.size(); ++i)
    x.row(static_cast<long>(i)) = cohort.features().row(rows[i]);
  return x;
}

std::vector<int> rows_labels(const Cohort& cohort, const std::vector<int>& rows) {
  std::vector<int> y(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    y[i] = cohort.reports()[static_cast<std::size_t>(rows[i])].class_label;
  return y;
}

std::unique_ptr<Classifier> fit_classifier(const ClassifierConfig& cc, const Matrix& x,
                                           const std::vector<int>& y, int n_classes,
                                           std::uint64_t model_seed) {
  switch (cc.kind) {
    case ClassifierConfig::Kind::forest: {
      ForestParams p = cc.forest;
      p.seed = model_seed;
      auto clf = std::make_unique<ForestClassifier>(p);
      clf->fit(x, y, n_classes);
      return clf;
    }
    case ClassifierConfig::Kind::grid: {
      GridSearchResult gs = grid_search(x, y, n_classes, cc.grid, model_seed);
      ForestParams p = gs.best;
      p.features_per_split = cc.forest.features_per_split;
      p.bootstrap = cc.forest.bootstrap;
      auto clf = std::make_unique<ForestClassifier>(p);
      clf->fit(x, y, n_classes);
      return clf;
    }
    case ClassifierConfig::Kind::majority: {
      auto clf = std::make_unique<MajorityClassifier>();
      clf->fit(x, y, n_classes);
      return clf;
    }
  }
  fail(ErrorCode::ConfigError, "unknown classifier kind");
}

struct EvalRequest {
  const Cohort& cohort;
  const ProtocolConfig& config;
  std::uint64_t smote_seed = 0;
  std::uint64_t model_seed = 0;
};

struct EvalOutcome {
  RepeatMetrics metrics;
  std::vector<int> truth;
  std::vector<int> pred;
};

/// Impute -> SMOTE -> fit -> score on (imputed) evaluation rows.
EvalOutcome evaluate_rows(const EvalRequest& req, const std::vector<int>& train_rows,
                          const std::vector<int>& eval_rows) {
  const int nc = req.cohort.mapping().n_classes();
  Matrix x_train = rows_matrix(req.cohort, train_rows);
  const Imputer imputer = Imputer::fit(x_train);
  x_train = imputer.transform(x_train);
  LabeledRows train{std::move(x_train), rows_labels(req.cohort, train_rows)};
  train = smote_oversample(train, req.config.smote, req.smote_seed, nc);

  const auto clf = fit_classifier(req.config.classifier, train.x, train.y, nc, req.model_seed);
  const Matrix x_eval = imputer.transform(rows_matrix(req.cohort, eval_rows));
  const Matrix proba = clf->predict_proba(x_eval);

  EvalOutcome out;
  out.truth = rows_labels(req.cohort, eval_rows);
  out.pred = argmax_rows(proba);
  const MetricsBundle b = evaluate(out.truth, out.pred, proba, nc);
  out.metrics = RepeatMetrics{b.accuracy, b.macro_f1, b.auc};
  return out;
}

void collect_predictions(const Cohort& cohort, const std::vector<int>& eval_rows,
                         const EvalOutcome& outcome, int repeat,
                         std::vector<PredictionRecord>& sink) {
  for (std::size_t i = 0; i < eval_rows.size(); ++i) {
    const Report& r = cohort.reports()[static_cast<std::size_t>(eval_rows[i])];
    sink.push_back(PredictionRecord{r.report_id, r.user_id, r.context, repeat,
                                    outcome.truth[i], outcome.pred[i]});
  }
}

RepeatMetrics mean_of(const std::vector<RepeatMetrics>& repeats) {
  RepeatMetrics m;
  std::vector<double> acc, f1, auc;
  for (const auto& r : repeats) {
    acc.push_back(r.accuracy);
    f1.push_back(r.macro_f1);
    if (r.auc) auc.push_back(*r.auc);
  }
  m.accuracy = aggregate_stats(acc).mean;
  m.macro_f1 = aggregate_stats(f1).mean;
  if (!auc.empty()) m.auc = aggregate_stats(auc).mean;
  return m;
}

RepeatMetrics stddev_of(const std::vector<RepeatMetrics>& repeats) {
  RepeatMetrics m;
  std::vector<double> acc, f1, auc;
  for (const auto& r : repeats) {
    acc.push_back(r.accuracy);
    f1.push_back(r.macro_f1);
    if (r.auc) auc.push_back(*r.auc);
  }
  m.accuracy = aggregate_stats(acc).stddev;
  m.macro_f1 = aggregate_stats(f1).stddev;
  if (!auc.empty()) m.auc = aggregate_stats(auc).stddev;
  return m;
}

void finalize_user(UserResult& user) {
  if (user.repeats.empty()) return;
  user.mean = mean_of(user.repeats);
  user.stddev = stddev_of(user.repeats);
}

std::optional<AggregateMetric> aggregate_metric(
    const std::vector<UserResult>& users,
    const std::function<std::optional<double>(const RepeatMetrics&)>& get) {
  std::vector<double> user_means, runs;
  for (const auto& u : users) {
    if (!u.ok()) continue;
    if (auto m = get(u.mean)) user_means.push_back(*m);
    for (const auto& r : u.repeats)
      if (auto v = get(r)) runs.push_back(*v);
  }
  if (user_means.empty()) return std::nullopt;
  const Stats su = aggregate_stats(user_means);
  const Stats sr = aggregate_stats(runs);
  return AggregateMetric{su.mean, su.stddev, sr.stddev};
}

void finalize_report(ExperimentReport& report) {
  report.n_users = static_cast<int>(report.users.size());
  report.n_ok = 0;
  for (const auto& u : report.users) report.n_ok += u.ok() ? 1 : 0;
  report.n_skipped = report.n_users - report.n_ok;
  report.accuracy = aggregate_metric(
      report.users, [](const RepeatMetrics& m) { return std::optional<double>(m.accuracy); });
  report.macro_f1 = aggregate_metric(
      report.users, [](const RepeatMetrics& m) { return std::optional<double>(m.macro_f1); });
  report.auc = aggregate_metric(report.users, [](const RepeatMetrics& m) { return m.auc; });
}

ProtocolConfig normalized(const Cohort& cohort, ProtocolConfig config, Protocol protocol) {
  (void)cohort;
  config.protocol = protocol;
  config.split.seed = config.seed;  // the master seed is the single source
  config.validate();
  return config;
}

struct UserTask {
  UserResult result;
  std::vector<PredictionRecord> predictions;
  /// CBM: one row per grid threshold for the summary table.
  struct SweepCell {
    bool modelable = false;
    double mean_accuracy = 0.0;
    int community_size = 0;
  };
  std::vector<SweepCell> sweep;
};

/// PLM / HM / ULM all share this shape; CBM has its own runner below.
ExperimentReport run_simple(const Cohort& cohort, const ProtocolConfig& config) {
  if (cohort.n_users() < 2 && config.protocol != Protocol::ULM)
    fail(ErrorCode::InsufficientData, "population protocols need at least 2 users");

  std::vector<UserTask> tasks(static_cast<std::size_t>(cohort.n_users()));
  parallel_for(cohort.n_users(), config.threads, [&](int u) {
    UserTask& task = tasks[static_cast<std::size_t>(u)];
    const std::string& user = cohort.users()[static_cast<std::size_t>(u)];
    task.result.user_id = user;

    if (config.protocol == Protocol::ULM) {
      std::vector<long> counts(static_cast<std::size_t>(cohort.mapping().n_classes()), 0);
      for (int r : cohort.rows_of(user))
        counts[static_cast<std::size_t>(
            cohort.reports()[static_cast<std::size_t>(r)].class_label)]++;
      for (long c : counts) {
        if (c == 0) {
          task.result.status = "class absent";
          return;
        }
        if (c < config.ulm_min_per_class) {
          task.result.status = "insufficient class data";
          return;
        }
      }
    }

    try {
      for (int repeat = 0; repeat < config.split.repeats; ++repeat) {
        const Split split =
            make_split(cohort, config.protocol, user, nullptr, config.split, repeat);
        check_no_leakage(split);
        if (config.protocol == Protocol::PLM)
          for (int r : split.train_rows)
            if (cohort.reports()[static_cast<std::size_t>(r)].user_id == user)
              throw std::logic_error("PLM train set contains a target row");
        EvalRequest req{cohort, config,
                        task_seed(config.seed, config.protocol, u, repeat, seed_purpose::smote),
                        task_seed(config.seed, config.protocol, u, repeat, seed_purpose::model)};
        const EvalOutcome outcome = evaluate_rows(req, split.train_rows, split.test_rows);
        task.result.repeats.push_back(outcome.metrics);
        if (config.collect_predictions)
          collect_predictions(cohort, split.test_rows, outcome, repeat, task.predictions);
      }
      finalize_user(task.result);
    } catch (const Error& e) {
      task.result.status = to_string(e.code());
      task.result.repeats.clear();
      task.predictions.clear();
    }
  });

  ExperimentReport report;
  report.config = config;
  report.classes = cohort.mapping().class_order;
  for (auto& task : tasks) {
    report.users.push_back(std::move(task.result));
    for (auto& p : task.predictions) report.predictions.push_back(std::move(p));
  }
  if (config.protocol == Protocol::ULM && cohort.mapping().n_classes() == 3)
    report.eligibility = eligibility_stats(cohort);
  finalize_report(report);
  return report;
}

/// Carves a validation subset out of the target's train rows (ascending order
/// contract), returning {reduced_train, validation}.
std::pair<std::vector<int>, std::vector<int>> carve_validation(
    const Cohort& cohort, const Split& split, const std::string& target, Rng& rng) {
  std::vector<int> target_train;
  for (int r : split.train_rows)
    if (cohort.reports()[static_cast<std::size_t>(r)].user_id == target)
      target_train.push_back(r);
  if (target_train.size() < 2) return {split.train_rows, {}};

  rng.shuffle(target_train);
  auto k = static_cast<std::size_t>(
      std::floor(0.2 * static_cast<double>(target_train.size()) + 0.5));
  k = std::clamp<std::size_t>(k, 1, target_train.size() - 1);
  std::vector<int> val(target_train.begin(), target_train.begin() + static_cast<long>(k));
  std::sort(val.begin(), val.end());
  std::vector<int> train;
  for (int r : split.train_rows)
    if (!std::binary_search(val.begin(), val.end(), r)) train.push_back(r);
  return {std::move(train), std::move(val)};
}

ExperimentReport run_cbm_impl(const Cohort& cohort, const ProtocolConfig& config) {
  if (cohort.n_users() < 2)
    fail(ErrorCode::InsufficientData, "CBM needs at least 2 users");
  const ThresholdPolicy& policy = *config.threshold_policy;
  const ThresholdGrid grid = policy.kind == ThresholdPolicy::Kind::per_user_max
                                 ? policy.grid
                                 : ThresholdGrid::from_values({policy.value});

  const ScalingParams scaler = fit_scaler(cohort, config.profile_scaling);
  const UserProfileMatrix profiles =
      aggregate_users(cohort, scaler, AggregateOptions{config.profile_include_label_fractions});
  const SimilarityMatrix sim = cosine_similarity(profiles);

  const bool use_validation = policy.kind == ThresholdPolicy::Kind::per_user_max &&
                              policy.mode == ThresholdPolicy::SelectionMode::validation;

  std::vector<UserTask> tasks(static_cast<std::size_t>(cohort.n_users()));
  parallel_for(cohort.n_users(), config.threads, [&](int u) {
    UserTask& task = tasks[static_cast<std::size_t>(u)];
    const std::string& user = cohort.users()[static_cast<std::size_t>(u)];
    task.result.user_id = user;
    task.sweep.resize(grid.values.size());

    try {
      int best = -1;
      double best_score = -1.0;
      std::vector<std::vector<RepeatMetrics>> th_repeats(grid.values.size());
      std::vector<std::vector<PredictionRecord>> th_preds(grid.values.size());
      // Consecutive thresholds often select the same member set; identical
      // communities give identical results, so evaluate each set once.
      std::map<std::vector<std::string>, std::size_t> seen;

      for (std::size_t k = 0; k < grid.values.size(); ++k) {
        const double th = grid.values[k];
        const Community community = detect_community(sim, user, th);
        if (community.empty()) continue;  // skipped in the per-user argmax
        auto& cell = task.sweep[k];
        cell.modelable = true;
        cell.community_size = community.size();

        if (auto it = seen.find(community.members); it != seen.end()) {
          const std::size_t j = it->second;
          cell.mean_accuracy = task.sweep[j].mean_accuracy;
          th_repeats[k] = th_repeats[j];
          th_preds[k] = th_preds[j];
          if (cell.mean_accuracy >= best_score) {
            best_score = cell.mean_accuracy;
            best = static_cast<int>(k);
          }
          continue;
        }
        seen.emplace(community.members, k);

        std::vector<double> scores;
        for (int repeat = 0; repeat < config.split.repeats; ++repeat) {
          const Split split =
              make_split(cohort, Protocol::CBM, user, &community, config.split, repeat);
          check_no_leakage(split);
          EvalRequest req{cohort, config,
                          task_seed(config.seed, Protocol::CBM, u, repeat, seed_purpose::smote),
                          task_seed(config.seed, Protocol::CBM, u, repeat, seed_purpose::model)};
          if (use_validation) {
            Rng val_rng(task_seed(config.seed, Protocol::CBM, u, repeat,
                                  seed_purpose::validation));
            auto [train, val] = carve_validation(cohort, split, user, val_rng);
            if (val.empty()) {
              // target train too small to carve; select on the test split
              const EvalOutcome outcome = evaluate_rows(req, split.train_rows, split.test_rows);
              scores.push_back(outcome.metrics.accuracy);
            } else {
              const EvalOutcome outcome = evaluate_rows(req, train, val);
              scores.push_back(outcome.metrics.accuracy);
            }
          } else {
            const EvalOutcome outcome = evaluate_rows(req, split.train_rows, split.test_rows);
            th_repeats[k].push_back(outcome.metrics);
            if (config.collect_predictions)
              collect_predictions(cohort, split.test_rows, outcome, repeat, th_preds[k]);
            scores.push_back(outcome.metrics.accuracy);
          }
        }
        cell.mean_accuracy = aggregate_stats(scores).mean;
        if (cell.mean_accuracy >= best_score) {  // ties go to the larger threshold
          best_score = cell.mean_accuracy;
          best = static_cast<int>(k);
        }
      }

      if (best < 0) {
        task.result.status = "empty_community";
        return;
      }

      task.result.chosen_threshold = grid.values[static_cast<std::size_t>(best)];
      task.result.community_size = task.sweep[static_cast<std::size_t>(best)].community_size;
      if (use_validation) {
        // refit at the selected threshold, scored on the untouched test split
        const Community community =
            detect_community(sim, user, grid.values[static_cast<std::size_t>(best)]);
        for (int repeat = 0; repeat < config.split.repeats; ++repeat) {
          const Split split =
              make_split(cohort, Protocol::CBM, user, &community, config.split, repeat);
          check_no_leakage(split);
          EvalRequest req{cohort, config,
                          task_seed(config.seed, Protocol::CBM, u, repeat, seed_purpose::smote),
                          task_seed(config.seed, Protocol::CBM, u, repeat, seed_purpose::model)};
          const EvalOutcome outcome = evaluate_rows(req, split.train_rows, split.test_rows);
          task.result.repeats.push_back(outcome.metrics);
          if (config.collect_predictions)
            collect_predictions(cohort, split.test_rows, outcome, repeat, task.predictions);
        }
      } else {
        task.result.repeats = std::move(th_repeats[static_cast<std::size_t>(best)]);
        task.predictions = std::move(th_preds[static_cast<std::size_t>(best)]);
      }
      finalize_user(task.result);
    } catch (const Error& e) {
      task.result.status = to_string(e.code());
      task.result.repeats.clear();
      task.predictions.clear();
    }
  });

  ExperimentReport report;
  report.config = config;
  report.classes = cohort.mapping().class_order;
  for (auto& task : tasks) {
    report.users.push_back(std::move(task.result));
    for (auto& p : task.predictions) report.predictions.push_back(std::move(p));
  }

  for (std::size_t k = 0; k < grid.values.size(); ++k) {
    ThresholdSummaryRow row;
    row.threshold = grid.values[k];
    std::vector<double> accs, sizes;
    for (const auto& task : tasks) {
      if (k >= task.sweep.size() || !task.sweep[k].modelable) continue;
      row.modelable_users++;
      accs.push_back(task.sweep[k].mean_accuracy);
      sizes.push_back(static_cast<double>(task.sweep[k].community_size));
    }
    if (!accs.empty()) {
      row.mean_accuracy = aggregate_stats(accs).mean;
      row.mean_community_size = aggregate_stats(sizes).mean;
    }
    report.per_threshold.push_back(row);
  }
  finalize_report(report);
  return report;
}

}  // namespace

ExperimentReport run_plm(const Cohort& cohort, ProtocolConfig config) {
  return run_simple(cohort, normalized(cohort, std::move(config), Protocol::PLM));
}

ExperimentReport run_hm(const Cohort& cohort, ProtocolConfig config) {
  return run_simple(cohort, normalized(cohort, std::move(config), Protocol::HM));
}

ExperimentReport run_ulm(const Cohort& cohort, ProtocolConfig config) {
  return run_simple(cohort, normalized(cohort, std::move(config), Protocol::ULM));
}

ExperimentReport run_cbm(const Cohort& cohort, ProtocolConfig config) {
  return run_cbm_impl(cohort, normalized(cohort, std::move(config), Protocol::CBM));
}

ExperimentReport run_protocol(const Cohort& cohort, const ProtocolConfig& config) {
  switch (config.protocol) {
    case Protocol::PLM: return run_plm(cohort, config);
    case Protocol::HM: return run_hm(cohort, config);
    case Protocol::ULM: return run_ulm(cohort, config);
    case Protocol::CBM: return run_cbm(cohort, config);
  }
  fail(ErrorCode::ConfigError, "unknown protocol");
}

ContextBreakdown context_breakdown(const std::vector<PredictionRecord>& records) {
  if (records.empty()) fail(ErrorCode::Empty, "no predictions to break down");
  bool any_context = false;
  for (const auto& r : records) any_context = any_context || !r.context.empty();
  if (!any_context)
    fail(ErrorCode::MissingContextColumn, "predictions carry no context tags");

  std::map<std::string, std::pair<long, long>> by_context;  // correct, total
  long correct = 0;
  for (const auto& r : records) {
    auto& [c, n] = by_context[r.context];
    n++;
    if (r.truth == r.pred) {
      c++;
      correct++;
    }
  }
  ContextBreakdown out;
  out.support = static_cast<long>(records.size());
  out.overall = static_cast<double>(correct) / static_cast<double>(out.support);
  for (const auto& [ctx, cn] : by_context)
    out.groups.push_back(ContextGroup{
        ctx, cn.second, static_cast<double>(cn.first) / static_cast<double>(cn.second)});
  return out;
}

InjectionReport injection_sweep(const Cohort& cohort, const InjectionConfig& injection,
                                const ProtocolConfig& base) {
  if (!cohort.has_context())
    fail(ErrorCode::MissingContextColumn, "cohort has no context tags");
  if (injection.counts.empty())
    fail(ErrorCode::ConfigError, "injection counts must not be empty");
  if (!(injection.test_fraction > 0.0 && injection.test_fraction < 1.0))
    fail(ErrorCode::ConfigError, "test_fraction must be in (0,1)");
  for (long c : injection.counts)
    if (c < 0) fail(ErrorCode::ConfigError, "injection counts must be >= 0");

  std::vector<int> target_rows, other_rows;
  for (int i = 0; i < cohort.n_reports(); ++i) {
    if (cohort.reports()[static_cast<std::size_t>(i)].context == injection.target_context)
      target_rows.push_back(i);
    else
      other_rows.push_back(i);
  }
  if (target_rows.empty())
    fail(ErrorCode::InsufficientContextReports,
         "no reports tagged '" + injection.target_context + "'");
  if (other_rows.empty())
    fail(ErrorCode::InsufficientContextReports, "no reports outside the target context");

  const int repeats = base.split.repeats;
  struct RepeatPools {
    std::vector<int> test;        // sorted
    std::vector<int> pool_other;  // sorted
    std::vector<int> pool_target; // shuffled; train(c) takes the first c
    long test_target = 0;
  };
  std::vector<RepeatPools> pools(static_cast<std::size_t>(repeats));
  for (int r = 0; r < repeats; ++r) {
    Rng rng(mix_seed(base.seed, {seed_purpose::injection, static_cast<std::uint64_t>(r)}));
    auto sample = [&](const std::vector<int>& rows) {
      std::vector<int> shuffled = rows;
      rng.shuffle(shuffled);
      auto k = static_cast<std::size_t>(std::floor(
          injection.test_fraction * static_cast<double>(rows.size()) + 0.5));
      k = std::clamp<std::size_t>(k, 1, rows.size());
      shuffled.resize(k);
      std::sort(shuffled.begin(), shuffled.end());
      return shuffled;
    };
    RepeatPools& p = pools[static_cast<std::size_t>(r)];
    const std::vector<int> test_t = sample(target_rows);
    const std::vector<int> test_o = sample(other_rows);
    p.test_target = static_cast<long>(test_t.size());
    p.test = test_t;
    p.test.insert(p.test.end(), test_o.begin(), test_o.end());
    std::sort(p.test.begin(), p.test.end());
    for (int row : other_rows)
      if (!std::binary_search(test_o.begin(), test_o.end(), row)) p.pool_other.push_back(row);
    for (int row : target_rows)
      if (!std::binary_search(test_t.begin(), test_t.end(), row)) p.pool_target.push_back(row);
    rng.shuffle(p.pool_target);

    const long needed = *std::max_element(injection.counts.begin(), injection.counts.end());
    if (needed > static_cast<long>(p.pool_target.size()))
      fail(ErrorCode::InsufficientContextReports,
           "count " + std::to_string(needed) + " exceeds the " +
               std::to_string(p.pool_target.size()) + " available '" +
               injection.target_context + "' training reports (repeat " + std::to_string(r) +
               ")");
  }

  const long n_counts = static_cast<long>(injection.counts.size());
  struct Cell {
    double overall = 0, target = 0;
    long train_rows = 0, train_target = 0;
  };
  std::vector<Cell> cells(static_cast<std::size_t>(n_counts * repeats));

  parallel_for(static_cast<int>(n_counts * repeats), base.threads, [&](int idx) {
    const int ci = idx / repeats;
    const int r = idx % repeats;
    const long count = injection.counts[static_cast<std::size_t>(ci)];
    const RepeatPools& p = pools[static_cast<std::size_t>(r)];

    Split split;
    split.train_rows = p.pool_other;
    split.train_rows.insert(split.train_rows.end(), p.pool_target.begin(),
                            p.pool_target.begin() + count);
    std::sort(split.train_rows.begin(), split.train_rows.end());
    split.test_rows = p.test;
    check_no_leakage(split);

    Cell& cell = cells[static_cast<std::size_t>(idx)];
    cell.train_rows = static_cast<long>(split.train_rows.size());
    for (int row : split.train_rows)
      if (cohort.reports()[static_cast<std::size_t>(row)].context == injection.target_context)
        cell.train_target++;

    EvalRequest req{cohort, base,
                    mix_seed(base.seed, {seed_purpose::injection, static_cast<std::uint64_t>(r),
                                         static_cast<std::uint64_t>(ci), seed_purpose::smote}),
                    mix_seed(base.seed, {seed_purpose::injection, static_cast<std::uint64_t>(r),
                                         static_cast<std::uint64_t>(ci), seed_purpose::model})};
    const EvalOutcome outcome = evaluate_rows(req, split.train_rows, split.test_rows);
    cell.overall = outcome.metrics.accuracy;

    long target_correct = 0, target_total = 0;
    for (std::size_t i = 0; i < split.test_rows.size(); ++i) {
      const Report& rep = cohort.reports()[static_cast<std::size_t>(split.test_rows[i])];
      if (rep.context != injection.target_context) continue;
      target_total++;
      if (outcome.truth[i] == outcome.pred[i]) target_correct++;
    }
    cell.target = static_cast<double>(target_correct) / static_cast<double>(target_total);
  });

  InjectionReport report;
  report.injection = injection;
  report.base = base;
  for (int r = 0; r < repeats; ++r) {
    report.test_rows.push_back(static_cast<long>(pools[static_cast<std::size_t>(r)].test.size()));
    report.test_target_rows.push_back(pools[static_cast<std::size_t>(r)].test_target);
  }
  for (long ci = 0; ci < n_counts; ++ci) {
    InjectionRow row;
    row.count = injection.counts[static_cast<std::size_t>(ci)];
    std::vector<double> overall, target;
    for (int r = 0; r < repeats; ++r) {
      const Cell& cell = cells[static_cast<std::size_t>(ci * repeats + r)];
      overall.push_back(cell.overall);
      target.push_back(cell.target);
      row.train_rows.push_back(cell.train_rows);
      row.train_target_context_rows.push_back(cell.train_target);
    }
    row.overall_accuracy = aggregate_stats(overall);
    row.target_accuracy = aggregate_stats(target);
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace cbm

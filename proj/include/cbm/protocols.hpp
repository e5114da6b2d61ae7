#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cbm/cohort.hpp"
#include "cbm/community.hpp"
#include "cbm/forest.hpp"
#include "cbm/metrics.hpp"
#include "cbm/sampling.hpp"

namespace cbm {

struct ClassifierConfig {
  enum class Kind { forest, grid, majority };
  Kind kind = Kind::forest;
  ForestParams forest;  // used directly, or as defaults for grid winners
  HyperGrid grid;
};

struct ProtocolConfig {
  Protocol protocol = Protocol::PLM;
  SplitSpec split;
  SmoteConfig smote;
  ClassifierConfig classifier;
  std::optional<ThresholdPolicy> threshold_policy;  // CBM only
  /// Profile construction for the CBM similarity matrix.
  ScalingMode profile_scaling = ScalingMode::minmax;
  bool profile_include_label_fractions = false;
  int ulm_min_per_class = 2;
  std::uint64_t seed = 0;
  bool collect_predictions = false;
  int threads = 0;  // 0 = hardware concurrency; never part of the config echo

  void validate() const;
};

struct RepeatMetrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::optional<double> auc;
};

struct UserResult {
  std::string user_id;
  std::string status = "ok";  // "ok" or a skip reason
  std::vector<RepeatMetrics> repeats;
  RepeatMetrics mean;
  RepeatMetrics stddev;  // population std over repeats (AUC over non-null ones)
  std::optional<double> chosen_threshold;  // CBM
  std::optional<int> community_size;       // CBM

  bool ok() const { return status == "ok"; }
};

struct ThresholdSummaryRow {
  double threshold = 0.0;
  int modelable_users = 0;       // users with a non-empty community
  double mean_accuracy = 0.0;    // over modelable users' per-user means
  double mean_community_size = 0.0;
};

struct PredictionRecord {
  std::string report_id;
  std::string user_id;
  std::string context;
  int repeat = 0;
  int truth = 0;
  int pred = 0;
};

struct AggregateMetric {
  double mean = 0.0;
  double std_across_users = 0.0;  // population std of per-user means
  double std_across_runs = 0.0;   // population std pooled over (user, repeat)
};

struct ExperimentReport {
  ProtocolConfig config;
  std::vector<std::string> classes;
  std::vector<UserResult> users;  // cohort user order
  int n_users = 0;
  int n_ok = 0;
  int n_skipped = 0;
  std::optional<AggregateMetric> accuracy;
  std::optional<AggregateMetric> macro_f1;
  std::optional<AggregateMetric> auc;
  std::vector<ThresholdSummaryRow> per_threshold;       // CBM
  std::optional<EligibilityReport> eligibility;         // ULM, three-class mapping
  std::vector<PredictionRecord> predictions;            // when collected
};

/// Dispatches on config.protocol. Per-user failures become skips, never abort.
ExperimentReport run_protocol(const Cohort& cohort, const ProtocolConfig& config);
ExperimentReport run_plm(const Cohort& cohort, ProtocolConfig config);
ExperimentReport run_hm(const Cohort& cohort, ProtocolConfig config);
ExperimentReport run_ulm(const Cohort& cohort, ProtocolConfig config);
ExperimentReport run_cbm(const Cohort& cohort, ProtocolConfig config);

struct ContextGroup {
  std::string context;
  long support = 0;
  double accuracy = 0.0;
};

struct ContextBreakdown {
  std::vector<ContextGroup> groups;  // sorted by context tag
  long support = 0;
  double overall = 0.0;
};

/// Per-context accuracy over pooled test predictions, plus the overall row.
ContextBreakdown context_breakdown(const std::vector<PredictionRecord>& records);

struct InjectionConfig {
  std::string target_context = "eating";
  std::vector<long> counts;     // target-context rows injected into training
  double test_fraction = 0.3;   // held out per repeat, per context group
};

struct InjectionRow {
  long count = 0;
  Stats overall_accuracy;
  Stats target_accuracy;
  std::vector<long> train_rows;                 // per repeat
  std::vector<long> train_target_context_rows;  // per repeat, from materialized train rows
};

struct InjectionReport {
  InjectionConfig injection;
  ProtocolConfig base;  // split repeats, smote, classifier and seed are used
  std::vector<InjectionRow> rows;
  std::vector<long> test_rows;         // per repeat
  std::vector<long> test_target_rows;  // per repeat
};

/// Trains with all non-target-context pool rows plus exactly `count`
/// target-context rows, against a per-repeat held-out test set containing
/// both groups; reports overall and target-context-subset accuracy per count.
InjectionReport injection_sweep(const Cohort& cohort, const InjectionConfig& injection,
                                const ProtocolConfig& base);

}  // namespace cbm

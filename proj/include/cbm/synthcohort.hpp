#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cbm/cohort.hpp"

namespace cbm {

/// Knobs for the seeded heterogeneous-cohort generator. Defaults mirror the
/// scale this toolkit targets: a few latent user clusters, skewed classes,
/// and a context whose feature distribution is shifted.
struct GeneratorConfig {
  int n_clusters = 4;
  int n_users = 60;
  double reports_per_user_mean = 40.0;
  double reports_per_user_spread = 10.0;
  int n_features = 20;
  /// Global class priors in class_order (negative, neutral, positive).
  std::vector<double> class_priors = {0.10, 0.38, 0.52};
  /// Cluster k multiplies the prior of class (k mod 3) by (1 + prior_tilt).
  double prior_tilt = 0.5;
  /// Centroid scale, in units of the within-cluster feature std.
  double cluster_separation = 2.0;
  /// Scale of per-cluster class-conditional feature offsets, in [0,1].
  double label_signal = 0.7;
  std::vector<std::pair<std::string, double>> context_tags = {
      {"eating", 0.3}, {"working", 0.3}, {"resting", 0.4}};
  /// Constant feature shift applied to the first context tag's reports.
  double context_shift = 0.5;
  double noise_std = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct GroundTruth {
  std::vector<int> user_cluster;             // per user ordinal
  std::vector<std::vector<double>> cluster_priors;
  std::string shifted_context;
  std::vector<int> report_cluster;           // per report
  std::vector<std::vector<double>> report_class_logits;  // log prior per report
};

struct SynthCohort {
  Cohort cohort;
  GroundTruth truth;
};

/// Deterministic given config.seed: identical configs produce identical
/// cohorts byte-for-byte through emit_csv.
SynthCohort generate_cohort(const GeneratorConfig& config);

/// Writes the cohort CSV (same format as save_csv; round-trips exactly).
void emit_csv(const Cohort& cohort, const std::string& path);

/// Ground-truth sidecar: user->cluster plus per-report latent class logits.
void save_ground_truth_json(const SynthCohort& synth, const GeneratorConfig& config,
                            const std::string& path);

}  // namespace cbm

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cbm/cohort.hpp"
#include "cbm/community.hpp"
#include "cbm/rng.hpp"
#include "cbm/types.hpp"

namespace cbm {

enum class Protocol { PLM, HM, ULM, CBM };

Protocol protocol_from(const std::string& name);
const char* to_string(Protocol protocol);

/// Seed-mix protocol tags; part of the bit-exact reproducibility contract.
std::uint64_t protocol_tag(Protocol protocol);

/// Per-task stream seed:
///   mix_seed(master, {protocol_tag, user_ordinal, repeat, purpose})
std::uint64_t task_seed(std::uint64_t master, Protocol protocol, int user_ordinal, int repeat,
                        std::uint64_t purpose);

struct SplitSpec {
  double population_fraction = 0.9;
  double target_train_fraction = 0.7;
  int repeats = 5;
  std::uint64_t seed = 0;
  bool stratified = true;  // target 70/30 stratified by class where counts permit
};

struct Split {
  std::vector<int> train_rows;  // cohort row indices, ascending
  std::vector<int> test_rows;

  std::vector<std::string> train_ids(const Cohort& cohort) const;
  std::vector<std::string> test_ids(const Cohort& cohort) const;
};

/// Builds the train/test row sets for one (protocol, target, repeat):
///   PLM  train = 90% of all non-target rows            test = target's 30%
///   HM   train = target 70% + 90% of non-target rows   test = target's 30%
///   CBM  train = target 70% + 90% of community rows    test = target's 30%
///   ULM  train = target 70%                            test = target's 30%
/// Fully determined by (spec.seed, protocol, target ordinal, repeat) plus,
/// for CBM, the community row pool.
Split make_split(const Cohort& cohort, Protocol protocol, const std::string& target,
                 const Community* community, const SplitSpec& spec, int repeat);

struct SmoteConfig {
  int k_neighbors = 5;
  bool enabled = true;
};

struct LabeledRows {
  Matrix x;            // no missing values
  std::vector<int> y;  // class indices

  long size() const { return x.rows(); }
};

/// Oversamples every minority class up to the majority count. Each synthetic
/// row is x_i + lambda * (x_nn - x_i) with x_nn one of the k nearest
/// same-class neighbors (Euclidean) and lambda uniform in [0,1). Originals
/// come first, untouched. A one-row class falls back to duplication with
/// Gaussian jitter (sigma 1e-6 of the per-feature range).
LabeledRows smote_oversample(const LabeledRows& rows, const SmoteConfig& config,
                             std::uint64_t seed, int n_classes);

/// Train-median imputation; the same medians fill test rows.
struct Imputer {
  Vector medians;

  static Imputer fit(const Matrix& x);
  Matrix transform(const Matrix& x) const;
};

}  // namespace cbm

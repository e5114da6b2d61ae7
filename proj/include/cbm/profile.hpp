#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cbm/cohort.hpp"
#include "cbm/types.hpp"

namespace cbm {

enum class ScalingMode { minmax, zscore, none };

ScalingMode scaling_mode_from(const std::string& name);
const char* to_string(ScalingMode mode);

/// Per-feature scaling parameters fitted on a cohort's non-missing entries.
struct ScalingParams {
  ScalingMode mode = ScalingMode::minmax;
  Vector min, max;    // minmax
  Vector mean, std;   // zscore
  std::vector<bool> constant;  // max-min == 0 (or std == 0)

  /// Scales one value; constant features map to 0.
  double apply(int feature, double v) const;
};

ScalingParams fit_scaler(const Cohort& cohort, ScalingMode mode);

/// |U| x |F| matrix of per-user per-feature means over scaled values.
struct UserProfileMatrix {
  std::vector<std::string> user_ids;   // cohort user order
  std::vector<std::string> column_names;
  Matrix values;
};

struct AggregateOptions {
  /// Append per-class label fractions as extra profile columns.
  bool include_label_fractions = false;
};

/// Mean-based per-user aggregation. A user with no non-missing values for a
/// feature receives the cohort-wide scaled median of that feature.
UserProfileMatrix aggregate_users(const Cohort& cohort, const ScalingParams& scaler,
                                  const AggregateOptions& options = {});

/// |U| x |U| cosine similarities mapped from [-1,1] onto [0,1].
struct SimilarityMatrix {
  std::vector<std::string> user_ids;
  Matrix values;

  int index_of(const std::string& user_id) const;
};

/// Pairwise cosine of profile rows, stored as (raw+1)/2. A zero-norm profile
/// has raw similarity 0 with every other user and self-similarity 1.
SimilarityMatrix cosine_similarity(const UserProfileMatrix& profiles);

/// The target's row without the diagonal entry, in matrix user order.
std::vector<std::pair<std::string, double>> similarity_row(const SimilarityMatrix& matrix,
                                                           const std::string& target);

void save_profiles_csv(const UserProfileMatrix& profiles, const std::string& path);
void save_similarity_csv(const SimilarityMatrix& matrix, const std::string& path);

}  // namespace cbm

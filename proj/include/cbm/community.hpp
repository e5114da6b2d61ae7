#pragma once

#include <map>
#include <string>
#include <vector>

#include "cbm/profile.hpp"

namespace cbm {

/// Strictly increasing candidate thresholds in [0,1].
struct ThresholdGrid {
  std::vector<double> values;

  static ThresholdGrid from_values(std::vector<double> values);
  /// Coarse 0.0..0.8 step 0.1 plus the fine band 0.85..0.99.
  static ThresholdGrid default_grid();
};

/// Per-target neighborhood: every member's similarity to the target is >= threshold.
struct Community {
  std::string target;
  double threshold = 0.0;
  std::vector<std::string> members;  // matrix user order

  int size() const { return static_cast<int>(members.size()); }
  bool empty() const { return members.empty(); }
};

/// Inclusive filter of the target's similarity row. An empty result is valid.
Community detect_community(const SimilarityMatrix& matrix, const std::string& target, double th);

struct CommunitySweep {
  std::vector<std::string> user_ids;
  ThresholdGrid grid;
  Eigen::MatrixXi sizes;             // |U| x |grid|
  std::vector<int> modelable_users;  // per threshold: users with a non-empty community
  std::vector<double> mean_size;     // per threshold
};

CommunitySweep sweep_communities(const SimilarityMatrix& matrix, const ThresholdGrid& grid);

void save_sweep_csv(const CommunitySweep& sweep, const std::string& path);
void save_sweep_summary_json(const CommunitySweep& sweep, const std::string& path);

/// Mean of per-user accuracy-maximizing thresholds: the cold-start threshold
/// suggested for a user with no data yet.
double max_avg_threshold(const std::map<std::string, double>& per_user_best);

/// How the CBM runner resolves each target's community.
struct ThresholdPolicy {
  enum class Kind { fixed, per_user_max, max_avg };
  /// Threshold selection target for per_user_max: the test split (paper-faithful,
  /// optimistic) or a validation slice carved from the target's training rows.
  enum class SelectionMode { test, validation };

  Kind kind = Kind::fixed;
  double value = 0.85;  // fixed / max_avg
  ThresholdGrid grid;   // per_user_max
  SelectionMode mode = SelectionMode::test;

  static ThresholdPolicy fixed(double th);
  static ThresholdPolicy per_user_max(ThresholdGrid grid, SelectionMode mode = SelectionMode::test);
  static ThresholdPolicy max_avg(double value);
};

}  // namespace cbm

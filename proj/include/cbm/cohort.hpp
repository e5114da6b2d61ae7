#pragma once

#include <array>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "cbm/error.hpp"
#include "cbm/types.hpp"

namespace cbm {

/// Ordered, duplicate-free feature column names.
struct FeatureSchema {
  std::vector<std::string> feature_names;

  int feature_count() const { return static_cast<int>(feature_names.size()); }

  static FeatureSchema from_names(std::vector<std::string> names);
};

/// Total mapping from raw 5-point labels to output classes.
struct ClassMapping {
  std::string name;
  std::vector<std::string> class_order;
  std::array<int, 5> raw_to_class{};  // raw label 1..5 -> index into class_order

  int n_classes() const { return static_cast<int>(class_order.size()); }

  /// Maps a raw label; throws BadLabel outside 1..5.
  int map_raw(int raw) const {
    if (raw < 1 || raw > 5)
      fail(ErrorCode::BadLabel, "raw label " + std::to_string(raw) + " outside 1..5");
    return raw_to_class[static_cast<std::size_t>(raw - 1)];
  }

  int class_index(const std::string& cls) const;

  /// 1,2 -> negative; 3 -> neutral; 4,5 -> positive.
  static ClassMapping three_class();
  /// Identity on the 5-point scale.
  static ClassMapping five_class();
  /// Lookup by name: "three-class" | "five-class".
  static ClassMapping by_name(const std::string& name);
};

/// One self-report row; feature values live in the cohort matrix.
struct Report {
  std::string report_id;
  std::string user_id;
  int raw_label = 0;    // 1..5
  int class_label = 0;  // index into mapping.class_order
  std::string context;  // empty when untagged
};

/// Immutable validated report table. Users are ordered by first appearance.
class Cohort {
 public:
  Cohort(FeatureSchema schema, ClassMapping mapping, std::vector<Report> reports,
         Matrix features);

  const FeatureSchema& schema() const { return schema_; }
  const ClassMapping& mapping() const { return mapping_; }
  const std::vector<Report>& reports() const { return reports_; }
  /// n_reports x n_features; NaN marks a missing cell.
  const Matrix& features() const { return features_; }

  int n_reports() const { return static_cast<int>(reports_.size()); }
  int n_features() const { return schema_.feature_count(); }
  int n_users() const { return static_cast<int>(users_.size()); }

  const std::vector<std::string>& users() const { return users_; }
  const std::vector<int>& rows_of(const std::string& user_id) const;
  int user_ordinal(const std::string& user_id) const;
  bool has_user(const std::string& user_id) const {
    return user_index_.count(user_id) > 0;
  }
  bool has_context() const { return has_context_; }

 private:
  FeatureSchema schema_;
  ClassMapping mapping_;
  std::vector<Report> reports_;
  Matrix features_;
  std::vector<std::string> users_;
  std::unordered_map<std::string, std::vector<int>> user_index_;
  std::unordered_map<std::string, int> user_ordinal_;
  bool has_context_ = false;
};

struct IngestOptions {
  ClassMapping mapping = ClassMapping::three_class();
};

/// Reads the canonical cohort CSV: header row with `user_id`, `label`,
/// optional `report_id` / `context`, and numeric feature columns. Empty
/// numeric cells become missing markers; report ids default to the data-row
/// ordinal when the column is absent.
Cohort load_csv(const std::string& path, const IngestOptions& options = {});

/// Writes the same CSV shape back; load_csv(save_csv(c)) == c field-by-field.
void save_csv(const Cohort& cohort, const std::string& path);

/// JSON sidecar describing the schema (feature names, mapping name).
void save_schema_json(const Cohort& cohort, const std::string& path);

struct EligibilityReport {
  /// user -> per-class report counts (class_order indexing)
  std::map<std::string, std::vector<long>> per_user_class_counts;
  /// number of distinct classes present -> user count
  std::map<int, int> users_by_class_presence;
  /// minimum negative count n -> number of users with >= n negative reports
  std::map<long, int> negative_count_curve;
};

/// Per-user class coverage statistics. Requires the three-class mapping.
EligibilityReport eligibility_stats(const Cohort& cohort);

struct ClassDistribution {
  std::vector<long> counts;      // per class index
  std::vector<double> fractions; // counts / total
  long total = 0;
};

ClassDistribution class_distribution(const Cohort& cohort);
/// Grouped by context tag; reports without a tag group under "".
std::map<std::string, ClassDistribution> class_distribution_by_context(const Cohort& cohort);

}  // namespace cbm

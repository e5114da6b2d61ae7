#include "cbm/community.hpp"

#include <fstream>

#include "json.hpp"

namespace cbm {

ThresholdGrid ThresholdGrid::from_values(std::vector<double> values) {
  if (values.empty()) fail(ErrorCode::ConfigError, "threshold grid must not be empty");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < 0.0 || values[i] > 1.0)
      fail(ErrorCode::ConfigError, "threshold grid value outside [0,1]");
    if (i > 0 && values[i] <= values[i - 1])
      fail(ErrorCode::ConfigError, "threshold grid must be strictly increasing");
  }
  return ThresholdGrid{std::move(values)};
}

ThresholdGrid ThresholdGrid::default_grid() {
  return ThresholdGrid{{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8,
                        0.85, 0.90, 0.95, 0.96, 0.97, 0.98, 0.99}};
}

Community detect_community(const SimilarityMatrix& matrix, const std::string& target, double th) {
  if (th < 0.0 || th > 1.0) fail(ErrorCode::Precondition, "threshold outside [0,1]");
  const int t = matrix.index_of(target);
  Community c;
  c.target = target;
  c.threshold = th;
  for (std::size_t i = 0; i < matrix.user_ids.size(); ++i) {
    if (static_cast<int>(i) == t) continue;
    if (matrix.values(t, static_cast<long>(i)) >= th) c.members.push_back(matrix.user_ids[i]);
  }
  return c;
}

CommunitySweep sweep_communities(const SimilarityMatrix& matrix, const ThresholdGrid& grid) {
  const long nu = static_cast<long>(matrix.user_ids.size());
  const long nt = static_cast<long>(grid.values.size());
  CommunitySweep sweep;
  sweep.user_ids = matrix.user_ids;
  sweep.grid = grid;
  sweep.sizes = Eigen::MatrixXi::Zero(nu, nt);
  for (long u = 0; u < nu; ++u)
    for (long k = 0; k < nt; ++k) {
      int size = 0;
      for (long v = 0; v < nu; ++v)
        if (v != u && matrix.values(u, v) >= grid.values[static_cast<std::size_t>(k)]) ++size;
      sweep.sizes(u, k) = size;
    }
  sweep.modelable_users.resize(static_cast<std::size_t>(nt));
  sweep.mean_size.resize(static_cast<std::size_t>(nt));
  for (long k = 0; k < nt; ++k) {
    int modelable = 0;
    double total = 0;
    for (long u = 0; u < nu; ++u) {
      if (sweep.sizes(u, k) > 0) ++modelable;
      total += sweep.sizes(u, k);
    }
    sweep.modelable_users[static_cast<std::size_t>(k)] = modelable;
    sweep.mean_size[static_cast<std::size_t>(k)] = total / static_cast<double>(nu);
  }
  return sweep;
}

void save_sweep_csv(const CommunitySweep& sweep, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write '" + path + "'");
  out << "user_id";
  for (double th : sweep.grid.values) out << ",th=" << th;
  out << '\n';
  for (long u = 0; u < sweep.sizes.rows(); ++u) {
    out << sweep.user_ids[static_cast<std::size_t>(u)];
    for (long k = 0; k < sweep.sizes.cols(); ++k) out << ',' << sweep.sizes(u, k);
    out << '\n';
  }
}

void save_sweep_summary_json(const CommunitySweep& sweep, const std::string& path) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t k = 0; k < sweep.grid.values.size(); ++k) {
    rows.push_back({{"threshold", sweep.grid.values[k]},
                    {"mean_community_size", sweep.mean_size[k]},
                    {"modelable_users", sweep.modelable_users[k]}});
  }
  nlohmann::json j;
  j["kind"] = "community_sweep_summary";
  j["n_users"] = sweep.user_ids.size();
  j["per_threshold"] = rows;
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

double max_avg_threshold(const std::map<std::string, double>& per_user_best) {
  if (per_user_best.empty()) fail(ErrorCode::EmptyInput, "no per-user thresholds given");
  double sum = 0;
  for (const auto& [user, th] : per_user_best) sum += th;
  return sum / static_cast<double>(per_user_best.size());
}

ThresholdPolicy ThresholdPolicy::fixed(double th) {
  if (th < 0.0 || th > 1.0) fail(ErrorCode::ConfigError, "fixed threshold outside [0,1]");
  ThresholdPolicy p;
  p.kind = Kind::fixed;
  p.value = th;
  return p;
}

ThresholdPolicy ThresholdPolicy::per_user_max(ThresholdGrid grid, SelectionMode mode) {
  ThresholdPolicy p;
  p.kind = Kind::per_user_max;
  p.grid = std::move(grid);
  p.mode = mode;
  return p;
}

ThresholdPolicy ThresholdPolicy::max_avg(double value) {
  if (value < 0.0 || value > 1.0) fail(ErrorCode::ConfigError, "max-avg threshold outside [0,1]");
  ThresholdPolicy p;
  p.kind = Kind::max_avg;
  p.value = value;
  return p;
}

}  // namespace cbm

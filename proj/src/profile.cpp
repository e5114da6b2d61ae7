#include "cbm/profile.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

namespace cbm {

ScalingMode scaling_mode_from(const std::string& name) {
  if (name == "minmax") return ScalingMode::minmax;
  if (name == "zscore") return ScalingMode::zscore;
  if (name == "none") return ScalingMode::none;
  fail(ErrorCode::ConfigError, "unknown scaling mode '" + name + "'");
}

const char* to_string(ScalingMode mode) {
  switch (mode) {
    case ScalingMode::minmax: return "minmax";
    case ScalingMode::zscore: return "zscore";
    case ScalingMode::none: return "none";
  }
  return "?";
}

double ScalingParams::apply(int feature, double v) const {
  const auto f = static_cast<std::size_t>(feature);
  switch (mode) {
    case ScalingMode::none:
      return v;
    case ScalingMode::minmax:
      if (constant[f]) return 0.0;
      return (v - min[feature]) / (max[feature] - min[feature]);
    case ScalingMode::zscore:
      if (constant[f]) return 0.0;
      return (v - mean[feature]) / std[feature];
  }
  return v;
}

ScalingParams fit_scaler(const Cohort& cohort, ScalingMode mode) {
  if (cohort.n_reports() == 0) fail(ErrorCode::EmptyCohort, "cannot fit scaler on empty cohort");
  const int nf = cohort.n_features();
  ScalingParams p;
  p.mode = mode;
  p.min = Vector::Constant(nf, 0.0);
  p.max = Vector::Constant(nf, 0.0);
  p.mean = Vector::Constant(nf, 0.0);
  p.std = Vector::Constant(nf, 0.0);
  p.constant.assign(static_cast<std::size_t>(nf), true);

  const Matrix& x = cohort.features();
  for (int f = 0; f < nf; ++f) {
    double lo = 0, hi = 0, sum = 0, sum2 = 0;
    long n = 0;
    for (long i = 0; i < x.rows(); ++i) {
      const double v = x(i, f);
      if (is_missing(v)) continue;
      if (n == 0) { lo = hi = v; } else { lo = std::min(lo, v); hi = std::max(hi, v); }
      sum += v;
      sum2 += v * v;
      ++n;
    }
    if (n == 0) continue;  // fully missing feature stays flagged constant
    p.min[f] = lo;
    p.max[f] = hi;
    p.mean[f] = sum / static_cast<double>(n);
    const double var = std::max(0.0, sum2 / static_cast<double>(n) - p.mean[f] * p.mean[f]);
    p.std[f] = std::sqrt(var);
    p.constant[static_cast<std::size_t>(f)] = (hi - lo) == 0.0 || (mode == ScalingMode::zscore && p.std[f] == 0.0);
  }
  return p;
}

UserProfileMatrix aggregate_users(const Cohort& cohort, const ScalingParams& scaler,
                                  const AggregateOptions& options) {
  const int nf = cohort.n_features();
  const int nu = cohort.n_users();
  const int nc = cohort.mapping().n_classes();
  const int cols = nf + (options.include_label_fractions ? nc : 0);

  // Cohort-wide scaled median per feature, used when a user has no
  // observation of that feature at all.
  Vector fallback = Vector::Zero(nf);
  {
    std::vector<double> scaled;
    for (int f = 0; f < nf; ++f) {
      scaled.clear();
      for (long i = 0; i < cohort.features().rows(); ++i) {
        const double v = cohort.features()(i, f);
        if (!is_missing(v)) scaled.push_back(scaler.apply(f, v));
      }
      const double med = median_of(scaled);
      fallback[f] = is_missing(med) ? 0.0 : med;
    }
  }

  UserProfileMatrix out;
  out.user_ids = cohort.users();
  out.column_names = cohort.schema().feature_names;
  if (options.include_label_fractions)
    for (const auto& cls : cohort.mapping().class_order)
      out.column_names.push_back("label_fraction:" + cls);
  out.values = Matrix::Zero(nu, cols);

  for (int u = 0; u < nu; ++u) {
    const auto& rows = cohort.rows_of(out.user_ids[static_cast<std::size_t>(u)]);
    for (int f = 0; f < nf; ++f) {
      double sum = 0;
      long n = 0;
      for (int r : rows) {
        const double v = cohort.features()(r, f);
        if (is_missing(v)) continue;
        sum += scaler.apply(f, v);
        ++n;
      }
      out.values(u, f) = n > 0 ? sum / static_cast<double>(n) : fallback[f];
    }
    if (options.include_label_fractions) {
      std::vector<long> counts(static_cast<std::size_t>(nc), 0);
      for (int r : rows)
        counts[static_cast<std::size_t>(cohort.reports()[static_cast<std::size_t>(r)].class_label)]++;
      for (int c = 0; c < nc; ++c)
        out.values(u, nf + c) =
            static_cast<double>(counts[static_cast<std::size_t>(c)]) / static_cast<double>(rows.size());
    }
  }
  return out;
}

int SimilarityMatrix::index_of(const std::string& user_id) const {
  for (std::size_t i = 0; i < user_ids.size(); ++i)
    if (user_ids[i] == user_id) return static_cast<int>(i);
  fail(ErrorCode::UnknownUser, "unknown user '" + user_id + "'");
}

SimilarityMatrix cosine_similarity(const UserProfileMatrix& profiles) {
  const long nu = profiles.values.rows();
  if (nu < 2) fail(ErrorCode::Precondition, "similarity needs at least two users");

  Matrix unit = profiles.values;
  std::vector<bool> zero(static_cast<std::size_t>(nu), false);
  for (long i = 0; i < nu; ++i) {
    const double norm = unit.row(i).norm();
    if (norm == 0.0) {
      zero[static_cast<std::size_t>(i)] = true;
    } else {
      unit.row(i) /= norm;
    }
  }

  Matrix raw = unit * unit.transpose();
  for (long i = 0; i < nu; ++i)
    if (zero[static_cast<std::size_t>(i)]) {
      raw.row(i).setZero();
      raw.col(i).setZero();
    }

  Matrix stored = ((raw.array() + 1.0) / 2.0).cwiseMin(1.0).cwiseMax(0.0);
  stored = ((stored + stored.transpose()) / 2.0).eval();
  stored.diagonal().setOnes();

  SimilarityMatrix m;
  m.user_ids = profiles.user_ids;
  m.values = std::move(stored);
  return m;
}

std::vector<std::pair<std::string, double>> similarity_row(const SimilarityMatrix& matrix,
                                                           const std::string& target) {
  const int t = matrix.index_of(target);
  std::vector<std::pair<std::string, double>> out;
  out.reserve(matrix.user_ids.size() - 1);
  for (std::size_t i = 0; i < matrix.user_ids.size(); ++i) {
    if (static_cast<int>(i) == t) continue;
    out.emplace_back(matrix.user_ids[i], matrix.values(t, static_cast<long>(i)));
  }
  return out;
}

namespace {

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace

void save_profiles_csv(const UserProfileMatrix& profiles, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write '" + path + "'");
  out << "user_id";
  for (const auto& c : profiles.column_names) out << ',' << c;
  out << '\n';
  for (long i = 0; i < profiles.values.rows(); ++i) {
    out << profiles.user_ids[static_cast<std::size_t>(i)];
    for (long j = 0; j < profiles.values.cols(); ++j) out << ',' << format_double(profiles.values(i, j));
    out << '\n';
  }
}

void save_similarity_csv(const SimilarityMatrix& matrix, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write '" + path + "'");
  out << "user_id";
  for (const auto& u : matrix.user_ids) out << ',' << u;
  out << '\n';
  for (long i = 0; i < matrix.values.rows(); ++i) {
    out << matrix.user_ids[static_cast<std::size_t>(i)];
    for (long j = 0; j < matrix.values.cols(); ++j) out << ',' << format_double(matrix.values(i, j));
    out << '\n';
  }
}

}  // namespace cbm

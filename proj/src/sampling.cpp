#include "cbm/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cbm {

Protocol protocol_from(const std::string& name) {
  if (name == "PLM") return Protocol::PLM;
  if (name == "HM") return Protocol::HM;
  if (name == "ULM") return Protocol::ULM;
  if (name == "CBM") return Protocol::CBM;
  fail(ErrorCode::ConfigError, "unknown protocol '" + name + "'");
}

const char* to_string(Protocol protocol) {
  switch (protocol) {
    case Protocol::PLM: return "PLM";
    case Protocol::HM: return "HM";
    case Protocol::ULM: return "ULM";
    case Protocol::CBM: return "CBM";
  }
  return "?";
}

std::uint64_t protocol_tag(Protocol protocol) {
  switch (protocol) {
    case Protocol::PLM: return 1;
    case Protocol::HM: return 2;
    case Protocol::ULM: return 3;
    case Protocol::CBM: return 4;
  }
  return 0;
}

std::uint64_t task_seed(std::uint64_t master, Protocol protocol, int user_ordinal, int repeat,
                        std::uint64_t purpose) {
  return mix_seed(master, {protocol_tag(protocol), static_cast<std::uint64_t>(user_ordinal),
                           static_cast<std::uint64_t>(repeat), purpose});
}

std::vector<std::string> Split::train_ids(const Cohort& cohort) const {
  std::vector<std::string> out;
  out.reserve(train_rows.size());
  for (int r : train_rows) out.push_back(cohort.reports()[static_cast<std::size_t>(r)].report_id);
  return out;
}

std::vector<std::string> Split::test_ids(const Cohort& cohort) const {
  std::vector<std::string> out;
  out.reserve(test_rows.size());
  for (int r : test_rows) out.push_back(cohort.reports()[static_cast<std::size_t>(r)].report_id);
  return out;
}

namespace {

// Shuffles `rows` and takes the first round(fraction * n), at least 1.
std::vector<int> sample_rows(std::vector<int> rows, double fraction, Rng& rng) {
  if (rows.empty()) return rows;
  rng.shuffle(rows);
  auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(rows.size()) + 0.5));
  k = std::clamp<std::size_t>(k, 1, rows.size());
  rows.resize(k);
  return rows;
}

struct TargetSplit {
  std::vector<int> train;
  std::vector<int> test;
};

// 70/30 split of the target's rows. Stratified by class when enabled and
// every present class has at least two rows; train counts then follow the
// largest-remainder rule so the total stays at floor(frac * n) where the
// per-class [1, n_c-1] clamp allows.
TargetSplit split_target_rows(const Cohort& cohort, const std::vector<int>& rows, double frac,
                              bool stratified, Rng& rng) {
  const int n = static_cast<int>(rows.size());
  if (n < 2) fail(ErrorCode::InsufficientData, "target has fewer than 2 reports");

  const int n_classes = cohort.mapping().n_classes();
  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(n_classes));
  for (int r : rows)
    by_class[static_cast<std::size_t>(cohort.reports()[static_cast<std::size_t>(r)].class_label)]
        .push_back(r);

  bool can_stratify = stratified;
  for (const auto& bucket : by_class)
    if (!bucket.empty() && bucket.size() < 2) can_stratify = false;

  TargetSplit out;
  if (!can_stratify) {
    std::vector<int> shuffled = rows;
    rng.shuffle(shuffled);
    auto k = static_cast<std::size_t>(std::floor(frac * static_cast<double>(n)));
    k = std::clamp<std::size_t>(k, 1, static_cast<std::size_t>(n) - 1);
    out.train.assign(shuffled.begin(), shuffled.begin() + static_cast<long>(k));
    out.test.assign(shuffled.begin() + static_cast<long>(k), shuffled.end());
    return out;
  }

  const int train_total = std::clamp(static_cast<int>(std::floor(frac * static_cast<double>(n))),
                                     1, n - 1);
  std::vector<int> take(static_cast<std::size_t>(n_classes), 0);
  std::vector<std::pair<double, int>> remainders;  // (-fraction, class) for stable ordering
  int base_sum = 0;
  for (int c = 0; c < n_classes; ++c) {
    const auto m = static_cast<double>(by_class[static_cast<std::size_t>(c)].size());
    if (m == 0) continue;
    const double exact = frac * m;
    take[static_cast<std::size_t>(c)] = static_cast<int>(std::floor(exact));
    base_sum += take[static_cast<std::size_t>(c)];
    remainders.emplace_back(-(exact - std::floor(exact)), c);
  }
  std::stable_sort(remainders.begin(), remainders.end());
  for (int extra = train_total - base_sum; extra > 0 && !remainders.empty(); --extra) {
    // hand out one slot per class, by descending fractional remainder
    const int c = remainders[static_cast<std::size_t>((train_total - base_sum) - extra) %
                             remainders.size()]
                      .second;
    take[static_cast<std::size_t>(c)]++;
  }
  for (int c = 0; c < n_classes; ++c) {
    auto& bucket = by_class[static_cast<std::size_t>(c)];
    if (bucket.empty()) continue;
    const int m = static_cast<int>(bucket.size());
    const int k = std::clamp(take[static_cast<std::size_t>(c)], 1, m - 1);
    rng.shuffle(bucket);
    out.train.insert(out.train.end(), bucket.begin(), bucket.begin() + k);
    out.test.insert(out.test.end(), bucket.begin() + k, bucket.end());
  }
  return out;
}

}  // namespace

Split make_split(const Cohort& cohort, Protocol protocol, const std::string& target,
                 const Community* community, const SplitSpec& spec, int repeat) {
  const int ordinal = cohort.user_ordinal(target);
  Rng rng(task_seed(spec.seed, protocol, ordinal, repeat, seed_purpose::split));

  const auto& target_rows = cohort.rows_of(target);
  if (protocol == Protocol::ULM) {
    std::vector<long> counts(static_cast<std::size_t>(cohort.mapping().n_classes()), 0);
    for (int r : target_rows)
      counts[static_cast<std::size_t>(cohort.reports()[static_cast<std::size_t>(r)].class_label)]++;
    for (int c = 0; c < cohort.mapping().n_classes(); ++c)
      if (counts[static_cast<std::size_t>(c)] == 0)
        fail(ErrorCode::InsufficientData,
             "ULM target '" + target + "' has no reports of class '" +
                 cohort.mapping().class_order[static_cast<std::size_t>(c)] + "'");
  }

  // RNG consumption order is fixed: target 70/30 first, then the pool sample.
  TargetSplit ts = split_target_rows(cohort, target_rows, spec.target_train_fraction,
                                     spec.stratified, rng);

  Split split;
  split.test_rows = ts.test;
  switch (protocol) {
    case Protocol::ULM:
      split.train_rows = ts.train;
      break;
    case Protocol::PLM:
    case Protocol::HM: {
      if (cohort.n_users() < 2)
        fail(ErrorCode::InsufficientData, "population protocols need at least 2 users");
      std::vector<int> pool;
      for (const auto& u : cohort.users()) {
        if (u == target) continue;
        const auto& rows = cohort.rows_of(u);
        pool.insert(pool.end(), rows.begin(), rows.end());
      }
      split.train_rows = sample_rows(std::move(pool), spec.population_fraction, rng);
      if (protocol == Protocol::HM)
        split.train_rows.insert(split.train_rows.end(), ts.train.begin(), ts.train.end());
      break;
    }
    case Protocol::CBM: {
      if (community == nullptr || community->empty())
        fail(ErrorCode::EmptyCommunity, "CBM split for '" + target + "' needs a non-empty community");
      std::vector<int> pool;
      for (const auto& member : community->members) {
        const auto& rows = cohort.rows_of(member);
        pool.insert(pool.end(), rows.begin(), rows.end());
      }
      split.train_rows = sample_rows(std::move(pool), spec.population_fraction, rng);
      split.train_rows.insert(split.train_rows.end(), ts.train.begin(), ts.train.end());
      break;
    }
  }

  std::sort(split.train_rows.begin(), split.train_rows.end());
  std::sort(split.test_rows.begin(), split.test_rows.end());
  if (split.train_rows.empty() || split.test_rows.empty())
    fail(ErrorCode::InsufficientData, "degenerate split for '" + target + "'");
  return split;
}

LabeledRows smote_oversample(const LabeledRows& rows, const SmoteConfig& config,
                             std::uint64_t seed, int n_classes) {
  if (rows.y.empty()) fail(ErrorCode::Precondition, "SMOTE needs at least one row");
  if (rows.x.rows() != static_cast<long>(rows.y.size()))
    fail(ErrorCode::LengthMismatch, "SMOTE feature/label row counts differ");
  if (rows.x.hasNaN()) fail(ErrorCode::Precondition, "SMOTE input must be imputed first");
  if (config.k_neighbors < 1) fail(ErrorCode::ConfigError, "k_neighbors must be >= 1");

  std::vector<long> counts(static_cast<std::size_t>(n_classes), 0);
  for (int c : rows.y) counts[static_cast<std::size_t>(c)]++;
  const long majority = *std::max_element(counts.begin(), counts.end());

  long total = rows.x.rows();
  if (config.enabled)
    for (long c : counts)
      if (c > 0) total += majority - c;

  LabeledRows out;
  out.x = Matrix(total, rows.x.cols());
  out.x.topRows(rows.x.rows()) = rows.x;
  out.y = rows.y;
  if (!config.enabled || total == rows.x.rows()) return out;

  // Per-feature ranges drive the degenerate-case jitter scale.
  Vector range = rows.x.colwise().maxCoeff() - rows.x.colwise().minCoeff();

  Rng rng(seed);
  long cursor = rows.x.rows();
  for (int c = 0; c < n_classes; ++c) {
    const long have = counts[static_cast<std::size_t>(c)];
    if (have == 0 || have >= majority) continue;
    std::vector<int> members;
    for (std::size_t i = 0; i < rows.y.size(); ++i)
      if (rows.y[i] == c) members.push_back(static_cast<int>(i));
    const long need = majority - have;

    if (have == 1) {
      // No neighbor to interpolate toward: duplicate with tiny jitter.
      const int base = members[0];
      for (long s = 0; s < need; ++s) {
        for (long f = 0; f < rows.x.cols(); ++f)
          out.x(cursor, f) = rows.x(base, f) + 1e-6 * range[f] * rng.normal();
        out.y.push_back(c);
        ++cursor;
      }
      continue;
    }

    const int k = std::min<int>(config.k_neighbors, static_cast<int>(have) - 1);
    // Brute-force k nearest same-class neighbors, ties broken by row index.
    std::vector<std::vector<int>> nns(members.size());
    std::vector<std::pair<double, int>> dist;
    for (std::size_t i = 0; i < members.size(); ++i) {
      dist.clear();
      for (std::size_t j = 0; j < members.size(); ++j) {
        if (j == i) continue;
        const double d = (rows.x.row(members[i]) - rows.x.row(members[j])).squaredNorm();
        dist.emplace_back(d, members[j]);
      }
      std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
      nns[i].reserve(static_cast<std::size_t>(k));
      for (int t = 0; t < k; ++t) nns[i].push_back(dist[static_cast<std::size_t>(t)].second);
    }

    // Round-robin over a shuffled base order spreads synthetics evenly.
    std::vector<int> order(members.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    for (long s = 0; s < need; ++s) {
      const int mi = order[static_cast<std::size_t>(s) % order.size()];
      const int base = members[static_cast<std::size_t>(mi)];
      const int nn = nns[static_cast<std::size_t>(mi)][rng.below(static_cast<std::uint64_t>(k))];
      const double lambda = rng.real();
      out.x.row(cursor) = rows.x.row(base) + lambda * (rows.x.row(nn) - rows.x.row(base));
      out.y.push_back(c);
      ++cursor;
    }
  }
  return out;
}

Imputer Imputer::fit(const Matrix& x) {
  Imputer imp;
  imp.medians = Vector::Zero(x.cols());
  std::vector<double> col;
  for (long f = 0; f < x.cols(); ++f) {
    col.clear();
    for (long i = 0; i < x.rows(); ++i)
      if (!is_missing(x(i, f))) col.push_back(x(i, f));
    const double med = median_of(col);
    imp.medians[f] = is_missing(med) ? 0.0 : med;
  }
  return imp;
}

Matrix Imputer::transform(const Matrix& x) const {
  Matrix out = x;
  for (long i = 0; i < out.rows(); ++i)
    for (long f = 0; f < out.cols(); ++f)
      if (is_missing(out(i, f))) out(i, f) = medians[f];
  return out;
}

}  // namespace cbm

#include "cbm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cbm/error.hpp"

namespace cbm {

namespace {

void check_lengths(const std::vector<int>& truth, std::size_t other, const char* what) {
  if (truth.empty()) fail(ErrorCode::Empty, "no labels given");
  if (truth.size() != other)
    fail(ErrorCode::LengthMismatch, std::string(what) + ": length mismatch");
}

}  // namespace

double accuracy(const std::vector<int>& truth, const std::vector<int>& pred) {
  check_lengths(truth, pred.size(), "accuracy");
  long correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += truth[i] == pred[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

double macro_f1(const std::vector<int>& truth, const std::vector<int>& pred, int n_classes) {
  check_lengths(truth, pred.size(), "macro_f1");
  double sum = 0;
  for (int c = 0; c < n_classes; ++c) {
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const bool t = truth[i] == c, p = pred[i] == c;
      if (t && p) ++tp;
      else if (!t && p) ++fp;
      else if (t && !p) ++fn;
    }
    const double precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    const double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
    sum += f1;
  }
  return sum / static_cast<double>(n_classes);
}

double auc_ovr_macro(const std::vector<int>& truth, const Matrix& proba, int n_classes) {
  check_lengths(truth, static_cast<std::size_t>(proba.rows()), "auc");
  const std::size_t n = truth.size();

  double sum = 0;
  int eligible = 0;
  std::vector<int> order(n);
  for (int c = 0; c < n_classes; ++c) {
    long pos = 0;
    for (int t : truth) pos += t == c ? 1 : 0;
    const long neg = static_cast<long>(n) - pos;
    if (pos == 0 || neg == 0) continue;

    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return proba(a, c) < proba(b, c); });

    // Average ranks over tied scores, then the Mann-Whitney statistic.
    double rank_sum_pos = 0;
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && proba(order[j + 1], c) == proba(order[i], c)) ++j;
      const double mean_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
      for (std::size_t k = i; k <= j; ++k)
        if (truth[static_cast<std::size_t>(order[k])] == c) rank_sum_pos += mean_rank;
      i = j + 1;
    }
    const double u = rank_sum_pos - static_cast<double>(pos) * (static_cast<double>(pos) + 1.0) / 2.0;
    sum += u / (static_cast<double>(pos) * static_cast<double>(neg));
    ++eligible;
  }
  if (eligible == 0)
    fail(ErrorCode::NoEligibleClass, "no class has both positives and negatives in truth");
  return sum / static_cast<double>(eligible);
}

Stats aggregate_stats(const std::vector<double>& values) {
  if (values.empty()) fail(ErrorCode::Empty, "no values to aggregate");
  double sum = 0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double ss = 0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return Stats{mean, std::sqrt(ss / static_cast<double>(values.size()))};
}

MetricsBundle evaluate(const std::vector<int>& truth, const std::vector<int>& pred,
                       const Matrix& proba, int n_classes) {
  MetricsBundle b;
  b.accuracy = accuracy(truth, pred);
  b.macro_f1 = macro_f1(truth, pred, n_classes);
  try {
    b.auc = auc_ovr_macro(truth, proba, n_classes);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoEligibleClass) throw;
  }
  b.support.assign(static_cast<std::size_t>(n_classes), 0);
  for (int t : truth) b.support[static_cast<std::size_t>(t)]++;
  return b;
}

}  // namespace cbm

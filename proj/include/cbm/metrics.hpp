#pragma once

#include <optional>
#include <vector>

#include "cbm/types.hpp"

namespace cbm {

/// Fraction of matching labels. Throws on empty or mismatched inputs.
double accuracy(const std::vector<int>& truth, const std::vector<int>& pred);

/// Unweighted mean of per-class F1 over all n_classes classes; a class with
/// no true and no predicted instances contributes 0. Zero-denominator
/// precision/recall are taken as 0.
double macro_f1(const std::vector<int>& truth, const std::vector<int>& pred, int n_classes);

/// One-vs-rest macro AUC-ROC by the rank (Mann-Whitney) formulation, ties
/// counted 0.5. Classes lacking positives or negatives in `truth` are
/// dropped from the macro average; throws NoEligibleClass when none remain.
double auc_ovr_macro(const std::vector<int>& truth, const Matrix& proba, int n_classes);

struct Stats {
  double mean = 0.0;
  double stddev = 0.0;  // population (N divisor)
};

Stats aggregate_stats(const std::vector<double>& values);

struct MetricsBundle {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::optional<double> auc;  // absent when no class is AUC-eligible
  std::vector<long> support;  // per-class test counts
};

MetricsBundle evaluate(const std::vector<int>& truth, const std::vector<int>& pred,
                       const Matrix& proba, int n_classes);

}  // namespace cbm

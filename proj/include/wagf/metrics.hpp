#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "wagf/real.hpp"

WAGF_BEGIN_NAMESPACE

struct ClassScores {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::int64_t support = 0;
};

/// Confusion matrix (rows = true class, columns = predicted class) and the
/// derived scores. Classes with a zero denominator score 0.
struct MetricsReport {
  std::size_t num_classes = 0;
  std::vector<std::int64_t> confusion;  // row-major K x K
  std::vector<ClassScores> per_class;
  double accuracy = 0;
  double macro_precision = 0;
  double macro_recall = 0;
  double macro_f1 = 0;
  double weighted_precision = 0;
  double weighted_recall = 0;
  double weighted_f1 = 0;

  std::int64_t at(std::size_t truth, std::size_t predicted) const {
    return confusion[truth * num_classes + predicted];
  }
  std::int64_t total() const;

  /// Fixed key order: accuracy, macro_*, weighted_*, per_class, confusion.
  nlohmann::ordered_json to_json(const std::vector<std::string>& class_names) const;
  /// Header row of predicted class names, then one row per true class.
  std::string confusion_csv(const std::vector<std::string>& class_names) const;
};

MetricsReport compute_metrics(std::span<const int> truth, std::span<const int> predicted, std::size_t num_classes);

WAGF_END_NAMESPACE

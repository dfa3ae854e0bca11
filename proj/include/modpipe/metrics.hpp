#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "modpipe/corpus.hpp"
#include "modpipe/pipeline.hpp"

namespace modpipe {

/// counts[g][p]: rows are gold classes, columns predicted classes.
struct ConfusionMatrix {
  std::vector<std::string> classes;
  std::vector<std::vector<std::size_t>> counts;

  std::size_t total() const;
  std::size_t trace() const;
};

/// Throws ContractViolation on unequal lengths and InputError on a label
/// missing from `classes`.
ConfusionMatrix confusion(std::span<const std::string> gold, std::span<const std::string> pred,
                          std::vector<std::string> classes);

struct ClassMetrics {
  std::string label;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double f2 = 0.0;
  std::size_t support = 0;
};

struct EvaluationReport {
  std::string name;
  std::vector<ClassMetrics> per_class;
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double macro_f2 = 0.0;
  std::size_t scored_count = 0;
  std::size_t excluded_count = 0;
  std::size_t failed_count = 0;
  /// Set when nothing could be scored; all rates are then zero.
  bool empty = false;
  ConfusionMatrix confusion;
};

/// Per-class P/R/F1/F2 with 0/0 -> 0, unweighted macro means and accuracy.
EvaluationReport macro_report(const ConfusionMatrix& cm);

struct TaskScore {
  Task task = Task::kHopeHate;
  std::vector<EvaluationReport> reports;
  /// Unweighted mean over non-empty sub-task reports (task 2 only).
  std::optional<EvaluationReport> combined;
};

/// Predictions are matched to gold records by id. A prediction for an unknown
/// id throws InputError; gold records without a prediction count as failed.
TaskScore score_task1(std::span<const Prediction> predictions, std::span<const Record> gold);
/// Hate is scored only where predicted offensive == yes and a gold hate label
/// exists; every other successful record counts as excluded.
TaskScore score_task2(std::span<const Prediction> predictions, std::span<const Record> gold);
TaskScore score_task3(std::span<const Prediction> predictions, std::span<const Record> gold);
TaskScore score_task(Task task, std::span<const Prediction> predictions,
                     std::span<const Record> gold);

nlohmann::ordered_json report_json(const EvaluationReport& report);
nlohmann::ordered_json score_json(const TaskScore& score);
/// Human-readable aligned table.
std::string format_table(const TaskScore& score);
/// Header row and first column carry the class names.
std::string confusion_csv(const ConfusionMatrix& cm);

}  // namespace modpipe

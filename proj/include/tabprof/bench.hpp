#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tabprof/models.hpp"
#include "tabprof/tabular.hpp"

namespace tabprof {

enum class Metric { RMSE, MAE, R2, ACC, AUC, F1 };

const char* metric_name(Metric m);
Metric metric_from_name(const std::string& name);
bool lower_is_better(Metric m);
std::vector<Metric> metrics_for_task(TaskKind task);
/// The comparison metric of the benchmark: RMSE for regression, AUC for
/// classification.
Metric primary_metric(TaskKind task);

struct RegressionMetrics {
  double rmse = 0.0;
  double mae = 0.0;
  double r2 = 0.0;
};

RegressionMetrics regression_metrics(std::span<const double> y,
                                     std::span<const double> yhat);

struct ClassificationMetrics {
  double acc = 0.0;
  double auc = 0.0;
  double f1 = 0.0;
};

/// Mann-Whitney AUC with the tie correction, assembled from integer rank
/// sums so it agrees exactly with pair counting.
double binary_auc(std::span<const int> y, std::span<const double> score);

/// y holds class indices into the score columns. Binary AUC/F1 target class
/// index 1; multiclass reductions are macro one-vs-rest. Accuracy breaks
/// argmax ties toward the lowest class index.
ClassificationMetrics classification_metrics(std::span<const int> y,
                                             const Matrix& scores);

struct MatrixEntry {
  std::string dataset_id;
  std::string model_id;
  std::string group_tag;
  std::size_t fold = 0;
  Metric metric = Metric::RMSE;
  double value = 0.0;
  std::string provenance = "internal";

  bool operator==(const MatrixEntry&) const = default;
};

struct CellFailure {
  std::string dataset_id;
  std::string model_id;
  std::size_t fold = 0;
  std::string message;
};

struct PerformanceMatrix {
  std::vector<MatrixEntry> entries;
  std::size_t fold_count = 10;
  std::vector<CellFailure> diagnostics;  // absent cells, never scores

  /// Sorted unique ids, the canonical iteration order everywhere.
  std::vector<std::string> dataset_ids() const;
  std::vector<std::string> model_ids() const;
  std::string group_of(const std::string& model_id) const;

  /// Per-fold values for one (dataset, model, metric); empty when absent,
  /// exactly fold_count values otherwise.
  std::vector<double> fold_values(const std::string& dataset_id,
                                  const std::string& model_id,
                                  Metric metric) const;

  /// Metrics present for a dataset imply its task.
  TaskKind task_of(const std::string& dataset_id) const;

  void sort_canonical();
};

std::string matrix_to_csv(const PerformanceMatrix& m);
PerformanceMatrix matrix_from_csv(const std::string& text);
void write_matrix(const PerformanceMatrix& m, const std::string& path);
PerformanceMatrix read_matrix(const std::string& path);

struct GridOptions {
  std::size_t k = 10;
  std::uint64_t seed = 42;
  std::size_t threads = 0;  // 0: TABPROF_THREADS or hardware concurrency
  bool stratified = true;   // classification only
  bool dump_predictions = false;
};

struct GridResult {
  PerformanceMatrix matrix;
  std::map<std::string, FoldAssignment> folds;
  /// Internal predictions in the external-prediction CSV format, filled
  /// when dump_predictions is set. Replayable through ingest_predictions.
  std::string predictions_csv;
  std::string fold_digests_json;
};

/// Trains every (dataset, spec, fold) cell under k-fold CV and collects all
/// task metrics. Failing cells are recorded as diagnostics and the whole
/// (dataset, model) pair is dropped, keeping the matrix complete per pair.
/// Deterministic for a fixed seed, independent of thread count.
GridResult run_grid(const std::vector<TabularDataset>& datasets,
                    const std::vector<ModelSpec>& specs,
                    const GridOptions& options);

/// Merges external per-row predictions (CSV text + sidecar JSON with the
/// fold digests) into a matrix. Splits must replay a FoldAssignment this
/// tool published; metrics are computed exactly as for internal models.
PerformanceMatrix ingest_predictions(
    const std::string& predictions_csv, const std::string& sidecar_json,
    const std::vector<TabularDataset>& datasets,
    const std::map<std::string, FoldAssignment>& folds,
    PerformanceMatrix matrix);

/// File-based wrapper: reads `path` and `path + ".meta.json"`.
PerformanceMatrix ingest_predictions_file(
    const std::string& path, const std::vector<TabularDataset>& datasets,
    const std::map<std::string, FoldAssignment>& folds,
    PerformanceMatrix matrix);

std::size_t resolve_thread_count(std::size_t requested);

}  // namespace tabprof

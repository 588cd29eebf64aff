#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tabprof/linalg.hpp"

namespace tabprof {

enum class ColumnKind { numeric, categorical };
enum class TaskKind { classification, regression };

const char* task_name(TaskKind t);
TaskKind task_from_name(const std::string& name);

/// Category assigned to missing categorical cells. It participates in
/// cardinality and one-hot width like any observed token.
inline const std::string kMissingToken = "⟂missing⟂";

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  std::size_t cardinality = 0;  // categorical only; >= 1
  std::size_t missing_count = 0;
};

struct Cell {
  bool missing = false;
  double num = 0.0;    // numeric columns
  std::string token;   // categorical columns

  bool operator==(const Cell&) const = default;
};

/// Immutable after construction. `cells` is row-major with exactly
/// |columns| entries per row.
struct TabularDataset {
  std::string id;
  std::vector<ColumnSpec> columns;
  std::vector<Cell> cells;
  std::size_t target = 0;  // index into columns
  TaskKind task = TaskKind::regression;

  std::size_t row_count() const {
    return columns.empty() ? 0 : cells.size() / columns.size();
  }
  std::size_t column_count() const { return columns.size(); }
  std::size_t feature_count() const { return columns.size() - 1; }

  const Cell& cell(std::size_t row, std::size_t col) const {
    return cells[row * columns.size() + col];
  }
  Cell& cell(std::size_t row, std::size_t col) {
    return cells[row * columns.size() + col];
  }

  /// Token a categorical cell contributes to cardinality and encoding.
  const std::string& effective_token(std::size_t row, std::size_t col) const {
    const Cell& c = cell(row, col);
    return c.missing ? kMissingToken : c.token;
  }

  /// Distinct effective tokens of a categorical column, sorted.
  std::vector<std::string> category_tokens(std::size_t col) const;

  /// New dataset with the given rows (order preserved, duplicates allowed);
  /// column specs recomputed.
  TabularDataset select_rows(const std::vector<std::size_t>& rows,
                             const std::string& new_id) const;

  /// Target encoded numerically: regression keeps values, classification
  /// maps tokens to 0..K-1 in sorted token order.
  std::vector<double> encoded_target() const;
};

/// Recomputes cardinalities and missing counts from the cells and checks the
/// structural invariants (>= 2 columns, task/target kind agreement,
/// classification target cardinality >= 2). Does not enforce the minimum
/// row count; that is a load-time rule.
void revalidate(TabularDataset& d);

struct SchemaDescriptor {
  std::optional<std::string> target_name;
  std::optional<TaskKind> task;
  // Explicit kinds by column name; inference fills the rest.
  std::vector<std::pair<std::string, ColumnKind>> kinds;
};

/// Parses the JSON sidecar format: {"<column>": {"kind": "numeric"},
/// ..., "target": "<name>", "task": "classification"}.
SchemaDescriptor parse_schema_json(const std::string& text);

struct LoadOptions {
  std::size_t min_rows = 10;  // 10-fold CV floor; profiling relaxes this
  std::string id;             // defaults to file stem
};

/// CSV loader with schema inference: a column is numeric iff every
/// non-missing cell parses as a finite decimal number. Unquoted "NA" and
/// empty fields are missing. Default target is the last column;
/// default task is regression iff the target column is numeric.
TabularDataset load_dataset(const std::string& path,
                            const std::optional<SchemaDescriptor>& schema = {},
                            const LoadOptions& options = {});

TabularDataset load_dataset_from_string(
    const std::string& csv_text, const std::string& id,
    const std::optional<SchemaDescriptor>& schema = {},
    const LoadOptions& options = {});

/// Canonical writer: header row, shortest round-trip numerics, quoted
/// tokens where needed, missing cells as empty fields. Writes the schema
/// sidecar to `path + ".schema.json"` so a reload reproduces kinds, target
/// and task exactly.
void write_dataset(const TabularDataset& d, const std::string& path);
std::string dataset_to_csv(const TabularDataset& d);
std::string dataset_schema_json(const TabularDataset& d);

/// One-hot width of the feature block: numeric features count 1 each,
/// categorical features count their cardinality. Target excluded.
std::size_t ohe_column_count(const TabularDataset& d);

/// Uniform sample of n rows without replacement, deterministic per seed.
TabularDataset subsample(const TabularDataset& d, std::size_t n,
                         std::uint64_t seed);

struct FoldAssignment {
  std::string dataset_id;
  std::uint64_t seed = 0;
  std::size_t k = 0;
  std::vector<std::size_t> fold_of_row;

  std::vector<std::size_t> rows_in_fold(std::size_t fold) const;
  std::vector<std::size_t> rows_not_in_fold(std::size_t fold) const;
  /// FNV digest over (dataset_id, seed, k, fold_of_row); the handshake
  /// token external predictions must echo.
  std::string digest() const;
};

/// K folds with sizes differing by at most one. Unstratified: remainder
/// rows land in the lowest-index folds. Stratified (classification only):
/// per-class counts stay within one of proportional; class remainders
/// rotate across folds so totals stay balanced.
FoldAssignment make_folds(const TabularDataset& d, std::size_t k,
                          std::uint64_t seed, bool stratified);

struct StandardizedColumns {
  Matrix values;                       // rows x numeric feature columns
  std::vector<std::size_t> column_index;  // source column per output column
  std::vector<double> means;
  std::vector<double> stds;            // population convention
  std::vector<bool> constant;          // constant columns emit all zeros
};

/// Standardizes the numeric feature block (missing cells imputed by column
/// mean first). Population std; constant columns map to zeros and are
/// flagged.
StandardizedColumns standardize_columns(const TabularDataset& d);

}  // namespace tabprof

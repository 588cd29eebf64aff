#pragma once

#include <stdexcept>
#include <string>

namespace tabprof {

/// Stable error codes shared across the whole pipeline. Every throwing
/// operation documents which of these it can raise.
enum class errc {
  // tabular-core
  parse_error,
  schema_mismatch,
  too_few_rows,
  no_target,
  sample_too_large,
  too_few_rows_for_k,
  stratify_on_regression,
  no_numeric_features,
  // metafeatures
  constant_column,
  too_few_values,
  no_usable_numeric_columns,
  fewer_than_two_numeric,
  constant_input,
  degenerate_target,
  // baseline-models
  degenerate_training,
  // bench-harness
  length_mismatch,
  r2_undefined,
  single_class_truth,
  unknown_fold_digest,
  row_count_mismatch,
  score_not_normalized,
  // rank-stats
  incomplete_grid,
  empty_selection,
  missing_group,
  too_few_models,
  // meta-learner
  non_finite_feature,
  missing_standardization,
  single_label,
  too_few_examples,
  unknown_feature,
  degenerate_range,
  // shared plumbing
  io_error,
  invalid_argument,
};

const char* errc_name(errc c);

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  errc code() const { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace tabprof

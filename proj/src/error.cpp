#include "tabprof/error.hpp"

namespace tabprof {

const char* errc_name(errc c) {
  switch (c) {
    case errc::parse_error: return "ParseError";
    case errc::schema_mismatch: return "SchemaMismatch";
    case errc::too_few_rows: return "TooFewRows";
    case errc::no_target: return "NoTarget";
    case errc::sample_too_large: return "SampleTooLarge";
    case errc::too_few_rows_for_k: return "TooFewRowsForK";
    case errc::stratify_on_regression: return "StratifyOnRegression";
    case errc::no_numeric_features: return "NoNumericFeatures";
    case errc::constant_column: return "ConstantColumn";
    case errc::too_few_values: return "TooFewValues";
    case errc::no_usable_numeric_columns: return "NoUsableNumericColumns";
    case errc::fewer_than_two_numeric: return "FewerThanTwoNumeric";
    case errc::constant_input: return "ConstantInput";
    case errc::degenerate_target: return "DegenerateTarget";
    case errc::degenerate_training: return "DegenerateTraining";
    case errc::length_mismatch: return "LengthMismatch";
    case errc::r2_undefined: return "R2Undefined";
    case errc::single_class_truth: return "SingleClassTruth";
    case errc::unknown_fold_digest: return "UnknownFoldDigest";
    case errc::row_count_mismatch: return "RowCountMismatch";
    case errc::score_not_normalized: return "ScoreNotNormalized";
    case errc::incomplete_grid: return "IncompleteGrid";
    case errc::empty_selection: return "EmptySelection";
    case errc::missing_group: return "MissingGroup";
    case errc::too_few_models: return "TooFewModels";
    case errc::non_finite_feature: return "NonFiniteFeature";
    case errc::missing_standardization: return "MissingStandardization";
    case errc::single_label: return "SingleLabel";
    case errc::too_few_examples: return "TooFewExamples";
    case errc::unknown_feature: return "UnknownFeature";
    case errc::degenerate_range: return "DegenerateRange";
    case errc::io_error: return "IoError";
    case errc::invalid_argument: return "InvalidArgument";
  }
  return "UnknownError";
}

}  // namespace tabprof

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tabprof/tabular.hpp"

namespace tabprof {

/// The per-dataset statistics driving model-family prediction: 20 canonical
/// entries plus rows_over_ohe_columns, which the published logistic model
/// uses as an extra regressor. Field order below is the canonical order for
/// every serialization.
struct MetaFeatureVector {
  std::string dataset_id;

  std::int64_t row_count = 0;
  std::int64_t column_count = 0;  // feature columns; target excluded
  std::int64_t ohe_columns = 0;
  std::int64_t numeric_features = 0;
  std::int64_t categorical_features = 0;
  std::int64_t task_flag = 0;  // 1 = classification, 0 = regression
  double cancor = 0.0;
  double kurtosis = 0.0;
  double avg_entropy = 0.0;
  double std_entropy = 0.0;
  double row_over_column = 0.0;
  double avg_asymmetry = 0.0;
  double avg_pearson_to_target = 0.0;
  double std_pearson_to_target = 0.0;
  double avg_feature_correlation = 0.0;
  double avg_coef_variation = 0.0;
  double std_coef_variation = 0.0;
  double avg_coef_anomaly = 0.0;
  double std_coef_anomaly = 0.0;
  double rows_over_ohe_columns = 0.0;
  std::int64_t pca_99 = 0;

  /// Fields zeroed by a division guard instead of erroring.
  std::vector<std::string> degenerate_fields;

  std::array<double, 21> as_array() const;
  double field(const std::string& name) const;
  void set_field(const std::string& name, double value);
};

inline constexpr std::size_t kMetaFeatureCount = 21;
extern const std::array<const char*, kMetaFeatureCount> kMetaFeatureNames;

/// A numeric feature column with missing cells replaced by the column mean.
/// All numeric statistics below operate on these completed columns.
std::vector<double> imputed_numeric_column(const TabularDataset& d,
                                           std::size_t col);

/// Columns with population std below this are treated as constant
/// throughout: skipped by moment features, dropped by PCA/cancor, and
/// contributing zero to correlation aggregates.
inline constexpr double kConstantStd = 1e-12;

/// Fourth standardized population moment minus 3 (Normal -> 0).
double excess_kurtosis(std::span<const double> column);
/// Mean excess kurtosis over non-constant numeric features.
double dataset_kurtosis(const TabularDataset& d);

/// Shannon entropy in bits of the distinct-value frequency distribution.
double entropy_from_counts(const std::vector<std::size_t>& counts);
double column_entropy(const TabularDataset& d, std::size_t col);

double pearson(std::span<const double> x, std::span<const double> y);

struct AvgStd {
  double avg = 0.0;
  double std = 0.0;  // population convention
};

AvgStd pearson_to_target_stats(const TabularDataset& d);
double feature_correlation_avg(const TabularDataset& d);
AvgStd coef_variation_stats(const TabularDataset& d);
AvgStd coef_anomaly_stats(const TabularDataset& d);
double asymmetry_avg(const TabularDataset& d);

/// Smallest m whose top-m partial sum reaches `fraction` of the total.
std::size_t pca_count_from_eigenvalues(std::span<const double> descending,
                                       double fraction = 0.99);

/// Smallest m such that the top-m eigenvalues of the feature correlation
/// matrix reach 99% of the total. Constant columns are dropped first.
std::size_t pca_components_99(const TabularDataset& d);

/// Multiple correlation coefficient of the encoded target regressed on the
/// standardized numeric features (ridge 1e-8). Equals the first canonical
/// correlation for a scalar target.
double cancor(const TabularDataset& d);

MetaFeatureVector extract(const TabularDataset& d);

std::string metafeature_csv_header();
std::string metafeature_csv_row(const MetaFeatureVector& v);
std::string metafeature_json(const MetaFeatureVector& v);

/// Reads rows from either the CSV or the JSON-lines report format.
std::vector<MetaFeatureVector> read_metafeature_file(const std::string& path);

}  // namespace tabprof

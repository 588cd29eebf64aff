// Independent straight-line reference implementations used only by tests.
// Nothing here may call into the library code paths it checks; the data
// model accessors are the only shared surface.
#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "tabprof/tabular.hpp"

namespace oracle {

// --- meta-feature oracle -------------------------------------------------

// Values in the canonical 21-field order:
// row_count, column_count, ohe_columns, numeric_features,
// categorical_features, task_flag, cancor, kurtosis, avg_entropy,
// std_entropy, row_over_column, avg_asymmetry, avg_pearson_to_target,
// std_pearson_to_target, avg_feature_correlation, avg_coef_variation,
// std_coef_variation, avg_coef_anomaly, std_coef_anomaly,
// rows_over_ohe_columns, pca_99.
std::array<double, 21> metafeatures(const tabprof::TabularDataset& d);

// Eigenvalues of a symmetric matrix, descending, via classical Jacobi with
// a largest-off-diagonal pivot search (the library uses cyclic sweeps).
std::vector<double> eigenvalues(std::vector<std::vector<double>> a);

// PCA count from raw standardized columns (not via the library).
std::size_t pca_count_99(const std::vector<std::vector<double>>& columns);

// --- metric oracles ------------------------------------------------------

double rmse(const std::vector<double>& y, const std::vector<double>& yhat);
double mae(const std::vector<double>& y, const std::vector<double>& yhat);
double r2(const std::vector<double>& y, const std::vector<double>& yhat);

// Pairwise Mann-Whitney counting: wins + half-ties over all pos/neg pairs,
// assembled from integers so the comparison against the library is exact.
double auc_pair_counting(const std::vector<int>& y,
                         const std::vector<double>& score);

double accuracy(const std::vector<int>& y,
                const std::vector<std::vector<double>>& scores);
double f1_binary(const std::vector<int>& y,
                 const std::vector<std::vector<double>>& scores);
double f1_macro(const std::vector<int>& y,
                const std::vector<std::vector<double>>& scores,
                int n_classes);

// --- rank statistics oracles ----------------------------------------------

// Friedman chi-square straight from the rank matrix (rows = datasets).
double friedman_from_ranks(const std::vector<std::vector<double>>& ranks);

// Exact permutation p-value: enumerates all (k!)^N no-tie rank assignments
// and counts statistics >= observed. Feasible for k<=4, N<=6.
double friedman_exact_permutation_p(
    const std::vector<std::vector<double>>& observed_ranks);

// --- misc -----------------------------------------------------------------

double sigmoid(double z);

}  // namespace oracle

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabprof/bench.hpp"
#include "tabprof/metafeatures.hpp"

namespace tabprof {

enum class MetaModelKind {
  table5_logistic,  // published coefficients, standardized features
  eq2_symbolic,     // published formula, raw features
  trained_logistic,
  trained_mlp,
};

const char* meta_kind_name(MetaModelKind k);
MetaModelKind meta_kind_from_name(const std::string& name);

/// One row of the meta-dataset. Canonical polarity: label 1 means the DL
/// group outperformed.
struct MetaExample {
  MetaFeatureVector features;
  int label = 0;
  std::string dataset_id;
  bool from_significance_filter = false;
  bool tie = false;  // best-model tie; TE credited by convention
};

struct Standardization {
  double mean = 0.0;
  double std = 1.0;
};

struct MetaModelSpec {
  int format_version = 1;
  MetaModelKind kind = MetaModelKind::eq2_symbolic;
  /// Named coefficients; "intercept" included. For trained_mlp the flat
  /// weight names are "l<layer>_w_<out>_<in>" / "l<layer>_b_<out>" and the
  /// layout lives in hyper["layout"].
  std::map<std::string, double> coefficients;
  /// Per-feature scaling applied before scoring; features absent here are
  /// scored raw (identity), which strict mode refuses.
  std::map<std::string, Standardization> standardization;
  nlohmann::ordered_json hyper = nlohmann::ordered_json::object();

  nlohmann::ordered_json to_json() const;
  static MetaModelSpec from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static MetaModelSpec load(const std::string& path);
};

/// The published logistic model with its coefficient table; standardization
/// defaults cover the five features whose corpus statistics were published,
/// the rest score raw unless the caller supplies statistics.
MetaModelSpec table5_spec();
/// The published symbolic-regression formula over raw features.
MetaModelSpec eq2_spec();

double score_eq2(const MetaFeatureVector& v);
double score_table5(const MetaFeatureVector& v, bool strict = false);
/// Dispatch over spec.kind. strict refuses identity-standardized features
/// for standardized-model kinds.
double score_meta(const MetaModelSpec& spec, const MetaFeatureVector& v,
                  bool strict = false);

enum class LabelMode { best_overall, best_te_vs_best_dl };

/// Labels datasets from a complete PerformanceMatrix by the primary metric
/// (RMSE regression / AUC classification). With `significance_alpha` the
/// examples are restricted to datasets whose best-TE-vs-best-DL difference
/// passes the paired t-test. Best-model ties go to TE and are flagged.
std::vector<MetaExample> build_meta_dataset(
    const PerformanceMatrix& matrix,
    const std::vector<MetaFeatureVector>& vectors, LabelMode mode,
    std::optional<double> significance_alpha = std::nullopt);

struct MetaTrainReport {
  bool converged = true;
  double final_gradient_norm = 0.0;
  std::size_t epochs_run = 0;
  double grid_cv_auc = 0.0;  // mlp lattice winner
  nlohmann::ordered_json chosen_hyper = nlohmann::ordered_json::object();
};

struct MetaTrainResult {
  MetaModelSpec spec;
  MetaTrainReport report;
};

/// trained_logistic: full-batch gradient descent on L2-regularized
/// cross-entropy over z-scored features, stopping at gradient norm 1e-8 or
/// the epoch cap (NonConvergence is reported, not thrown). trained_mlp:
/// small net trained per lattice point, selected by mean stratified-CV AUC.
MetaTrainResult train_meta(const std::vector<MetaExample>& examples,
                           MetaModelKind kind,
                           const nlohmann::json& hyper_overrides,
                           std::uint64_t seed);

struct MetaMetrics {
  double auc = 0.0;
  double acc = 0.0;
  double f1 = 0.0;
};

/// Stratified k-fold evaluation. Trained kinds are refit per fold with the
/// spec's hyperparameters; fixed kinds are scored directly. Metrics are
/// computed on the pooled out-of-fold scores with threshold 0.5.
MetaMetrics evaluate_meta(const MetaModelSpec& spec,
                          const std::vector<MetaExample>& examples,
                          std::size_t k = 10, std::uint64_t seed = 42);

struct GridAxis {
  std::string feature;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t steps = 0;
};

struct ProbabilityGrid {
  GridAxis x;
  GridAxis y;
  std::vector<double> values;  // row-major, y rows by x columns
  std::map<std::string, double> fixed;

  double at(std::size_t yi, std::size_t xi) const {
    return values[yi * x.steps + xi];
  }
};

ProbabilityGrid probability_grid(const MetaModelSpec& spec, const GridAxis& x,
                                 const GridAxis& y,
                                 const std::map<std::string, double>& fixed,
                                 bool strict = false);

std::string grid_to_csv(const ProbabilityGrid& g);
std::string grid_axes_json(const ProbabilityGrid& g);
std::string grid_svg(const ProbabilityGrid& g);

std::string meta_examples_to_jsonl(const std::vector<MetaExample>& examples);
std::vector<MetaExample> meta_examples_from_jsonl(const std::string& text);

// Logistic internals, exposed for finite-difference verification.
double meta_logistic_loss(const std::vector<double>& w, const Matrix& x,
                          const std::vector<int>& y, double l2);
std::vector<double> meta_logistic_gradient(const std::vector<double>& w,
                                           const Matrix& x,
                                           const std::vector<int>& y,
                                           double l2);

/// Balanced label-stratified fold assignment for meta-example lists.
std::vector<std::size_t> stratified_label_folds(const std::vector<int>& labels,
                                                std::size_t k,
                                                std::uint64_t seed);

}  // namespace tabprof

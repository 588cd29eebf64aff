#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tabprof/bench.hpp"

namespace tabprof {

/// Metric to rank by. Empty selects the per-task primary metric (RMSE for
/// regression datasets, AUC for classification), which is how mixed-task
/// benchmarks are ranked into one table. A concrete metric restricts the
/// ranking to datasets of the matching task.
using MetricSelection = std::optional<Metric>;

std::string metric_selection_label(const MetricSelection& sel);

struct ModelRanking {
  std::string model_id;
  std::string group_tag;
  std::size_t n_best = 0;      // rank-1 finishes; ties credit all leaders
  double average_rank = 0.0;
  double median_rank = 0.0;
  std::size_t top3_count = 0;  // datasets where rank <= 3
};

struct RankingSummary {
  std::vector<ModelRanking> rows;  // n_best desc, then average_rank asc
  std::string metric_label;
  std::size_t dataset_count = 0;
};

using DatasetPredicate = std::function<bool(const std::string&)>;

/// Open-interval size filter: min_rows < rows < max_rows (both strict,
/// matching the "<1000" / ">10,000" table captions). Pass no max for
/// unbounded.
DatasetPredicate filter_by_size(
    const std::map<std::string, std::size_t>& row_counts,
    std::size_t min_rows,
    std::optional<std::size_t> max_rows = std::nullopt);

/// Average ranks with ties shared, 1-based. lower_better orients the sort.
std::vector<double> average_ranks(const std::vector<double>& values,
                                  bool lower_better);

RankingSummary rank_models(const PerformanceMatrix& matrix,
                           const MetricSelection& sel,
                           const DatasetPredicate& keep = {});

enum class Verdict { DL_wins, TE_wins, not_significant };
const char* verdict_name(Verdict v);

/// Per dataset: best TE vs best DL by fold-mean primary metric, two-sided
/// paired t-test over fold scores at `alpha`. Zero-variance nonzero
/// differences are significant; identically zero ones are not.
std::map<std::string, Verdict> significance_filter(
    const PerformanceMatrix& matrix, double alpha = 0.05);

struct CDReport {
  double friedman_statistic = 0.0;
  double p_value = 1.0;
  double critical_distance = 0.0;
  std::vector<std::pair<std::string, double>> mean_ranks;  // rank ascending
  std::size_t model_count = 0;
  std::size_t dataset_count = 0;
  double alpha = 0.05;
  std::string metric_label;
};

/// Nemenyi critical distance q_a * sqrt(k(k+1)/(6N)); q from the embedded
/// two-tailed table, k in [2, 20], alpha in {0.05, 0.10}.
double nemenyi_critical_distance(std::size_t k, std::size_t n, double alpha);

CDReport friedman_nemenyi(const PerformanceMatrix& matrix,
                          const MetricSelection& sel, double alpha = 0.05,
                          const DatasetPredicate& keep = {});

struct GroupRollup {
  std::string group;
  std::size_t n_best = 0;
  double mean_average_rank = 0.0;
  std::size_t top3_count = 0;
  std::size_t model_count = 0;
};

/// Per-group totals over {TE, DL, Other}; empty groups emit a zero row.
std::vector<GroupRollup> group_rollup(const RankingSummary& summary);

std::string ranking_to_csv(const RankingSummary& summary);
std::string rollup_to_csv(const std::vector<GroupRollup>& rollup);
std::string cd_report_json(const CDReport& report);
/// Horizontal mean-rank axis with bars joining models within the critical
/// distance.
std::string cd_report_svg(const CDReport& report);

}  // namespace tabprof

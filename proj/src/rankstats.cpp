#include "tabprof/rankstats.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tabprof/csv.hpp"
#include "tabprof/error.hpp"
#include "tabprof/stats.hpp"

namespace tabprof {

std::string metric_selection_label(const MetricSelection& sel) {
  return sel ? metric_name(*sel) : "primary";
}

DatasetPredicate filter_by_size(
    const std::map<std::string, std::size_t>& row_counts,
    std::size_t min_rows, std::optional<std::size_t> max_rows) {
  return [row_counts, min_rows, max_rows](const std::string& id) {
    const auto it = row_counts.find(id);
    if (it == row_counts.end()) return false;
    if (it->second <= min_rows) return false;
    return !max_rows || it->second < *max_rows;
  };
}

std::vector<double> average_ranks(const std::vector<double>& values,
                                  bool lower_better) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return lower_better ? values[a] < values[b] : values[a] > values[b];
  });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double shared = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = shared;
    i = j + 1;
  }
  return ranks;
}

namespace {

struct RankGrid {
  std::vector<std::string> models;
  std::vector<std::string> groups;              // aligned with models
  std::vector<std::string> datasets;
  std::vector<std::vector<double>> fold_means;  // [dataset][model]
  std::vector<std::vector<double>> ranks;       // [dataset][model]
  std::vector<double> best_value;               // per dataset
  std::vector<bool> lower_better;               // per dataset
};

// Builds the complete (dataset x model) fold-mean table for the selection,
// enforcing fold completeness for every included pair.
RankGrid build_rank_grid(const PerformanceMatrix& matrix,
                         const MetricSelection& sel,
                         const DatasetPredicate& keep) {
  RankGrid g;
  g.models = matrix.model_ids();
  for (const auto& m : g.models) g.groups.push_back(matrix.group_of(m));

  for (const auto& id : matrix.dataset_ids()) {
    if (keep && !keep(id)) continue;
    const TaskKind task = matrix.task_of(id);
    if (sel && metrics_for_task(task).end() ==
                   std::find(metrics_for_task(task).begin(),
                             metrics_for_task(task).end(), *sel)) {
      continue;  // concrete metric restricts to its task
    }
    g.datasets.push_back(id);
  }
  if (g.datasets.empty()) {
    fail(errc::empty_selection, "no datasets match the filter");
  }

  for (const auto& id : g.datasets) {
    const Metric metric = sel ? *sel : primary_metric(matrix.task_of(id));
    std::vector<double> means;
    for (const auto& model : g.models) {
      const auto folds = matrix.fold_values(id, model, metric);
      if (folds.size() != matrix.fold_count) {
        fail(errc::incomplete_grid,
             "model '" + model + "' has " + std::to_string(folds.size()) +
                 " of " + std::to_string(matrix.fold_count) +
                 " folds on dataset '" + id + "'");
      }
      means.push_back(mean(folds));
    }
    const bool lower = lower_is_better(metric);
    g.fold_means.push_back(means);
    g.ranks.push_back(average_ranks(means, lower));
    g.lower_better.push_back(lower);
    g.best_value.push_back(lower
                               ? *std::min_element(means.begin(), means.end())
                               : *std::max_element(means.begin(), means.end()));
  }
  return g;
}

}  // namespace

RankingSummary rank_models(const PerformanceMatrix& matrix,
                           const MetricSelection& sel,
                           const DatasetPredicate& keep) {
  const RankGrid g = build_rank_grid(matrix, sel, keep);
  RankingSummary out;
  out.metric_label = metric_selection_label(sel);
  out.dataset_count = g.datasets.size();

  for (std::size_t m = 0; m < g.models.size(); ++m) {
    ModelRanking row;
    row.model_id = g.models[m];
    row.group_tag = g.groups[m];
    std::vector<double> ranks;
    for (std::size_t d = 0; d < g.datasets.size(); ++d) {
      const double rank = g.ranks[d][m];
      ranks.push_back(rank);
      if (g.fold_means[d][m] == g.best_value[d]) ++row.n_best;
      if (rank <= 3.0) ++row.top3_count;
    }
    row.average_rank = mean(ranks);
    row.median_rank = median(ranks);
    out.rows.push_back(std::move(row));
  }
  std::sort(out.rows.begin(), out.rows.end(),
            [](const ModelRanking& a, const ModelRanking& b) {
              if (a.n_best != b.n_best) return a.n_best > b.n_best;
              if (a.average_rank != b.average_rank) {
                return a.average_rank < b.average_rank;
              }
              return a.model_id < b.model_id;
            });
  return out;
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::DL_wins: return "DL_wins";
    case Verdict::TE_wins: return "TE_wins";
    case Verdict::not_significant: return "not_significant";
  }
  return "?";
}

std::map<std::string, Verdict> significance_filter(
    const PerformanceMatrix& matrix, double alpha) {
  std::map<std::string, Verdict> out;
  for (const auto& id : matrix.dataset_ids()) {
    const TaskKind task = matrix.task_of(id);
    const Metric metric = primary_metric(task);
    const bool lower = lower_is_better(metric);

    // Best complete model of each group by fold mean; id breaks ties.
    std::string best_te, best_dl;
    double best_te_mean = 0.0, best_dl_mean = 0.0;
    for (const auto& model : matrix.model_ids()) {
      const auto folds = matrix.fold_values(id, model, metric);
      if (folds.size() != matrix.fold_count) continue;
      const std::string group = matrix.group_of(model);
      const double m = mean(folds);
      if (group == "TE") {
        if (best_te.empty() || (lower ? m < best_te_mean : m > best_te_mean)) {
          best_te = model;
          best_te_mean = m;
        }
      } else if (group == "DL") {
        if (best_dl.empty() || (lower ? m < best_dl_mean : m > best_dl_mean)) {
          best_dl = model;
          best_dl_mean = m;
        }
      }
    }
    if (best_te.empty() || best_dl.empty()) {
      fail(errc::missing_group,
           "dataset '" + id + "' lacks a complete TE or DL model");
    }

    const auto te = matrix.fold_values(id, best_te, metric);
    const auto dl = matrix.fold_values(id, best_dl, metric);
    std::vector<double> diff(te.size());
    for (std::size_t f = 0; f < te.size(); ++f) diff[f] = dl[f] - te[f];
    const PairedTResult t = paired_t_test(diff);

    if (t.p_value >= alpha) {
      out[id] = Verdict::not_significant;
      continue;
    }
    const bool dl_better =
        lower ? t.mean_difference < 0.0 : t.mean_difference > 0.0;
    out[id] = dl_better ? Verdict::DL_wins : Verdict::TE_wins;
  }
  return out;
}

namespace {

// Two-tailed Nemenyi q constants (studentized range at infinity over
// sqrt(2)), k = 2..20.
constexpr double kNemenyiQ05[] = {
    1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164,
    3.219, 3.268, 3.313, 3.354, 3.391, 3.426, 3.458, 3.489, 3.517, 3.544};
constexpr double kNemenyiQ10[] = {
    1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920,
    2.978, 3.030, 3.077, 3.120, 3.159, 3.196, 3.230, 3.261, 3.291, 3.319};

}  // namespace

double nemenyi_critical_distance(std::size_t k, std::size_t n, double alpha) {
  if (k < 2 || k > 20) {
    fail(errc::invalid_argument,
         "Nemenyi table covers 2..20 models, got " + std::to_string(k));
  }
  const double* table;
  if (std::fabs(alpha - 0.05) < 1e-12) {
    table = kNemenyiQ05;
  } else if (std::fabs(alpha - 0.10) < 1e-12) {
    table = kNemenyiQ10;
  } else {
    fail(errc::invalid_argument, "Nemenyi q constants exist for alpha 0.05 "
                                 "and 0.10");
  }
  const double q = table[k - 2];
  return q * std::sqrt(static_cast<double>(k) *
                       (static_cast<double>(k) + 1.0) /
                       (6.0 * static_cast<double>(n)));
}

CDReport friedman_nemenyi(const PerformanceMatrix& matrix,
                          const MetricSelection& sel, double alpha,
                          const DatasetPredicate& keep) {
  const RankGrid g = build_rank_grid(matrix, sel, keep);
  const std::size_t k = g.models.size();
  const std::size_t n = g.datasets.size();
  if (k < 3) {
    fail(errc::too_few_models,
         "Friedman needs >= 3 models, got " + std::to_string(k));
  }
  if (n < 2) {
    fail(errc::incomplete_grid, "Friedman needs >= 2 datasets");
  }

  CDReport report;
  report.model_count = k;
  report.dataset_count = n;
  report.alpha = alpha;
  report.metric_label = metric_selection_label(sel);

  std::vector<double> mean_rank(k, 0.0);
  for (std::size_t d = 0; d < n; ++d) {
    for (std::size_t m = 0; m < k; ++m) mean_rank[m] += g.ranks[d][m];
  }
  double sum_sq = 0.0;
  for (double& r : mean_rank) {
    r /= static_cast<double>(n);
    sum_sq += r * r;
  }
  const double dk = static_cast<double>(k);
  const double dn = static_cast<double>(n);
  report.friedman_statistic =
      12.0 * dn / (dk * (dk + 1.0)) *
      (sum_sq - dk * (dk + 1.0) * (dk + 1.0) / 4.0);
  if (report.friedman_statistic < 0.0) report.friedman_statistic = 0.0;
  report.p_value = chi_square_sf(report.friedman_statistic, dk - 1.0);
  report.critical_distance = nemenyi_critical_distance(k, n, alpha);

  for (std::size_t m = 0; m < k; ++m) {
    report.mean_ranks.emplace_back(g.models[m], mean_rank[m]);
  }
  std::sort(report.mean_ranks.begin(), report.mean_ranks.end(),
            [](const auto& a, const auto& b) {
              if (a.second != b.second) return a.second < b.second;
              return a.first < b.first;
            });
  return report;
}

std::vector<GroupRollup> group_rollup(const RankingSummary& summary) {
  std::vector<GroupRollup> out;
  for (const char* group : {"TE", "DL", "Other"}) {
    GroupRollup r;
    r.group = group;
    std::vector<double> avg_ranks;
    for (const ModelRanking& row : summary.rows) {
      if (row.group_tag != group) continue;
      r.n_best += row.n_best;
      r.top3_count += row.top3_count;
      avg_ranks.push_back(row.average_rank);
      ++r.model_count;
    }
    r.mean_average_rank = avg_ranks.empty() ? 0.0 : mean(avg_ranks);
    out.push_back(std::move(r));
  }
  return out;
}

std::string ranking_to_csv(const RankingSummary& summary) {
  std::ostringstream out;
  out << "model,group,n_best,average_rank,median_rank,top3\n";
  for (const ModelRanking& r : summary.rows) {
    out << csv_quote_if_needed(r.model_id) << ',' << r.group_tag << ','
        << r.n_best << ',' << format_double(r.average_rank) << ','
        << format_double(r.median_rank) << ',' << r.top3_count << '\n';
  }
  return out.str();
}

std::string rollup_to_csv(const std::vector<GroupRollup>& rollup) {
  std::ostringstream out;
  out << "group,models,n_best,mean_average_rank,top3\n";
  for (const GroupRollup& r : rollup) {
    out << r.group << ',' << r.model_count << ',' << r.n_best << ','
        << format_double(r.mean_average_rank) << ',' << r.top3_count << '\n';
  }
  return out.str();
}

std::string cd_report_json(const CDReport& report) {
  nlohmann::ordered_json j;
  j["metric"] = report.metric_label;
  j["alpha"] = report.alpha;
  j["models"] = report.model_count;
  j["datasets"] = report.dataset_count;
  j["friedman_statistic"] = report.friedman_statistic;
  j["p_value"] = report.p_value;
  j["critical_distance"] = report.critical_distance;
  nlohmann::ordered_json ranks = nlohmann::ordered_json::object();
  for (const auto& [model, rank] : report.mean_ranks) ranks[model] = rank;
  j["mean_ranks"] = ranks;
  return j.dump(2) + "\n";
}

namespace {

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

std::string cd_report_svg(const CDReport& report) {
  const std::size_t k = report.model_count;
  const double width = 760.0;
  const double left = 60.0, right = width - 60.0;
  const double axis_y = 60.0;
  const double row_height = 22.0;
  const double height = axis_y + 40.0 + row_height * static_cast<double>(k);

  auto x_of = [&](double rank) {
    return left + (rank - 1.0) / (static_cast<double>(k) - 1.0) *
                      (right - left);
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" font-family=\"sans-serif\" "
      << "font-size=\"12\">\n";
  svg << "<text x=\"" << left << "\" y=\"20\">critical distance = "
      << fmt3(report.critical_distance) << " (alpha " << report.alpha
      << ", " << report.metric_label << ")</text>\n";
  // CD ruler.
  const double cd_px = report.critical_distance /
                       (static_cast<double>(k) - 1.0) * (right - left);
  svg << "<line x1=\"" << left << "\" y1=\"30\" x2=\"" << left + cd_px
      << "\" y2=\"30\" stroke=\"black\" stroke-width=\"3\"/>\n";
  // Axis with integer ticks.
  svg << "<line x1=\"" << left << "\" y1=\"" << axis_y << "\" x2=\"" << right
      << "\" y2=\"" << axis_y << "\" stroke=\"black\"/>\n";
  for (std::size_t r = 1; r <= k; ++r) {
    const double x = x_of(static_cast<double>(r));
    svg << "<line x1=\"" << x << "\" y1=\"" << axis_y - 4 << "\" x2=\"" << x
        << "\" y2=\"" << axis_y + 4 << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << x - 4 << "\" y=\"" << axis_y - 8 << "\">" << r
        << "</text>\n";
  }
  // Bars joining models within the critical distance: maximal runs over the
  // rank-sorted list.
  double bar_y = axis_y + 8.0;
  std::size_t last_end = 0;
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i;
    while (j + 1 < k && report.mean_ranks[j + 1].second -
                                report.mean_ranks[i].second <=
                            report.critical_distance) {
      ++j;
    }
    if (j > i && j + 1 > last_end) {
      svg << "<line x1=\"" << x_of(report.mean_ranks[i].second) - 3
          << "\" y1=\"" << bar_y << "\" x2=\""
          << x_of(report.mean_ranks[j].second) + 3 << "\" y2=\"" << bar_y
          << "\" stroke=\"black\" stroke-width=\"4\"/>\n";
      bar_y += 5.0;
      last_end = j + 1;
    }
  }
  // Model stems and labels, best rank first.
  for (std::size_t i = 0; i < k; ++i) {
    const auto& [model, rank] = report.mean_ranks[i];
    const double x = x_of(rank);
    const double y = axis_y + 30.0 + row_height * static_cast<double>(i);
    svg << "<line x1=\"" << x << "\" y1=\"" << axis_y << "\" x2=\"" << x
        << "\" y2=\"" << y - 10 << "\" stroke=\"gray\"/>\n";
    svg << "<line x1=\"" << x << "\" y1=\"" << y - 10 << "\" x2=\"" << left
        << "\" y2=\"" << y - 10 << "\" stroke=\"gray\"/>\n";
    svg << "<text x=\"" << left << "\" y=\"" << y - 14 << "\">"
        << xml_escape(model) << " (" << fmt3(rank) << ")</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace tabprof

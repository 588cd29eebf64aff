#include "tabprof/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "tabprof/csv.hpp"
#include "tabprof/error.hpp"
#include "tabprof/rng.hpp"
#include "tabprof/stats.hpp"

namespace tabprof {

const char* metric_name(Metric m) {
  switch (m) {
    case Metric::RMSE: return "RMSE";
    case Metric::MAE: return "MAE";
    case Metric::R2: return "R2";
    case Metric::ACC: return "ACC";
    case Metric::AUC: return "AUC";
    case Metric::F1: return "F1";
  }
  return "?";
}

Metric metric_from_name(const std::string& name) {
  for (Metric m : {Metric::RMSE, Metric::MAE, Metric::R2, Metric::ACC,
                   Metric::AUC, Metric::F1}) {
    if (name == metric_name(m)) return m;
  }
  fail(errc::invalid_argument, "unknown metric '" + name + "'");
}

bool lower_is_better(Metric m) {
  return m == Metric::RMSE || m == Metric::MAE;
}

std::vector<Metric> metrics_for_task(TaskKind task) {
  if (task == TaskKind::regression) {
    return {Metric::RMSE, Metric::MAE, Metric::R2};
  }
  return {Metric::ACC, Metric::AUC, Metric::F1};
}

Metric primary_metric(TaskKind task) {
  return task == TaskKind::regression ? Metric::RMSE : Metric::AUC;
}

RegressionMetrics regression_metrics(std::span<const double> y,
                                     std::span<const double> yhat) {
  if (y.size() != yhat.size() || y.empty()) {
    fail(errc::length_mismatch, "regression_metrics needs equal nonzero "
                                "lengths");
  }
  const double n = static_cast<double>(y.size());
  StableAccumulator se, ae;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = y[i] - yhat[i];
    se.add(e * e);
    ae.add(std::fabs(e));
  }
  const double sse = se.total();
  RegressionMetrics r;
  r.rmse = std::sqrt(sse / n);
  r.mae = ae.total() / n;
  const double ym = mean(y);
  StableAccumulator st;
  for (double v : y) st.add((v - ym) * (v - ym));
  const double sst = st.total();
  if (sst == 0.0) {
    fail(errc::r2_undefined, "constant truth has no variance to explain");
  }
  r.r2 = 1.0 - sse / sst;
  return r;
}

double binary_auc(std::span<const int> y, std::span<const double> score) {
  const std::size_t n = y.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return score[a] < score[b];
  });
  // rank2[i] = twice the average rank, kept integral through ties.
  std::vector<long long> rank2(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && score[order[j + 1]] == score[order[i]]) ++j;
    const long long two_avg =
        static_cast<long long>(i + 1) + static_cast<long long>(j + 1);
    for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = two_avg;
    i = j + 1;
  }
  long long n1 = 0, sum2 = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (y[r] == 1) {
      ++n1;
      sum2 += rank2[r];
    }
  }
  const long long n0 = static_cast<long long>(n) - n1;
  if (n1 == 0 || n0 == 0) {
    fail(errc::single_class_truth, "AUC needs both classes present");
  }
  const long long u2 = sum2 - n1 * (n1 + 1);
  return static_cast<double>(u2) /
         (2.0 * static_cast<double>(n1) * static_cast<double>(n0));
}

namespace {

std::size_t argmax_lowest(const Matrix& scores, std::size_t row) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < scores.cols; ++c) {
    if (scores.at(row, c) > scores.at(row, best)) best = c;
  }
  return best;
}

double f1_of_class(std::span<const int> y, const Matrix& scores, int cls) {
  long long tp = 0, fp = 0, fn = 0;
  for (std::size_t r = 0; r < y.size(); ++r) {
    const int pred = static_cast<int>(argmax_lowest(scores, r));
    if (pred == cls && y[r] == cls) ++tp;
    if (pred == cls && y[r] != cls) ++fp;
    if (pred != cls && y[r] == cls) ++fn;
  }
  if (tp == 0) return 0.0;
  const double precision =
      static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

ClassificationMetrics classification_metrics(std::span<const int> y,
                                             const Matrix& scores) {
  if (y.size() != scores.rows || y.empty()) {
    fail(errc::length_mismatch, "labels and score rows disagree");
  }
  std::set<int> present(y.begin(), y.end());
  if (present.size() < 2) {
    fail(errc::single_class_truth, "metrics need >= 2 classes in truth");
  }

  ClassificationMetrics out;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < y.size(); ++r) {
    if (static_cast<int>(argmax_lowest(scores, r)) == y[r]) ++hits;
  }
  out.acc = static_cast<double>(hits) / static_cast<double>(y.size());

  if (scores.cols == 2) {
    std::vector<double> pos(y.size());
    for (std::size_t r = 0; r < y.size(); ++r) pos[r] = scores.at(r, 1);
    out.auc = binary_auc(y, pos);
    out.f1 = f1_of_class(y, scores, 1);
    return out;
  }

  // Macro one-vs-rest over classes with both positives and negatives.
  double auc_sum = 0.0;
  std::size_t auc_classes = 0;
  for (std::size_t c = 0; c < scores.cols; ++c) {
    const long long pos_count =
        std::count(y.begin(), y.end(), static_cast<int>(c));
    if (pos_count == 0 || pos_count == static_cast<long long>(y.size())) {
      continue;
    }
    std::vector<int> rest(y.size());
    std::vector<double> sc(y.size());
    for (std::size_t r = 0; r < y.size(); ++r) {
      rest[r] = y[r] == static_cast<int>(c) ? 1 : 0;
      sc[r] = scores.at(r, c);
    }
    auc_sum += binary_auc(rest, sc);
    ++auc_classes;
  }
  out.auc = auc_sum / static_cast<double>(auc_classes);

  double f1_sum = 0.0;
  for (int c : present) f1_sum += f1_of_class(y, scores, c);
  out.f1 = f1_sum / static_cast<double>(present.size());
  return out;
}

// --- performance matrix ------------------------------------------------------

std::vector<std::string> PerformanceMatrix::dataset_ids() const {
  std::set<std::string> ids;
  for (const auto& e : entries) ids.insert(e.dataset_id);
  return {ids.begin(), ids.end()};
}

std::vector<std::string> PerformanceMatrix::model_ids() const {
  std::set<std::string> ids;
  for (const auto& e : entries) ids.insert(e.model_id);
  return {ids.begin(), ids.end()};
}

std::string PerformanceMatrix::group_of(const std::string& model_id) const {
  for (const auto& e : entries) {
    if (e.model_id == model_id) return e.group_tag;
  }
  return "Other";
}

std::vector<double> PerformanceMatrix::fold_values(
    const std::string& dataset_id, const std::string& model_id,
    Metric metric) const {
  std::vector<std::pair<std::size_t, double>> hits;
  for (const auto& e : entries) {
    if (e.dataset_id == dataset_id && e.model_id == model_id &&
        e.metric == metric) {
      hits.emplace_back(e.fold, e.value);
    }
  }
  std::sort(hits.begin(), hits.end());
  std::vector<double> out;
  for (const auto& [fold, value] : hits) out.push_back(value);
  return out;
}

TaskKind PerformanceMatrix::task_of(const std::string& dataset_id) const {
  for (const auto& e : entries) {
    if (e.dataset_id == dataset_id) {
      return (e.metric == Metric::RMSE || e.metric == Metric::MAE ||
              e.metric == Metric::R2)
                 ? TaskKind::regression
                 : TaskKind::classification;
    }
  }
  fail(errc::invalid_argument, "dataset '" + dataset_id + "' not in matrix");
}

void PerformanceMatrix::sort_canonical() {
  std::sort(entries.begin(), entries.end(),
            [](const MatrixEntry& a, const MatrixEntry& b) {
              if (a.dataset_id != b.dataset_id) {
                return a.dataset_id < b.dataset_id;
              }
              if (a.model_id != b.model_id) return a.model_id < b.model_id;
              if (a.fold != b.fold) return a.fold < b.fold;
              return static_cast<int>(a.metric) < static_cast<int>(b.metric);
            });
}

std::string matrix_to_csv(const PerformanceMatrix& m) {
  std::ostringstream out;
  out << "dataset_id,model_id,group_tag,fold,metric,value,provenance\n";
  for (const auto& e : m.entries) {
    out << csv_quote_if_needed(e.dataset_id) << ','
        << csv_quote_if_needed(e.model_id) << ',' << e.group_tag << ','
        << e.fold << ',' << metric_name(e.metric) << ','
        << format_double(e.value) << ',' << e.provenance << '\n';
  }
  return out.str();
}

PerformanceMatrix matrix_from_csv(const std::string& text) {
  const CsvTable t = parse_csv(text);
  const std::vector<std::string> expect = {"dataset_id", "model_id",
                                           "group_tag", "fold",
                                           "metric",     "value",
                                           "provenance"};
  if (t.header.size() != expect.size()) {
    fail(errc::parse_error, "matrix header has wrong width");
  }
  for (std::size_t i = 0; i < expect.size(); ++i) {
    if (t.header[i].text != expect[i]) {
      fail(errc::parse_error, "matrix header column " + std::to_string(i) +
                                  " should be " + expect[i]);
    }
  }
  PerformanceMatrix m;
  std::size_t max_fold = 0;
  for (const auto& row : t.rows) {
    MatrixEntry e;
    e.dataset_id = row[0].text;
    e.model_id = row[1].text;
    e.group_tag = row[2].text;
    long long fold;
    if (!parse_strict_int64(row[3].text, fold) || fold < 0) {
      fail(errc::parse_error, "bad fold '" + row[3].text + "'");
    }
    e.fold = static_cast<std::size_t>(fold);
    max_fold = std::max(max_fold, e.fold);
    e.metric = metric_from_name(row[4].text);
    if (!parse_strict_double(row[5].text, e.value)) {
      fail(errc::parse_error, "bad value '" + row[5].text + "'");
    }
    e.provenance = row[6].text;
    m.entries.push_back(std::move(e));
  }
  m.fold_count = max_fold + 1;
  return m;
}

void write_matrix(const PerformanceMatrix& m, const std::string& path) {
  write_text_file(path, matrix_to_csv(m));
}

PerformanceMatrix read_matrix(const std::string& path) {
  return matrix_from_csv(read_text_file(path));
}

// --- grid runner --------------------------------------------------------------

std::size_t resolve_thread_count(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("TABPROF_THREADS")) {
    long long v;
    if (parse_strict_int64(env, v) && v > 0) {
      return static_cast<std::size_t>(v);
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

namespace {

// Dataset-level class codes so every fold scores into the same columns.
std::vector<int> dataset_class_codes(const TabularDataset& d,
                                     const std::vector<std::string>& tokens) {
  std::vector<int> codes(d.row_count());
  for (std::size_t r = 0; r < d.row_count(); ++r) {
    const std::string& t = d.effective_token(r, d.target);
    const auto it = std::lower_bound(tokens.begin(), tokens.end(), t);
    codes[r] = static_cast<int>(it - tokens.begin());
  }
  return codes;
}

// Rows-only copy for prediction; skips revalidation so a held-out fold may
// be class-degenerate without failing here.
TabularDataset prediction_view(const TabularDataset& d,
                               const std::vector<std::size_t>& rows) {
  TabularDataset v;
  v.id = d.id;
  v.columns = d.columns;
  v.target = d.target;
  v.task = d.task;
  v.cells.reserve(rows.size() * d.column_count());
  for (std::size_t r : rows) {
    for (std::size_t c = 0; c < d.column_count(); ++c) {
      v.cells.push_back(d.cell(r, c));
    }
  }
  return v;
}

struct CellResult {
  bool ok = false;
  std::string message;
  std::vector<std::pair<Metric, double>> metrics;
  std::string prediction_rows;  // external-format lines, canonical order
};

std::string join_scores(const Matrix& scores, std::size_t row) {
  std::string s;
  for (std::size_t c = 0; c < scores.cols; ++c) {
    if (c) s += '|';
    s += format_double(scores.at(row, c));
  }
  return s;
}

}  // namespace

GridResult run_grid(const std::vector<TabularDataset>& datasets,
                    const std::vector<ModelSpec>& specs,
                    const GridOptions& options) {
  if (specs.empty()) fail(errc::invalid_argument, "no model specs given");
  if (datasets.empty()) fail(errc::invalid_argument, "no datasets given");

  GridResult result;
  result.matrix.fold_count = options.k;

  // Canonical dataset order: sorted by id.
  std::vector<std::size_t> dorder(datasets.size());
  for (std::size_t i = 0; i < dorder.size(); ++i) dorder[i] = i;
  std::sort(dorder.begin(), dorder.end(), [&](std::size_t a, std::size_t b) {
    return datasets[a].id < datasets[b].id;
  });

  for (std::size_t i : dorder) {
    const TabularDataset& d = datasets[i];
    const bool stratified =
        options.stratified && d.task == TaskKind::classification;
    result.folds[d.id] = make_folds(d, options.k, options.seed, stratified);
  }

  struct Task {
    std::size_t dataset;
    std::size_t spec;
    std::size_t fold;
  };
  std::vector<Task> tasks;
  for (std::size_t i : dorder) {
    for (std::size_t s = 0; s < specs.size(); ++s) {
      for (std::size_t f = 0; f < options.k; ++f) {
        tasks.push_back({i, s, f});
      }
    }
  }

  std::vector<CellResult> results(tasks.size());
  std::atomic<std::size_t> next{0};
  const std::size_t n_threads =
      std::min(resolve_thread_count(options.threads), tasks.size());

  auto worker = [&] {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= tasks.size()) return;
      const Task& task = tasks[t];
      const TabularDataset& d = datasets[task.dataset];
      const ModelSpec& spec = specs[task.spec];
      const FoldAssignment& fa = result.folds.at(d.id);
      CellResult& cell = results[t];
      try {
        const auto train_rows = fa.rows_not_in_fold(task.fold);
        const auto test_rows = fa.rows_in_fold(task.fold);
        const TabularDataset train_view = d.select_rows(
            train_rows, d.id + "#fold" + std::to_string(task.fold));
        const TabularDataset test_view = prediction_view(d, test_rows);

        std::uint64_t cell_seed = fnv1a64(d.id);
        cell_seed = fnv1a64(spec.name(), cell_seed);
        cell_seed = fnv1a64_u64(task.fold, cell_seed);
        cell_seed = fnv1a64_u64(options.seed, cell_seed);

        const TrainedModel model = train(spec, train_view, cell_seed);
        const Predictions pred = model.predict(test_view);

        std::ostringstream dump;
        if (d.task == TaskKind::regression) {
          std::vector<double> truth(test_rows.size());
          for (std::size_t r = 0; r < test_rows.size(); ++r) {
            truth[r] = d.cell(test_rows[r], d.target).num;
          }
          const RegressionMetrics rm = regression_metrics(truth, pred.values);
          cell.metrics = {{Metric::RMSE, rm.rmse},
                          {Metric::MAE, rm.mae},
                          {Metric::R2, rm.r2}};
          if (options.dump_predictions) {
            for (std::size_t r = 0; r < test_rows.size(); ++r) {
              dump << csv_quote_if_needed(d.id) << ','
                   << csv_quote_if_needed(spec.name()) << ','
                   << spec.group_tag() << ',' << task.fold << ','
                   << test_rows[r] << ",regression,"
                   << format_double(pred.values[r]) << '\n';
            }
          }
        } else {
          const auto tokens = d.category_tokens(d.target);
          const auto codes = dataset_class_codes(d, tokens);
          // Map model scores into dataset class space.
          Matrix scores(test_rows.size(), tokens.size());
          for (std::size_t c = 0; c < pred.class_tokens.size(); ++c) {
            const auto it = std::lower_bound(tokens.begin(), tokens.end(),
                                             pred.class_tokens[c]);
            const std::size_t col =
                static_cast<std::size_t>(it - tokens.begin());
            for (std::size_t r = 0; r < test_rows.size(); ++r) {
              scores.at(r, col) = pred.scores.at(r, c);
            }
          }
          std::vector<int> truth(test_rows.size());
          for (std::size_t r = 0; r < test_rows.size(); ++r) {
            truth[r] = codes[test_rows[r]];
          }
          const ClassificationMetrics cm =
              classification_metrics(truth, scores);
          cell.metrics = {{Metric::ACC, cm.acc},
                          {Metric::AUC, cm.auc},
                          {Metric::F1, cm.f1}};
          if (options.dump_predictions) {
            for (std::size_t r = 0; r < test_rows.size(); ++r) {
              dump << csv_quote_if_needed(d.id) << ','
                   << csv_quote_if_needed(spec.name()) << ','
                   << spec.group_tag() << ',' << task.fold << ','
                   << test_rows[r] << ",classification,"
                   << join_scores(scores, r) << '\n';
            }
          }
        }
        cell.prediction_rows = dump.str();
        cell.ok = true;
      } catch (const Error& e) {
        cell.ok = false;
        cell.message = e.what();
      }
    }
  };

  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  // Pairs with any failed fold are dropped whole.
  std::set<std::pair<std::size_t, std::size_t>> failed;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (!results[t].ok) {
      failed.insert({tasks[t].dataset, tasks[t].spec});
      result.matrix.diagnostics.push_back(
          {datasets[tasks[t].dataset].id, specs[tasks[t].spec].name(),
           tasks[t].fold, results[t].message});
    }
  }

  std::ostringstream predictions;
  predictions << "dataset_id,model_id,group_tag,fold,row_index,task,"
                 "prediction_or_scores\n";
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const Task& task = tasks[t];
    if (failed.count({task.dataset, task.spec})) continue;
    const TabularDataset& d = datasets[task.dataset];
    const ModelSpec& spec = specs[task.spec];
    for (const auto& [metric, value] : results[t].metrics) {
      result.matrix.entries.push_back({d.id, spec.name(), spec.group_tag(),
                                       task.fold, metric, value, "internal"});
    }
    predictions << results[t].prediction_rows;
  }
  result.matrix.sort_canonical();

  if (options.dump_predictions) {
    result.predictions_csv = predictions.str();
  }
  nlohmann::ordered_json digests;
  for (const auto& [id, fa] : result.folds) {
    digests["fold_digests"][id] = fa.digest();
  }
  result.fold_digests_json = digests.dump(2) + "\n";
  return result;
}

// --- ingestion ----------------------------------------------------------------

PerformanceMatrix ingest_predictions(
    const std::string& predictions_csv, const std::string& sidecar_json,
    const std::vector<TabularDataset>& datasets,
    const std::map<std::string, FoldAssignment>& folds,
    PerformanceMatrix matrix) {
  nlohmann::json sidecar;
  try {
    sidecar = nlohmann::json::parse(sidecar_json);
  } catch (const nlohmann::json::exception& e) {
    fail(errc::parse_error, std::string("sidecar JSON: ") + e.what());
  }
  if (!sidecar.contains("fold_digests") ||
      !sidecar["fold_digests"].is_object()) {
    fail(errc::unknown_fold_digest, "sidecar lacks fold_digests");
  }

  const CsvTable t = parse_csv(predictions_csv);
  const std::vector<std::string> expect = {
      "dataset_id", "model_id", "group_tag", "fold",
      "row_index",  "task",     "prediction_or_scores"};
  for (std::size_t i = 0; i < expect.size(); ++i) {
    if (i >= t.header.size() || t.header[i].text != expect[i]) {
      fail(errc::parse_error, "prediction header must be " + expect[i]);
    }
  }

  std::map<std::string, const TabularDataset*> by_id;
  for (const auto& d : datasets) by_id[d.id] = &d;

  struct Row {
    std::size_t fold;
    std::size_t row_index;
    std::string payload;
  };
  std::map<std::pair<std::string, std::string>, std::vector<Row>> groups;
  std::map<std::pair<std::string, std::string>, std::string> group_tags;
  for (const auto& row : t.rows) {
    long long fold, index;
    if (!parse_strict_int64(row[3].text, fold) ||
        !parse_strict_int64(row[4].text, index) || fold < 0 || index < 0) {
      fail(errc::parse_error, "bad fold/row_index in predictions");
    }
    const auto key = std::make_pair(row[0].text, row[1].text);
    groups[key].push_back({static_cast<std::size_t>(fold),
                           static_cast<std::size_t>(index), row[6].text});
    group_tags[key] = row[2].text;
    const auto it = by_id.find(row[0].text);
    if (it == by_id.end()) {
      fail(errc::unknown_fold_digest,
           "no published folds for dataset '" + row[0].text + "'");
    }
    const TaskKind declared = task_from_name(row[5].text);
    if (declared != it->second->task) {
      fail(errc::schema_mismatch,
           "prediction task disagrees with dataset '" + row[0].text + "'");
    }
  }

  for (const auto& [key, rows] : groups) {
    const auto& [dataset_id, model_id] = key;
    const TabularDataset& d = *by_id.at(dataset_id);
    const auto fit = folds.find(dataset_id);
    if (fit == folds.end()) {
      fail(errc::unknown_fold_digest,
           "no published folds for dataset '" + dataset_id + "'");
    }
    const FoldAssignment& fa = fit->second;
    if (!sidecar["fold_digests"].contains(dataset_id) ||
        sidecar["fold_digests"][dataset_id].get<std::string>() !=
            fa.digest()) {
      fail(errc::unknown_fold_digest,
           "sidecar digest does not match the published FoldAssignment for "
           "'" + dataset_id + "'");
    }

    // Fold coverage must be exact.
    std::set<std::size_t> seen;
    for (const Row& r : rows) seen.insert(r.fold);
    std::string missing;
    for (std::size_t f = 0; f < fa.k; ++f) {
      if (!seen.count(f)) missing += (missing.empty() ? "" : ",") +
                                     std::to_string(f);
    }
    if (!missing.empty()) {
      fail(errc::unknown_fold_digest,
           "predictions for '" + dataset_id + "' miss folds {" + missing +
               "}");
    }

    const auto tokens = d.task == TaskKind::classification
                            ? d.category_tokens(d.target)
                            : std::vector<std::string>{};
    const auto codes = d.task == TaskKind::classification
                           ? dataset_class_codes(d, tokens)
                           : std::vector<int>{};

    for (std::size_t f = 0; f < fa.k; ++f) {
      std::vector<Row> fold_rows;
      for (const Row& r : rows) {
        if (r.fold == f) fold_rows.push_back(r);
      }
      const auto expect_rows = fa.rows_in_fold(f);
      if (fold_rows.size() != expect_rows.size()) {
        fail(errc::row_count_mismatch,
             "fold " + std::to_string(f) + " of '" + dataset_id + "' has " +
                 std::to_string(fold_rows.size()) + " rows, expected " +
                 std::to_string(expect_rows.size()));
      }
      std::sort(fold_rows.begin(), fold_rows.end(),
                [](const Row& a, const Row& b) {
                  return a.row_index < b.row_index;
                });
      for (std::size_t i = 0; i < expect_rows.size(); ++i) {
        if (fold_rows[i].row_index != expect_rows[i]) {
          fail(errc::row_count_mismatch,
               "fold " + std::to_string(f) + " of '" + dataset_id +
                   "' covers the wrong rows");
        }
      }

      if (d.task == TaskKind::regression) {
        std::vector<double> truth(expect_rows.size()), pred(expect_rows.size());
        for (std::size_t i = 0; i < expect_rows.size(); ++i) {
          truth[i] = d.cell(expect_rows[i], d.target).num;
          if (!parse_strict_double(fold_rows[i].payload, pred[i])) {
            fail(errc::parse_error,
                 "bad numeric prediction '" + fold_rows[i].payload + "'");
          }
        }
        const RegressionMetrics rm = regression_metrics(truth, pred);
        for (const auto& [metric, value] :
             std::initializer_list<std::pair<Metric, double>>{
                 {Metric::RMSE, rm.rmse},
                 {Metric::MAE, rm.mae},
                 {Metric::R2, rm.r2}}) {
          matrix.entries.push_back({dataset_id, model_id,
                                    group_tags.at(key), f, metric, value,
                                    "ingested"});
        }
      } else {
        Matrix scores(expect_rows.size(), tokens.size());
        std::vector<int> truth(expect_rows.size());
        for (std::size_t i = 0; i < expect_rows.size(); ++i) {
          truth[i] = codes[expect_rows[i]];
          std::istringstream parts(fold_rows[i].payload);
          std::string piece;
          std::size_t c = 0;
          double sum = 0.0;
          while (std::getline(parts, piece, '|')) {
            double v;
            if (c >= tokens.size() || !parse_strict_double(piece, v)) {
              fail(errc::row_count_mismatch,
                   "score vector width disagrees with the dataset classes");
            }
            scores.at(i, c++) = v;
            sum += v;
          }
          if (c != tokens.size()) {
            fail(errc::row_count_mismatch,
                 "score vector width disagrees with the dataset classes");
          }
          if (std::fabs(sum - 1.0) > 1e-6) {
            fail(errc::score_not_normalized,
                 "scores sum to " + format_double(sum));
          }
        }
        const ClassificationMetrics cm = classification_metrics(truth, scores);
        for (const auto& [metric, value] :
             std::initializer_list<std::pair<Metric, double>>{
                 {Metric::ACC, cm.acc},
                 {Metric::AUC, cm.auc},
                 {Metric::F1, cm.f1}}) {
          matrix.entries.push_back({dataset_id, model_id,
                                    group_tags.at(key), f, metric, value,
                                    "ingested"});
        }
      }
    }
  }
  matrix.sort_canonical();
  return matrix;
}

PerformanceMatrix ingest_predictions_file(
    const std::string& path, const std::vector<TabularDataset>& datasets,
    const std::map<std::string, FoldAssignment>& folds,
    PerformanceMatrix matrix) {
  return ingest_predictions(read_text_file(path),
                            read_text_file(path + ".meta.json"), datasets,
                            folds, std::move(matrix));
}

}  // namespace tabprof

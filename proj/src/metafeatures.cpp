#include "tabprof/metafeatures.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

#include "tabprof/csv.hpp"
#include "tabprof/error.hpp"
#include "tabprof/stats.hpp"

namespace tabprof {

const std::array<const char*, kMetaFeatureCount> kMetaFeatureNames = {
    "row_count",
    "column_count",
    "ohe_columns",
    "numeric_features",
    "categorical_features",
    "task_flag",
    "cancor",
    "kurtosis",
    "avg_entropy",
    "std_entropy",
    "row_over_column",
    "avg_asymmetry",
    "avg_pearson_to_target",
    "std_pearson_to_target",
    "avg_feature_correlation",
    "avg_coef_variation",
    "std_coef_variation",
    "avg_coef_anomaly",
    "std_coef_anomaly",
    "rows_over_ohe_columns",
    "pca_99",
};

std::array<double, kMetaFeatureCount> MetaFeatureVector::as_array() const {
  return {static_cast<double>(row_count),
          static_cast<double>(column_count),
          static_cast<double>(ohe_columns),
          static_cast<double>(numeric_features),
          static_cast<double>(categorical_features),
          static_cast<double>(task_flag),
          cancor,
          kurtosis,
          avg_entropy,
          std_entropy,
          row_over_column,
          avg_asymmetry,
          avg_pearson_to_target,
          std_pearson_to_target,
          avg_feature_correlation,
          avg_coef_variation,
          std_coef_variation,
          avg_coef_anomaly,
          std_coef_anomaly,
          rows_over_ohe_columns,
          static_cast<double>(pca_99)};
}

double MetaFeatureVector::field(const std::string& name) const {
  const auto arr = as_array();
  for (std::size_t i = 0; i < kMetaFeatureCount; ++i) {
    if (name == kMetaFeatureNames[i]) return arr[i];
  }
  fail(errc::unknown_feature, name);
}

void MetaFeatureVector::set_field(const std::string& name, double value) {
  if (name == "row_count") row_count = static_cast<std::int64_t>(value);
  else if (name == "column_count") column_count = static_cast<std::int64_t>(value);
  else if (name == "ohe_columns") ohe_columns = static_cast<std::int64_t>(value);
  else if (name == "numeric_features") numeric_features = static_cast<std::int64_t>(value);
  else if (name == "categorical_features") categorical_features = static_cast<std::int64_t>(value);
  else if (name == "task_flag") task_flag = static_cast<std::int64_t>(value);
  else if (name == "cancor") cancor = value;
  else if (name == "kurtosis") kurtosis = value;
  else if (name == "avg_entropy") avg_entropy = value;
  else if (name == "std_entropy") std_entropy = value;
  else if (name == "row_over_column") row_over_column = value;
  else if (name == "avg_asymmetry") avg_asymmetry = value;
  else if (name == "avg_pearson_to_target") avg_pearson_to_target = value;
  else if (name == "std_pearson_to_target") std_pearson_to_target = value;
  else if (name == "avg_feature_correlation") avg_feature_correlation = value;
  else if (name == "avg_coef_variation") avg_coef_variation = value;
  else if (name == "std_coef_variation") std_coef_variation = value;
  else if (name == "avg_coef_anomaly") avg_coef_anomaly = value;
  else if (name == "std_coef_anomaly") std_coef_anomaly = value;
  else if (name == "rows_over_ohe_columns") rows_over_ohe_columns = value;
  else if (name == "pca_99") pca_99 = static_cast<std::int64_t>(value);
  else fail(errc::unknown_feature, name);
}

std::vector<double> imputed_numeric_column(const TabularDataset& d,
                                           std::size_t col) {
  const std::size_t n = d.row_count();
  StableAccumulator sum;
  std::size_t present = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const Cell& c = d.cell(r, col);
    if (!c.missing) {
      sum.add(c.num);
      ++present;
    }
  }
  const double m =
      present ? sum.total() / static_cast<double>(present) : 0.0;
  std::vector<double> out(n);
  for (std::size_t r = 0; r < n; ++r) {
    const Cell& c = d.cell(r, col);
    out[r] = c.missing ? m : c.num;
  }
  return out;
}

namespace {

struct Moments {
  double mean = 0.0;
  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;
  double std() const { return std::sqrt(m2); }
};

Moments central_moments(std::span<const double> v) {
  Moments mo;
  mo.mean = mean(v);
  const double n = static_cast<double>(v.size());
  StableAccumulator a2, a3, a4;
  for (double x : v) {
    const double dlt = x - mo.mean;
    const double d2 = dlt * dlt;
    a2.add(d2);
    a3.add(d2 * dlt);
    a4.add(d2 * d2);
  }
  mo.m2 = a2.total() / n;
  mo.m3 = a3.total() / n;
  mo.m4 = a4.total() / n;
  return mo;
}

std::vector<std::size_t> numeric_feature_columns(const TabularDataset& d) {
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < d.column_count(); ++c) {
    if (c != d.target && d.columns[c].kind == ColumnKind::numeric) {
      cols.push_back(c);
    }
  }
  return cols;
}

}  // namespace

double excess_kurtosis(std::span<const double> column) {
  if (column.size() < 4) {
    fail(errc::too_few_values,
         "kurtosis needs >= 4 values, got " + std::to_string(column.size()));
  }
  const Moments mo = central_moments(column);
  if (mo.std() < kConstantStd) {
    fail(errc::constant_column, "kurtosis of a constant column");
  }
  return mo.m4 / (mo.m2 * mo.m2) - 3.0;
}

double dataset_kurtosis(const TabularDataset& d) {
  std::vector<double> values;
  for (std::size_t c : numeric_feature_columns(d)) {
    const auto col = imputed_numeric_column(d, c);
    if (col.size() < 4) continue;
    if (population_std(col) < kConstantStd) continue;
    values.push_back(excess_kurtosis(col));
  }
  if (values.empty()) {
    fail(errc::no_usable_numeric_columns, "kurtosis: dataset " + d.id);
  }
  return mean(values);
}

double entropy_from_counts(const std::vector<std::size_t>& counts) {
  std::size_t total = 0;
  for (std::size_t c : counts) total += c;
  if (total == 0) return 0.0;
  double h = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log2(p);
  }
  return h;
}

double column_entropy(const TabularDataset& d, std::size_t col) {
  std::vector<std::size_t> counts;
  if (d.columns[col].kind == ColumnKind::categorical) {
    std::map<std::string, std::size_t> freq;
    for (std::size_t r = 0; r < d.row_count(); ++r) {
      ++freq[d.effective_token(r, col)];
    }
    for (const auto& [token, c] : freq) counts.push_back(c);
  } else {
    std::map<double, std::size_t> freq;
    for (double v : imputed_numeric_column(d, col)) ++freq[v];
    for (const auto& [value, c] : freq) counts.push_back(c);
  }
  return entropy_from_counts(counts);
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    fail(errc::invalid_argument, "pearson needs equal lengths >= 2");
  }
  const double mx = mean(x);
  const double my = mean(y);
  StableAccumulator axy, axx, ayy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    axy.add((x[i] - mx) * (y[i] - my));
    axx.add((x[i] - mx) * (x[i] - mx));
    ayy.add((y[i] - my) * (y[i] - my));
  }
  const double sxx = axx.total();
  const double syy = ayy.total();
  if (sxx == 0.0 || syy == 0.0) {
    fail(errc::constant_input, "pearson of a constant series");
  }
  return axy.total() / std::sqrt(sxx * syy);
}

namespace {

AvgStd avg_and_pop_std(const std::vector<double>& v) {
  return {mean(v), population_std(v)};
}

}  // namespace

AvgStd pearson_to_target_stats(const TabularDataset& d) {
  const auto cols = numeric_feature_columns(d);
  if (cols.empty()) {
    fail(errc::no_numeric_features, "pearson_to_target: dataset " + d.id);
  }
  const std::vector<double> y = d.encoded_target();
  const double y_std = population_std(y);
  std::vector<double> corrs;
  for (std::size_t c : cols) {
    const auto col = imputed_numeric_column(d, c);
    if (population_std(col) < kConstantStd || y_std < kConstantStd) {
      corrs.push_back(0.0);  // division guard: degenerate side contributes 0
    } else {
      corrs.push_back(pearson(col, y));
    }
  }
  return avg_and_pop_std(corrs);
}

double feature_correlation_avg(const TabularDataset& d) {
  const auto cols = numeric_feature_columns(d);
  if (cols.size() < 2) {
    fail(errc::fewer_than_two_numeric,
         "feature correlation needs >= 2 numeric features");
  }
  std::vector<std::vector<double>> data;
  std::vector<double> stds;
  for (std::size_t c : cols) {
    data.push_back(imputed_numeric_column(d, c));
    stds.push_back(population_std(data.back()));
  }
  std::vector<double> corrs;
  for (std::size_t a = 0; a < data.size(); ++a) {
    for (std::size_t b = a + 1; b < data.size(); ++b) {
      if (stds[a] < kConstantStd || stds[b] < kConstantStd) {
        corrs.push_back(0.0);
      } else {
        corrs.push_back(pearson(data[a], data[b]));
      }
    }
  }
  return mean(corrs);
}

AvgStd coef_variation_stats(const TabularDataset& d) {
  const auto cols = numeric_feature_columns(d);
  if (cols.empty()) {
    fail(errc::no_numeric_features, "coef_variation: dataset " + d.id);
  }
  std::vector<double> values;
  for (std::size_t c : cols) {
    const auto col = imputed_numeric_column(d, c);
    const double m = mean(col);
    values.push_back(std::fabs(m) < 1e-12 ? 0.0 : population_std(col) / m);
  }
  return avg_and_pop_std(values);
}

AvgStd coef_anomaly_stats(const TabularDataset& d) {
  const auto cols = numeric_feature_columns(d);
  if (cols.empty()) {
    fail(errc::no_numeric_features, "coef_anomaly: dataset " + d.id);
  }
  std::vector<double> values;
  for (std::size_t c : cols) {
    const auto col = imputed_numeric_column(d, c);
    const double s = population_std(col);
    values.push_back(s < 1e-12 ? 0.0 : mean(col) / s);
  }
  return avg_and_pop_std(values);
}

double asymmetry_avg(const TabularDataset& d) {
  std::vector<double> skews;
  for (std::size_t c : numeric_feature_columns(d)) {
    const auto col = imputed_numeric_column(d, c);
    const Moments mo = central_moments(col);
    if (mo.std() < kConstantStd) continue;
    skews.push_back(mo.m3 / std::pow(mo.m2, 1.5));
  }
  if (skews.empty()) {
    fail(errc::no_usable_numeric_columns, "asymmetry: dataset " + d.id);
  }
  return mean(skews);
}

namespace {

// Standardized non-constant numeric feature block, or an error naming `op`.
Matrix usable_standardized_block(const TabularDataset& d, const char* op) {
  const StandardizedColumns sc = standardize_columns(d);
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < sc.constant.size(); ++j) {
    if (!sc.constant[j]) keep.push_back(j);
  }
  if (keep.empty()) {
    fail(errc::no_usable_numeric_columns,
         std::string(op) + ": all numeric features constant in " + d.id);
  }
  Matrix x(sc.values.rows, keep.size());
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t j = 0; j < keep.size(); ++j) {
      x.at(i, j) = sc.values.at(i, keep[j]);
    }
  }
  return x;
}

}  // namespace

std::size_t pca_count_from_eigenvalues(std::span<const double> descending,
                                       double fraction) {
  double total = 0.0;
  for (double e : descending) total += e;
  double cum = 0.0;
  for (std::size_t m = 0; m < descending.size(); ++m) {
    cum += descending[m];
    if (cum >= fraction * total) return m + 1;
  }
  return descending.size();
}

std::size_t pca_components_99(const TabularDataset& d) {
  const Matrix x = usable_standardized_block(d, "pca");
  const double n = static_cast<double>(x.rows);
  Matrix corr = gram(x);
  for (double& v : corr.a) v /= n;
  const std::vector<double> eig = jacobi_eigenvalues(corr);
  return pca_count_from_eigenvalues(eig);
}

double cancor(const TabularDataset& d) {
  const Matrix x = usable_standardized_block(d, "cancor");
  const std::vector<double> y = d.encoded_target();
  const double ym = mean(y);
  std::vector<double> yc(y.size());
  StableAccumulator sst_acc;
  for (std::size_t i = 0; i < y.size(); ++i) {
    yc[i] = y[i] - ym;
    sst_acc.add(yc[i] * yc[i]);
  }
  const double sst = sst_acc.total();
  if (sst == 0.0) {
    fail(errc::degenerate_target, "constant target in " + d.id);
  }
  Matrix a = gram(x);
  for (std::size_t j = 0; j < a.rows; ++j) a.at(j, j) += 1e-8;
  std::vector<double> xty(x.cols, 0.0);
  for (std::size_t j = 0; j < x.cols; ++j) {
    StableAccumulator acc;
    for (std::size_t i = 0; i < x.rows; ++i) acc.add(x.at(i, j) * yc[i]);
    xty[j] = acc.total();
  }
  const std::vector<double> w = cholesky_solve(a, xty);
  StableAccumulator sse_acc;
  for (std::size_t i = 0; i < x.rows; ++i) {
    double pred = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) pred += x.at(i, j) * w[j];
    const double e = yc[i] - pred;
    sse_acc.add(e * e);
  }
  double r2v = 1.0 - sse_acc.total() / sst;
  r2v = std::clamp(r2v, 0.0, 1.0);
  return std::sqrt(r2v);
}

MetaFeatureVector extract(const TabularDataset& d) {
  MetaFeatureVector v;
  v.dataset_id = d.id;

  const auto numeric_cols = numeric_feature_columns(d);
  v.row_count = static_cast<std::int64_t>(d.row_count());
  v.column_count = static_cast<std::int64_t>(d.feature_count());
  v.ohe_columns = static_cast<std::int64_t>(ohe_column_count(d));
  v.numeric_features = static_cast<std::int64_t>(numeric_cols.size());
  v.categorical_features = v.column_count - v.numeric_features;
  v.task_flag = d.task == TaskKind::classification ? 1 : 0;
  v.row_over_column =
      static_cast<double>(v.row_count) / static_cast<double>(v.column_count);
  v.rows_over_ohe_columns =
      static_cast<double>(v.row_count) / static_cast<double>(v.ohe_columns);

  auto tagged = [&](const char* feature, auto&& fn) {
    try {
      return fn();
    } catch (const Error& e) {
      throw Error(e.code(), std::string(feature) + ": " + e.what());
    }
  };

  v.kurtosis = tagged("kurtosis", [&] { return dataset_kurtosis(d); });
  v.avg_asymmetry = tagged("avg_asymmetry", [&] { return asymmetry_avg(d); });

  std::vector<double> entropies;
  for (std::size_t c = 0; c < d.column_count(); ++c) {
    if (c == d.target) continue;
    entropies.push_back(column_entropy(d, c));
  }
  v.avg_entropy = mean(entropies);
  v.std_entropy = population_std(entropies);

  const AvgStd p2t =
      tagged("avg_pearson_to_target", [&] { return pearson_to_target_stats(d); });
  v.avg_pearson_to_target = p2t.avg;
  v.std_pearson_to_target = p2t.std;

  if (numeric_cols.size() >= 2) {
    v.avg_feature_correlation =
        tagged("avg_feature_correlation", [&] { return feature_correlation_avg(d); });
  } else {
    // A single numeric feature has no pairs; guard to zero instead of
    // failing whole-dataset extraction.
    v.avg_feature_correlation = 0.0;
    v.degenerate_fields.push_back("avg_feature_correlation");
  }

  const AvgStd cv =
      tagged("avg_coef_variation", [&] { return coef_variation_stats(d); });
  v.avg_coef_variation = cv.avg;
  v.std_coef_variation = cv.std;
  const AvgStd ca =
      tagged("avg_coef_anomaly", [&] { return coef_anomaly_stats(d); });
  v.avg_coef_anomaly = ca.avg;
  v.std_coef_anomaly = ca.std;

  v.pca_99 = static_cast<std::int64_t>(
      tagged("pca_99", [&] { return pca_components_99(d); }));
  v.cancor = tagged("cancor", [&] { return cancor(d); });

  const double y_std = population_std(d.encoded_target());
  if (y_std < kConstantStd) v.degenerate_fields.push_back("target");
  for (std::size_t c : numeric_cols) {
    const auto col = imputed_numeric_column(d, c);
    if (std::fabs(mean(col)) < 1e-12) {
      v.degenerate_fields.push_back(d.columns[c].name + ":zero_mean");
    }
    if (population_std(col) < kConstantStd) {
      v.degenerate_fields.push_back(d.columns[c].name + ":constant");
    }
  }
  return v;
}

std::string metafeature_csv_header() {
  std::string h = "dataset_id";
  for (const char* name : kMetaFeatureNames) {
    h += ',';
    h += name;
  }
  return h;
}

namespace {

bool is_count_field(std::size_t index) {
  // row_count .. task_flag and pca_99 are integral.
  return index <= 5 || index == 20;
}

}  // namespace

std::string metafeature_csv_row(const MetaFeatureVector& v) {
  std::ostringstream out;
  out << csv_quote_if_needed(v.dataset_id);
  const auto arr = v.as_array();
  for (std::size_t i = 0; i < kMetaFeatureCount; ++i) {
    out << ',';
    if (is_count_field(i)) {
      out << static_cast<long long>(arr[i]);
    } else {
      out << format_sig12(arr[i]);
    }
  }
  return out.str();
}

std::string metafeature_json(const MetaFeatureVector& v) {
  nlohmann::ordered_json j;
  j["dataset_id"] = v.dataset_id;
  const auto arr = v.as_array();
  for (std::size_t i = 0; i < kMetaFeatureCount; ++i) {
    if (is_count_field(i)) {
      j[kMetaFeatureNames[i]] = static_cast<long long>(arr[i]);
    } else {
      double rounded;
      parse_strict_double(format_sig12(arr[i]), rounded);
      j[kMetaFeatureNames[i]] = rounded;
    }
  }
  return j.dump();
}

std::vector<MetaFeatureVector> read_metafeature_file(const std::string& path) {
  const std::string text = read_text_file(path);
  std::vector<MetaFeatureVector> out;
  // Sniff: JSON-lines files start with '{'.
  std::size_t first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        fail(errc::parse_error, std::string("meta-feature JSON: ") + e.what());
      }
      MetaFeatureVector v;
      v.dataset_id = j.value("dataset_id", "");
      for (const char* name : kMetaFeatureNames) {
        if (!j.contains(name)) {
          fail(errc::parse_error,
               std::string("meta-feature JSON missing field ") + name);
        }
        v.set_field(name, j[name].get<double>());
      }
      out.push_back(std::move(v));
    }
    return out;
  }

  const CsvTable t = parse_csv(text);
  if (t.header.empty() || t.header[0].text != "dataset_id") {
    fail(errc::parse_error, "meta-feature CSV must start with dataset_id");
  }
  std::vector<std::size_t> field_of_column(t.header.size(), kMetaFeatureCount);
  for (std::size_t c = 1; c < t.header.size(); ++c) {
    bool known = false;
    for (std::size_t i = 0; i < kMetaFeatureCount; ++i) {
      if (t.header[c].text == kMetaFeatureNames[i]) {
        field_of_column[c] = i;
        known = true;
        break;
      }
    }
    if (!known) {
      fail(errc::parse_error,
           "unknown meta-feature column '" + t.header[c].text + "'");
    }
  }
  for (const auto& row : t.rows) {
    MetaFeatureVector v;
    v.dataset_id = row[0].text;
    for (std::size_t c = 1; c < row.size(); ++c) {
      double value;
      if (!parse_strict_double(row[c].text, value)) {
        fail(errc::parse_error,
             "non-numeric meta-feature value '" + row[c].text + "'");
      }
      v.set_field(kMetaFeatureNames[field_of_column[c]], value);
    }
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace tabprof

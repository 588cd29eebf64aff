#include "tabprof/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tabprof/csv.hpp"
#include "tabprof/error.hpp"
#include "tabprof/rng.hpp"
#include "tabprof/stats.hpp"

namespace tabprof {

const char* task_name(TaskKind t) {
  return t == TaskKind::classification ? "classification" : "regression";
}

TaskKind task_from_name(const std::string& name) {
  if (name == "classification") return TaskKind::classification;
  if (name == "regression") return TaskKind::regression;
  fail(errc::invalid_argument, "unknown task '" + name + "'");
}

std::vector<std::string> TabularDataset::category_tokens(
    std::size_t col) const {
  std::set<std::string> tokens;
  for (std::size_t r = 0; r < row_count(); ++r) {
    tokens.insert(effective_token(r, col));
  }
  return {tokens.begin(), tokens.end()};
}

TabularDataset TabularDataset::select_rows(
    const std::vector<std::size_t>& rows, const std::string& new_id) const {
  TabularDataset out;
  out.id = new_id;
  out.columns = columns;
  out.target = target;
  out.task = task;
  out.cells.reserve(rows.size() * columns.size());
  for (std::size_t r : rows) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      out.cells.push_back(cell(r, c));
    }
  }
  revalidate(out);
  return out;
}

std::vector<double> TabularDataset::encoded_target() const {
  std::vector<double> y(row_count());
  if (task == TaskKind::regression) {
    for (std::size_t r = 0; r < row_count(); ++r) {
      y[r] = cell(r, target).num;
    }
    return y;
  }
  const auto tokens = category_tokens(target);
  std::map<std::string, double> code;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    code[tokens[i]] = static_cast<double>(i);
  }
  for (std::size_t r = 0; r < row_count(); ++r) {
    y[r] = code.at(effective_token(r, target));
  }
  return y;
}

void revalidate(TabularDataset& d) {
  if (d.columns.size() < 2) {
    fail(errc::schema_mismatch, "dataset needs a feature and a target column");
  }
  if (d.target >= d.columns.size()) {
    fail(errc::no_target, "target index out of range");
  }
  if (d.columns.empty() || d.cells.size() % d.columns.size() != 0) {
    fail(errc::schema_mismatch, "cell count is not a multiple of column count");
  }
  const std::size_t n = d.row_count();
  for (std::size_t c = 0; c < d.columns.size(); ++c) {
    ColumnSpec& spec = d.columns[c];
    spec.missing_count = 0;
    if (spec.kind == ColumnKind::categorical) {
      std::set<std::string> tokens;
      for (std::size_t r = 0; r < n; ++r) {
        if (d.cell(r, c).missing) ++spec.missing_count;
        tokens.insert(d.effective_token(r, c));
      }
      spec.cardinality = tokens.size();
      if (spec.cardinality < 1) {
        fail(errc::schema_mismatch, "empty categorical column " + spec.name);
      }
    } else {
      spec.cardinality = 0;
      for (std::size_t r = 0; r < n; ++r) {
        const Cell& cell = d.cell(r, c);
        if (cell.missing) {
          ++spec.missing_count;
        } else if (!std::isfinite(cell.num)) {
          fail(errc::schema_mismatch,
               "non-finite numeric cell in column " + spec.name);
        }
      }
    }
  }
  const ColumnSpec& tgt = d.columns[d.target];
  if (d.task == TaskKind::regression && tgt.kind != ColumnKind::numeric) {
    fail(errc::schema_mismatch, "regression target must be numeric");
  }
  if (d.task == TaskKind::classification) {
    if (tgt.kind != ColumnKind::categorical) {
      fail(errc::schema_mismatch,
           "classification target must be categorical");
    }
    if (tgt.cardinality < 2) {
      fail(errc::schema_mismatch,
           "classification target has a single class");
    }
  }
  if (tgt.missing_count > 0) {
    fail(errc::schema_mismatch, "target column contains missing values");
  }
}

SchemaDescriptor parse_schema_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(errc::parse_error, std::string("schema JSON: ") + e.what());
  }
  if (!j.is_object()) fail(errc::parse_error, "schema JSON must be an object");
  SchemaDescriptor s;
  for (const auto& [key, value] : j.items()) {
    if (key == "target" && value.is_string()) {
      s.target_name = value.get<std::string>();
    } else if (key == "task" && value.is_string()) {
      s.task = task_from_name(value.get<std::string>());
    } else if (value.is_object() && value.contains("kind")) {
      const std::string kind = value["kind"].get<std::string>();
      if (kind == "numeric") {
        s.kinds.emplace_back(key, ColumnKind::numeric);
      } else if (kind == "categorical") {
        s.kinds.emplace_back(key, ColumnKind::categorical);
      } else {
        fail(errc::parse_error, "schema kind must be numeric or categorical");
      }
    } else {
      fail(errc::parse_error, "unrecognized schema entry '" + key + "'");
    }
  }
  return s;
}

namespace {

bool is_missing_field(const CsvField& f) {
  return !f.quoted && (f.text.empty() || f.text == "NA");
}

}  // namespace

TabularDataset load_dataset_from_string(
    const std::string& csv_text, const std::string& id,
    const std::optional<SchemaDescriptor>& schema,
    const LoadOptions& options) {
  const CsvTable table = parse_csv(csv_text);
  const std::size_t ncols = table.header.size();
  if (ncols < 2) {
    fail(errc::schema_mismatch, "dataset needs a feature and a target column");
  }
  const std::size_t nrows = table.rows.size();
  if (nrows < options.min_rows) {
    fail(errc::too_few_rows, id + " has " + std::to_string(nrows) +
                                 " rows, minimum is " +
                                 std::to_string(options.min_rows));
  }

  TabularDataset d;
  d.id = id;
  d.columns.resize(ncols);
  for (std::size_t c = 0; c < ncols; ++c) {
    d.columns[c].name = table.header[c].text;
  }

  // Resolve target and declared kinds before inference.
  std::size_t target = ncols - 1;
  if (schema && schema->target_name) {
    bool found = false;
    for (std::size_t c = 0; c < ncols; ++c) {
      if (d.columns[c].name == *schema->target_name) {
        target = c;
        found = true;
        break;
      }
    }
    if (!found) {
      fail(errc::no_target, "target '" + *schema->target_name + "' not found");
    }
  }
  d.target = target;

  std::vector<std::optional<ColumnKind>> declared(ncols);
  if (schema) {
    for (const auto& [name, kind] : schema->kinds) {
      bool found = false;
      for (std::size_t c = 0; c < ncols; ++c) {
        if (d.columns[c].name == name) {
          declared[c] = kind;
          found = true;
        }
      }
      if (!found) {
        fail(errc::schema_mismatch,
             "schema names unknown column '" + name + "'");
      }
    }
  }

  // Inference pass: numeric iff every non-missing cell parses.
  std::vector<bool> parses_numeric(ncols, true);
  std::vector<std::vector<double>> parsed(ncols,
                                          std::vector<double>(nrows, 0.0));
  for (std::size_t r = 0; r < nrows; ++r) {
    for (std::size_t c = 0; c < ncols; ++c) {
      const CsvField& f = table.rows[r][c];
      if (is_missing_field(f)) continue;
      double v;
      if (parse_strict_double(f.text, v)) {
        parsed[c][r] = v;
      } else {
        parses_numeric[c] = false;
      }
    }
  }

  for (std::size_t c = 0; c < ncols; ++c) {
    ColumnKind kind = parses_numeric[c] ? ColumnKind::numeric
                                        : ColumnKind::categorical;
    if (declared[c]) {
      if (*declared[c] == ColumnKind::numeric && !parses_numeric[c]) {
        fail(errc::schema_mismatch, "column " + d.columns[c].name +
                                        " declared numeric but has "
                                        "non-numeric cells");
      }
      kind = *declared[c];
    }
    d.columns[c].kind = kind;
  }

  TaskKind task =
      d.columns[target].kind == ColumnKind::numeric ? TaskKind::regression
                                                    : TaskKind::classification;
  if (schema && schema->task) task = *schema->task;
  d.task = task;
  // Classification targets are categorical even when their tokens parse.
  if (task == TaskKind::classification) {
    d.columns[target].kind = ColumnKind::categorical;
  }

  d.cells.resize(nrows * ncols);
  for (std::size_t r = 0; r < nrows; ++r) {
    for (std::size_t c = 0; c < ncols; ++c) {
      const CsvField& f = table.rows[r][c];
      Cell& cell = d.cells[r * ncols + c];
      if (is_missing_field(f)) {
        cell.missing = true;
      } else if (d.columns[c].kind == ColumnKind::numeric) {
        cell.num = parsed[c][r];
      } else {
        cell.token = f.text;
      }
    }
  }

  revalidate(d);
  return d;
}

TabularDataset load_dataset(const std::string& path,
                            const std::optional<SchemaDescriptor>& schema,
                            const LoadOptions& options) {
  std::optional<SchemaDescriptor> effective = schema;
  if (!effective) {
    const std::string sidecar = path + ".schema.json";
    if (std::filesystem::exists(sidecar)) {
      effective = parse_schema_json(read_text_file(sidecar));
    }
  }
  LoadOptions opts = options;
  if (opts.id.empty()) {
    opts.id = std::filesystem::path(path).stem().string();
  }
  return load_dataset_from_string(read_text_file(path), opts.id, effective,
                                  opts);
}

std::string dataset_to_csv(const TabularDataset& d) {
  std::ostringstream out;
  for (std::size_t c = 0; c < d.columns.size(); ++c) {
    if (c) out << ',';
    out << csv_quote_if_needed(d.columns[c].name);
  }
  out << '\n';
  for (std::size_t r = 0; r < d.row_count(); ++r) {
    for (std::size_t c = 0; c < d.columns.size(); ++c) {
      if (c) out << ',';
      const Cell& cell = d.cell(r, c);
      if (cell.missing) continue;  // canonical missing marker: empty field
      if (d.columns[c].kind == ColumnKind::numeric) {
        out << format_double(cell.num);
      } else {
        out << csv_quote_if_needed(cell.token);
      }
    }
    out << '\n';
  }
  return out.str();
}

std::string dataset_schema_json(const TabularDataset& d) {
  nlohmann::ordered_json j;
  for (const ColumnSpec& col : d.columns) {
    j[col.name] = {{"kind", col.kind == ColumnKind::numeric ? "numeric"
                                                            : "categorical"}};
  }
  j["target"] = d.columns[d.target].name;
  j["task"] = task_name(d.task);
  return j.dump(2) + "\n";
}

void write_dataset(const TabularDataset& d, const std::string& path) {
  write_text_file(path, dataset_to_csv(d));
  write_text_file(path + ".schema.json", dataset_schema_json(d));
}

std::size_t ohe_column_count(const TabularDataset& d) {
  std::size_t count = 0;
  for (std::size_t c = 0; c < d.columns.size(); ++c) {
    if (c == d.target) continue;
    count += d.columns[c].kind == ColumnKind::numeric
                 ? 1
                 : d.columns[c].cardinality;
  }
  return count;
}

TabularDataset subsample(const TabularDataset& d, std::size_t n,
                         std::uint64_t seed) {
  if (n > d.row_count()) {
    fail(errc::sample_too_large,
         "requested " + std::to_string(n) + " of " +
             std::to_string(d.row_count()) + " rows");
  }
  Rng rng(seed);
  const auto rows = rng.sample_without_replacement(d.row_count(), n);
  return d.select_rows(rows, d.id);
}

std::vector<std::size_t> FoldAssignment::rows_in_fold(std::size_t fold) const {
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < fold_of_row.size(); ++r) {
    if (fold_of_row[r] == fold) rows.push_back(r);
  }
  return rows;
}

std::vector<std::size_t> FoldAssignment::rows_not_in_fold(
    std::size_t fold) const {
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < fold_of_row.size(); ++r) {
    if (fold_of_row[r] != fold) rows.push_back(r);
  }
  return rows;
}

std::string FoldAssignment::digest() const {
  std::uint64_t h = fnv1a64(dataset_id);
  h = fnv1a64_u64(seed, h);
  h = fnv1a64_u64(k, h);
  for (std::size_t f : fold_of_row) h = fnv1a64_u64(f, h);
  return hex16(h);
}

FoldAssignment make_folds(const TabularDataset& d, std::size_t k,
                          std::uint64_t seed, bool stratified) {
  if (k < 2) fail(errc::invalid_argument, "k must be >= 2");
  const std::size_t n = d.row_count();
  if (n < k) {
    fail(errc::too_few_rows_for_k, std::to_string(n) + " rows cannot fill " +
                                       std::to_string(k) + " folds");
  }
  if (stratified && d.task != TaskKind::classification) {
    fail(errc::stratify_on_regression,
         "stratified folds require a classification task");
  }

  FoldAssignment fa;
  fa.dataset_id = d.id;
  fa.seed = seed;
  fa.k = k;
  fa.fold_of_row.assign(n, 0);

  Rng rng(seed);
  if (!stratified) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    // Remainder rows go to the lowest-index folds.
    const std::size_t base = n / k;
    const std::size_t extra = n % k;
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
      const std::size_t size = base + (f < extra ? 1 : 0);
      for (std::size_t i = 0; i < size; ++i) {
        fa.fold_of_row[order[pos++]] = f;
      }
    }
    return fa;
  }

  // Group rows by class, shuffle within class, then deal each class across
  // folds. Each class's remainder starts where the previous one stopped so
  // fold totals stay within one of each other.
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t r = 0; r < n; ++r) {
    by_class[d.effective_token(r, d.target)].push_back(r);
  }
  std::size_t start = 0;
  for (auto& [token, rows] : by_class) {
    rng.shuffle(rows);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      fa.fold_of_row[rows[i]] = (start + i) % k;
    }
    start = (start + rows.size()) % k;
  }
  return fa;
}

StandardizedColumns standardize_columns(const TabularDataset& d) {
  std::vector<std::size_t> numeric_cols;
  for (std::size_t c = 0; c < d.columns.size(); ++c) {
    if (c != d.target && d.columns[c].kind == ColumnKind::numeric) {
      numeric_cols.push_back(c);
    }
  }
  if (numeric_cols.empty()) {
    fail(errc::no_numeric_features, "dataset " + d.id);
  }

  const std::size_t n = d.row_count();
  StandardizedColumns out;
  out.column_index = numeric_cols;
  out.values = Matrix(n, numeric_cols.size());
  out.means.resize(numeric_cols.size());
  out.stds.resize(numeric_cols.size());
  out.constant.resize(numeric_cols.size());

  for (std::size_t j = 0; j < numeric_cols.size(); ++j) {
    const std::size_t c = numeric_cols[j];
    StableAccumulator sum;
    std::size_t present = 0;
    for (std::size_t r = 0; r < n; ++r) {
      const Cell& cell = d.cell(r, c);
      if (!cell.missing) {
        sum.add(cell.num);
        ++present;
      }
    }
    const double m =
        present > 0 ? sum.total() / static_cast<double>(present) : 0.0;
    // Imputation first, then moments over the imputed column.
    std::vector<double> col(n);
    for (std::size_t r = 0; r < n; ++r) {
      const Cell& cell = d.cell(r, c);
      col[r] = cell.missing ? m : cell.num;
    }
    const double mu = mean(col);
    const double sd = population_std(col);
    out.means[j] = mu;
    out.stds[j] = sd;
    out.constant[j] = sd < 1e-12;
    for (std::size_t r = 0; r < n; ++r) {
      out.values.at(r, j) = out.constant[j] ? 0.0 : (col[r] - mu) / sd;
    }
  }
  return out;
}

}  // namespace tabprof

#include "tabprof/metalearn.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "tabprof/csv.hpp"
#include "tabprof/error.hpp"
#include "tabprof/models.hpp"
#include "tabprof/rankstats.hpp"
#include "tabprof/rng.hpp"
#include "tabprof/stats.hpp"

namespace tabprof {

const char* meta_kind_name(MetaModelKind k) {
  switch (k) {
    case MetaModelKind::table5_logistic: return "table5_logistic";
    case MetaModelKind::eq2_symbolic: return "eq2_symbolic";
    case MetaModelKind::trained_logistic: return "trained_logistic";
    case MetaModelKind::trained_mlp: return "trained_mlp";
  }
  return "?";
}

MetaModelKind meta_kind_from_name(const std::string& name) {
  for (MetaModelKind k :
       {MetaModelKind::table5_logistic, MetaModelKind::eq2_symbolic,
        MetaModelKind::trained_logistic, MetaModelKind::trained_mlp}) {
    if (name == meta_kind_name(k)) return k;
  }
  fail(errc::invalid_argument, "unknown meta-model kind '" + name + "'");
}

nlohmann::ordered_json MetaModelSpec::to_json() const {
  nlohmann::ordered_json j;
  j["format_version"] = format_version;
  j["kind"] = meta_kind_name(kind);
  nlohmann::ordered_json coef = nlohmann::ordered_json::object();
  for (const auto& [name, value] : coefficients) coef[name] = value;
  j["coefficients"] = coef;
  nlohmann::ordered_json std_table = nlohmann::ordered_json::object();
  for (const auto& [name, s] : standardization) {
    std_table[name] = {{"mean", s.mean}, {"std", s.std}};
  }
  j["standardization"] = std_table;
  j["hyper"] = hyper;
  return j;
}

MetaModelSpec MetaModelSpec::from_json(const nlohmann::json& j) {
  MetaModelSpec s;
  s.format_version = j.value("format_version", 1);
  s.kind = meta_kind_from_name(j.at("kind").get<std::string>());
  if (j.contains("coefficients")) {
    for (const auto& [name, value] : j["coefficients"].items()) {
      s.coefficients[name] = value.get<double>();
    }
  }
  if (j.contains("standardization")) {
    for (const auto& [name, entry] : j["standardization"].items()) {
      s.standardization[name] = {entry.at("mean").get<double>(),
                                 entry.at("std").get<double>()};
    }
  }
  if (j.contains("hyper")) s.hyper = j["hyper"];
  return s;
}

void MetaModelSpec::save(const std::string& path) const {
  write_text_file(path, to_json().dump(2) + "\n");
}

MetaModelSpec MetaModelSpec::load(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(errc::parse_error, std::string("meta-model JSON: ") + e.what());
  }
  return from_json(j);
}

MetaModelSpec table5_spec() {
  MetaModelSpec s;
  s.kind = MetaModelKind::table5_logistic;
  s.coefficients = {
      {"intercept", -0.8751},
      {"row_count", -0.0195},
      {"row_over_column", -1.5991},
      {"task_flag", 0.5563},
      {"cancor", -0.2067},
      {"kurtosis", 0.8975},
      {"avg_asymmetry", -0.0316},
      {"avg_pearson_to_target", 0.5247},
      {"std_pearson_to_target", -0.2326},
      {"avg_feature_correlation", -0.1639},
      {"avg_coef_variation", -0.1087},
      {"std_coef_variation", -0.0320},
      {"avg_coef_anomaly", 0.0588},
      {"std_coef_anomaly", -0.2730},
      {"avg_entropy", -0.2086},
      {"std_entropy", 0.1769},
      {"ohe_columns", -0.5745},
      {"rows_over_ohe_columns", 1.7303},
      {"pca_99", 0.4624},
  };
  // Corpus statistics were published for these five features only.
  s.standardization = {
      {"row_count", {18576.0, 39874.0}},
      {"kurtosis", {348.01, 1129.66}},
      {"avg_feature_correlation", {0.08, 0.12}},
      {"avg_entropy", {7.70, 2.29}},
      {"avg_pearson_to_target", {0.11, 0.10}},
  };
  return s;
}

MetaModelSpec eq2_spec() {
  MetaModelSpec s;
  s.kind = MetaModelKind::eq2_symbolic;
  s.coefficients = {
      {"intercept", 0.89},
      {"kurtosis", 0.005},
      {"row_count", -4.3e-5},
      {"std_coef_anomaly", -0.053},
      {"std_pearson_to_target", -23.0},
  };
  return s;
}

namespace {

double linear_score(const MetaModelSpec& spec, const MetaFeatureVector& v,
                    bool standardized, bool strict) {
  double z = 0.0;
  for (const auto& [name, coef] : spec.coefficients) {
    if (name == "intercept") {
      z += coef;
      continue;
    }
    double value = v.field(name);
    if (!std::isfinite(value)) {
      fail(errc::non_finite_feature, name);
    }
    if (standardized) {
      const auto it = spec.standardization.find(name);
      if (it != spec.standardization.end()) {
        value = (value - it->second.mean) / it->second.std;
      } else if (strict) {
        fail(errc::missing_standardization,
             "no (mean, std) for feature '" + name + "'");
      }
      // Non-strict: identity standardization.
    }
    z += coef * value;
  }
  return sigmoid(z);
}

MlpNet net_from_spec(const MetaModelSpec& spec) {
  if (!spec.hyper.contains("layout")) {
    fail(errc::parse_error, "trained_mlp spec lacks hyper.layout");
  }
  MlpNet net;
  for (const auto& v : spec.hyper["layout"]) {
    net.layout.push_back(v.get<std::size_t>());
  }
  net.softmax_output = true;
  net.params.assign(net.param_count(), 0.0);
  // Parameter order: per layer, weights row-major then biases.
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < net.layout.size(); ++l) {
    const std::size_t in = net.layout[l];
    const std::size_t out = net.layout[l + 1];
    for (std::size_t o = 0; o < out; ++o) {
      for (std::size_t i = 0; i < in; ++i) {
        const std::string key = "l" + std::to_string(l) + "_w_" +
                                std::to_string(o) + "_" + std::to_string(i);
        net.params[offset + o * in + i] = spec.coefficients.at(key);
      }
    }
    for (std::size_t o = 0; o < out; ++o) {
      const std::string key =
          "l" + std::to_string(l) + "_b_" + std::to_string(o);
      net.params[offset + in * out + o] = spec.coefficients.at(key);
    }
    offset += in * out + out;
  }
  return net;
}

std::vector<double> standardized_features(const MetaModelSpec& spec,
                                          const MetaFeatureVector& v,
                                          bool strict) {
  std::vector<double> z(kMetaFeatureCount);
  const auto raw = v.as_array();
  for (std::size_t i = 0; i < kMetaFeatureCount; ++i) {
    if (!std::isfinite(raw[i])) {
      fail(errc::non_finite_feature, kMetaFeatureNames[i]);
    }
    const auto it = spec.standardization.find(kMetaFeatureNames[i]);
    if (it != spec.standardization.end()) {
      z[i] = (raw[i] - it->second.mean) / it->second.std;
    } else if (strict) {
      fail(errc::missing_standardization,
           std::string("no (mean, std) for feature '") +
               kMetaFeatureNames[i] + "'");
    } else {
      z[i] = raw[i];
    }
  }
  return z;
}

}  // namespace

double score_eq2(const MetaFeatureVector& v) {
  return linear_score(eq2_spec(), v, /*standardized=*/false,
                      /*strict=*/false);
}

double score_table5(const MetaFeatureVector& v, bool strict) {
  return linear_score(table5_spec(), v, /*standardized=*/true, strict);
}

double score_meta(const MetaModelSpec& spec, const MetaFeatureVector& v,
                  bool strict) {
  switch (spec.kind) {
    case MetaModelKind::eq2_symbolic:
      return linear_score(spec, v, false, false);
    case MetaModelKind::table5_logistic:
    case MetaModelKind::trained_logistic:
      return linear_score(spec, v, true, strict);
    case MetaModelKind::trained_mlp: {
      const MlpNet net = net_from_spec(spec);
      const auto z = standardized_features(spec, v, strict);
      const auto out = net.forward(z);
      return out[1];  // class 1 = DL outperforms
    }
  }
  fail(errc::invalid_argument, "unhandled meta-model kind");
}

std::vector<MetaExample> build_meta_dataset(
    const PerformanceMatrix& matrix,
    const std::vector<MetaFeatureVector>& vectors, LabelMode mode,
    std::optional<double> significance_alpha) {
  std::map<std::string, const MetaFeatureVector*> by_id;
  for (const auto& v : vectors) by_id[v.dataset_id] = &v;

  std::map<std::string, Verdict> verdicts;
  if (significance_alpha) {
    verdicts = significance_filter(matrix, *significance_alpha);
  }

  const auto models = matrix.model_ids();
  std::vector<MetaExample> out;
  for (const auto& id : matrix.dataset_ids()) {
    if (significance_alpha &&
        verdicts.at(id) == Verdict::not_significant) {
      continue;
    }
    const auto vit = by_id.find(id);
    if (vit == by_id.end()) {
      fail(errc::invalid_argument,
           "no meta-feature vector for dataset '" + id + "'");
    }
    const Metric metric = primary_metric(matrix.task_of(id));
    const bool lower = lower_is_better(metric);

    MetaExample ex;
    ex.features = *vit->second;
    ex.dataset_id = id;
    ex.from_significance_filter = significance_alpha.has_value();

    if (mode == LabelMode::best_overall) {
      std::vector<double> means;
      for (const auto& model : models) {
        const auto folds = matrix.fold_values(id, model, metric);
        if (folds.size() != matrix.fold_count) {
          fail(errc::incomplete_grid,
               "model '" + model + "' incomplete on dataset '" + id + "'");
        }
        means.push_back(mean(folds));
      }
      const double best = lower ? *std::min_element(means.begin(), means.end())
                                : *std::max_element(means.begin(), means.end());
      bool any_dl = false, any_other = false;
      std::size_t winners = 0;
      for (std::size_t m = 0; m < models.size(); ++m) {
        if (means[m] != best) continue;
        ++winners;
        (matrix.group_of(models[m]) == "DL" ? any_dl : any_other) = true;
      }
      ex.tie = winners > 1;
      // Ties are resolved against the DL hypothesis.
      ex.label = (any_dl && !any_other) ? 1 : 0;
    } else {
      std::optional<double> best_te, best_dl;
      for (const auto& model : models) {
        const auto folds = matrix.fold_values(id, model, metric);
        if (folds.size() != matrix.fold_count) {
          fail(errc::incomplete_grid,
               "model '" + model + "' incomplete on dataset '" + id + "'");
        }
        const double m = mean(folds);
        const std::string group = matrix.group_of(model);
        auto& slot = group == "TE" ? best_te : best_dl;
        if (group == "TE" || group == "DL") {
          if (!slot || (lower ? m < *slot : m > *slot)) slot = m;
        }
      }
      if (!best_te || !best_dl) {
        fail(errc::missing_group, "dataset '" + id + "' lacks TE or DL");
      }
      ex.tie = *best_te == *best_dl;
      ex.label =
          !ex.tie && (lower ? *best_dl < *best_te : *best_dl > *best_te) ? 1
                                                                         : 0;
    }
    out.push_back(std::move(ex));
  }
  return out;
}

// --- logistic meta-learner ---------------------------------------------------

double meta_logistic_loss(const std::vector<double>& w, const Matrix& x,
                          const std::vector<int>& y, double l2) {
  const double n = static_cast<double>(x.rows);
  double total = 0.0;
  for (std::size_t r = 0; r < x.rows; ++r) {
    double z = w[x.cols];
    for (std::size_t j = 0; j < x.cols; ++j) z += w[j] * x.at(r, j);
    // Stable log(1+exp(.)) forms.
    const double softplus = z > 0 ? z + std::log1p(std::exp(-z))
                                  : std::log1p(std::exp(z));
    total += softplus - (y[r] == 1 ? z : 0.0);
  }
  double penalty = 0.0;
  for (std::size_t j = 0; j < x.cols; ++j) penalty += w[j] * w[j];
  return total / n + 0.5 * l2 * penalty;
}

std::vector<double> meta_logistic_gradient(const std::vector<double>& w,
                                           const Matrix& x,
                                           const std::vector<int>& y,
                                           double l2) {
  const double n = static_cast<double>(x.rows);
  std::vector<double> g(w.size(), 0.0);
  for (std::size_t r = 0; r < x.rows; ++r) {
    double z = w[x.cols];
    for (std::size_t j = 0; j < x.cols; ++j) z += w[j] * x.at(r, j);
    const double delta = (sigmoid(z) - (y[r] == 1 ? 1.0 : 0.0)) / n;
    for (std::size_t j = 0; j < x.cols; ++j) g[j] += delta * x.at(r, j);
    g[x.cols] += delta;
  }
  for (std::size_t j = 0; j < x.cols; ++j) g[j] += l2 * w[j];
  return g;
}

std::vector<std::size_t> stratified_label_folds(const std::vector<int>& labels,
                                                std::size_t k,
                                                std::uint64_t seed) {
  std::vector<std::size_t> fold_of(labels.size());
  Rng rng(seed);
  std::size_t start = 0;
  for (int cls : {0, 1}) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) rows.push_back(i);
    }
    rng.shuffle(rows);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      fold_of[rows[i]] = (start + i) % k;
    }
    start = (start + rows.size()) % k;
  }
  return fold_of;
}

namespace {

struct MetaDesign {
  Matrix x;  // standardized features
  std::vector<int> y;
  std::map<std::string, Standardization> table;
};

MetaDesign build_design(const std::vector<MetaExample>& examples) {
  MetaDesign d;
  d.x = Matrix(examples.size(), kMetaFeatureCount);
  d.y.resize(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto arr = examples[i].features.as_array();
    for (std::size_t j = 0; j < kMetaFeatureCount; ++j) {
      d.x.at(i, j) = arr[j];
    }
    d.y[i] = examples[i].label;
  }
  for (std::size_t j = 0; j < kMetaFeatureCount; ++j) {
    std::vector<double> col(examples.size());
    for (std::size_t i = 0; i < examples.size(); ++i) col[i] = d.x.at(i, j);
    const double m = mean(col);
    double s = population_std(col);
    if (s < 1e-12) s = 1.0;  // constant feature scores as zero
    d.table[kMetaFeatureNames[j]] = {m, s};
    for (std::size_t i = 0; i < examples.size(); ++i) {
      d.x.at(i, j) = (d.x.at(i, j) - m) / s;
    }
  }
  return d;
}

void require_both_labels(const std::vector<MetaExample>& examples) {
  bool pos = false, neg = false;
  for (const auto& e : examples) (e.label == 1 ? pos : neg) = true;
  if (!pos || !neg) {
    fail(errc::single_label, "meta training needs both labels present");
  }
}

MetaTrainResult train_logistic_meta(const std::vector<MetaExample>& examples,
                                    const nlohmann::json& overrides) {
  const MetaDesign d = build_design(examples);
  const double lr = overrides.value("learning_rate", 0.5);
  const double l2 = overrides.value("l2", 1e-4);
  const std::size_t epochs = overrides.value("epochs", 50000);

  std::vector<double> w(kMetaFeatureCount + 1, 0.0);
  double gnorm = 0.0;
  std::size_t e = 0;
  for (; e < epochs; ++e) {
    const auto g = meta_logistic_gradient(w, d.x, d.y, l2);
    gnorm = 0.0;
    for (double v : g) gnorm += v * v;
    gnorm = std::sqrt(gnorm);
    if (gnorm < 1e-8) break;
    for (std::size_t j = 0; j < w.size(); ++j) w[j] -= lr * g[j];
  }

  MetaTrainResult result;
  result.spec.kind = MetaModelKind::trained_logistic;
  result.spec.standardization = d.table;
  for (std::size_t j = 0; j < kMetaFeatureCount; ++j) {
    result.spec.coefficients[kMetaFeatureNames[j]] = w[j];
  }
  result.spec.coefficients["intercept"] = w[kMetaFeatureCount];
  result.spec.hyper = {{"learning_rate", lr}, {"l2", l2}, {"epochs", epochs}};
  result.report.converged = gnorm < 1e-8;
  result.report.final_gradient_norm = gnorm;
  result.report.epochs_run = e;
  result.report.chosen_hyper = result.spec.hyper;
  return result;
}

struct MlpLatticePoint {
  std::vector<std::size_t> widths;
  double learning_rate;
  std::size_t epochs;
  double l2;
};

MetaModelSpec fit_mlp_point(const MetaDesign& d, const MlpLatticePoint& p,
                            std::uint64_t seed,
                            const std::map<std::string, Standardization>& table) {
  std::vector<std::size_t> layout;
  layout.push_back(kMetaFeatureCount);
  for (std::size_t wdt : p.widths) layout.push_back(wdt);
  layout.push_back(2);

  Matrix y(d.x.rows, 2);
  for (std::size_t r = 0; r < d.x.rows; ++r) {
    y.at(r, d.y[r] == 1 ? 1 : 0) = 1.0;
  }
  MlpNet net = MlpNet::initialize(layout, true, seed);
  net.train_gd(d.x, y, p.learning_rate, p.epochs, 0, p.l2);

  MetaModelSpec spec;
  spec.kind = MetaModelKind::trained_mlp;
  spec.standardization = table;
  spec.hyper["layout"] = layout;
  spec.hyper["learning_rate"] = p.learning_rate;
  spec.hyper["epochs"] = p.epochs;
  spec.hyper["l2"] = p.l2;
  nlohmann::ordered_json widths = nlohmann::ordered_json::array();
  for (std::size_t wdt : p.widths) widths.push_back(wdt);
  spec.hyper["layer_widths"] = widths;
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < layout.size(); ++l) {
    const std::size_t in = layout[l];
    const std::size_t out = layout[l + 1];
    for (std::size_t o = 0; o < out; ++o) {
      for (std::size_t i = 0; i < in; ++i) {
        spec.coefficients["l" + std::to_string(l) + "_w_" +
                          std::to_string(o) + "_" + std::to_string(i)] =
            net.params[offset + o * in + i];
      }
    }
    for (std::size_t o = 0; o < out; ++o) {
      spec.coefficients["l" + std::to_string(l) + "_b_" +
                        std::to_string(o)] = net.params[offset + in * out + o];
    }
    offset += in * out + out;
  }
  return spec;
}

std::vector<MlpLatticePoint> mlp_lattice(const nlohmann::json& overrides) {
  if (overrides.contains("lattice")) {
    std::vector<MlpLatticePoint> points;
    for (const auto& p : overrides["lattice"]) {
      MlpLatticePoint lp;
      for (const auto& w : p.at("layer_widths")) {
        lp.widths.push_back(w.get<std::size_t>());
      }
      lp.learning_rate = p.value("learning_rate", 0.2);
      lp.epochs = p.value("epochs", 400);
      lp.l2 = p.value("l2", 0.0);
      points.push_back(std::move(lp));
    }
    return points;
  }
  std::vector<MlpLatticePoint> points;
  for (const std::vector<std::size_t>& widths :
       std::vector<std::vector<std::size_t>>{{4}, {8}, {8, 4}}) {
    for (double lr : {0.1, 0.3}) {
      for (double l2 : {0.0, 1e-3}) {
        points.push_back({widths, lr, 400, l2});
      }
    }
  }
  return points;
}

MetaTrainResult train_mlp_meta(const std::vector<MetaExample>& examples,
                               const nlohmann::json& overrides,
                               std::uint64_t seed) {
  const MetaDesign d = build_design(examples);
  const auto lattice = mlp_lattice(overrides);
  const std::size_t cv_k = std::min(
      examples.size(),
      static_cast<std::size_t>(overrides.value("cv_k", 5)));
  const auto fold_of = stratified_label_folds(d.y, cv_k, seed);

  double best_auc = -1.0;
  std::size_t best_point = 0;
  for (std::size_t pi = 0; pi < lattice.size(); ++pi) {
    // Mean CV AUC over folds; ties resolved by lattice order.
    std::vector<double> fold_aucs;
    bool usable = true;
    for (std::size_t f = 0; f < cv_k && usable; ++f) {
      std::vector<MetaExample> fit_rows;
      std::vector<std::size_t> heldout;
      for (std::size_t i = 0; i < examples.size(); ++i) {
        if (fold_of[i] == f) {
          heldout.push_back(i);
        } else {
          fit_rows.push_back(examples[i]);
        }
      }
      if (heldout.empty()) continue;
      bool pos = false, neg = false;
      for (const auto& e : fit_rows) (e.label == 1 ? pos : neg) = true;
      for (std::size_t i : heldout) {
        // AUC needs both classes held out too.
        (void)i;
      }
      std::set<int> held_classes;
      for (std::size_t i : heldout) held_classes.insert(d.y[i]);
      if (!pos || !neg || held_classes.size() < 2) {
        usable = false;
        break;
      }
      const MetaDesign fit_design = build_design(fit_rows);
      const MetaModelSpec fold_spec = fit_mlp_point(
          fit_design, lattice[pi], seed + 1000 * (pi + 1) + f,
          fit_design.table);
      std::vector<int> truth;
      std::vector<double> pos_scores;
      for (std::size_t i : heldout) {
        truth.push_back(d.y[i]);
        pos_scores.push_back(score_meta(fold_spec, examples[i].features));
      }
      fold_aucs.push_back(binary_auc(truth, pos_scores));
    }
    if (!usable || fold_aucs.empty()) continue;
    const double cv_auc = mean(fold_aucs);
    if (cv_auc > best_auc) {
      best_auc = cv_auc;
      best_point = pi;
    }
  }

  MetaTrainResult result;
  result.spec = fit_mlp_point(d, lattice[best_point], seed, d.table);
  result.report.grid_cv_auc = std::max(best_auc, 0.0);
  result.report.chosen_hyper = result.spec.hyper;
  result.report.epochs_run = lattice[best_point].epochs;
  return result;
}

}  // namespace

MetaTrainResult train_meta(const std::vector<MetaExample>& examples,
                           MetaModelKind kind,
                           const nlohmann::json& hyper_overrides,
                           std::uint64_t seed) {
  if (examples.size() < 10) {
    fail(errc::too_few_examples,
         "meta training needs >= 10 examples, got " +
             std::to_string(examples.size()));
  }
  require_both_labels(examples);
  switch (kind) {
    case MetaModelKind::trained_logistic:
      return train_logistic_meta(examples, hyper_overrides);
    case MetaModelKind::trained_mlp:
      return train_mlp_meta(examples, hyper_overrides, seed);
    default:
      fail(errc::invalid_argument,
           "train_meta handles trained_logistic and trained_mlp");
  }
}

MetaMetrics evaluate_meta(const MetaModelSpec& spec,
                          const std::vector<MetaExample>& examples,
                          std::size_t k, std::uint64_t seed) {
  if (examples.size() < k) {
    fail(errc::too_few_examples, "need at least k examples");
  }
  std::vector<int> truth(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    truth[i] = examples[i].label;
  }
  std::vector<double> scores(examples.size());

  const bool fixed_kind = spec.kind == MetaModelKind::table5_logistic ||
                          spec.kind == MetaModelKind::eq2_symbolic;
  if (fixed_kind) {
    for (std::size_t i = 0; i < examples.size(); ++i) {
      scores[i] = score_meta(spec, examples[i].features);
    }
  } else {
    const auto fold_of = stratified_label_folds(truth, k, seed);
    for (std::size_t f = 0; f < k; ++f) {
      std::vector<MetaExample> fit_rows;
      std::vector<std::size_t> heldout;
      for (std::size_t i = 0; i < examples.size(); ++i) {
        if (fold_of[i] == f) {
          heldout.push_back(i);
        } else {
          fit_rows.push_back(examples[i]);
        }
      }
      if (heldout.empty()) continue;
      nlohmann::json hyper = spec.hyper;
      if (spec.kind == MetaModelKind::trained_mlp &&
          spec.hyper.contains("layer_widths")) {
        // Refit exactly the chosen lattice point.
        nlohmann::json point = {
            {"layer_widths", spec.hyper["layer_widths"]},
            {"learning_rate", spec.hyper.value("learning_rate", 0.2)},
            {"epochs", spec.hyper.value("epochs", 400)},
            {"l2", spec.hyper.value("l2", 0.0)}};
        hyper = nlohmann::json{{"lattice", nlohmann::json::array({point})}};
      }
      const MetaTrainResult fold_fit =
          train_meta(fit_rows, spec.kind, hyper, seed + 7919 * (f + 1));
      for (std::size_t i : heldout) {
        scores[i] = score_meta(fold_fit.spec, examples[i].features);
      }
    }
  }

  Matrix score_rows(examples.size(), 2);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    score_rows.at(i, 0) = 1.0 - scores[i];
    score_rows.at(i, 1) = scores[i];
  }
  const ClassificationMetrics cm = classification_metrics(truth, score_rows);
  return {cm.auc, cm.acc, cm.f1};
}

ProbabilityGrid probability_grid(const MetaModelSpec& spec, const GridAxis& x,
                                 const GridAxis& y,
                                 const std::map<std::string, double>& fixed,
                                 bool strict) {
  auto known = [](const std::string& name) {
    for (const char* n : kMetaFeatureNames) {
      if (name == n) return true;
    }
    return false;
  };
  if (!known(x.feature)) fail(errc::unknown_feature, x.feature);
  if (!known(y.feature)) fail(errc::unknown_feature, y.feature);
  if (x.feature == y.feature) {
    fail(errc::invalid_argument, "grid axes must reference distinct features");
  }
  for (const auto& [name, value] : fixed) {
    if (!known(name)) fail(errc::unknown_feature, name);
  }
  for (const GridAxis* axis : {&x, &y}) {
    if (axis->steps == 0) {
      fail(errc::degenerate_range, "axis needs at least one step");
    }
    if (axis->steps >= 2 && !(axis->hi > axis->lo)) {
      fail(errc::degenerate_range,
           "axis range is empty for feature '" + axis->feature + "'");
    }
  }

  ProbabilityGrid g;
  g.x = x;
  g.y = y;
  g.fixed = fixed;
  g.values.resize(x.steps * y.steps);

  MetaFeatureVector base;
  for (const auto& [name, value] : fixed) base.set_field(name, value);

  auto axis_value = [](const GridAxis& a, std::size_t i) {
    if (a.steps == 1) return a.lo;
    return a.lo + (a.hi - a.lo) * static_cast<double>(i) /
                      static_cast<double>(a.steps - 1);
  };
  for (std::size_t yi = 0; yi < y.steps; ++yi) {
    for (std::size_t xi = 0; xi < x.steps; ++xi) {
      MetaFeatureVector v = base;
      v.set_field(x.feature, axis_value(x, xi));
      v.set_field(y.feature, axis_value(y, yi));
      g.values[yi * x.steps + xi] = score_meta(spec, v, strict);
    }
  }
  return g;
}

std::string grid_to_csv(const ProbabilityGrid& g) {
  std::ostringstream out;
  out << "x,y,probability\n";
  auto axis_value = [](const GridAxis& a, std::size_t i) {
    if (a.steps == 1) return a.lo;
    return a.lo + (a.hi - a.lo) * static_cast<double>(i) /
                      static_cast<double>(a.steps - 1);
  };
  for (std::size_t yi = 0; yi < g.y.steps; ++yi) {
    for (std::size_t xi = 0; xi < g.x.steps; ++xi) {
      out << format_sig12(axis_value(g.x, xi)) << ','
          << format_sig12(axis_value(g.y, yi)) << ','
          << format_sig12(g.at(yi, xi)) << '\n';
    }
  }
  return out.str();
}

std::string grid_axes_json(const ProbabilityGrid& g) {
  nlohmann::ordered_json j;
  j["x"] = {{"feature", g.x.feature},
            {"lo", g.x.lo},
            {"hi", g.x.hi},
            {"steps", g.x.steps}};
  j["y"] = {{"feature", g.y.feature},
            {"lo", g.y.lo},
            {"hi", g.y.hi},
            {"steps", g.y.steps}};
  nlohmann::ordered_json fixed = nlohmann::ordered_json::object();
  for (const auto& [name, value] : g.fixed) fixed[name] = value;
  j["fixed"] = fixed;
  return j.dump(2) + "\n";
}

std::string grid_svg(const ProbabilityGrid& g) {
  const double cell = 12.0;
  const double left = 50.0, top = 30.0;
  const double width = left + cell * static_cast<double>(g.x.steps) + 20.0;
  const double height = top + cell * static_cast<double>(g.y.steps) + 40.0;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" font-family=\"sans-serif\" "
      << "font-size=\"10\">\n";
  svg << "<text x=\"" << left << "\" y=\"15\">p(DL outperforms): "
      << g.x.feature << " vs " << g.y.feature << "</text>\n";
  for (std::size_t yi = 0; yi < g.y.steps; ++yi) {
    for (std::size_t xi = 0; xi < g.x.steps; ++xi) {
      const double p = g.at(yi, xi);
      const int red = static_cast<int>(255.0 * p + 0.5);
      const int blue = 255 - red;
      svg << "<rect x=\"" << left + cell * static_cast<double>(xi)
          << "\" y=\"" << top + cell * static_cast<double>(yi) << "\" width=\""
          << cell << "\" height=\"" << cell << "\" fill=\"rgb(" << red << ",60,"
          << blue << ")\"/>\n";
    }
  }
  svg << "<text x=\"" << left << "\" y=\"" << height - 10 << "\">" << g.x.feature
      << " from " << format_sig12(g.x.lo) << " to " << format_sig12(g.x.hi)
      << "; " << g.y.feature << " from " << format_sig12(g.y.lo) << " to "
      << format_sig12(g.y.hi) << " (top to bottom)</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

std::string meta_examples_to_jsonl(const std::vector<MetaExample>& examples) {
  std::ostringstream out;
  for (const auto& e : examples) {
    nlohmann::ordered_json j;
    j["dataset_id"] = e.dataset_id;
    nlohmann::ordered_json features = nlohmann::ordered_json::object();
    const auto arr = e.features.as_array();
    for (std::size_t i = 0; i < kMetaFeatureCount; ++i) {
      features[kMetaFeatureNames[i]] = arr[i];
    }
    j["features"] = features;
    j["label"] = e.label;
    j["polarity"] = "dl_is_one";
    j["significance"] = e.from_significance_filter ? "significant" : "all";
    j["tie"] = e.tie;
    out << j.dump() << '\n';
  }
  return out.str();
}

std::vector<MetaExample> meta_examples_from_jsonl(const std::string& text) {
  std::vector<MetaExample> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(errc::parse_error, std::string("meta example JSON: ") + e.what());
    }
    MetaExample e;
    e.dataset_id = j.value("dataset_id", "");
    e.label = j.at("label").get<int>();
    const std::string polarity = j.value("polarity", "dl_is_one");
    if (polarity == "ml_is_one") {
      e.label = 1 - e.label;  // normalize to the canonical polarity
    } else if (polarity != "dl_is_one") {
      fail(errc::parse_error, "unknown polarity '" + polarity + "'");
    }
    e.from_significance_filter = j.value("significance", "all") ==
                                 std::string("significant");
    e.tie = j.value("tie", false);
    e.features.dataset_id = e.dataset_id;
    for (const char* name : kMetaFeatureNames) {
      if (!j.at("features").contains(name)) {
        fail(errc::parse_error,
             std::string("meta example missing feature ") + name);
      }
      e.features.set_field(name, j["features"][name].get<double>());
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace tabprof

#include "tabprof/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>

#include "tabprof/csv.hpp"
#include "tabprof/error.hpp"
#include "tabprof/rng.hpp"
#include "tabprof/stats.hpp"

namespace tabprof {

const char* family_name(ModelFamily f) {
  switch (f) {
    case ModelFamily::linear: return "linear";
    case ModelFamily::logistic: return "logistic";
    case ModelFamily::knn: return "knn";
    case ModelFamily::cart: return "cart";
    case ModelFamily::forest: return "forest";
    case ModelFamily::mlp: return "mlp";
  }
  return "unknown";
}

ModelFamily family_from_name(const std::string& name) {
  for (ModelFamily f : {ModelFamily::linear, ModelFamily::logistic,
                        ModelFamily::knn, ModelFamily::cart,
                        ModelFamily::forest, ModelFamily::mlp}) {
    if (name == family_name(f)) return f;
  }
  fail(errc::invalid_argument, "unknown model family '" + name + "'");
}

std::string group_tag_for(ModelFamily f) {
  switch (f) {
    case ModelFamily::cart:
    case ModelFamily::forest:
      return "TE";
    case ModelFamily::mlp:
      return "DL";
    default:
      return "Other";
  }
}

double ModelSpec::hyper_num(const std::string& key, double fallback) const {
  if (hyper.contains(key) && hyper[key].is_number()) {
    return hyper[key].get<double>();
  }
  return fallback;
}

std::vector<std::size_t> ModelSpec::layer_widths() const {
  std::vector<std::size_t> widths;
  if (hyper.contains("layer_widths") && hyper["layer_widths"].is_array()) {
    for (const auto& w : hyper["layer_widths"]) {
      widths.push_back(w.get<std::size_t>());
    }
  }
  if (widths.empty()) widths = {16};
  return widths;
}

nlohmann::ordered_json ModelSpec::to_json() const {
  nlohmann::ordered_json j;
  j["family"] = family_name(family);
  j["id"] = name();
  j["group_tag"] = group_tag();
  j["hyperparameters"] = hyper;
  return j;
}

ModelSpec ModelSpec::from_json(const nlohmann::json& j) {
  ModelSpec s;
  s.family = family_from_name(j.at("family").get<std::string>());
  s.id = j.value("id", std::string());
  if (j.contains("hyperparameters")) s.hyper = j["hyperparameters"];
  return s;
}

// --- encoder ----------------------------------------------------------------

Encoder Encoder::fit(const TabularDataset& train) {
  Encoder e;
  for (const ColumnSpec& c : train.columns) e.column_names.push_back(c.name);
  for (std::size_t c = 0; c < train.column_count(); ++c) {
    if (c == train.target) continue;
    if (train.columns[c].kind == ColumnKind::numeric) {
      NumericField f;
      f.column = c;
      StableAccumulator sum;
      std::size_t present = 0;
      const std::size_t n = train.row_count();
      for (std::size_t r = 0; r < n; ++r) {
        if (!train.cell(r, c).missing) {
          sum.add(train.cell(r, c).num);
          ++present;
        }
      }
      f.mean = present ? sum.total() / static_cast<double>(present) : 0.0;
      StableAccumulator var;
      for (std::size_t r = 0; r < n; ++r) {
        const Cell& cell = train.cell(r, c);
        const double v = cell.missing ? f.mean : cell.num;
        var.add((v - f.mean) * (v - f.mean));
      }
      f.std = std::sqrt(var.total() / static_cast<double>(n));
      f.constant = f.std < 1e-12;
      e.numeric.push_back(f);
      e.width += 1;
    } else {
      CategoricalField f;
      f.column = c;
      f.tokens = train.category_tokens(c);
      e.categorical.push_back(f);
      e.width += f.tokens.size();
    }
  }
  return e;
}

Matrix Encoder::encode(const TabularDataset& d) const {
  // Schema handshake: the prediction rows must carry the training columns.
  if (d.column_count() != column_names.size()) {
    fail(errc::schema_mismatch, "prediction rows have a different width");
  }
  for (std::size_t c = 0; c < column_names.size(); ++c) {
    if (d.columns[c].name != column_names[c]) {
      fail(errc::schema_mismatch,
           "column " + std::to_string(c) + " is '" + d.columns[c].name +
               "', expected '" + column_names[c] + "'");
    }
  }
  const std::size_t n = d.row_count();
  Matrix x(n, width);
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t out = 0;
    for (const NumericField& f : numeric) {
      if (d.columns[f.column].kind != ColumnKind::numeric) {
        fail(errc::schema_mismatch,
             "column '" + column_names[f.column] + "' changed kind");
      }
      const Cell& cell = d.cell(r, f.column);
      const double v = cell.missing ? f.mean : cell.num;
      x.at(r, out++) = f.constant ? 0.0 : (v - f.mean) / f.std;
    }
    for (const CategoricalField& f : categorical) {
      if (d.columns[f.column].kind != ColumnKind::categorical) {
        fail(errc::schema_mismatch,
             "column '" + column_names[f.column] + "' changed kind");
      }
      const std::string& token = d.effective_token(r, f.column);
      const auto it =
          std::lower_bound(f.tokens.begin(), f.tokens.end(), token);
      const std::size_t base = out;
      out += f.tokens.size();
      if (it != f.tokens.end() && *it == token) {
        // Unseen tokens (no hit) leave the whole block at zero.
        x.at(r, base + static_cast<std::size_t>(it - f.tokens.begin())) = 1.0;
      }
    }
  }
  return x;
}

// --- feed-forward core ------------------------------------------------------

namespace {

struct LayerView {
  // Offsets into the flat parameter vector for layer l: weights (out x in)
  // row-major, then biases (out).
  std::size_t w_offset;
  std::size_t b_offset;
  std::size_t in;
  std::size_t out;
};

std::vector<LayerView> layer_views(const std::vector<std::size_t>& layout) {
  std::vector<LayerView> views;
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < layout.size(); ++l) {
    LayerView v;
    v.in = layout[l];
    v.out = layout[l + 1];
    v.w_offset = offset;
    v.b_offset = offset + v.in * v.out;
    offset = v.b_offset + v.out;
    views.push_back(v);
  }
  return views;
}

void softmax_inplace(std::vector<double>& z) {
  double zmax = z[0];
  for (double v : z) zmax = std::max(zmax, v);
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - zmax);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

}  // namespace

MlpNet MlpNet::initialize(const std::vector<std::size_t>& layout, bool softmax,
                          std::uint64_t seed) {
  MlpNet net;
  net.layout = layout;
  net.softmax_output = softmax;
  net.params.assign(net.param_count(), 0.0);
  Rng rng(seed);
  for (const LayerView& v : layer_views(layout)) {
    const double scale =
        std::sqrt(6.0 / static_cast<double>(v.in + v.out));
    for (std::size_t i = 0; i < v.in * v.out; ++i) {
      net.params[v.w_offset + i] = (2.0 * rng.next_unit() - 1.0) * scale;
    }
    // Biases start at zero.
  }
  return net;
}

std::size_t MlpNet::param_count() const {
  std::size_t count = 0;
  for (std::size_t l = 0; l + 1 < layout.size(); ++l) {
    count += layout[l] * layout[l + 1] + layout[l + 1];
  }
  return count;
}

std::vector<double> MlpNet::forward(std::span<const double> input) const {
  std::vector<double> a(input.begin(), input.end());
  const auto views = layer_views(layout);
  for (std::size_t l = 0; l < views.size(); ++l) {
    const LayerView& v = views[l];
    std::vector<double> z(v.out);
    for (std::size_t o = 0; o < v.out; ++o) {
      double s = params[v.b_offset + o];
      const double* w = &params[v.w_offset + o * v.in];
      for (std::size_t i = 0; i < v.in; ++i) s += w[i] * a[i];
      z[o] = s;
    }
    if (l + 1 < views.size()) {
      for (double& x : z) x = std::tanh(x);
    } else if (softmax_output) {
      softmax_inplace(z);
    }
    a = std::move(z);
  }
  return a;
}

namespace {

// Forward pass keeping every activation; returns output activations
// (softmax applied when configured).
std::vector<std::vector<double>> forward_trace(const MlpNet& net,
                                               std::span<const double> input) {
  std::vector<std::vector<double>> acts;
  acts.emplace_back(input.begin(), input.end());
  const auto views = layer_views(net.layout);
  for (std::size_t l = 0; l < views.size(); ++l) {
    const LayerView& v = views[l];
    std::vector<double> z(v.out);
    for (std::size_t o = 0; o < v.out; ++o) {
      double s = net.params[v.b_offset + o];
      const double* w = &net.params[v.w_offset + o * v.in];
      for (std::size_t i = 0; i < v.in; ++i) s += w[i] * acts.back()[i];
      z[o] = s;
    }
    if (l + 1 < views.size()) {
      for (double& x : z) x = std::tanh(x);
    } else if (net.softmax_output) {
      softmax_inplace(z);
    }
    acts.push_back(std::move(z));
  }
  return acts;
}

double l2_penalty(const MlpNet& net, double l2) {
  if (l2 == 0.0) return 0.0;
  double sum = 0.0;
  for (const LayerView& v : layer_views(net.layout)) {
    for (std::size_t i = 0; i < v.in * v.out; ++i) {
      sum += net.params[v.w_offset + i] * net.params[v.w_offset + i];
    }
  }
  return 0.5 * l2 * sum;
}

}  // namespace

double MlpNet::loss(const Matrix& x, const Matrix& y, double l2) const {
  const double n = static_cast<double>(x.rows);
  double total = 0.0;
  std::vector<double> row(x.cols);
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t c = 0; c < x.cols; ++c) row[c] = x.at(r, c);
    const std::vector<double> out = forward(row);
    if (softmax_output) {
      for (std::size_t c = 0; c < out.size(); ++c) {
        if (y.at(r, c) > 0.0) {
          total -= y.at(r, c) * std::log(std::max(out[c], 1e-300));
        }
      }
    } else {
      for (std::size_t c = 0; c < out.size(); ++c) {
        const double e = out[c] - y.at(r, c);
        total += 0.5 * e * e;
      }
    }
  }
  return total / n + l2_penalty(*this, l2);
}

std::vector<double> MlpNet::gradient(const Matrix& x, const Matrix& y,
                                     double l2) const {
  const auto views = layer_views(layout);
  std::vector<double> grad(params.size(), 0.0);
  const double n = static_cast<double>(x.rows);
  std::vector<double> row(x.cols);
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t c = 0; c < x.cols; ++c) row[c] = x.at(r, c);
    const auto acts = forward_trace(*this, row);
    // Output delta: (prediction - target)/n for both losses.
    std::vector<double> delta(acts.back().size());
    for (std::size_t c = 0; c < delta.size(); ++c) {
      delta[c] = (acts.back()[c] - y.at(r, c)) / n;
    }
    for (std::size_t l = views.size(); l-- > 0;) {
      const LayerView& v = views[l];
      const std::vector<double>& below = acts[l];
      for (std::size_t o = 0; o < v.out; ++o) {
        grad[v.b_offset + o] += delta[o];
        double* gw = &grad[v.w_offset + o * v.in];
        for (std::size_t i = 0; i < v.in; ++i) {
          gw[i] += delta[o] * below[i];
        }
      }
      if (l == 0) break;
      const LayerView& prev = views[l - 1];
      std::vector<double> next_delta(prev.out, 0.0);
      for (std::size_t i = 0; i < v.in; ++i) {
        double s = 0.0;
        for (std::size_t o = 0; o < v.out; ++o) {
          s += params[v.w_offset + o * v.in + i] * delta[o];
        }
        // tanh'(z) = 1 - a^2 on the activation below.
        next_delta[i] = s * (1.0 - below[i] * below[i]);
      }
      delta = std::move(next_delta);
    }
  }
  if (l2 != 0.0) {
    for (const LayerView& v : views) {
      for (std::size_t i = 0; i < v.in * v.out; ++i) {
        grad[v.w_offset + i] += l2 * params[v.w_offset + i];
      }
    }
  }
  return grad;
}

void MlpNet::train_gd(const Matrix& x, const Matrix& y, double lr,
                      std::size_t epochs, std::size_t batch, double l2) {
  const std::size_t n = x.rows;
  if (batch == 0 || batch >= n) {
    for (std::size_t e = 0; e < epochs; ++e) {
      const auto g = gradient(x, y, l2);
      for (std::size_t i = 0; i < params.size(); ++i) {
        params[i] -= lr * g[i];
      }
    }
    return;
  }
  // Deterministic contiguous mini-batches, fixed order.
  for (std::size_t e = 0; e < epochs; ++e) {
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t stop = std::min(n, start + batch);
      Matrix bx(stop - start, x.cols);
      Matrix by(stop - start, y.cols);
      for (std::size_t r = start; r < stop; ++r) {
        for (std::size_t c = 0; c < x.cols; ++c) bx.at(r - start, c) = x.at(r, c);
        for (std::size_t c = 0; c < y.cols; ++c) by.at(r - start, c) = y.at(r, c);
      }
      const auto g = gradient(bx, by, l2);
      for (std::size_t i = 0; i < params.size(); ++i) {
        params[i] -= lr * g[i];
      }
    }
  }
}

// --- CART -------------------------------------------------------------------

namespace {

struct CartConfig {
  std::size_t max_depth = 16;
  std::size_t min_leaf = 1;
  double feature_fraction = 1.0;
  bool classification = false;
  std::size_t n_classes = 0;
};

struct SplitChoice {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  double gain = 0.0;
};

double gini(const std::vector<double>& counts, double total) {
  double s = 1.0;
  for (double c : counts) {
    const double p = c / total;
    s -= p * p;
  }
  return s;
}

class CartBuilder {
 public:
  CartBuilder(const Matrix& x, const std::vector<double>& y,
              const CartConfig& cfg, Rng* rng)
      : x_(x), y_(y), cfg_(cfg), rng_(rng) {}

  Tree build(const std::vector<std::size_t>& rows) {
    tree_.nodes.clear();
    grow(rows, 0);
    return std::move(tree_);
  }

 private:
  std::int32_t grow(const std::vector<std::size_t>& rows, std::size_t depth) {
    const std::int32_t index = static_cast<std::int32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    fill_leaf(index, rows);

    if (depth >= cfg_.max_depth || rows.size() < 2 * cfg_.min_leaf ||
        is_pure(rows)) {
      return index;
    }
    const SplitChoice split = best_split(rows);
    if (!split.found) return index;

    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) {
      (x_.at(r, split.feature) < split.threshold ? left : right).push_back(r);
    }
    tree_.nodes[index].leaf = false;
    tree_.nodes[index].feature = split.feature;
    tree_.nodes[index].threshold = split.threshold;
    const std::int32_t l = grow(left, depth + 1);
    tree_.nodes[index].left = l;
    const std::int32_t r = grow(right, depth + 1);
    tree_.nodes[index].right = r;
    return index;
  }

  void fill_leaf(std::int32_t index, const std::vector<std::size_t>& rows) {
    TreeNode& node = tree_.nodes[index];
    node.leaf = true;
    if (cfg_.classification) {
      node.distribution.assign(cfg_.n_classes, 0.0);
      for (std::size_t r : rows) {
        node.distribution[static_cast<std::size_t>(y_[r])] += 1.0;
      }
      for (double& v : node.distribution) {
        v /= static_cast<double>(rows.size());
      }
    } else {
      StableAccumulator acc;
      for (std::size_t r : rows) acc.add(y_[r]);
      node.value = acc.total() / static_cast<double>(rows.size());
    }
  }

  bool is_pure(const std::vector<std::size_t>& rows) const {
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (y_[rows[i]] != y_[rows[0]]) return false;
    }
    return true;
  }

  std::vector<std::size_t> candidate_features() const {
    std::vector<std::size_t> all(x_.cols);
    for (std::size_t i = 0; i < x_.cols; ++i) all[i] = i;
    if (cfg_.feature_fraction >= 1.0 || rng_ == nullptr) return all;
    const std::size_t m = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::llround(cfg_.feature_fraction *
                            static_cast<double>(x_.cols))));
    auto picked = rng_->sample_without_replacement(x_.cols, m);
    std::sort(picked.begin(), picked.end());
    return picked;
  }

  SplitChoice best_split(const std::vector<std::size_t>& rows) const {
    SplitChoice best;
    const double n = static_cast<double>(rows.size());

    double parent_impurity;
    std::vector<double> total_counts;
    double total_sum = 0.0, total_sq = 0.0;
    if (cfg_.classification) {
      total_counts.assign(cfg_.n_classes, 0.0);
      for (std::size_t r : rows) {
        total_counts[static_cast<std::size_t>(y_[r])] += 1.0;
      }
      parent_impurity = gini(total_counts, n);
    } else {
      for (std::size_t r : rows) {
        total_sum += y_[r];
        total_sq += y_[r] * y_[r];
      }
      parent_impurity = total_sq - total_sum * total_sum / n;  // SSE
    }

    std::vector<std::pair<double, std::size_t>> order(rows.size());
    for (const std::size_t f : candidate_features()) {
      for (std::size_t i = 0; i < rows.size(); ++i) {
        order[i] = {x_.at(rows[i], f), rows[i]};
      }
      std::sort(order.begin(), order.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });

      std::vector<double> left_counts(cfg_.classification ? cfg_.n_classes : 0,
                                      0.0);
      double left_sum = 0.0, left_sq = 0.0;
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        const double yv = y_[order[i].second];
        if (cfg_.classification) {
          left_counts[static_cast<std::size_t>(yv)] += 1.0;
        } else {
          left_sum += yv;
          left_sq += yv * yv;
        }
        if (order[i].first == order[i + 1].first) continue;
        const std::size_t nl = i + 1;
        const std::size_t nr = rows.size() - nl;
        if (nl < cfg_.min_leaf || nr < cfg_.min_leaf) continue;

        double child_impurity;
        if (cfg_.classification) {
          std::vector<double> right_counts(cfg_.n_classes);
          for (std::size_t c = 0; c < cfg_.n_classes; ++c) {
            right_counts[c] = total_counts[c] - left_counts[c];
          }
          child_impurity =
              (static_cast<double>(nl) / n) * gini(left_counts, nl) +
              (static_cast<double>(nr) / n) * gini(right_counts, nr);
        } else {
          const double right_sum = total_sum - left_sum;
          const double right_sq = total_sq - left_sq;
          const double sse_l =
              left_sq - left_sum * left_sum / static_cast<double>(nl);
          const double sse_r =
              right_sq - right_sum * right_sum / static_cast<double>(nr);
          child_impurity = sse_l + sse_r;
        }
        const double gain = parent_impurity - child_impurity;
        if (gain <= 1e-12 * std::max(1.0, parent_impurity)) continue;
        // Strict improvement keeps the lowest feature index and lowest
        // threshold on ties (features ascend, thresholds ascend).
        if (!best.found || gain > best.gain) {
          best.found = true;
          best.feature = f;
          best.threshold =
              order[i].first + 0.5 * (order[i + 1].first - order[i].first);
          best.gain = gain;
        }
      }
    }
    return best;
  }

  const Matrix& x_;
  const std::vector<double>& y_;
  CartConfig cfg_;
  Rng* rng_;
  Tree tree_;
};

const TreeNode& descend(const Tree& tree, const double* row) {
  std::int32_t at = 0;
  while (!tree.nodes[at].leaf) {
    const TreeNode& n = tree.nodes[at];
    at = row[n.feature] < n.threshold ? n.left : n.right;
  }
  return tree.nodes[at];
}

}  // namespace

// --- training ---------------------------------------------------------------

namespace {

std::vector<double> class_codes(const TabularDataset& d,
                                const std::vector<std::string>& tokens) {
  std::vector<double> y(d.row_count());
  for (std::size_t r = 0; r < d.row_count(); ++r) {
    const std::string& t = d.effective_token(r, d.target);
    const auto it = std::lower_bound(tokens.begin(), tokens.end(), t);
    if (it == tokens.end() || *it != t) {
      fail(errc::schema_mismatch, "unseen target class '" + t + "'");
    }
    y[r] = static_cast<double>(it - tokens.begin());
  }
  return y;
}

void center_columns(Matrix& x, std::vector<double>& means) {
  means.assign(x.cols, 0.0);
  for (std::size_t c = 0; c < x.cols; ++c) {
    StableAccumulator acc;
    for (std::size_t r = 0; r < x.rows; ++r) acc.add(x.at(r, c));
    means[c] = acc.total() / static_cast<double>(x.rows);
    for (std::size_t r = 0; r < x.rows; ++r) x.at(r, c) -= means[c];
  }
}

}  // namespace

TrainedModel train(const ModelSpec& spec, const TabularDataset& rows,
                   std::uint64_t seed) {
  if (rows.row_count() < 2) {
    fail(errc::degenerate_training, "need at least 2 training rows");
  }
  TrainedModel m;
  m.spec_ = spec;
  m.task_ = rows.task;
  m.encoder_ = Encoder::fit(rows);
  {
    std::uint64_t h = fnv1a64(rows.id);
    h = fnv1a64_u64(seed, h);
    m.digest_ = hex16(h);
  }

  const bool classification = rows.task == TaskKind::classification;
  if (classification) {
    m.class_tokens_ = rows.category_tokens(rows.target);
    if (m.class_tokens_.size() < 2) {
      fail(errc::degenerate_training, "single class in training split");
    }
  }
  if (!classification && spec.family == ModelFamily::logistic) {
    fail(errc::invalid_argument, "logistic requires a classification task");
  }
  if (classification && spec.family == ModelFamily::linear) {
    fail(errc::invalid_argument, "linear requires a regression task");
  }

  const Matrix x = m.encoder_.encode(rows);
  const std::uint64_t rng_seed =
      seed + static_cast<std::uint64_t>(spec.hyper_num("seed", 0.0));

  switch (spec.family) {
    case ModelFamily::linear: {
      std::vector<double> y = rows.encoded_target();
      Matrix xc = x;
      std::vector<double> col_means;
      center_columns(xc, col_means);
      const double y_mean = mean(y);
      for (double& v : y) v -= y_mean;
      const double l2 = spec.hyper_num("l2", 1e-8);
      Matrix a = gram(xc);
      for (std::size_t j = 0; j < a.rows; ++j) a.at(j, j) += l2;
      std::vector<double> xty(xc.cols, 0.0);
      for (std::size_t j = 0; j < xc.cols; ++j) {
        StableAccumulator acc;
        for (std::size_t r = 0; r < xc.rows; ++r) {
          acc.add(xc.at(r, j) * y[r]);
        }
        xty[j] = acc.total();
      }
      m.weights_ = cholesky_solve(a, xty);
      double shift = y_mean;
      for (std::size_t j = 0; j < col_means.size(); ++j) {
        shift -= m.weights_[j] * col_means[j];
      }
      m.intercept_ = shift;
      break;
    }
    case ModelFamily::logistic: {
      const std::vector<double> codes = class_codes(rows, m.class_tokens_);
      const std::size_t k = m.class_tokens_.size();
      const std::size_t w = x.cols + 1;  // bias folded in
      m.logistic_classes_ = k;
      m.weights_.assign(k * w, 0.0);
      const double lr = spec.hyper_num("learning_rate", 0.5);
      const std::size_t epochs =
          static_cast<std::size_t>(spec.hyper_num("epochs", 2000));
      const double l2 = spec.hyper_num("l2", 0.0);
      const double n = static_cast<double>(x.rows);
      std::vector<double> grad(k * w), logits(k);
      for (std::size_t e = 0; e < epochs; ++e) {
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t r = 0; r < x.rows; ++r) {
          for (std::size_t c = 0; c < k; ++c) {
            double s = m.weights_[c * w + x.cols];
            for (std::size_t j = 0; j < x.cols; ++j) {
              s += m.weights_[c * w + j] * x.at(r, j);
            }
            logits[c] = s;
          }
          softmax_inplace(logits);
          const std::size_t truth = static_cast<std::size_t>(codes[r]);
          for (std::size_t c = 0; c < k; ++c) {
            const double delta = (logits[c] - (c == truth ? 1.0 : 0.0)) / n;
            for (std::size_t j = 0; j < x.cols; ++j) {
              grad[c * w + j] += delta * x.at(r, j);
            }
            grad[c * w + x.cols] += delta;
          }
        }
        if (l2 != 0.0) {
          for (std::size_t c = 0; c < k; ++c) {
            for (std::size_t j = 0; j < x.cols; ++j) {
              grad[c * w + j] += l2 * m.weights_[c * w + j];
            }
          }
        }
        double ginf = 0.0;
        for (double g : grad) ginf = std::max(ginf, std::fabs(g));
        if (ginf < 1e-8) break;
        for (std::size_t i = 0; i < grad.size(); ++i) {
          m.weights_[i] -= lr * grad[i];
        }
      }
      break;
    }
    case ModelFamily::knn: {
      m.knn_x_ = x;
      m.knn_y_ = classification ? class_codes(rows, m.class_tokens_)
                                : rows.encoded_target();
      break;
    }
    case ModelFamily::cart:
    case ModelFamily::forest: {
      CartConfig cfg;
      cfg.max_depth =
          static_cast<std::size_t>(spec.hyper_num("max_depth", 16));
      cfg.min_leaf = static_cast<std::size_t>(spec.hyper_num("min_leaf", 1));
      cfg.classification = classification;
      cfg.n_classes = m.class_tokens_.size();
      const std::vector<double> y =
          classification ? class_codes(rows, m.class_tokens_)
                         : rows.encoded_target();
      std::vector<std::size_t> all(x.rows);
      for (std::size_t i = 0; i < x.rows; ++i) all[i] = i;

      if (spec.family == ModelFamily::cart) {
        CartBuilder builder(x, y, cfg, nullptr);
        m.trees_.push_back(builder.build(all));
      } else {
        const std::size_t n_trees =
            static_cast<std::size_t>(spec.hyper_num("n_trees", 30));
        cfg.feature_fraction = spec.hyper_num("feature_fraction", 0.7);
        const bool bootstrap = spec.hyper_num("bootstrap", 1.0) != 0.0;
        for (std::size_t t = 0; t < n_trees; ++t) {
          Rng tree_rng(rng_seed + t);  // per-tree stream
          std::vector<std::size_t> sample;
          if (bootstrap) {
            sample.resize(x.rows);
            for (std::size_t i = 0; i < x.rows; ++i) {
              sample[i] = tree_rng.below(x.rows);
            }
          } else {
            sample = all;
          }
          CartBuilder builder(x, y, cfg, &tree_rng);
          m.trees_.push_back(builder.build(sample));
        }
      }
      break;
    }
    case ModelFamily::mlp: {
      const auto hidden = spec.layer_widths();
      std::vector<std::size_t> layout;
      layout.push_back(x.cols);
      for (std::size_t h : hidden) layout.push_back(h);
      layout.push_back(classification ? m.class_tokens_.size() : 1);

      Matrix y;
      if (classification) {
        const auto codes = class_codes(rows, m.class_tokens_);
        y = Matrix(x.rows, m.class_tokens_.size());
        for (std::size_t r = 0; r < x.rows; ++r) {
          y.at(r, static_cast<std::size_t>(codes[r])) = 1.0;
        }
      } else {
        const auto target = rows.encoded_target();
        m.y_mean_ = mean(target);
        const double s = population_std(target);
        m.y_std_ = s < 1e-12 ? 1.0 : s;
        y = Matrix(x.rows, 1);
        for (std::size_t r = 0; r < x.rows; ++r) {
          y.at(r, 0) = (target[r] - m.y_mean_) / m.y_std_;
        }
      }
      MlpNet net = MlpNet::initialize(layout, classification, rng_seed);
      net.train_gd(x, y, spec.hyper_num("learning_rate", 0.05),
                   static_cast<std::size_t>(spec.hyper_num("epochs", 300)),
                   static_cast<std::size_t>(spec.hyper_num("batch_size", 0)),
                   spec.hyper_num("l2", 0.0));
      m.mlp_layout_ = layout;
      m.mlp_params_ = std::move(net.params);
      break;
    }
  }
  return m;
}

// --- prediction -------------------------------------------------------------

Predictions TrainedModel::predict(const TabularDataset& rows) const {
  const Matrix x = encoder_.encode(rows);
  const bool classification = task_ == TaskKind::classification;
  const std::size_t k = class_tokens_.size();
  Predictions p;
  p.class_tokens = class_tokens_;
  if (classification) {
    p.scores = Matrix(x.rows, k);
  } else {
    p.values.resize(x.rows);
  }

  switch (spec_.family) {
    case ModelFamily::linear: {
      for (std::size_t r = 0; r < x.rows; ++r) {
        double s = intercept_;
        for (std::size_t j = 0; j < x.cols; ++j) {
          s += weights_[j] * x.at(r, j);
        }
        p.values[r] = s;
      }
      break;
    }
    case ModelFamily::logistic: {
      const std::size_t w = x.cols + 1;
      std::vector<double> logits(k);
      for (std::size_t r = 0; r < x.rows; ++r) {
        for (std::size_t c = 0; c < k; ++c) {
          double s = weights_[c * w + x.cols];
          for (std::size_t j = 0; j < x.cols; ++j) {
            s += weights_[c * w + j] * x.at(r, j);
          }
          logits[c] = s;
        }
        softmax_inplace(logits);
        for (std::size_t c = 0; c < k; ++c) p.scores.at(r, c) = logits[c];
      }
      break;
    }
    case ModelFamily::knn: {
      const std::size_t kk = std::min<std::size_t>(
          std::max<std::size_t>(1, static_cast<std::size_t>(
                                       spec_.hyper_num("k", 5))),
          knn_x_.rows);
      std::vector<std::pair<double, std::size_t>> dist(knn_x_.rows);
      for (std::size_t r = 0; r < x.rows; ++r) {
        for (std::size_t t = 0; t < knn_x_.rows; ++t) {
          double d2 = 0.0;
          for (std::size_t j = 0; j < x.cols; ++j) {
            const double diff = x.at(r, j) - knn_x_.at(t, j);
            d2 += diff * diff;
          }
          dist[t] = {d2, t};
        }
        std::partial_sort(dist.begin(), dist.begin() + kk, dist.end());
        if (classification) {
          for (std::size_t i = 0; i < kk; ++i) {
            p.scores.at(r, static_cast<std::size_t>(knn_y_[dist[i].second])) +=
                1.0 / static_cast<double>(kk);
          }
        } else {
          double s = 0.0;
          for (std::size_t i = 0; i < kk; ++i) s += knn_y_[dist[i].second];
          p.values[r] = s / static_cast<double>(kk);
        }
      }
      break;
    }
    case ModelFamily::cart:
    case ModelFamily::forest: {
      std::vector<double> row(x.cols);
      const double nt = static_cast<double>(trees_.size());
      for (std::size_t r = 0; r < x.rows; ++r) {
        for (std::size_t j = 0; j < x.cols; ++j) row[j] = x.at(r, j);
        if (classification) {
          for (const Tree& tree : trees_) {
            const TreeNode& leaf = descend(tree, row.data());
            for (std::size_t c = 0; c < k; ++c) {
              p.scores.at(r, c) += leaf.distribution[c] / nt;
            }
          }
        } else {
          double s = 0.0;
          for (const Tree& tree : trees_) s += descend(tree, row.data()).value;
          p.values[r] = s / nt;
        }
      }
      break;
    }
    case ModelFamily::mlp: {
      MlpNet net;
      net.layout = mlp_layout_;
      net.params = mlp_params_;
      net.softmax_output = classification;
      std::vector<double> row(x.cols);
      for (std::size_t r = 0; r < x.rows; ++r) {
        for (std::size_t j = 0; j < x.cols; ++j) row[j] = x.at(r, j);
        const auto out = net.forward(row);
        if (classification) {
          for (std::size_t c = 0; c < k; ++c) p.scores.at(r, c) = out[c];
        } else {
          p.values[r] = out[0] * y_std_ + y_mean_;
        }
      }
      break;
    }
  }
  return p;
}

std::vector<double> TrainedModel::original_space_coefficients() const {
  if (spec_.family != ModelFamily::linear) {
    fail(errc::invalid_argument, "coefficients exposed for linear only");
  }
  std::vector<double> out;
  double intercept = intercept_;
  std::size_t enc = 0;
  for (const Encoder::NumericField& f : encoder_.numeric) {
    if (f.constant) {
      out.push_back(0.0);
    } else {
      out.push_back(weights_[enc] / f.std);
      intercept -= weights_[enc] * f.mean / f.std;
    }
    ++enc;
  }
  out.push_back(intercept);
  return out;
}

// --- serialization ----------------------------------------------------------

namespace {

constexpr char kMagic[5] = {'T', 'P', 'M', 'D', '1'};

class BlobWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void i32(std::int32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void f64(double v) { raw(&v, 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void doubles(const std::vector<double>& v) {
    u32(static_cast<std::uint32_t>(v.size()));
    for (double d : v) f64(d);
  }
  std::string take() { return std::move(out_); }

 private:
  void raw(const void* p, std::size_t n) {
    // Little-endian hosts only; the on-disk format is declared LE.
    out_.append(static_cast<const char*>(p), n);
  }
  std::string out_;
};

class BlobReader {
 public:
  explicit BlobReader(std::string_view blob) : blob_(blob) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint32_t u32() {
    std::uint32_t v;
    std::memcpy(&v, take(4).data(), 4);
    return v;
  }
  std::int32_t i32() {
    std::int32_t v;
    std::memcpy(&v, take(4).data(), 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    std::memcpy(&v, take(8).data(), 8);
    return v;
  }
  double f64() {
    double v;
    std::memcpy(&v, take(8).data(), 8);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    return std::string(take(n));
  }
  std::vector<double> doubles() {
    const std::uint32_t n = u32();
    std::vector<double> v(n);
    for (std::uint32_t i = 0; i < n; ++i) v[i] = f64();
    return v;
  }

 private:
  std::string_view take(std::size_t n) {
    if (pos_ + n > blob_.size()) {
      fail(errc::parse_error, "truncated model blob");
    }
    std::string_view s = blob_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string_view blob_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string TrainedModel::serialize() const {
  BlobWriter w;
  w.u8(kMagic[0]);
  w.u8(kMagic[1]);
  w.u8(kMagic[2]);
  w.u8(kMagic[3]);
  w.u8(kMagic[4]);
  w.u8(1);  // version
  w.str(spec_.to_json().dump());
  w.u8(task_ == TaskKind::classification ? 1 : 0);
  w.str(digest_);
  w.u32(static_cast<std::uint32_t>(class_tokens_.size()));
  for (const auto& t : class_tokens_) w.str(t);

  w.u32(static_cast<std::uint32_t>(encoder_.column_names.size()));
  for (const auto& n : encoder_.column_names) w.str(n);
  w.u32(static_cast<std::uint32_t>(encoder_.numeric.size()));
  for (const auto& f : encoder_.numeric) {
    w.u64(f.column);
    w.f64(f.mean);
    w.f64(f.std);
    w.u8(f.constant ? 1 : 0);
  }
  w.u32(static_cast<std::uint32_t>(encoder_.categorical.size()));
  for (const auto& f : encoder_.categorical) {
    w.u64(f.column);
    w.u32(static_cast<std::uint32_t>(f.tokens.size()));
    for (const auto& t : f.tokens) w.str(t);
  }
  w.u64(encoder_.width);

  w.doubles(weights_);
  w.f64(intercept_);
  w.u64(logistic_classes_);
  w.u64(knn_x_.rows);
  w.u64(knn_x_.cols);
  w.doubles(knn_x_.a);
  w.doubles(knn_y_);
  w.u32(static_cast<std::uint32_t>(trees_.size()));
  for (const Tree& t : trees_) {
    w.u32(static_cast<std::uint32_t>(t.nodes.size()));
    for (const TreeNode& n : t.nodes) {
      w.u8(n.leaf ? 1 : 0);
      w.u64(n.feature);
      w.f64(n.threshold);
      w.i32(n.left);
      w.i32(n.right);
      w.f64(n.value);
      w.doubles(n.distribution);
    }
  }
  w.u32(static_cast<std::uint32_t>(mlp_layout_.size()));
  for (std::size_t s : mlp_layout_) w.u64(s);
  w.doubles(mlp_params_);
  w.f64(y_mean_);
  w.f64(y_std_);
  return w.take();
}

TrainedModel TrainedModel::deserialize(std::string_view blob) {
  BlobReader r(blob);
  char magic[5];
  for (char& c : magic) c = static_cast<char>(r.u8());
  if (std::memcmp(magic, kMagic, 5) != 0) {
    fail(errc::parse_error, "bad model magic");
  }
  if (r.u8() != 1) fail(errc::parse_error, "unsupported model version");

  TrainedModel m;
  nlohmann::json spec_json;
  try {
    spec_json = nlohmann::json::parse(r.str());
  } catch (const nlohmann::json::exception& e) {
    fail(errc::parse_error, std::string("model spec JSON: ") + e.what());
  }
  m.spec_ = ModelSpec::from_json(spec_json);
  m.task_ = r.u8() == 1 ? TaskKind::classification : TaskKind::regression;
  m.digest_ = r.str();
  const std::uint32_t n_tokens = r.u32();
  for (std::uint32_t i = 0; i < n_tokens; ++i) {
    m.class_tokens_.push_back(r.str());
  }
  const std::uint32_t n_names = r.u32();
  for (std::uint32_t i = 0; i < n_names; ++i) {
    m.encoder_.column_names.push_back(r.str());
  }
  const std::uint32_t n_num = r.u32();
  for (std::uint32_t i = 0; i < n_num; ++i) {
    Encoder::NumericField f;
    f.column = r.u64();
    f.mean = r.f64();
    f.std = r.f64();
    f.constant = r.u8() == 1;
    m.encoder_.numeric.push_back(f);
  }
  const std::uint32_t n_cat = r.u32();
  for (std::uint32_t i = 0; i < n_cat; ++i) {
    Encoder::CategoricalField f;
    f.column = r.u64();
    const std::uint32_t nt = r.u32();
    for (std::uint32_t j = 0; j < nt; ++j) f.tokens.push_back(r.str());
    m.encoder_.categorical.push_back(f);
  }
  m.encoder_.width = r.u64();

  m.weights_ = r.doubles();
  m.intercept_ = r.f64();
  m.logistic_classes_ = r.u64();
  const std::uint64_t kr = r.u64();
  const std::uint64_t kc = r.u64();
  m.knn_x_.rows = kr;
  m.knn_x_.cols = kc;
  m.knn_x_.a = r.doubles();
  m.knn_y_ = r.doubles();
  const std::uint32_t n_trees = r.u32();
  for (std::uint32_t t = 0; t < n_trees; ++t) {
    Tree tree;
    const std::uint32_t n_nodes = r.u32();
    for (std::uint32_t i = 0; i < n_nodes; ++i) {
      TreeNode n;
      n.leaf = r.u8() == 1;
      n.feature = r.u64();
      n.threshold = r.f64();
      n.left = r.i32();
      n.right = r.i32();
      n.value = r.f64();
      n.distribution = r.doubles();
      tree.nodes.push_back(std::move(n));
    }
    m.trees_.push_back(std::move(tree));
  }
  const std::uint32_t n_layout = r.u32();
  for (std::uint32_t i = 0; i < n_layout; ++i) {
    m.mlp_layout_.push_back(r.u64());
  }
  m.mlp_params_ = r.doubles();
  m.y_mean_ = r.f64();
  m.y_std_ = r.f64();
  return m;
}

void TrainedModel::save(const std::string& path) const {
  write_text_file(path, serialize());
}

TrainedModel TrainedModel::load(const std::string& path) {
  return deserialize(read_text_file(path));
}

// --- gradient check ---------------------------------------------------------

double gradient_check(const ModelSpec& spec, const TabularDataset& batch,
                      std::uint64_t seed) {
  if (spec.family != ModelFamily::mlp) {
    fail(errc::invalid_argument, "gradient_check applies to the mlp family");
  }
  Encoder enc = Encoder::fit(batch);
  const Matrix x = enc.encode(batch);
  const bool classification = batch.task == TaskKind::classification;

  Matrix y;
  std::vector<std::size_t> layout;
  layout.push_back(x.cols);
  for (std::size_t h : spec.layer_widths()) layout.push_back(h);
  if (classification) {
    const auto tokens = batch.category_tokens(batch.target);
    y = Matrix(x.rows, tokens.size());
    for (std::size_t r = 0; r < x.rows; ++r) {
      const std::string& t = batch.effective_token(r, batch.target);
      const auto it = std::lower_bound(tokens.begin(), tokens.end(), t);
      y.at(r, static_cast<std::size_t>(it - tokens.begin())) = 1.0;
    }
    layout.push_back(tokens.size());
  } else {
    const auto target = batch.encoded_target();
    const double m = mean(target);
    const double s = std::max(population_std(target), 1e-12);
    y = Matrix(x.rows, 1);
    for (std::size_t r = 0; r < x.rows; ++r) {
      y.at(r, 0) = (target[r] - m) / s;
    }
    layout.push_back(1);
  }

  MlpNet net = MlpNet::initialize(
      layout, classification,
      seed + static_cast<std::uint64_t>(spec.hyper_num("seed", 0.0)));
  const double l2 = spec.hyper_num("l2", 0.0);
  const std::vector<double> analytic = net.gradient(x, y, l2);

  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t i = 0; i < net.params.size(); ++i) {
    const double saved = net.params[i];
    net.params[i] = saved + h;
    const double up = net.loss(x, y, l2);
    net.params[i] = saved - h;
    const double down = net.loss(x, y, l2);
    net.params[i] = saved;
    const double fd = (up - down) / (2.0 * h);
    const double rel = std::fabs(analytic[i] - fd) /
                       std::max(1.0, std::fabs(analytic[i]) + std::fabs(fd));
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace tabprof

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabprof/linalg.hpp"
#include "tabprof/tabular.hpp"

namespace tabprof {

enum class ModelFamily { linear, logistic, knn, cart, forest, mlp };

const char* family_name(ModelFamily f);
ModelFamily family_from_name(const std::string& name);

/// Group tags mirror the benchmark's model grouping: tree learners are TE,
/// the network is DL, everything else Other.
std::string group_tag_for(ModelFamily f);

struct ModelSpec {
  ModelFamily family = ModelFamily::knn;
  std::string id;  // defaults to the family name
  nlohmann::ordered_json hyper = nlohmann::ordered_json::object();

  std::string name() const { return id.empty() ? family_name(family) : id; }
  std::string group_tag() const { return group_tag_for(family); }

  double hyper_num(const std::string& key, double fallback) const;
  std::vector<std::size_t> layer_widths() const;  // mlp; default {16}

  nlohmann::ordered_json to_json() const;
  static ModelSpec from_json(const nlohmann::json& j);
};

/// Feature encoding fitted on the training split only: numeric columns are
/// standardized (population stats, mean-imputed), categorical columns
/// one-hot over the training tokens. Unseen tokens encode to all zeros.
struct Encoder {
  struct NumericField {
    std::size_t column = 0;
    double mean = 0.0;
    double std = 1.0;
    bool constant = false;
  };
  struct CategoricalField {
    std::size_t column = 0;
    std::vector<std::string> tokens;  // sorted
  };

  std::vector<NumericField> numeric;
  std::vector<CategoricalField> categorical;
  std::vector<std::string> column_names;  // schema check on predict
  std::size_t width = 0;

  static Encoder fit(const TabularDataset& train);
  Matrix encode(const TabularDataset& d) const;
};

struct Predictions {
  // Regression: `values` holds one prediction per row.
  std::vector<double> values;
  // Classification: `scores` is rows x |class_tokens|, each row sums to 1.
  Matrix scores;
  std::vector<std::string> class_tokens;
};

// Internal parameter blocks, exposed for serialization and tests.
struct TreeNode {
  bool leaf = true;
  std::size_t feature = 0;
  double threshold = 0.0;
  std::int32_t left = -1;   // < threshold
  std::int32_t right = -1;  // >= threshold
  double value = 0.0;                // regression leaf
  std::vector<double> distribution;  // classification leaf
};

struct Tree {
  std::vector<TreeNode> nodes;
};

class TrainedModel {
 public:
  const ModelSpec& spec() const { return spec_; }
  TaskKind task() const { return task_; }
  const std::string& training_digest() const { return digest_; }
  const std::vector<std::string>& class_tokens() const {
    return class_tokens_;
  }

  Predictions predict(const TabularDataset& rows) const;

  /// Coefficients mapped back to the original numeric feature space
  /// (slopes per feature column, then the intercept). Linear family only.
  std::vector<double> original_space_coefficients() const;

  /// Versioned little-endian blob with magic "TPMD1" and an embedded spec
  /// copy.
  std::string serialize() const;
  static TrainedModel deserialize(std::string_view blob);
  void save(const std::string& path) const;
  static TrainedModel load(const std::string& path);

 private:
  friend TrainedModel train(const ModelSpec&, const TabularDataset&,
                            std::uint64_t);

  ModelSpec spec_;
  TaskKind task_ = TaskKind::regression;
  Encoder encoder_;
  std::vector<std::string> class_tokens_;
  std::string digest_;

  // linear / logistic
  std::vector<double> weights_;
  double intercept_ = 0.0;
  std::size_t logistic_classes_ = 0;
  // knn
  Matrix knn_x_;
  std::vector<double> knn_y_;
  // cart / forest
  std::vector<Tree> trees_;
  // mlp
  std::vector<std::size_t> mlp_layout_;  // input, hidden..., output
  std::vector<double> mlp_params_;
  double y_mean_ = 0.0;  // regression target scaling for mlp
  double y_std_ = 1.0;
};

/// Fits the family named by the spec. `seed` drives every random choice
/// (forest bootstraps and feature subsets, mlp init); identical
/// (spec, data, seed) reproduce the model bit-for-bit.
TrainedModel train(const ModelSpec& spec, const TabularDataset& train_rows,
                   std::uint64_t seed);

/// Central finite-difference check of the mlp gradient on a small batch.
/// Returns the maximum relative error over all parameters.
double gradient_check(const ModelSpec& spec, const TabularDataset& batch,
                      std::uint64_t seed = 0);

// --- the shared feed-forward core (also used by the meta-learner) ---------

struct MlpNet {
  std::vector<std::size_t> layout;  // input, hidden..., output
  std::vector<double> params;       // weights then bias, layer by layer
  bool softmax_output = false;

  static MlpNet initialize(const std::vector<std::size_t>& layout,
                           bool softmax, std::uint64_t seed);
  std::size_t param_count() const;
  /// Activations of the output layer for one encoded row.
  std::vector<double> forward(std::span<const double> input) const;
  /// Mean loss over the batch: squared error (0.5/n * sum) for linear
  /// output, cross-entropy for softmax output. Adds 0.5*l2*|W|^2.
  double loss(const Matrix& x, const Matrix& y, double l2) const;
  /// Analytic gradient of `loss`; same layout as params.
  std::vector<double> gradient(const Matrix& x, const Matrix& y,
                               double l2) const;
  void train_gd(const Matrix& x, const Matrix& y, double lr,
                std::size_t epochs, std::size_t batch, double l2);
};

}  // namespace tabprof

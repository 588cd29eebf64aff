#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <doctest.h>

#include "tabprof/csv.hpp"
#include "tabprof/error.hpp"
#include "tabprof/metafeatures.hpp"
#include "tabprof/rng.hpp"
#include "tabprof/stats.hpp"
#include "tabprof/tabular.hpp"

#include "oracles.hpp"
#include "synth.hpp"

using namespace tabprof;

namespace {

TabularDataset toy() {
  return synth::from_columns("toy", {{"a", {1, 2, 3, 4}}},
                             {{"b", {"x", "y", "x", "y"}},
                              {"y", {"0", "1", "0", "1"}}},
                             "y", TaskKind::classification);
}

TabularDataset numeric_only(const std::vector<std::vector<double>>& cols,
                            const std::vector<double>& target) {
  std::vector<std::pair<std::string, std::vector<double>>> numeric;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    numeric.emplace_back("f" + std::to_string(i), cols[i]);
  }
  numeric.emplace_back("y", target);
  return synth::from_columns("nums", numeric, {}, "y", TaskKind::regression);
}

}  // namespace

TEST_CASE("excess kurtosis: two-point, uniform, constant") {
  std::vector<double> bern;
  for (int i = 0; i < 100; ++i) bern.push_back(i % 2);
  CHECK(excess_kurtosis(bern) == doctest::Approx(-2.0).epsilon(1e-12));

  Rng rng(17);
  std::vector<double> unif(100000);
  for (double& v : unif) v = rng.next_unit();
  CHECK(excess_kurtosis(unif) == doctest::Approx(-1.2).epsilon(0.05 / 1.2));

  const std::vector<double> constant = {5, 5, 5, 5};
  CHECK_THROWS_WITH_AS(excess_kurtosis(constant),
                       doctest::Contains("ConstantColumn"), Error);
  const std::vector<double> three = {1, 2, 3};
  CHECK_THROWS_WITH_AS(excess_kurtosis(three),
                       doctest::Contains("TooFewValues"), Error);
}

TEST_CASE("dataset kurtosis averages per-column excess") {
  std::vector<double> b1, b2, y;
  for (int i = 0; i < 40; ++i) {
    b1.push_back(i % 2);
    b2.push_back((i / 2) % 2);
    y.push_back(i);
  }
  const auto d = numeric_only({b1, b2}, y);
  CHECK(dataset_kurtosis(d) == doctest::Approx(-2.0).epsilon(1e-12));

  Rng rng(23);
  std::vector<double> norm(100000), tgt(100000);
  for (std::size_t i = 0; i < norm.size(); ++i) {
    norm[i] = rng.next_normal();
    tgt[i] = static_cast<double>(i);
  }
  const auto dn = numeric_only({norm}, tgt);
  CHECK(std::fabs(dataset_kurtosis(dn)) < 0.1);

  const auto dc = numeric_only({{7, 7, 7, 7, 7}}, {1, 2, 3, 4, 5});
  CHECK_THROWS_WITH_AS(dataset_kurtosis(dc),
                       doctest::Contains("NoUsableNumericColumns"), Error);
}

TEST_CASE("column entropy in bits") {
  const auto four = synth::from_columns(
      "e", {{"y", {1, 2, 3, 4}}},
      {{"c", {"a", "b", "c", "d"}}}, "y", TaskKind::regression);
  CHECK(column_entropy(four, 1) == doctest::Approx(2.0).epsilon(1e-12));

  const auto flat = synth::from_columns(
      "e2", {{"y", {1, 2, 3, 4}}},
      {{"c", {"a", "a", "a", "a"}}}, "y", TaskKind::regression);
  CHECK(column_entropy(flat, 1) == 0.0);

  // n all-distinct values -> log2(n); 2^14 rows hit 14 bits exactly.
  const std::size_t n = 16384;
  std::vector<double> distinct(n), tgt(n);
  for (std::size_t i = 0; i < n; ++i) {
    distinct[i] = static_cast<double>(i);
    tgt[i] = static_cast<double>(i % 7);
  }
  const auto dd = numeric_only({distinct}, tgt);
  CHECK(column_entropy(dd, 0) == doctest::Approx(14.0).epsilon(1e-12));
}

TEST_CASE("pearson basic identities") {
  std::vector<double> x = {0.5, 1.0, 2.5, 4.0, 7.5};
  std::vector<double> y2(x.size()), yneg(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    y2[i] = 2.0 * x[i] + 3.0;
    yneg[i] = -x[i];
  }
  CHECK(pearson(x, y2) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pearson(x, yneg) == doctest::Approx(-1.0).epsilon(1e-12));

  const std::vector<double> a = {1, 2, 3, 4};
  const std::vector<double> b = {1, 3, 2, 4};
  CHECK(pearson(a, b) == doctest::Approx(0.8).epsilon(1e-12));

  const std::vector<double> c = {1, 1, 1, 1};
  CHECK_THROWS_WITH_AS(pearson(a, c), doctest::Contains("ConstantInput"),
                       Error);
}

TEST_CASE("pearson to target stats") {
  std::vector<double> t(30);
  for (int i = 0; i < 30; ++i) t[i] = 0.3 * i + ((i * 7) % 5);

  SUBCASE("single feature equal to target") {
    const auto d = numeric_only({t}, t);
    const auto s = pearson_to_target_stats(d);
    CHECK(s.avg == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.std == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("copy and negation give mean 0, std 1") {
    std::vector<double> neg(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) neg[i] = -t[i];
    const auto d = numeric_only({t, neg}, t);
    const auto s = pearson_to_target_stats(d);
    CHECK(s.avg == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(s.std == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("independent noise is near zero") {
    Rng rng(31);
    const std::size_t n = 100000;
    std::vector<double> noise(n), tgt(n);
    for (std::size_t i = 0; i < n; ++i) {
      noise[i] = rng.next_normal();
      tgt[i] = rng.next_normal();
    }
    const auto d = numeric_only({noise}, tgt);
    const auto s = pearson_to_target_stats(d);
    CHECK(std::fabs(s.avg) < 0.02);
  }
}

TEST_CASE("feature correlation averages unordered pairs") {
  std::vector<double> x(25), y(25);
  for (int i = 0; i < 25; ++i) {
    x[i] = std::sin(1.3 * i) + 0.1 * i;
    y[i] = i;
  }
  std::vector<double> neg(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) neg[i] = -x[i];

  CHECK(feature_correlation_avg(numeric_only({x, x}, y)) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(feature_correlation_avg(numeric_only({x, neg}, y)) ==
        doctest::Approx(-1.0).epsilon(1e-12));
  // {x, x, -x}: pairs (1, -1, -1) -> -1/3.
  CHECK(feature_correlation_avg(numeric_only({x, x, neg}, y)) ==
        doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
  CHECK_THROWS_WITH_AS(feature_correlation_avg(numeric_only({x}, y)),
                       doctest::Contains("FewerThanTwoNumeric"), Error);
}

TEST_CASE("coefficient of variation and anomaly with guards") {
  const auto d = numeric_only({{2, 4, 6}}, {1, 2, 3});
  const auto v = coef_variation_stats(d);
  CHECK(v.avg == doctest::Approx(0.40824829046).epsilon(1e-9));
  CHECK(v.std == doctest::Approx(0.0).epsilon(1e-12));
  const auto a = coef_anomaly_stats(d);
  CHECK(a.avg == doctest::Approx(2.44948974278).epsilon(1e-9));
  CHECK(a.std == doctest::Approx(0.0).epsilon(1e-12));

  // Zero-mean feature: variation guarded to 0.
  const auto dz = numeric_only({{-1, 0, 1}}, {1, 2, 3});
  CHECK(coef_variation_stats(dz).avg == 0.0);
  // Constant feature: anomaly guarded to 0.
  const auto dc = numeric_only({{3, 3, 3}}, {1, 2, 3});
  CHECK(coef_anomaly_stats(dc).avg == 0.0);
}

TEST_CASE("asymmetry: symmetric, bernoulli, mirror") {
  const auto sym = numeric_only({{-1, 0, 1}}, {1, 2, 3});
  CHECK(asymmetry_avg(sym) == doctest::Approx(0.0).epsilon(1e-12));

  // Bernoulli(1/4): skewness (1-2p)/sqrt(p(1-p)) = 0.5/sqrt(0.1875).
  const auto bern = numeric_only({{0, 0, 0, 1}}, {1, 2, 3, 4});
  CHECK(asymmetry_avg(bern) == doctest::Approx(1.15470053838).epsilon(1e-9));

  std::vector<double> v = {0.2, 1.7, 2.1, 5.5, 0.9, 0.1};
  std::vector<double> m(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) m[i] = -v[i];
  std::vector<double> t = {1, 2, 3, 4, 5, 6};
  CHECK(asymmetry_avg(numeric_only({v}, t)) ==
        doctest::Approx(-asymmetry_avg(numeric_only({m}, t))).epsilon(1e-12));
}

TEST_CASE("pca_99 counting") {
  SUBCASE("two perfectly correlated columns need one component") {
    std::vector<double> x(30), x2(30), y(30);
    for (int i = 0; i < 30; ++i) {
      x[i] = std::cos(0.9 * i) + 0.05 * i;
      x2[i] = 3.0 * x[i] - 1.0;
      y[i] = i;
    }
    CHECK(pca_components_99(numeric_only({x, x2}, y)) == 1);
  }
  SUBCASE("independent columns need all components") {
    Rng rng(5);
    const std::size_t n = 20000, dcols = 5;
    std::vector<std::vector<double>> cols(dcols, std::vector<double>(n));
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < dcols; ++j) cols[j][i] = rng.next_normal();
      y[i] = static_cast<double>(i);
    }
    CHECK(pca_components_99(numeric_only(cols, y)) == dcols);
  }
  SUBCASE("constructed eigenvalues {2.9, 0.09, 0.01} need two") {
    const std::vector<double> eig = {2.9, 0.09, 0.01};
    CHECK(pca_count_from_eigenvalues(eig) == 2);
    CHECK(pca_count_from_eigenvalues(std::vector<double>{1, 1, 1, 1}) == 4);
  }
  SUBCASE("jacobi count equals pivot-oracle count on random 30x8 data") {
    Rng rng(77);
    for (int rep = 0; rep < 200; ++rep) {
      std::vector<std::vector<double>> cols(8, std::vector<double>(30));
      std::vector<double> y(30);
      // A few latent factors induce correlated columns.
      for (int i = 0; i < 30; ++i) {
        const double f1 = rng.next_normal();
        const double f2 = rng.next_normal();
        for (int j = 0; j < 8; ++j) {
          cols[j][i] = (j % 2 ? f1 : f2) * (0.2 + 0.1 * j) +
                       0.7 * rng.next_normal();
        }
        y[i] = static_cast<double>(i % 9);
      }
      const auto d = numeric_only(cols, y);
      CHECK(pca_components_99(d) == oracle::pca_count_99(cols));
    }
  }
}

TEST_CASE("cancor") {
  std::vector<double> x1(40), x2(40);
  for (int i = 0; i < 40; ++i) {
    x1[i] = std::sin(0.37 * i) * 2.0;
    x2[i] = (i % 7) - 3.0;
  }
  SUBCASE("exact linear combination reaches 1") {
    std::vector<double> y(40);
    for (int i = 0; i < 40; ++i) y[i] = 2.0 * x1[i] - 0.5 * x2[i] + 3.0;
    CHECK(cancor(numeric_only({x1, x2}, y)) ==
          doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("single feature equals absolute pearson") {
    std::vector<double> y(40);
    for (int i = 0; i < 40; ++i) y[i] = -1.3 * x1[i] + 0.4 * ((i * 13) % 5);
    const auto d = numeric_only({x1}, y);
    CHECK(cancor(d) ==
          doctest::Approx(std::fabs(pearson(x1, y))).epsilon(1e-9));
  }
  SUBCASE("independent noise stays small") {
    Rng rng(41);
    const std::size_t n = 50000;
    std::vector<std::vector<double>> cols(5, std::vector<double>(n));
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (auto& col : cols) col[i] = rng.next_normal();
      y[i] = rng.next_normal();
    }
    CHECK(cancor(numeric_only(cols, y)) <= 0.05);
  }
  SUBCASE("constant target errors") {
    const auto d = numeric_only({{1, 2, 3, 4}}, {5, 5, 5, 5});
    CHECK_THROWS_WITH_AS(cancor(d), doctest::Contains("DegenerateTarget"),
                         Error);
  }
}

TEST_CASE("extract on the toy fixture") {
  const auto v = extract(toy());
  CHECK(v.row_count == 4);
  CHECK(v.column_count == 2);
  CHECK(v.numeric_features == 1);
  CHECK(v.categorical_features == 1);
  CHECK(v.ohe_columns == 3);
  CHECK(v.task_flag == 1);
  CHECK(v.row_over_column == doctest::Approx(2.0).epsilon(1e-12));
  // Definitional identity.
  CHECK(v.row_over_column * static_cast<double>(v.column_count) ==
        doctest::Approx(static_cast<double>(v.row_count)).epsilon(1e-12));
  // Single numeric feature: pair average is guarded to zero.
  CHECK(v.avg_feature_correlation == 0.0);
}

TEST_CASE("extract matches the straight-line oracle") {
  SUBCASE("fixed 20-row fixture, field by field") {
    const auto d = synth::fixture20();
    const auto got = extract(d).as_array();
    const auto want = oracle::metafeatures(d);
    for (std::size_t i = 0; i < kMetaFeatureCount; ++i) {
      INFO("field ", kMetaFeatureNames[i]);
      CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-9));
    }
  }
  SUBCASE("50 random small datasets") {
    Rng rng(2024);
    for (int rep = 0; rep < 50; ++rep) {
      const auto d =
          synth::random_dataset(rng, 200, 10, "r" + std::to_string(rep));
      const auto got = extract(d).as_array();
      const auto want = oracle::metafeatures(d);
      for (std::size_t i = 0; i < kMetaFeatureCount; ++i) {
        INFO("dataset ", d.id, " field ", kMetaFeatureNames[i]);
        const double tol = std::max(1e-9, std::fabs(want[i]) * 1e-9);
        CHECK(std::fabs(got[i] - want[i]) <= tol);
      }
    }
  }
}

TEST_CASE("extract is exactly invariant under row permutation") {
  Rng rng(909);
  for (int rep = 0; rep < 10; ++rep) {
    const auto d = synth::random_dataset(rng, 120, 8, "p" + std::to_string(rep));
    std::vector<std::size_t> perm(d.row_count());
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    const auto shuffled = d.select_rows(perm, d.id);
    const auto a = extract(d).as_array();
    const auto b = extract(shuffled).as_array();
    for (std::size_t i = 0; i < kMetaFeatureCount; ++i) {
      INFO("field ", kMetaFeatureNames[i]);
      CHECK(a[i] == b[i]);  // bitwise
    }
  }
}

TEST_CASE("scale equivariance of the scale-free features") {
  Rng rng(555);
  const auto d = synth::random_dataset(rng, 100, 6, "scale");
  // Multiply the first numeric feature by 37.
  auto scaled = d;
  for (std::size_t c = 0; c < d.column_count(); ++c) {
    if (c != d.target && d.columns[c].kind == ColumnKind::numeric) {
      for (std::size_t r = 0; r < d.row_count(); ++r) {
        if (!scaled.cell(r, c).missing) scaled.cell(r, c).num *= 37.0;
      }
      break;
    }
  }
  const auto a = extract(d);
  const auto b = extract(scaled);
  CHECK(b.kurtosis == doctest::Approx(a.kurtosis).epsilon(1e-9));
  CHECK(b.avg_asymmetry == doctest::Approx(a.avg_asymmetry).epsilon(1e-9));
  CHECK(std::fabs(b.avg_pearson_to_target) ==
        doctest::Approx(std::fabs(a.avg_pearson_to_target)).epsilon(1e-9));
  CHECK(b.pca_99 == a.pca_99);
  CHECK(b.cancor == doctest::Approx(a.cancor).epsilon(1e-9));
  CHECK(b.avg_entropy == doctest::Approx(a.avg_entropy).epsilon(1e-9));
}

TEST_CASE("cancor dominates the best single-feature correlation") {
  Rng rng(31337);
  for (int rep = 0; rep < 20; ++rep) {
    const auto d = synth::random_dataset(rng, 150, 7, "c" + std::to_string(rep));
    const auto v = extract(d);
    const auto y = d.encoded_target();
    double best = 0.0;
    for (std::size_t c = 0; c < d.column_count(); ++c) {
      if (c == d.target || d.columns[c].kind != ColumnKind::numeric) continue;
      const auto col = imputed_numeric_column(d, c);
      if (population_std(col) < kConstantStd ||
          population_std(y) < kConstantStd) {
        continue;
      }
      best = std::max(best, std::fabs(pearson(col, y)));
    }
    CHECK(v.cancor >= best - 1e-6);
  }
}

TEST_CASE("average entropy is bounded by log2 of the row count") {
  Rng rng(808);
  for (int rep = 0; rep < 20; ++rep) {
    const auto d = synth::random_dataset(rng, 64, 8, "h" + std::to_string(rep));
    const auto v = extract(d);
    CHECK(v.avg_entropy <=
          std::log2(static_cast<double>(d.row_count())) + 1e-9);
    CHECK(v.avg_entropy >= 0.0);
  }
}

TEST_CASE("meta-feature serialization round-trips") {
  const auto d = synth::fixture20();
  const auto v = extract(d);

  const std::string csv = metafeature_csv_header() + "\n" +
                          metafeature_csv_row(v) + "\n";
  const std::string csv_path = "/tmp/tabprof_mf_test.csv";
  write_text_file(csv_path, csv);
  const auto from_csv = read_metafeature_file(csv_path);
  REQUIRE(from_csv.size() == 1);
  CHECK(from_csv[0].dataset_id == "fixture20");
  CHECK(from_csv[0].row_count == v.row_count);
  // 12 significant digits of report precision.
  CHECK(from_csv[0].cancor == doctest::Approx(v.cancor).epsilon(1e-11));

  const std::string json_path = "/tmp/tabprof_mf_test.jsonl";
  write_text_file(json_path, metafeature_json(v) + "\n");
  const auto from_json = read_metafeature_file(json_path);
  REQUIRE(from_json.size() == 1);
  CHECK(from_json[0].pca_99 == v.pca_99);
  CHECK(from_json[0].kurtosis == doctest::Approx(v.kurtosis).epsilon(1e-11));
}

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <string>

#include <doctest.h>

#include "tabprof/csv.hpp"
#include "tabprof/error.hpp"
#include "tabprof/tabular.hpp"

using namespace tabprof;

namespace {

// The 4-row toy used across the suite; below the loader's CV floor, so it
// is built through the relaxed loader.
TabularDataset toy_dataset() {
  const std::string csv = "a,b,y\n1,x,0\n2,y,1\n3,x,0\n4,y,1\n";
  SchemaDescriptor s;
  s.task = TaskKind::classification;
  s.target_name = "y";
  LoadOptions opts;
  opts.min_rows = 1;
  return load_dataset_from_string(csv, "toy", s, opts);
}

std::string repeat_rows(const std::string& header, const std::string& row,
                        int n) {
  std::string out = header + "\n";
  for (int i = 0; i < n; ++i) out += row + "\n";
  return out;
}

}  // namespace

TEST_CASE("load_dataset infers kinds and builds the toy fixture") {
  const TabularDataset d = toy_dataset();
  CHECK(d.row_count() == 4);
  CHECK(d.column_count() == 3);
  CHECK(d.columns[0].kind == ColumnKind::numeric);
  CHECK(d.columns[1].kind == ColumnKind::categorical);
  CHECK(d.columns[1].cardinality == 2);
  CHECK(d.columns[2].kind == ColumnKind::categorical);
  CHECK(d.columns[2].cardinality == 2);
  CHECK(d.target == 2);
  CHECK(d.task == TaskKind::classification);
}

TEST_CASE("a non-parsing cell makes the whole column categorical") {
  const std::string csv =
      "c,t\n1,0\n2,1\noops,0\n1,1\n2,0\n1,1\n2,0\n1,1\n2,0\n1,1\n";
  const TabularDataset d = load_dataset_from_string(csv, "x", {}, {});
  CHECK(d.columns[0].kind == ColumnKind::categorical);
  CHECK(d.columns[0].cardinality == 3);
}

TEST_CASE("load_dataset rejects too-few rows at the default floor") {
  const std::string csv = "a,y\n1,2\n3,4\n5,6\n7,8\n9,10\n";  // 5 rows
  CHECK_THROWS_WITH_AS(load_dataset_from_string(csv, "x", {}, {}),
                       doctest::Contains("TooFewRows"), Error);
}

TEST_CASE("load_dataset misc errors") {
  SUBCASE("missing target name") {
    SchemaDescriptor s;
    s.target_name = "absent";
    CHECK_THROWS_AS(
        load_dataset_from_string(repeat_rows("a,y", "1,2", 12), "x", s, {}),
        Error);
  }
  SUBCASE("declared numeric contradicted by cells") {
    SchemaDescriptor s;
    s.kinds.emplace_back("a", ColumnKind::numeric);
    const std::string csv = repeat_rows("a,y", "z,1", 12);
    CHECK_THROWS_WITH_AS(load_dataset_from_string(csv, "x", s, {}),
                         doctest::Contains("SchemaMismatch"), Error);
  }
  SUBCASE("ragged row is a parse error") {
    CHECK_THROWS_WITH_AS(
        load_dataset_from_string("a,y\n1,2,3\n", "x", {}, {}),
        doctest::Contains("ParseError"), Error);
  }
  SUBCASE("unbalanced quote is a parse error") {
    CHECK_THROWS_AS(load_dataset_from_string("a,y\n\"1,2\n", "x", {}, {}),
                    Error);
  }
  SUBCASE("missing target cells are rejected") {
    const std::string csv = repeat_rows("a,y", "1,", 12);
    CHECK_THROWS_AS(load_dataset_from_string(csv, "x", {}, {}), Error);
  }
}

TEST_CASE("missing markers: unquoted NA and empty; quoted stay literal") {
  std::string csv = "a,b,y\n";
  for (int i = 0; i < 4; ++i) {
    csv += "NA,\"NA\",0\n";
    csv += "1.5,tok,1\n";
    csv += ",\"\",0\n";
  }
  LoadOptions opts;
  opts.min_rows = 1;
  const TabularDataset d = load_dataset_from_string(csv, "m", {}, opts);
  CHECK(d.columns[0].kind == ColumnKind::numeric);
  CHECK(d.columns[0].missing_count == 8);
  CHECK(d.columns[1].kind == ColumnKind::categorical);
  CHECK(d.columns[1].missing_count == 0);
  // Tokens: literal "NA", "tok", and the quoted empty string.
  CHECK(d.columns[1].cardinality == 3);
}

TEST_CASE("categorical missing becomes a dedicated category") {
  std::string csv = "b,y\nu,0\n,1\nv,0\nu,1\n";
  LoadOptions opts;
  opts.min_rows = 1;
  const TabularDataset d = load_dataset_from_string(csv, "m", {}, opts);
  CHECK(d.columns[0].missing_count == 1);
  CHECK(d.columns[0].cardinality == 3);  // u, v, and the missing category
  const auto tokens = d.category_tokens(0);
  CHECK(std::find(tokens.begin(), tokens.end(), kMissingToken) != tokens.end());
}

TEST_CASE("ohe_column_count sums cardinalities over the feature block") {
  // 3 numeric + categorical cardinalities {2, 5} -> 10.
  std::string csv = "n1,n2,n3,c1,c2,y\n";
  const char* c2s[] = {"p", "q", "r", "s", "t"};
  for (int i = 0; i < 10; ++i) {
    csv += std::to_string(i) + "," + std::to_string(i * 2) + "," +
           std::to_string(i * 3) + "," + (i % 2 ? "a" : "b") + "," +
           c2s[i % 5] + "," + std::to_string(i) + "\n";
  }
  const TabularDataset d = load_dataset_from_string(csv, "x", {}, {});
  CHECK(ohe_column_count(d) == 10);

  // All-numeric with 7 features -> 7.
  std::string csv2 = "a,b,c,d,e,f,g,y\n";
  for (int i = 0; i < 10; ++i) {
    std::string row;
    for (int j = 0; j < 8; ++j) {
      row += std::to_string(i + j) + (j < 7 ? "," : "");
    }
    csv2 += row + "\n";
  }
  const TabularDataset d2 = load_dataset_from_string(csv2, "x", {}, {});
  CHECK(ohe_column_count(d2) == 7);
  CHECK(ohe_column_count(d2) == d2.feature_count());
}

TEST_CASE("wide single categorical column counts its whole cardinality") {
  std::string csv = "c,y\n";
  for (int i = 0; i < 247; ++i) {
    csv += "tok" + std::to_string(i) + "," + std::to_string(i) + "\n";
  }
  const TabularDataset d = load_dataset_from_string(csv, "x", {}, {});
  CHECK(ohe_column_count(d) == 247);
}

TEST_CASE("round-trip: write then reload preserves everything") {
  std::string csv = "num,cat,y\n";
  for (int i = 0; i < 15; ++i) {
    switch (i % 4) {
      case 0: csv += "0.125,alpha," + std::to_string(i) + "\n"; break;
      case 1: csv += "NA,\"has,comma\"," + std::to_string(i) + "\n"; break;
      case 2: csv += "3.14159265358979,NA," + std::to_string(i) + "\n"; break;
      default: csv += "-7e-3,\"quote\"\"d\"," + std::to_string(i) + "\n"; break;
    }
  }
  const TabularDataset d = load_dataset_from_string(csv, "rt", {}, {});
  const std::string tmp = (std::filesystem::temp_directory_path() /
                           "tabprof_roundtrip.csv").string();
  write_dataset(d, tmp);
  const TabularDataset d2 = load_dataset(tmp, {}, {});
  REQUIRE(d2.column_count() == d.column_count());
  REQUIRE(d2.row_count() == d.row_count());
  for (std::size_t c = 0; c < d.column_count(); ++c) {
    CHECK(d2.columns[c].kind == d.columns[c].kind);
    CHECK(d2.columns[c].cardinality == d.columns[c].cardinality);
    CHECK(d2.columns[c].missing_count == d.columns[c].missing_count);
  }
  CHECK(d2.cells == d.cells);
  CHECK(d2.task == d.task);
  CHECK(d2.target == d.target);
  std::filesystem::remove(tmp);
  std::filesystem::remove(tmp + ".schema.json");
}

TEST_CASE("subsample: determinism, multiset containment, boundaries") {
  std::string csv = "a,y\n";
  for (int i = 0; i < 100; ++i) {
    csv += std::to_string(i) + "," + std::to_string(i % 7) + "\n";
  }
  const TabularDataset d = load_dataset_from_string(csv, "s", {}, {});

  SUBCASE("n equal to row count permutes the same multiset") {
    const TabularDataset s = subsample(d, 100, 3);
    std::multiset<double> orig, sampled;
    for (std::size_t r = 0; r < 100; ++r) {
      orig.insert(d.cell(r, 0).num);
      sampled.insert(s.cell(r, 0).num);
    }
    CHECK(orig == sampled);
  }
  SUBCASE("deterministic for a fixed seed") {
    const TabularDataset s1 = subsample(d, 17, 7);
    const TabularDataset s2 = subsample(d, 17, 7);
    CHECK(dataset_to_csv(s1) == dataset_to_csv(s2));
    const TabularDataset s3 = subsample(d, 17, 8);
    CHECK(dataset_to_csv(s1) != dataset_to_csv(s3));
  }
  SUBCASE("sampled rows are a sub-multiset for any n") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const std::size_t n = 1 + (seed * 19) % 99;
      const TabularDataset s = subsample(d, n, seed);
      std::multiset<double> orig, sampled;
      for (std::size_t r = 0; r < d.row_count(); ++r) orig.insert(d.cell(r, 0).num);
      for (std::size_t r = 0; r < s.row_count(); ++r) sampled.insert(s.cell(r, 0).num);
      CHECK(std::includes(orig.begin(), orig.end(), sampled.begin(),
                          sampled.end()));
    }
  }
  SUBCASE("n beyond row count errors") {
    CHECK_THROWS_WITH_AS(subsample(d, 101, 0),
                         doctest::Contains("SampleTooLarge"), Error);
  }
  SUBCASE("cardinalities are recomputed") {
    const TabularDataset s = subsample(d, 5, 4);
    CHECK(s.columns[1].cardinality <= 5);
  }
}

TEST_CASE("make_folds balanced partitions") {
  std::string csv = "a,y\n";
  for (int i = 0; i < 100; ++i) {
    csv += std::to_string(i) + "," + std::to_string(i) + "\n";
  }
  const TabularDataset d100 = load_dataset_from_string(csv, "f", {}, {});
  const FoldAssignment fa = make_folds(d100, 10, 42, false);
  std::map<std::size_t, std::size_t> sizes;
  for (std::size_t f : fa.fold_of_row) ++sizes[f];
  REQUIRE(sizes.size() == 10);
  for (const auto& [fold, size] : sizes) CHECK(size == 10);

  // 43 rows over 10 folds: three folds of 5, seven of 4.
  std::string csv43 = "a,y\n";
  for (int i = 0; i < 43; ++i) {
    csv43 += std::to_string(i) + "," + std::to_string(i) + "\n";
  }
  const TabularDataset d43 = load_dataset_from_string(csv43, "f43", {}, {});
  const FoldAssignment fa43 = make_folds(d43, 10, 1, false);
  std::map<std::size_t, std::size_t> sizes43;
  for (std::size_t f : fa43.fold_of_row) ++sizes43[f];
  std::multiset<std::size_t> observed;
  for (const auto& [fold, size] : sizes43) observed.insert(size);
  CHECK(observed == std::multiset<std::size_t>({5, 5, 5, 4, 4, 4, 4, 4, 4, 4}));
}

TEST_CASE("make_folds stratified keeps class proportions") {
  std::string csv = "a,y\n";
  for (int i = 0; i < 100; ++i) {
    csv += std::to_string(i) + "," + (i < 60 ? "pos" : "neg") + "\n";
  }
  SchemaDescriptor s;
  s.task = TaskKind::classification;
  const TabularDataset d = load_dataset_from_string(csv, "st", s, {});
  const FoldAssignment fa = make_folds(d, 10, 5, true);
  std::map<std::size_t, std::map<std::string, std::size_t>> counts;
  for (std::size_t r = 0; r < 100; ++r) {
    ++counts[fa.fold_of_row[r]][d.effective_token(r, d.target)];
  }
  for (const auto& [fold, by_class] : counts) {
    CHECK(by_class.at("pos") == 6);
    CHECK(by_class.at("neg") == 4);
  }
}

TEST_CASE("make_folds determinism and errors") {
  std::string csv = "a,y\n";
  for (int i = 0; i < 30; ++i) {
    csv += std::to_string(i) + "," + std::to_string(i * 0.5) + "\n";
  }
  const TabularDataset d = load_dataset_from_string(csv, "fd", {}, {});
  CHECK(make_folds(d, 10, 9, false).fold_of_row ==
        make_folds(d, 10, 9, false).fold_of_row);
  CHECK(make_folds(d, 10, 9, false).digest() ==
        make_folds(d, 10, 9, false).digest());
  CHECK(make_folds(d, 10, 9, false).digest() !=
        make_folds(d, 10, 10, false).digest());
  CHECK_THROWS_WITH_AS(make_folds(d, 31, 0, false),
                       doctest::Contains("TooFewRowsForK"), Error);
  CHECK_THROWS_WITH_AS(make_folds(d, 10, 0, true),
                       doctest::Contains("StratifyOnRegression"), Error);
}

TEST_CASE("standardize_columns: hand values, constants, idempotence") {
  std::string csv = "a,c,y\n1,5,0\n2,5,1\n3,5,2\n";
  LoadOptions opts;
  opts.min_rows = 1;
  const TabularDataset d = load_dataset_from_string(csv, "z", {}, opts);
  const StandardizedColumns sc = standardize_columns(d);
  REQUIRE(sc.values.cols == 2);
  CHECK(sc.values.at(0, 0) == doctest::Approx(-1.2247448714).epsilon(1e-9));
  CHECK(sc.values.at(1, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(sc.values.at(2, 0) == doctest::Approx(1.2247448714).epsilon(1e-9));
  CHECK(sc.stds[0] == doctest::Approx(0.816496580928).epsilon(1e-9));
  CHECK_FALSE(sc.constant[0]);
  CHECK(sc.constant[1]);
  for (int r = 0; r < 3; ++r) CHECK(sc.values.at(r, 1) == 0.0);

  // Standardizing an already standardized column is a fixed point.
  std::string csv2 = "a,y\n";
  for (int r = 0; r < 3; ++r) {
    csv2 += format_double(sc.values.at(r, 0)) + "," + std::to_string(r) + "\n";
  }
  const TabularDataset d2 = load_dataset_from_string(csv2, "z2", {}, opts);
  const StandardizedColumns sc2 = standardize_columns(d2);
  for (int r = 0; r < 3; ++r) {
    CHECK(sc2.values.at(r, 0) ==
          doctest::Approx(sc.values.at(r, 0)).epsilon(1e-9));
  }

  // Means are imputed before standardization.
  std::string csv3 = "a,y\n1,0\nNA,1\n3,2\n";
  const TabularDataset d3 = load_dataset_from_string(csv3, "z3", {}, opts);
  const StandardizedColumns sc3 = standardize_columns(d3);
  CHECK(sc3.means[0] == doctest::Approx(2.0));
  CHECK(sc3.values.at(1, 0) == doctest::Approx(0.0));

  std::string csv4 = "c,y\nu,0\nv,1\nw,2\n";
  const TabularDataset d4 = load_dataset_from_string(csv4, "z4", {}, opts);
  CHECK_THROWS_WITH_AS(standardize_columns(d4),
                       doctest::Contains("NoNumericFeatures"), Error);
}

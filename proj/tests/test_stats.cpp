#include <cmath>
#include <vector>

#include <doctest.h>

#include "tabprof/error.hpp"
#include "tabprof/linalg.hpp"
#include "tabprof/rng.hpp"
#include "tabprof/stats.hpp"

#include "oracles.hpp"

using namespace tabprof;

TEST_CASE("chi-square survival function matches reference values") {
  // Frozen from an independent implementation.
  CHECK(chi_square_sf(6.25, 2) == doctest::Approx(0.04393693362340742).epsilon(1e-10));
  CHECK(chi_square_sf(7.8, 3) == doctest::Approx(0.050331097859853326).epsilon(1e-10));
  CHECK(chi_square_sf(23.7, 9) == doctest::Approx(0.004801671146984512).epsilon(1e-10));
  CHECK(chi_square_sf(0.3, 19) == doctest::Approx(0.9999999999999886).epsilon(1e-10));
  CHECK(chi_square_sf(0.0, 4) == 1.0);
}

TEST_CASE("student t survival matches closed forms and reference") {
  // df=1 and df=2 have closed forms.
  for (double t : {0.0, 0.3, 1.0, 2.5, 7.0}) {
    const double df1 = 0.5 - std::atan(t) / 3.14159265358979323846;
    CHECK(student_t_sf(t, 1) == doctest::Approx(df1).epsilon(1e-12));
    const double df2 = 0.5 * (1.0 - t / std::sqrt(2.0 + t * t));
    CHECK(student_t_sf(t, 2) == doctest::Approx(df2).epsilon(1e-12));
  }
  CHECK(student_t_sf(2.5, 9) == doctest::Approx(0.016930913841492853).epsilon(1e-10));
  CHECK(student_t_sf(-1.3, 4) == doctest::Approx(0.868274201764388).epsilon(1e-10));
  CHECK(student_t_sf(0.7, 1) == doctest::Approx(0.3055998877857853).epsilon(1e-10));
}

TEST_CASE("paired t-test matches reference and handles zero variance") {
  const std::vector<double> d = {0.11, 0.02, -0.05, 0.07, 0.03,
                                 0.09, -0.01, 0.04, 0.06, 0.12};
  const auto r = paired_t_test(d);
  CHECK(r.t_statistic == doctest::Approx(2.848275979665248).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(0.019142944175489365).epsilon(1e-10));
  CHECK_FALSE(r.zero_variance);

  const std::vector<double> same = {0.1, 0.1, 0.1, 0.1};
  const auto rs = paired_t_test(same);
  CHECK(rs.zero_variance);
  CHECK(rs.p_value == 0.0);

  const std::vector<double> zeros = {0.0, 0.0, 0.0};
  const auto rz = paired_t_test(zeros);
  CHECK(rz.all_zero);
  CHECK(rz.p_value == 1.0);
}

TEST_CASE("cholesky solves SPD systems") {
  Matrix a(2, 2);
  a.at(0, 0) = 4.0;
  a.at(0, 1) = 1.0;
  a.at(1, 0) = 1.0;
  a.at(1, 1) = 3.0;
  const auto w = cholesky_solve(a, {1.0, 2.0});
  // Solved by hand: [1/11, 7/11].
  CHECK(w[0] == doctest::Approx(1.0 / 11.0).epsilon(1e-12));
  CHECK(w[1] == doctest::Approx(7.0 / 11.0).epsilon(1e-12));

  Matrix bad(2, 2);
  bad.at(0, 0) = 1.0;
  bad.at(0, 1) = 2.0;
  bad.at(1, 0) = 2.0;
  bad.at(1, 1) = 1.0;  // indefinite
  CHECK_THROWS_AS(cholesky_solve(bad, {1.0, 1.0}), Error);
}

TEST_CASE("jacobi eigenvalues agree with hand values and the pivot oracle") {
  Matrix m(2, 2);
  m.at(0, 0) = 2.0;
  m.at(0, 1) = 1.0;
  m.at(1, 0) = 1.0;
  m.at(1, 1) = 2.0;
  const auto e2 = jacobi_eigenvalues(m);
  CHECK(e2[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(e2[1] == doctest::Approx(1.0).epsilon(1e-12));

  Matrix a(3, 3);
  const double vals[3][3] = {{4.0, 1.0, -2.0}, {1.0, 3.0, 0.5}, {-2.0, 0.5, 5.0}};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) a.at(i, j) = vals[i][j];
  }
  const auto e3 = jacobi_eigenvalues(a);
  CHECK(e3[0] == doctest::Approx(6.576456854440895).epsilon(1e-10));
  CHECK(e3[1] == doctest::Approx(3.8393364524664815).epsilon(1e-10));
  CHECK(e3[2] == doctest::Approx(1.584206693092622).epsilon(1e-10));

  // Random symmetric matrices against the independent pivot-search solver.
  Rng rng(99);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 2 + rep % 7;
    Matrix s(n, n);
    std::vector<std::vector<double>> copy(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) {
        const double v = rng.next_normal();
        s.at(i, j) = v;
        s.at(j, i) = v;
        copy[i][j] = v;
        copy[j][i] = v;
      }
    }
    const auto ours = jacobi_eigenvalues(s);
    const auto ref = oracle::eigenvalues(copy);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(ours[i] == doctest::Approx(ref[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("rng determinism and bounds") {
  Rng a(7), b(7);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  Rng r(3);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.next_unit();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(r.below(17) < 17);
  }
  // Normal draws have roughly unit variance.
  Rng g(11);
  double sum = 0.0, sum2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = g.next_normal();
    sum += x;
    sum2 += x * x;
  }
  CHECK(std::fabs(sum / n) < 0.01);
  CHECK(sum2 / n == doctest::Approx(1.0).epsilon(0.02));
}

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tabprof {

double sigmoid(double z);

/// Error-free running sum kept as non-overlapping partials (Shewchuk).
/// The rounded total depends only on the multiset of addends, which makes
/// every statistic built on it invariant under row permutations.
class StableAccumulator {
 public:
  void add(double x);
  double total() const;

 private:
  std::vector<double> partials_;
};

double stable_sum(std::span<const double> v);

double mean(std::span<const double> v);
/// Population variance (1/n). The project-wide convention.
double population_variance(std::span<const double> v);
double population_std(std::span<const double> v);
/// Sample variance (1/(n-1)), used only where a test statistic demands it.
double sample_variance(std::span<const double> v);

double median_of_sorted(std::span<const double> sorted);
double median(std::vector<double> v);

/// Regularized lower incomplete gamma P(a, x), |error| < 1e-12 over the
/// ranges used here (series for x < a+1, continued fraction otherwise).
double regularized_gamma_p(double a, double x);
double regularized_gamma_q(double a, double x);

/// Upper tail of the chi-square distribution with df degrees of freedom.
double chi_square_sf(double x, double df);

/// Regularized incomplete beta I_x(a, b) via Lentz continued fraction.
double regularized_beta(double a, double b, double x);

/// P(T > t) for Student's t with df degrees of freedom.
double student_t_sf(double t, double df);

struct PairedTResult {
  double t_statistic;      // NaN when variance is zero
  double p_value;          // two-sided
  bool zero_variance;      // all differences identical
  bool all_zero;           // all differences exactly zero
  double mean_difference;
};

/// Two-sided paired t-test on a vector of per-fold differences.
/// Zero-variance nonzero differences report p = 0; identically zero
/// differences report p = 1.
PairedTResult paired_t_test(std::span<const double> differences);

}  // namespace tabprof

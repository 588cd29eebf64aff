#include "tabprof/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tabprof/error.hpp"

namespace tabprof {

double sigmoid(double z) {
  // Split on sign so exp never overflows.
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void StableAccumulator::add(double x) {
  std::size_t used = 0;
  for (double y : partials_) {
    if (std::fabs(x) < std::fabs(y)) std::swap(x, y);
    const double hi = x + y;
    const double lo = y - (hi - x);
    if (lo != 0.0) partials_[used++] = lo;
    x = hi;
  }
  partials_.resize(used);
  partials_.push_back(x);
}

double StableAccumulator::total() const {
  double s = 0.0;
  for (double p : partials_) s += p;
  return s;
}

double stable_sum(std::span<const double> v) {
  StableAccumulator acc;
  for (double x : v) acc.add(x);
  return acc.total();
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return stable_sum(v) / static_cast<double>(v.size());
}

double population_variance(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double m = mean(v);
  StableAccumulator acc;
  for (double x : v) acc.add((x - m) * (x - m));
  return acc.total() / static_cast<double>(v.size());
}

double population_std(std::span<const double> v) {
  return std::sqrt(population_variance(v));
}

double sample_variance(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  StableAccumulator acc;
  for (double x : v) acc.add((x - m) * (x - m));
  return acc.total() / static_cast<double>(v.size() - 1);
}

double median_of_sorted(std::span<const double> sorted) {
  const std::size_t n = sorted.size();
  if (n == 0) return 0.0;
  if (n % 2 == 1) return sorted[n / 2];
  return 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return median_of_sorted(v);
}

namespace {

// Series expansion of P(a, x), valid and fast for x < a + 1.
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  double ap = a;
  for (int n = 0; n < 1000; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Lentz continued fraction for Q(a, x), valid for x >= a + 1.
double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 1000; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double regularized_gamma_p(double a, double x) {
  if (a <= 0.0 || x < 0.0) fail(errc::invalid_argument, "gamma_p domain");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_cf(a, x);
}

double regularized_gamma_q(double a, double x) {
  if (a <= 0.0 || x < 0.0) fail(errc::invalid_argument, "gamma_q domain");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_cf(a, x);
}

double chi_square_sf(double x, double df) {
  if (x <= 0.0) return 1.0;
  return regularized_gamma_q(0.5 * df, 0.5 * x);
}

namespace {

double beta_cf(double a, double b, double x) {
  const double tiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 1000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-16) break;
  }
  return h;
}

}  // namespace

double regularized_beta(double a, double b, double x) {
  if (a <= 0.0 || b <= 0.0 || x < 0.0 || x > 1.0) {
    fail(errc::invalid_argument, "regularized_beta domain");
  }
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) -
                          std::lgamma(b) + a * std::log(x) +
                          b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_cf(a, b, x) / a;
  }
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_sf(double t, double df) {
  if (df <= 0.0) fail(errc::invalid_argument, "student_t_sf df");
  const double x = df / (df + t * t);
  const double half_tail = 0.5 * regularized_beta(0.5 * df, 0.5, x);
  return t >= 0.0 ? half_tail : 1.0 - half_tail;
}

PairedTResult paired_t_test(std::span<const double> differences) {
  if (differences.size() < 2) {
    fail(errc::invalid_argument, "paired_t_test needs >= 2 differences");
  }
  PairedTResult r{};
  r.mean_difference = mean(differences);
  const double var = sample_variance(differences);
  r.all_zero = true;
  for (double d : differences) {
    if (d != 0.0) {
      r.all_zero = false;
      break;
    }
  }
  if (var == 0.0) {
    r.zero_variance = true;
    r.t_statistic = std::numeric_limits<double>::quiet_NaN();
    r.p_value = r.all_zero ? 1.0 : 0.0;
    return r;
  }
  const double n = static_cast<double>(differences.size());
  r.t_statistic = r.mean_difference / std::sqrt(var / n);
  r.p_value = 2.0 * student_t_sf(std::fabs(r.t_statistic), n - 1.0);
  if (r.p_value > 1.0) r.p_value = 1.0;
  return r;
}

}  // namespace tabprof

#ifndef TRIMMED_MEANS_STATS_HPP
#define TRIMMED_MEANS_STATS_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace trimmed_means {

inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

inline double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

inline double normal_quantile(double p) {
  static const boost::math::normal_distribution<double> nd;
  return boost::math::quantile(nd, p);
}

inline double student_t_cdf(double x, double df) {
  boost::math::students_t_distribution<double> td(df);
  return boost::math::cdf(td, x);
}

inline double student_t_quantile(double p, double df) {
  boost::math::students_t_distribution<double> td(df);
  return boost::math::quantile(td, p);
}

inline double inv_logit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Asymptotic Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2),
// truncated once terms drop below 1e-12.
inline double kolmogorov_sf(double lambda) {
  if (lambda < 1e-8) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    if (term < 1e-12) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

inline double mean(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("mean of empty sample");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sample_variance(std::span<const double> v) {
  if (v.size() < 2) throw std::invalid_argument("variance needs n >= 2");
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

struct WelchResult {
  double diff;
  double se;
  double df;
  double ci_low;
  double ci_high;
  double p_two_sided;
};

inline WelchResult welch_two_sample(std::span<const double> x1,
                                    std::span<const double> x0, double gamma) {
  if (x1.size() < 2 || x0.size() < 2)
    throw std::invalid_argument("welch_two_sample: each sample needs n >= 2");
  const double n1 = static_cast<double>(x1.size());
  const double n0 = static_cast<double>(x0.size());
  const double v1 = sample_variance(x1) / n1;
  const double v0 = sample_variance(x0) / n0;
  WelchResult r;
  r.diff = mean(x1) - mean(x0);
  r.se = std::sqrt(v1 + v0);
  r.df = (v1 + v0) * (v1 + v0) /
         (v1 * v1 / (n1 - 1.0) + v0 * v0 / (n0 - 1.0));
  const double tq = student_t_quantile(1.0 - gamma / 2.0, r.df);
  r.ci_low = r.diff - tq * r.se;
  r.ci_high = r.diff + tq * r.se;
  const double t = r.diff / r.se;
  r.p_two_sided = 2.0 * (1.0 - student_t_cdf(std::fabs(t), r.df));
  return r;
}

}  // namespace trimmed_means

#endif

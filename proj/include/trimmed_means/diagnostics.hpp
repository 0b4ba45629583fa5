#ifndef TRIMMED_MEANS_DIAGNOSTICS_HPP
#define TRIMMED_MEANS_DIAGNOSTICS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "trimmed_means/stats.hpp"
#include "trimmed_means/trial_data.hpp"

namespace trimmed_means {

struct KsResult {
  double d_stat = 0.0;
  double p_value = 1.0;
  int n1 = 0, n0 = 0;
  double shift_applied = 0.0;
};

namespace detail {

inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::fabs(i / na - j / nb));
  }
  return d;
}

}  // namespace detail

// Two-sample KS test of the location-shift assumption: arm-1 observed
// outcomes are shifted by -shift and compared against arm-0 observed
// outcomes. Asymptotic p-value with effective n = n1*n0/(n1+n0).
inline KsResult ks_location_shift_test(const TrialDataset& d, double shift) {
  std::vector<double> y1 = observed_outcomes(d, 1);
  const std::vector<double> y0 = observed_outcomes(d, 0);
  if (y1.size() < 2 || y0.size() < 2)
    throw std::invalid_argument(
        "ks_location_shift_test: each arm needs >= 2 observed outcomes");
  for (double& v : y1) v -= shift;
  KsResult r;
  r.n1 = static_cast<int>(y1.size());
  r.n0 = static_cast<int>(y0.size());
  r.shift_applied = shift;
  r.d_stat = detail::ks_statistic(std::move(y1), y0);
  const double ne = static_cast<double>(r.n1) * r.n0 / (r.n1 + r.n0);
  r.p_value = kolmogorov_sf(std::sqrt(ne) * r.d_stat);
  return r;
}

// Share of deleted (simulation-truth) values strictly on the worse side of
// their arm's realized trim boundary: per-arm fractions averaged over the
// arms that had any deletions. Not applicable when nothing was deleted.
inline std::optional<double> smnar_fraction(
    const std::array<std::vector<double>, 2>& deleted_true,
    const std::array<double, 2>& trim_boundaries, Direction dir) {
  double acc = 0.0;
  int arms_with_deletions = 0;
  for (int arm = 0; arm < 2; ++arm) {
    int total = 0, beyond = 0;
    for (double v : deleted_true[arm]) {
      ++total;
      const bool worse = dir == Direction::WorseIsLow
                             ? v < trim_boundaries[arm]
                             : v > trim_boundaries[arm];
      if (worse) ++beyond;
    }
    if (total > 0) {
      acc += static_cast<double>(beyond) / total;
      ++arms_with_deletions;
    }
  }
  if (arms_with_deletions == 0) return std::nullopt;
  return acc / arms_with_deletions;
}

// Population one-sided trimmed mean of a normal distribution, via the Mills
// ratio: for WorseIsLow, E[Y | Y > F^-1(alpha)] = mu + sigma*phi(z_alpha)/(1-alpha).
inline double normal_trimmed_mean(double mu, double sigma, double alpha,
                                  Direction dir) {
  if (!(alpha >= 0.0 && alpha < 1.0))
    throw std::invalid_argument("normal_trimmed_mean: alpha in [0,1)");
  if (alpha == 0.0) return mu;
  const double adj =
      sigma * normal_pdf(normal_quantile(dir == Direction::WorseIsLow
                                             ? alpha
                                             : 1.0 - alpha)) /
      (1.0 - alpha);
  return dir == Direction::WorseIsLow ? mu + adj : mu - adj;
}

struct NormalLocationPair {
  double mu1, mu0, sigma;
  double delta() const { return mu1 - mu0; }
};

// Distribution handle for the trimmed-mean profile check: quantile plus the
// conditional mean above a quantile. Closed forms where available, adaptive
// Simpson integration otherwise.
class TailDistribution {
 public:
  virtual ~TailDistribution() = default;
  virtual double quantile(double p) const = 0;
  virtual double pdf(double y) const = 0;
  virtual double mean_above(double alpha) const;
};

namespace detail {

inline double adaptive_simpson(const std::function<double(double)>& f, double a,
                               double b, double fa, double fm, double fb,
                               double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0)
    throw std::runtime_error("tail integration did not converge");
  if (std::fabs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a,
                        double b, double tol) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 48);
}

}  // namespace detail

inline double TailDistribution::mean_above(double alpha) const {
  // E[Y | Y > F^-1(alpha)] = (1/(1-alpha)) int_q^hi y f(y) dy, with the upper
  // limit pushed far enough into the tail that the remainder is negligible.
  // the lower limit is clamped away from 0 so quantile(0) = -inf distributions
  // work; the truncated mass of 1e-13 is below the integration tolerance
  const double q = quantile(std::max(alpha, 1e-13));
  const double hi = quantile(1.0 - 1e-13);
  const double integral = detail::integrate(
      [this](double y) { return y * pdf(y); }, q, hi, 1e-12);
  return integral / (1.0 - alpha);
}

class NormalTail final : public TailDistribution {
 public:
  NormalTail(double mu, double sigma) : mu_(mu), sigma_(sigma) {}
  double quantile(double p) const override {
    return mu_ + sigma_ * normal_quantile(p);
  }
  double pdf(double y) const override {
    return normal_pdf((y - mu_) / sigma_) / sigma_;
  }
  double mean_above(double alpha) const override {
    return normal_trimmed_mean(mu_, sigma_, alpha, Direction::WorseIsLow);
  }

 private:
  double mu_, sigma_;
};

// Exponential(rate) shifted so that its support starts at `shift`.
class ShiftedExponentialTail final : public TailDistribution {
 public:
  ShiftedExponentialTail(double rate, double shift)
      : rate_(rate), shift_(shift) {
    if (rate <= 0.0) throw std::invalid_argument("rate must be positive");
  }
  double quantile(double p) const override {
    return shift_ - std::log1p(-p) / rate_;
  }
  double pdf(double y) const override {
    return y < shift_ ? 0.0 : rate_ * std::exp(-rate_ * (y - shift_));
  }
  double mean_above(double alpha) const override {
    // memorylessness: E[Y | Y > q] = q + 1/rate
    return quantile(alpha) + 1.0 / rate_;
  }

 private:
  double rate_, shift_;
};

// Generic handle built from a pdf and quantile function; tail means come from
// the numeric default.
class GenericTail final : public TailDistribution {
 public:
  GenericTail(std::function<double(double)> pdf,
              std::function<double(double)> quantile)
      : pdf_(std::move(pdf)), quantile_(std::move(quantile)) {}
  double quantile(double p) const override { return quantile_(p); }
  double pdf(double y) const override { return pdf_(y); }

 private:
  std::function<double(double)> pdf_, quantile_;
};

// Trimmed-mean difference profile over an alpha grid. Constant profile over
// all of [0,1) characterizes a pure location shift between the distributions.
inline std::vector<double> theorem2_profile(const TailDistribution& f1,
                                            const TailDistribution& f0,
                                            const std::vector<double>& alpha_grid) {
  std::vector<double> out;
  out.reserve(alpha_grid.size());
  for (double a : alpha_grid) {
    if (!(a >= 0.0 && a < 1.0))
      throw std::invalid_argument("theorem2_profile: alpha grid in [0,1)");
    try {
      out.push_back(f1.mean_above(a) - f0.mean_above(a));
    } catch (const std::runtime_error& e) {
      throw std::runtime_error(std::string(e.what()) + " at alpha = " +
                               std::to_string(a));
    }
  }
  return out;
}

}  // namespace trimmed_means

#endif

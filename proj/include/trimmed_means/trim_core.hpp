#ifndef TRIMMED_MEANS_TRIM_CORE_HPP
#define TRIMMED_MEANS_TRIM_CORE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "trimmed_means/trial_data.hpp"

namespace trimmed_means {

struct TrimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrimSpec {
  enum class Policy { Fixed, Adaptive };
  Policy policy = Policy::Adaptive;
  double fixed_alpha = 0.0;

  static TrimSpec adaptive() { return TrimSpec{}; }
  static TrimSpec fixed(double alpha) {
    if (!(alpha >= 0.0 && alpha < 1.0))
      throw TrimError("fixed alpha must be in [0, 1)");
    return TrimSpec{Policy::Fixed, alpha};
  }
};

struct TrimmedEstimate {
  double mu_t1 = 0.0;  // trimmed mean, experimental arm
  double mu_t0 = 0.0;  // trimmed mean, reference arm
  double diff = 0.0;   // mu_t1 - mu_t0
  double alpha_used = 0.0;
  int k1 = 0, k0 = 0;      // trimmed per arm
  int n_t1 = 0, n_t0 = 0;  // retained per arm
  // Worst retained outcome per arm; deleted values beyond this boundary are
  // the ones the trim would have removed anyway (used by the sMNAR metric).
  double boundary1 = 0.0, boundary0 = 0.0;
};

// Total order on records in which every missing record sorts strictly worse
// than every observed one. The worst-observed sentinel of the composite
// outcome is never materialized; this key realizes the same ranking.
struct OrderKey {
  bool observed;
  double oriented_value;  // worse-first ascending
  std::string_view subject_id;

  friend bool operator<(const OrderKey& a, const OrderKey& b) {
    if (a.observed != b.observed) return !a.observed;
    if (a.oriented_value != b.oriented_value)
      return a.oriented_value < b.oriented_value;
    return a.subject_id < b.subject_id;
  }
};

inline OrderKey composite_order_key(const TrialRecord& r, Direction dir) {
  if (!r.outcome) return OrderKey{false, 0.0, r.subject_id};
  const double v = dir == Direction::WorseIsLow ? *r.outcome : -*r.outcome;
  return OrderKey{true, v, r.subject_id};
}

// k = ceil(alpha * n), guarded against fp noise when alpha*n is integral
// (adaptive alpha is a ratio m/n, so alpha*n must recover m exactly).
inline int trim_count(double alpha, int n) {
  return static_cast<int>(std::ceil(alpha * n - 1e-9));
}

inline double resolve_alpha(const TrialDataset& d, const TrimSpec& spec) {
  const auto counts = arm_summary(d);
  const double max_prop =
      std::max(counts[0].missing_prop, counts[1].missing_prop);
  if (spec.policy == TrimSpec::Policy::Adaptive) return max_prop;
  if (spec.fixed_alpha + 1e-12 < max_prop)
    throw TrimError("alpha below missing fraction: fixed alpha " +
                    std::to_string(spec.fixed_alpha) +
                    " < max missing proportion " + std::to_string(max_prop));
  return spec.fixed_alpha;
}

struct TrimmedMeanResult {
  double mean;
  int retained;
};

// One-sided trimmed mean: sort worse-first, drop the first k = ceil(alpha*n),
// average the rest.
inline TrimmedMeanResult trimmed_mean(std::vector<double> values, double alpha,
                                      Direction dir) {
  if (values.empty()) throw TrimError("trimmed_mean of empty sample");
  const int n = static_cast<int>(values.size());
  const int k = trim_count(alpha, n);
  if (k >= n) throw TrimError("trim exhausts arm");
  if (dir == Direction::WorseIsLow)
    std::sort(values.begin(), values.end());
  else
    std::sort(values.begin(), values.end(), std::greater<>());
  double sum = 0.0;
  for (int i = k; i < n; ++i) sum += values[i];
  return TrimmedMeanResult{sum / (n - k), n - k};
}

inline TrimmedEstimate estimate(const TrialDataset& d, const TrimSpec& spec) {
  const double alpha = resolve_alpha(d, spec);
  TrimmedEstimate est;
  est.alpha_used = alpha;
  for (int arm = 0; arm < 2; ++arm) {
    std::vector<const TrialRecord*> recs;
    for (const TrialRecord& r : d.records)
      if (r.arm == arm) recs.push_back(&r);
    std::sort(recs.begin(), recs.end(),
              [dir = d.direction](const TrialRecord* a, const TrialRecord* b) {
                return composite_order_key(*a, dir) <
                       composite_order_key(*b, dir);
              });
    const int n = static_cast<int>(recs.size());
    const int k = trim_count(alpha, n);
    if (k >= n)
      throw TrimError("trim exhausts arm " + std::to_string(arm));
    double sum = 0.0;
    for (int i = k; i < n; ++i) {
      if (!recs[i]->outcome)
        throw TrimError("retained record without outcome in arm " +
                        std::to_string(arm) +
                        " (alpha below missing fraction)");
      sum += *recs[i]->outcome;
    }
    const double mu = sum / (n - k);
    const double boundary = *recs[k]->outcome;
    if (arm == 1) {
      est.mu_t1 = mu;
      est.k1 = k;
      est.n_t1 = n - k;
      est.boundary1 = boundary;
    } else {
      est.mu_t0 = mu;
      est.k0 = k;
      est.n_t0 = n - k;
      est.boundary0 = boundary;
    }
  }
  est.diff = est.mu_t1 - est.mu_t0;
  return est;
}

namespace detail {

// Label-agnostic composite ordering of a whole dataset, shared by the
// permutation and bootstrap engines so each relabeling/resample costs O(n).
struct CompositeOrder {
  std::vector<double> outcome;   // worse-first; unspecified where missing
  std::vector<bool> is_missing;  // worse-first
  std::vector<int> record_index; // position -> original record index
  Direction direction = Direction::WorseIsLow;

  static CompositeOrder build(const TrialDataset& d) {
    CompositeOrder co;
    co.direction = d.direction;
    const int n = static_cast<int>(d.records.size());
    co.record_index.resize(n);
    for (int i = 0; i < n; ++i) co.record_index[i] = i;
    std::sort(co.record_index.begin(), co.record_index.end(),
              [&d](int a, int b) {
                const OrderKey ka = composite_order_key(d.records[a], d.direction);
                const OrderKey kb = composite_order_key(d.records[b], d.direction);
                if (kb < ka) return false;
                if (ka < kb) return true;
                return a < b;
              });
    co.outcome.resize(n);
    co.is_missing.resize(n);
    for (int p = 0; p < n; ++p) {
      const TrialRecord& r = d.records[co.record_index[p]];
      co.is_missing[p] = !r.outcome.has_value();
      co.outcome[p] = r.outcome.value_or(0.0);
    }
    return co;
  }
};

struct FastEstimate {
  double mu1, mu0, diff, alpha;
  bool alpha_raised;  // fixed alpha lifted to the realized missing fraction
};

// Trimmed-means difference for an arbitrary relabeling of the records.
// labels[i] is the arm of original record i. Returns false when the trim
// would exhaust an arm.
inline bool fast_trimmed_diff(const CompositeOrder& co,
                              const std::vector<int>& labels,
                              const TrimSpec& spec, FastEstimate& out) {
  const int n = static_cast<int>(co.outcome.size());
  std::array<int, 2> narm{0, 0}, miss{0, 0};
  for (int p = 0; p < n; ++p) {
    const int a = labels[co.record_index[p]];
    ++narm[a];
    if (co.is_missing[p]) ++miss[a];
  }
  if (narm[0] == 0 || narm[1] == 0) return false;
  const double frac = std::max(static_cast<double>(miss[0]) / narm[0],
                               static_cast<double>(miss[1]) / narm[1]);
  double alpha = frac;
  bool raised = false;
  if (spec.policy == TrimSpec::Policy::Fixed) {
    alpha = spec.fixed_alpha;
    if (alpha + 1e-12 < frac) {
      alpha = frac;  // lifted for this relabeling only, reported to caller
      raised = true;
    }
  }
  std::array<int, 2> k{trim_count(alpha, narm[0]), trim_count(alpha, narm[1])};
  if (k[0] >= narm[0] || k[1] >= narm[1]) return false;
  std::array<int, 2> seen{0, 0};
  std::array<double, 2> sum{0.0, 0.0};
  for (int p = 0; p < n; ++p) {
    const int a = labels[co.record_index[p]];
    if (seen[a]++ >= k[a]) sum[a] += co.outcome[p];
  }
  out.mu1 = sum[1] / (narm[1] - k[1]);
  out.mu0 = sum[0] / (narm[0] - k[0]);
  out.diff = out.mu1 - out.mu0;
  out.alpha = alpha;
  out.alpha_raised = raised;
  return true;
}

}  // namespace detail
}  // namespace trimmed_means

#endif

#ifndef TRIMMED_MEANS_PERM_INFER_HPP
#define TRIMMED_MEANS_PERM_INFER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "trimmed_means/rng.hpp"
#include "trimmed_means/trim_core.hpp"

namespace trimmed_means {

// Order statistic at index ceil(q*n) (1-based) after ascending sort; q=0
// yields the minimum.
inline double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of empty sample");
  std::sort(values.begin(), values.end());
  const int n = static_cast<int>(values.size());
  int idx = static_cast<int>(std::ceil(q * n - 1e-9));
  idx = std::clamp(idx, 1, n);
  return values[idx - 1];
}

struct PermutationResult {
  double observed_diff = 0.0;
  std::vector<double> perm_diffs;
  double p_one_sided = 1.0;
  double p_two_sided = 1.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double gamma = 0.05;
  int B = 0;
  std::uint64_t seed = 0;
  int n_redrawn = 0;       // relabelings redrawn because a trim exhausted an arm
  int n_alpha_raised = 0;  // fixed-alpha relabelings lifted to the missing fraction
};

inline bool benefit_is_negative(Direction dir) {
  // Better outcomes sit opposite the trimmed (worse) tail, so with
  // WorseIsHigh a beneficial treatment difference is negative.
  return dir == Direction::WorseIsHigh;
}

// Percentile rejection rule: the point estimate falls beyond the gamma/2
// percentile of the permutation distribution on the benefit side.
inline bool percentile_rejects(const PermutationResult& r, Direction dir) {
  if (benefit_is_negative(dir))
    return r.observed_diff < percentile(r.perm_diffs, r.gamma / 2.0);
  return r.observed_diff > percentile(r.perm_diffs, 1.0 - r.gamma / 2.0);
}

inline PermutationResult permutation_test(const TrialDataset& d,
                                          const TrimSpec& spec, int B,
                                          double gamma, std::uint64_t seed) {
  if (B < 1) throw std::invalid_argument("permutation_test: B must be >= 1");
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::invalid_argument("permutation_test: gamma must be in (0, 1)");
  const TrimmedEstimate obs = estimate(d, spec);

  const auto co = detail::CompositeOrder::build(d);
  const int n = static_cast<int>(d.records.size());
  std::vector<int> base_labels(n);
  for (int i = 0; i < n; ++i) base_labels[i] = d.records[i].arm;

  PermutationResult res;
  res.observed_diff = obs.diff;
  res.gamma = gamma;
  res.B = B;
  res.seed = seed;
  res.perm_diffs.reserve(B);

  std::vector<int> labels;
  for (int i = 0; i < B; ++i) {
    detail::FastEstimate fe;
    // Relabeling i draws from a stream derived from (seed, i); a relabeling
    // that exhausts an arm is redrawn from (seed, i, attempt).
    for (std::uint64_t attempt = 0;; ++attempt) {
      Rng rng = attempt == 0 ? make_stream(seed, std::uint64_t(i))
                             : make_stream(seed, std::uint64_t(i), attempt);
      labels = base_labels;
      std::shuffle(labels.begin(), labels.end(), rng);
      if (detail::fast_trimmed_diff(co, labels, spec, fe)) break;
      ++res.n_redrawn;
      if (attempt > 1000)
        throw TrimError("permutation_test: cannot draw a valid relabeling");
    }
    if (fe.alpha_raised) ++res.n_alpha_raised;
    res.perm_diffs.push_back(fe.diff);
  }

  int count_one = 0, count_two = 0;
  const bool neg = benefit_is_negative(d.direction);
  for (double p : res.perm_diffs) {
    if (neg ? p <= res.observed_diff : p >= res.observed_diff) ++count_one;
    if (std::fabs(p) >= std::fabs(res.observed_diff)) ++count_two;
  }
  res.p_one_sided = (1.0 + count_one) / (B + 1.0);
  res.p_two_sided = (1.0 + count_two) / (B + 1.0);
  res.ci_low = res.observed_diff + percentile(res.perm_diffs, gamma / 2.0);
  res.ci_high = res.observed_diff + percentile(res.perm_diffs, 1.0 - gamma / 2.0);
  return res;
}

struct BootstrapResult {
  double se = 0.0;
  int B_boot = 0;
  int n_redrawn = 0;
  int n_alpha_raised = 0;
};

// Bootstrap SE of the trimmed-means difference: subjects are resampled with
// replacement within each arm, missingness travels with the subject, and
// alpha is re-resolved per resample.
inline BootstrapResult bootstrap_se_detail(const TrialDataset& d,
                                           const TrimSpec& spec, int B_boot,
                                           std::uint64_t seed) {
  if (B_boot < 2) throw std::invalid_argument("bootstrap_se: B_boot must be >= 2");
  const auto co = detail::CompositeOrder::build(d);
  const int n = static_cast<int>(co.outcome.size());

  // Per-arm views of the composite order; missing records form a prefix.
  std::array<std::vector<int>, 2> arm_pos;  // positions into co, worse-first
  std::array<int, 2> arm_miss{0, 0};
  for (int p = 0; p < n; ++p) {
    const int a = d.records[co.record_index[p]].arm;
    arm_pos[a].push_back(p);
    if (co.is_missing[p]) ++arm_miss[a];
  }

  BootstrapResult out;
  out.B_boot = B_boot;
  std::vector<double> diffs;
  diffs.reserve(B_boot);
  std::array<std::vector<int>, 2> counts{
      std::vector<int>(arm_pos[0].size()), std::vector<int>(arm_pos[1].size())};

  for (int b = 0; b < B_boot; ++b) {
    for (std::uint64_t attempt = 0;; ++attempt) {
      Rng rng = attempt == 0 ? make_stream(seed, std::uint64_t(b))
                             : make_stream(seed, std::uint64_t(b), attempt);
      std::array<int, 2> miss{0, 0}, narm{};
      std::array<double, 2> mu{0.0, 0.0};
      bool ok = true;
      bool raised = false;
      std::array<double, 2> fracs{0.0, 0.0};
      for (int a = 0; a < 2; ++a) {
        const int na = static_cast<int>(arm_pos[a].size());
        narm[a] = na;
        std::fill(counts[a].begin(), counts[a].end(), 0);
        std::uniform_int_distribution<int> pick(0, na - 1);
        for (int j = 0; j < na; ++j) ++counts[a][pick(rng)];
        for (int j = 0; j < arm_miss[a]; ++j) miss[a] += counts[a][j];
        fracs[a] = static_cast<double>(miss[a]) / na;
      }
      double alpha = std::max(fracs[0], fracs[1]);
      if (spec.policy == TrimSpec::Policy::Fixed) {
        if (spec.fixed_alpha + 1e-12 < alpha)
          raised = true;
        else
          alpha = spec.fixed_alpha;
      }
      for (int a = 0; a < 2 && ok; ++a) {
        const int na = narm[a];
        const int k = trim_count(alpha, na);
        if (k >= na) {
          ok = false;
          break;
        }
        int skipped = 0;
        double sum = 0.0;
        for (std::size_t j = 0; j < arm_pos[a].size(); ++j) {
          int c = counts[a][j];
          if (skipped < k) {
            const int t = std::min(c, k - skipped);
            skipped += t;
            c -= t;
          }
          if (c > 0) sum += c * co.outcome[arm_pos[a][j]];
        }
        mu[a] = sum / (na - k);
      }
      if (ok) {
        if (raised) ++out.n_alpha_raised;
        diffs.push_back(mu[1] - mu[0]);
        break;
      }
      ++out.n_redrawn;
      if (attempt > 1000)
        throw TrimError("bootstrap_se: cannot draw a valid resample");
    }
  }
  double m = 0.0;
  for (double v : diffs) m += v;
  m /= diffs.size();
  double ss = 0.0;
  for (double v : diffs) ss += (v - m) * (v - m);
  out.se = std::sqrt(ss / (diffs.size() - 1));
  return out;
}

inline double bootstrap_se(const TrialDataset& d, const TrimSpec& spec,
                           int B_boot, std::uint64_t seed) {
  return bootstrap_se_detail(d, spec, B_boot, seed).se;
}

}  // namespace trimmed_means

#endif

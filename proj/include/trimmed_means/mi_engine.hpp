#ifndef TRIMMED_MEANS_MI_ENGINE_HPP
#define TRIMMED_MEANS_MI_ENGINE_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "trimmed_means/perm_infer.hpp"
#include "trimmed_means/rng.hpp"
#include "trimmed_means/stats.hpp"
#include "trimmed_means/trim_core.hpp"

namespace trimmed_means {

struct MiError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ImputationConfig {
  int m = 20;
  std::uint64_t seed = 0;
  bool include_covariates = true;
};

enum class MiAnalysis {
  MeanDiff,  // impute every missing outcome, analyze arm-mean difference
  Trimmed,   // impute MAR-coded outcomes only, trim the MNAR-coded ones
};

struct PooledEstimate {
  double mean = 0.0;
  double within_var = 0.0;
  double between_var = 0.0;
  double total_var = 0.0;
  double se = 0.0;
  std::vector<std::pair<double, double>> per_imputation;  // (estimate, se)
  double ci_low = 0.0;
  double ci_high = 0.0;
  double p_value = 1.0;
  int m = 0;
  int n_targets = 0;          // imputed records per dataset
  bool degenerate = false;    // no imputation targets; collapses to one analysis
  std::optional<double> alpha_used;  // combination mode: trim fraction applied
  double mean_arm1 = 0.0, mean_arm0 = 0.0;  // per-arm analyses averaged over imputations
};

// Rubin's rules over per-imputation (estimate, se) pairs; CI and p from the
// standard normal reference.
inline PooledEstimate pool_rubin(
    const std::vector<std::pair<double, double>>& per_imputation,
    double gamma = 0.05) {
  const int m = static_cast<int>(per_imputation.size());
  if (m < 2) throw MiError("pooling needs m >= 2 imputations");
  PooledEstimate p;
  p.m = m;
  p.per_imputation = per_imputation;
  for (const auto& [est, se] : per_imputation) {
    p.mean += est;
    p.within_var += se * se;
  }
  p.mean /= m;
  p.within_var /= m;
  for (const auto& [est, se] : per_imputation)
    p.between_var += (est - p.mean) * (est - p.mean);
  p.between_var /= (m - 1);
  p.total_var = p.within_var + (1.0 + 1.0 / m) * p.between_var;
  p.se = std::sqrt(p.total_var);
  const double z = normal_quantile(1.0 - gamma / 2.0);
  p.ci_low = p.mean - z * p.se;
  p.ci_high = p.mean + z * p.se;
  p.p_value = p.se > 0.0
                  ? 2.0 * (1.0 - normal_cdf(std::fabs(p.mean) / p.se))
                  : (p.mean == 0.0 ? 1.0 : 0.0);
  return p;
}

// One posterior draw from the Bayesian normal linear regression
// y ~ N([1, A, X] beta, sigma^2), fit on observed records:
//   sigma^2* = SSE / chi2_{n_obs - p},  beta* ~ N(beta_hat, sigma^2* (X'X)^-1),
// then each target outcome is x beta* + sigma* z.
inline std::vector<std::optional<double>> impute_once(
    const TrialDataset& d, const std::vector<int>& targets, Rng& rng,
    bool include_covariates = true) {
  const int n = static_cast<int>(d.records.size());
  const std::size_t ncov =
      include_covariates && !d.records.empty() ? d.records.front().covariates.size()
                                               : 0;
  const int p = 2 + static_cast<int>(ncov);

  std::vector<int> obs_idx;
  for (int i = 0; i < n; ++i)
    if (d.records[i].outcome) obs_idx.push_back(i);
  const int n_obs = static_cast<int>(obs_idx.size());
  if (n_obs <= p)
    throw MiError("imputation model needs more observed records than columns (" +
                  std::to_string(n_obs) + " <= " + std::to_string(p) + ")");
  for (int t : targets)
    if (d.records[t].outcome)
      throw MiError("imputation target " + std::to_string(t) + " is observed");

  auto design_row = [&](const TrialRecord& r, Eigen::RowVectorXd& x) {
    x(0) = 1.0;
    x(1) = r.arm;
    for (std::size_t c = 0; c < ncov; ++c) x(2 + c) = r.covariates[c];
  };

  Eigen::MatrixXd X(n_obs, p);
  Eigen::VectorXd y(n_obs);
  Eigen::RowVectorXd xrow(p);
  for (int i = 0; i < n_obs; ++i) {
    design_row(d.records[obs_idx[i]], xrow);
    X.row(i) = xrow;
    y(i) = *d.records[obs_idx[i]].outcome;
  }

  const Eigen::MatrixXd xtx = X.transpose() * X;
  Eigen::LLT<Eigen::MatrixXd> llt(xtx);
  if (llt.info() != Eigen::Success) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(xtx);
    std::string cols;
    for (int c = lu.rank(); c < p; ++c)
      cols += (cols.empty() ? "" : ", ") + std::to_string(c);
    throw MiError("rank-deficient imputation design; collinear columns beyond rank " +
                  std::to_string(lu.rank()) + " (of " + std::to_string(p) + ")");
  }
  const Eigen::VectorXd beta_hat = llt.solve(X.transpose() * y);
  const double sse = (y - X * beta_hat).squaredNorm();

  std::chi_squared_distribution<double> chi2(n_obs - p);
  std::normal_distribution<double> stdnorm(0.0, 1.0);
  const double sigma2_star = sse / chi2(rng);
  const double sigma_star = std::sqrt(sigma2_star);

  // beta* = beta_hat + sigma* L^-T z with X'X = L L'.
  Eigen::VectorXd z(p);
  for (int j = 0; j < p; ++j) z(j) = stdnorm(rng);
  const Eigen::VectorXd beta_star =
      beta_hat +
      sigma_star * llt.matrixU().solve(z);

  std::vector<std::optional<double>> completed(n);
  for (int i = 0; i < n; ++i) completed[i] = d.records[i].outcome;
  for (int t : targets) {
    design_row(d.records[t], xrow);
    completed[t] = xrow.dot(beta_star) + sigma_star * stdnorm(rng);
  }
  return completed;
}

namespace detail {

inline std::vector<int> mi_targets(const TrialDataset& d, MiAnalysis analysis) {
  std::vector<int> targets;
  for (int i = 0; i < static_cast<int>(d.records.size()); ++i) {
    const MissReason r = d.records[i].reason;
    if (r == MissReason::Observed) continue;
    if (analysis == MiAnalysis::MeanDiff || r == MissReason::MarLike)
      targets.push_back(i);
  }
  return targets;
}

inline TrialDataset complete_with(const TrialDataset& d,
                                  const std::vector<std::optional<double>>& filled,
                                  const std::vector<int>& targets) {
  TrialDataset out = d;
  for (int t : targets) {
    out.records[t].outcome = filled[t];
    out.records[t].reason = MissReason::Observed;
  }
  return out;
}

}  // namespace detail

inline PooledEstimate mi_analyze(const TrialDataset& d,
                                 const ImputationConfig& cfg,
                                 MiAnalysis analysis, double gamma = 0.05,
                                 int B_boot = 500) {
  if (cfg.m < 2) throw MiError("ImputationConfig.m must be >= 2");
  const std::vector<int> targets = detail::mi_targets(d, analysis);

  std::vector<std::pair<double, double>> per_imp;
  per_imp.reserve(cfg.m);
  std::optional<double> alpha_used;
  double arm1_acc = 0.0, arm0_acc = 0.0;
  for (int l = 0; l < cfg.m; ++l) {
    Rng rng = make_stream(cfg.seed, std::uint64_t(l), std::uint64_t(0x1417));
    const auto filled = impute_once(d, targets, rng, cfg.include_covariates);
    const TrialDataset completed = detail::complete_with(d, filled, targets);
    if (analysis == MiAnalysis::MeanDiff) {
      const auto y1 = observed_outcomes(completed, 1);
      const auto y0 = observed_outcomes(completed, 0);
      const double m1 = mean(y1), m0 = mean(y0);
      const double se = std::sqrt(sample_variance(y1) / y1.size() +
                                  sample_variance(y0) / y0.size());
      per_imp.emplace_back(m1 - m0, se);
      arm1_acc += m1;
      arm0_acc += m0;
    } else {
      const TrimSpec spec = TrimSpec::adaptive();
      const TrimmedEstimate est = estimate(completed, spec);
      alpha_used = est.alpha_used;
      const double se = bootstrap_se(
          completed, spec, B_boot,
          mix_seed(cfg.seed, std::uint64_t(l), std::uint64_t(0xb007)));
      per_imp.emplace_back(est.diff, se);
      arm1_acc += est.mu_t1;
      arm0_acc += est.mu_t0;
    }
  }
  PooledEstimate pooled = pool_rubin(per_imp, gamma);
  pooled.n_targets = static_cast<int>(targets.size());
  pooled.degenerate = targets.empty();
  pooled.alpha_used = alpha_used;
  pooled.mean_arm1 = arm1_acc / cfg.m;
  pooled.mean_arm0 = arm0_acc / cfg.m;
  return pooled;
}

struct CompleteCaseResult {
  double diff, se, ci_low, ci_high, p_value, df;
};

// Observed-only arm-mean difference with Welch inference.
inline CompleteCaseResult complete_case(const TrialDataset& d,
                                        double gamma = 0.05) {
  const auto y1 = observed_outcomes(d, 1);
  const auto y0 = observed_outcomes(d, 0);
  if (y1.size() < 2 || y0.size() < 2)
    throw MiError("complete_case: each arm needs >= 2 observed records");
  const WelchResult w = welch_two_sample(y1, y0, gamma);
  return CompleteCaseResult{w.diff, w.se, w.ci_low, w.ci_high, w.p_two_sided,
                            w.df};
}

}  // namespace trimmed_means

#endif

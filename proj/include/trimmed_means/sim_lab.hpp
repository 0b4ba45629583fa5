#ifndef TRIMMED_MEANS_SIM_LAB_HPP
#define TRIMMED_MEANS_SIM_LAB_HPP

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "trimmed_means/diagnostics.hpp"
#include "trimmed_means/mi_engine.hpp"
#include "trimmed_means/perm_infer.hpp"
#include "trimmed_means/rng.hpp"
#include "trimmed_means/stats.hpp"
#include "trimmed_means/trial_data.hpp"
#include "trimmed_means/trim_core.hpp"

namespace trimmed_means {

struct SimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Mechanism { Mcar, Mar, Mnar, Mixture };

enum class MethodKind {
  TrimmedAdaptive,
  TrimmedFixed,
  MiGlobal,
  TrimPlusMi,
  CompleteCase,
};

struct MethodSpec {
  MethodKind kind = MethodKind::TrimmedAdaptive;
  double fixed_alpha = 0.5;  // TrimmedFixed only
  int table = 0;             // built-in suite table this cell feeds, 0 = none

  std::string name() const {
    switch (kind) {
      case MethodKind::TrimmedAdaptive: return "trimmed-adaptive";
      case MethodKind::TrimmedFixed: {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "trimmed-fixed:%g", fixed_alpha);
        return buf;
      }
      case MethodKind::MiGlobal: return "mi";
      case MethodKind::TrimPlusMi: return "trimmed+mi";
      case MethodKind::CompleteCase: return "complete-case";
    }
    return "?";
  }
};

inline MethodSpec parse_method(const std::string& s) {
  if (s == "trimmed-adaptive" || s == "trimmed")
    return MethodSpec{MethodKind::TrimmedAdaptive};
  if (s.rfind("trimmed-fixed:", 0) == 0) {
    MethodSpec m{MethodKind::TrimmedFixed};
    m.fixed_alpha = std::stod(s.substr(14));
    return m;
  }
  if (s == "mi") return MethodSpec{MethodKind::MiGlobal};
  if (s == "trimmed+mi") return MethodSpec{MethodKind::TrimPlusMi};
  if (s == "complete-case") return MethodSpec{MethodKind::CompleteCase};
  throw SimError("unknown method: '" + s + "'");
}

// One simulation cell: outcome model Y = beta0 + betaA*A + N(0, sigma^2),
// missingness logit Pr(R=1 | A, Y) = logit^-1(a0 + aA*A + aY*Y). Mixture
// cells delete MNAR via the logit first, then MAR in the experimental arm,
// then MCAR in both arms.
struct ScenarioSpec {
  std::string id;
  Mechanism mechanism = Mechanism::Mcar;
  int n_per_arm = 50;
  double beta0 = -1.0;
  double beta_a = -1.0;
  double sigma = 1.5;
  double a0 = 0.0, a_a = 0.0, a_y = 0.0;
  double mixture_mar_rate_exp = 0.0;  // target MAR fraction of n, arm 1 only
  double mixture_mcar_rate = 0.0;     // target MCAR fraction of n, both arms
  int K = 5000;
  int B = 1000;
  int B_boot = 500;
  int m = 20;
  double gamma = 0.05;
  std::uint64_t master_seed = 0;
  std::vector<MethodSpec> methods;

  // Scenario validity plus mechanism/coefficient consistency; returns
  // warnings rather than failing on a mismatched declaration.
  std::vector<std::string> validate() const {
    if (n_per_arm < 2) throw SimError(id + ": n_per_arm must be >= 2");
    if (sigma <= 0.0) throw SimError(id + ": sigma must be positive");
    if (K < 1) throw SimError(id + ": K must be >= 1");
    if (B < 1) throw SimError(id + ": B must be >= 1");
    if (!(gamma > 0.0 && gamma < 1.0)) throw SimError(id + ": gamma in (0,1)");
    if (mixture_mar_rate_exp < 0.0 || mixture_mar_rate_exp > 1.0 ||
        mixture_mcar_rate < 0.0 || mixture_mcar_rate > 1.0)
      throw SimError(id + ": mixture rates must lie in [0,1]");
    if (methods.empty()) throw SimError(id + ": no methods requested");
    std::vector<std::string> warnings;
    if (mechanism == Mechanism::Mcar && (a_a != 0.0 || a_y != 0.0))
      warnings.push_back(id + ": MCAR declared but aA or aY nonzero");
    if (mechanism == Mechanism::Mar && a_y != 0.0)
      warnings.push_back(id + ": MAR declared but aY nonzero");
    return warnings;
  }
};

struct HiddenTruth {
  std::array<std::vector<double>, 2> deleted_true;  // per arm
};

// One replication: draws outcomes, applies the deletion mechanism, and keeps
// the true values of deleted records for the sMNAR diagnostic. Direction is
// WorseIsHigh (lower outcomes are better), so the upper tail is trimmed.
inline std::pair<TrialDataset, HiddenTruth> generate_replication(
    const ScenarioSpec& spec, int rep_index) {
  Rng rng = make_stream(spec.master_seed, hash_string(spec.id),
                        std::uint64_t(rep_index), std::uint64_t(0xda7a));
  std::normal_distribution<double> noise(0.0, spec.sigma);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const int n = spec.n_per_arm;
  TrialDataset d;
  d.direction = Direction::WorseIsHigh;
  d.records.reserve(2 * n);
  std::vector<double> truth(2 * n);
  for (int i = 0; i < 2 * n; ++i) {
    TrialRecord r;
    r.arm = i < n ? 1 : 0;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "s%04d", i + 1);
    r.subject_id = buf;
    truth[i] = spec.beta0 + spec.beta_a * r.arm + noise(rng);
    r.outcome = truth[i];
    d.records.push_back(std::move(r));
  }

  HiddenTruth ht;
  auto erase_outcome = [&](int i, MissReason why) {
    TrialRecord& r = d.records[i];
    r.outcome.reset();
    r.reason = why;
    ht.deleted_true[r.arm].push_back(truth[i]);
  };

  if (spec.mechanism != Mechanism::Mixture) {
    const MissReason why = spec.mechanism == Mechanism::Mnar
                               ? MissReason::MnarLike
                               : MissReason::MarLike;
    for (int i = 0; i < 2 * n; ++i) {
      const double p_obs =
          inv_logit(spec.a0 + spec.a_a * d.records[i].arm + spec.a_y * truth[i]);
      if (unif(rng) >= p_obs) erase_outcome(i, why);
    }
  } else {
    // MNAR deletions first (logit), then MAR in the experimental arm, then
    // MCAR in both arms; later passes condition on the realized survivor
    // fraction so the target rates stay fractions of n.
    std::array<int, 2> deleted{0, 0};
    for (int i = 0; i < 2 * n; ++i) {
      const double p_obs = inv_logit(spec.a0 + spec.a_y * truth[i]);
      if (unif(rng) >= p_obs) {
        erase_outcome(i, MissReason::MnarLike);
        ++deleted[d.records[i].arm];
      }
    }
    const double surv1 = 1.0 - static_cast<double>(deleted[1]) / n;
    const double p_mar =
        surv1 > 0.0 ? std::min(1.0, spec.mixture_mar_rate_exp / surv1) : 0.0;
    for (int i = 0; i < 2 * n; ++i) {
      if (d.records[i].arm != 1 || !d.records[i].outcome) continue;
      if (unif(rng) < p_mar) {
        erase_outcome(i, MissReason::MarLike);
        ++deleted[1];
      }
    }
    std::array<double, 2> surv{1.0 - static_cast<double>(deleted[0]) / n,
                               1.0 - static_cast<double>(deleted[1]) / n};
    for (int i = 0; i < 2 * n; ++i) {
      if (!d.records[i].outcome) continue;
      const int a = d.records[i].arm;
      const double p_mcar =
          surv[a] > 0.0 ? std::min(1.0, spec.mixture_mcar_rate / surv[a]) : 0.0;
      if (unif(rng) < p_mcar) erase_outcome(i, MissReason::MarLike);
    }
  }
  return {std::move(d), std::move(ht)};
}

struct ScenarioSummary {
  std::string scenario_id;
  std::string method;
  int table = 0;
  double mean_arm1 = 0.0, mean_arm0 = 0.0;
  double mean_diff = 0.0;
  double pct_bias = 0.0;  // 100 * (beta_a - mean_diff) / beta_a
  double coverage = 0.0;
  double power = 0.0;
  double se_mc = 0.0;  // SD of estimates over replications
  double mse = 0.0;
  std::optional<double> smnar_mean;
  std::array<double, 2> realized_missing{0.0, 0.0};  // {arm0, arm1}
  int K = 0;
  int failures = 0;
};

namespace detail {

struct RepMethodOutcome {
  double est = 0.0, mu1 = 0.0, mu0 = 0.0;
  bool cover = false, reject = false;
  std::optional<double> smnar;
  bool failed = false;
};

struct RepResult {
  std::array<double, 2> missing_frac{0.0, 0.0};
  std::vector<RepMethodOutcome> methods;
};

inline RepMethodOutcome apply_method(const TrialDataset& data,
                                     const HiddenTruth& truth,
                                     const ScenarioSpec& spec,
                                     const MethodSpec& method, int rep) {
  RepMethodOutcome out;
  const std::uint64_t id_hash = hash_string(spec.id);
  const std::uint64_t method_hash = hash_string(method.name());
  try {
    switch (method.kind) {
      case MethodKind::TrimmedAdaptive:
      case MethodKind::TrimmedFixed: {
        const TrimSpec ts = method.kind == MethodKind::TrimmedAdaptive
                                ? TrimSpec::adaptive()
                                : TrimSpec::fixed(method.fixed_alpha);
        const TrimmedEstimate est = estimate(data, ts);
        const PermutationResult perm = permutation_test(
            data, ts, spec.B, spec.gamma,
            mix_seed(spec.master_seed, id_hash, std::uint64_t(rep), method_hash,
                     std::uint64_t(0x9e61)));
        out.est = est.diff;
        out.mu1 = est.mu_t1;
        out.mu0 = est.mu_t0;
        out.cover = perm.ci_low <= spec.beta_a && spec.beta_a <= perm.ci_high;
        out.reject = percentile_rejects(perm, data.direction);
        out.smnar = smnar_fraction(truth.deleted_true,
                                   {est.boundary0, est.boundary1},
                                   data.direction);
        break;
      }
      case MethodKind::MiGlobal:
      case MethodKind::TrimPlusMi: {
        ImputationConfig cfg;
        cfg.m = spec.m;
        cfg.seed = mix_seed(spec.master_seed, id_hash, std::uint64_t(rep),
                            method_hash, std::uint64_t(0x313));
        const MiAnalysis analysis = method.kind == MethodKind::MiGlobal
                                        ? MiAnalysis::MeanDiff
                                        : MiAnalysis::Trimmed;
        const PooledEstimate pe =
            mi_analyze(data, cfg, analysis, spec.gamma, spec.B_boot);
        out.est = pe.mean;
        out.mu1 = pe.mean_arm1;
        out.mu0 = pe.mean_arm0;
        out.cover = pe.ci_low <= spec.beta_a && spec.beta_a <= pe.ci_high;
        out.reject = pe.p_value < spec.gamma;
        break;
      }
      case MethodKind::CompleteCase: {
        const CompleteCaseResult cc = complete_case(data, spec.gamma);
        out.est = cc.diff;
        out.mu1 = mean(observed_outcomes(data, 1));
        out.mu0 = mean(observed_outcomes(data, 0));
        out.cover = cc.ci_low <= spec.beta_a && spec.beta_a <= cc.ci_high;
        out.reject = cc.p_value < spec.gamma;
        break;
      }
    }
  } catch (const std::exception&) {
    out.failed = true;
  }
  return out;
}

inline RepResult run_replication(const ScenarioSpec& spec, int rep) {
  auto [data, truth] = generate_replication(spec, rep);
  RepResult rr;
  const auto counts = arm_summary(data);
  rr.missing_frac = {counts[0].missing_prop, counts[1].missing_prop};
  rr.methods.reserve(spec.methods.size());
  for (const MethodSpec& m : spec.methods)
    rr.methods.push_back(apply_method(data, truth, spec, m, rep));
  return rr;
}

}  // namespace detail

// Runs K replications (parallel over `workers` threads) and aggregates one
// summary per method. Replication r derives all randomness from
// (master_seed, scenario id, r), and per-replication results are reduced in
// index order, so summaries are identical for any worker count.
inline std::vector<ScenarioSummary> run_scenario(const ScenarioSpec& spec,
                                                 int workers = 1) {
  spec.validate();
  const int K = spec.K;
  std::vector<detail::RepResult> results(K);
  workers = std::max(1, workers);
  if (workers == 1) {
    for (int r = 0; r < K; ++r) results[r] = detail::run_replication(spec, r);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int r = next.fetch_add(1); r < K; r = next.fetch_add(1))
          results[r] = detail::run_replication(spec, r);
      });
    for (auto& t : pool) t.join();
  }

  std::vector<ScenarioSummary> out;
  for (std::size_t mi = 0; mi < spec.methods.size(); ++mi) {
    ScenarioSummary s;
    s.scenario_id = spec.id;
    s.method = spec.methods[mi].name();
    s.table = spec.methods[mi].table;
    double sum = 0.0, sum_mu1 = 0.0, sum_mu0 = 0.0;
    double mse_acc = 0.0;
    double smnar_acc = 0.0;
    int n_ok = 0, n_cover = 0, n_reject = 0, n_smnar = 0;
    for (int r = 0; r < K; ++r) {
      const auto& o = results[r].methods[mi];
      if (o.failed) {
        ++s.failures;
        continue;
      }
      ++n_ok;
      sum += o.est;
      sum_mu1 += o.mu1;
      sum_mu0 += o.mu0;
      mse_acc += (o.est - spec.beta_a) * (o.est - spec.beta_a);
      if (o.cover) ++n_cover;
      if (o.reject) ++n_reject;
      if (o.smnar) {
        smnar_acc += *o.smnar;
        ++n_smnar;
      }
    }
    if (s.failures > K / 100)
      throw SimError(spec.id + "/" + s.method + ": " +
                     std::to_string(s.failures) + " of " + std::to_string(K) +
                     " replications failed");
    if (n_ok == 0) throw SimError(spec.id + "/" + s.method + ": no replications");
    s.K = n_ok;
    s.mean_diff = sum / n_ok;
    s.mean_arm1 = sum_mu1 / n_ok;
    s.mean_arm0 = sum_mu0 / n_ok;
    s.pct_bias = 100.0 * (spec.beta_a - s.mean_diff) / spec.beta_a;
    s.coverage = static_cast<double>(n_cover) / n_ok;
    s.power = static_cast<double>(n_reject) / n_ok;
    s.mse = mse_acc / n_ok;
    // population SD so that mse = se_mc^2 + bias^2 holds exactly
    const double var =
        s.mse - (s.mean_diff - spec.beta_a) * (s.mean_diff - spec.beta_a);
    s.se_mc = std::sqrt(std::max(0.0, var));
    if (n_smnar > 0) s.smnar_mean = smnar_acc / n_smnar;
    for (int r = 0; r < K; ++r) {
      s.realized_missing[0] += results[r].missing_frac[0];
      s.realized_missing[1] += results[r].missing_frac[1];
    }
    s.realized_missing[0] /= K;
    s.realized_missing[1] /= K;
    out.push_back(std::move(s));
  }
  return out;
}

// Welch one-sided t-test rejection toward benefit; benchmark utility for the
// no-missing-data power calibration.
inline bool t_test_rejects_one_sided(const TrialDataset& d, double level) {
  const auto y1 = observed_outcomes(d, 1);
  const auto y0 = observed_outcomes(d, 0);
  const WelchResult w = welch_two_sample(y1, y0, 2.0 * level);
  const double t = w.diff / w.se;
  const double p = benefit_is_negative(d.direction)
                       ? student_t_cdf(t, w.df)
                       : 1.0 - student_t_cdf(t, w.df);
  return p < level;
}

// The full simulation grid behind the paper-style tables 1-10.
inline std::vector<ScenarioSpec> paper_suite(std::uint64_t master_seed = 0) {
  std::vector<ScenarioSpec> suite;
  auto cell = [&](std::string id, Mechanism mech) {
    ScenarioSpec s;
    s.id = std::move(id);
    s.mechanism = mech;
    s.master_seed = master_seed;
    return s;
  };
  auto trimmed = [](int table) {
    MethodSpec m{MethodKind::TrimmedAdaptive};
    m.table = table;
    return m;
  };
  auto mi = [](int table) {
    MethodSpec m{MethodKind::MiGlobal};
    m.table = table;
    return m;
  };

  // (a) MCAR: tables 1 (trimmed) and 2 (MI)
  const std::array<std::pair<double, int>, 4> mcar{{{2.94, 5}, {2.20, 10}, {1.74, 15}, {1.39, 20}}};
  for (auto [a0, rate] : mcar) {
    ScenarioSpec s = cell("mcar_" + std::to_string(rate), Mechanism::Mcar);
    s.a0 = a0;
    s.methods = {trimmed(1), mi(2)};
    suite.push_back(std::move(s));
  }

  // (b) MAR: tables 3 (trimmed) and 4 (MI); experimental-arm dropout first,
  // then the reference-arm mirror
  const std::array<std::pair<double, int>, 4> mar_exp{{{-8.61, 20}, {-8.27, 15}, {-7.80, 10}, {-7.06, 5}}};
  for (auto [aa, rate] : mar_exp) {
    ScenarioSpec s = cell("mar_exp_" + std::to_string(rate), Mechanism::Mar);
    s.a0 = 10.0;
    s.a_a = aa;
    s.methods = {trimmed(3), mi(4)};
    suite.push_back(std::move(s));
  }
  const std::array<std::pair<double, int>, 4> mar_ref{{{2.94, 5}, {2.20, 10}, {1.73, 15}, {1.39, 20}}};
  for (auto [a0, rate] : mar_ref) {
    ScenarioSpec s = cell("mar_ref_" + std::to_string(rate), Mechanism::Mar);
    s.a0 = a0;
    s.a_a = 10.0;
    s.methods = {trimmed(3), mi(4)};
    suite.push_back(std::move(s));
  }

  // (c) MNAR: tables 5 (trimmed) and 6 (MI)
  const std::array<double, 4> mnar_ay{-1.0, -2.5, -5.0, -10.0};
  for (double ay : mnar_ay) {
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "mnar_ay%g", ay);
    ScenarioSpec s = cell(idbuf, Mechanism::Mnar);
    s.a0 = 2.85;
    s.a_y = ay;
    s.methods = {trimmed(5), mi(6)};
    suite.push_back(std::move(s));
  }

  // (d) mixture: tables 7 (trimmed), 8 (MI), 9 (combination)
  const std::array<std::pair<double, double>, 4> mixture{
      {{-1.0, 0.23}, {-2.5, 0.17}, {-5.0, 0.10}, {-10.0, 0.03}}};
  for (std::size_t i = 0; i < mixture.size(); ++i) {
    ScenarioSpec s = cell("mixture_" + std::to_string(i + 1), Mechanism::Mixture);
    s.a0 = 2.85;
    s.a_y = mixture[i].first;
    s.mixture_mar_rate_exp = mixture[i].second;
    s.mixture_mcar_rate = 0.05;
    MethodSpec combo{MethodKind::TrimPlusMi};
    combo.table = 9;
    s.methods = {trimmed(7), mi(8), combo};
    suite.push_back(std::move(s));
  }

  // (e) choice of alpha: table 10, adaptive vs fixed 0.5, one cell per policy
  const std::array<double, 10> e_ay{-0.5, -1.0, -1.5, -2.0, -2.5,
                                    -3.0, -4.0, -5.0, -7.5, -10.0};
  for (std::size_t i = 0; i < e_ay.size(); ++i) {
    for (int fixed = 0; fixed < 2; ++fixed) {
      ScenarioSpec s =
          cell("e_" + std::to_string(i + 1) + (fixed ? "_fixed" : "_adaptive"),
               Mechanism::Mnar);
      s.a0 = 2.85;
      s.a_y = e_ay[i];
      MethodSpec m;
      if (fixed) {
        m.kind = MethodKind::TrimmedFixed;
        m.fixed_alpha = 0.5;
      }
      m.table = 10;
      s.methods = {m};
      suite.push_back(std::move(s));
    }
  }
  return suite;
}

inline std::vector<ScenarioSpec> suite_for_table(int table,
                                                 std::uint64_t master_seed = 0) {
  std::vector<ScenarioSpec> out;
  for (ScenarioSpec& s : paper_suite(master_seed)) {
    std::vector<MethodSpec> keep;
    for (const MethodSpec& m : s.methods)
      if (m.table == table) keep.push_back(m);
    if (!keep.empty()) {
      s.methods = std::move(keep);
      out.push_back(std::move(s));
    }
  }
  if (out.empty()) throw SimError("no suite table " + std::to_string(table));
  return out;
}

}  // namespace trimmed_means

#endif

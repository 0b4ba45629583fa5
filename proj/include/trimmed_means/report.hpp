#ifndef TRIMMED_MEANS_REPORT_HPP
#define TRIMMED_MEANS_REPORT_HPP

#include <cstdio>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "trimmed_means/diagnostics.hpp"
#include "trimmed_means/mi_engine.hpp"
#include "trimmed_means/perm_infer.hpp"
#include "trimmed_means/sim_lab.hpp"

namespace trimmed_means {

using nlohmann::json;

struct AnalysisParams {
  std::vector<std::string> methods{"trimmed", "trimmed+mi", "mi",
                                   "complete-case"};
  TrimSpec trim = TrimSpec::adaptive();
  int m = 20;
  int B = 1000;
  int B_boot = 500;
  double gamma = 0.05;
  std::uint64_t seed = 0;
  std::optional<double> ks_shift;  // default: the trimmed-means difference
};

struct MethodRow {
  std::string method;
  double diff = 0.0, se = 0.0, ci_low = 0.0, ci_high = 0.0, p_value = 1.0;
  std::optional<double> alpha_used;
  std::string note;
};

struct AnalysisReport {
  std::vector<MethodRow> rows;
  std::array<ArmCounts, 2> arms{};
  std::optional<KsResult> ks;
  AnalysisParams params;
  Direction direction = Direction::WorseIsLow;
};

inline AnalysisReport analyze(const TrialDataset& d,
                              const AnalysisParams& params) {
  AnalysisReport rep;
  rep.params = params;
  rep.direction = d.direction;
  rep.arms = arm_summary(d);

  std::optional<double> trimmed_diff;
  for (const std::string& method : params.methods) {
    MethodRow row;
    row.method = method;
    if (method == "trimmed") {
      const TrimmedEstimate est = estimate(d, params.trim);
      const PermutationResult perm =
          permutation_test(d, params.trim, params.B, params.gamma,
                           mix_seed(params.seed, hash_string("perm")));
      row.diff = est.diff;
      row.se = bootstrap_se(d, params.trim, params.B_boot,
                            mix_seed(params.seed, hash_string("boot")));
      row.ci_low = perm.ci_low;
      row.ci_high = perm.ci_high;
      row.p_value = perm.p_two_sided;
      row.alpha_used = est.alpha_used;
      trimmed_diff = est.diff;
    } else if (method == "trimmed+mi" || method == "mi") {
      ImputationConfig cfg;
      cfg.m = params.m;
      cfg.seed = mix_seed(params.seed, hash_string(method));
      const PooledEstimate pe = mi_analyze(
          d, cfg,
          method == "mi" ? MiAnalysis::MeanDiff : MiAnalysis::Trimmed,
          params.gamma, params.B_boot);
      row.diff = pe.mean;
      row.se = pe.se;
      row.ci_low = pe.ci_low;
      row.ci_high = pe.ci_high;
      row.p_value = pe.p_value;
      row.alpha_used = pe.alpha_used;
      if (method == "trimmed+mi" && pe.alpha_used) {
        // combination-validity reminder: the imputation model assumes the
        // MNAR dropouts happened before the MAR ones
        row.note = "assumes MNAR dropouts precede MAR dropouts";
      }
      if (pe.degenerate)
        row.note = "no imputation targets; equals the plain analysis";
    } else if (method == "complete-case") {
      const CompleteCaseResult cc = complete_case(d, params.gamma);
      row.diff = cc.diff;
      row.se = cc.se;
      row.ci_low = cc.ci_low;
      row.ci_high = cc.ci_high;
      row.p_value = cc.p_value;
    } else {
      throw std::invalid_argument("unknown analysis method: '" + method + "'");
    }
    rep.rows.push_back(std::move(row));
  }

  double shift = 0.0;
  if (params.ks_shift) {
    shift = *params.ks_shift;
  } else if (trimmed_diff) {
    shift = *trimmed_diff;
  } else {
    shift = estimate(d, params.trim).diff;
  }
  rep.ks = ks_location_shift_test(d, shift);
  return rep;
}

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace detail

inline json report_json(const AnalysisReport& r) {
  json j;
  j["direction"] =
      r.direction == Direction::WorseIsLow ? "worse-low" : "worse-high";
  for (int arm = 0; arm < 2; ++arm) {
    json a;
    a["n"] = r.arms[arm].n;
    a["n_missing"] = r.arms[arm].n_missing;
    a["n_mar"] = r.arms[arm].n_mar;
    a["n_mnar"] = r.arms[arm].n_mnar;
    a["missing_prop"] = r.arms[arm].missing_prop;
    j["arms"][std::to_string(arm)] = a;
  }
  for (const MethodRow& row : r.rows) {
    json m;
    m["method"] = row.method;
    m["diff"] = row.diff;
    m["se"] = row.se;
    m["ci_low"] = row.ci_low;
    m["ci_high"] = row.ci_high;
    m["p_value"] = row.p_value;
    if (row.alpha_used) m["alpha_used"] = *row.alpha_used;
    if (!row.note.empty()) m["note"] = row.note;
    j["methods"].push_back(m);
  }
  if (r.ks) {
    j["diagnostics"]["ks"] = {{"d_stat", r.ks->d_stat},
                              {"p_value", r.ks->p_value},
                              {"n1", r.ks->n1},
                              {"n0", r.ks->n0},
                              {"shift_applied", r.ks->shift_applied}};
  }
  j["params"] = {{"gamma", r.params.gamma},
                 {"B", r.params.B},
                 {"B_boot", r.params.B_boot},
                 {"m", r.params.m},
                 {"seed", r.params.seed},
                 {"alpha_policy",
                  r.params.trim.policy == TrimSpec::Policy::Adaptive
                      ? "adaptive"
                      : "fixed:" + detail::fmt(r.params.trim.fixed_alpha)}};
  return j;
}

inline std::string report_text(const AnalysisReport& r) {
  std::ostringstream out;
  using detail::fmt;
  out << "Dataset (direction "
      << (r.direction == Direction::WorseIsLow ? "worse-low" : "worse-high")
      << ")\n";
  for (int arm : {1, 0}) {
    const ArmCounts& a = r.arms[arm];
    out << "  arm " << arm << ": n=" << a.n << " missing=" << a.n_missing
        << " (mar=" << a.n_mar << ", mnar=" << a.n_mnar << ", prop="
        << fmt(a.missing_prop) << ")\n";
  }
  out << "\n";
  char line[200];
  std::snprintf(line, sizeof(line), "%-16s %10s %10s %22s %10s %8s\n", "Method",
                "Diff", "SE", "95% CI", "p-value", "alpha");
  out << line;
  for (const MethodRow& row : r.rows) {
    const std::string ci =
        "[" + fmt(row.ci_low) + ", " + fmt(row.ci_high) + "]";
    std::snprintf(line, sizeof(line), "%-16s %10s %10s %22s %10s %8s\n",
                  row.method.c_str(), fmt(row.diff).c_str(),
                  fmt(row.se).c_str(), ci.c_str(), fmt(row.p_value).c_str(),
                  row.alpha_used ? fmt(*row.alpha_used).c_str() : "-");
    out << line;
    if (!row.note.empty()) out << "    note: " << row.note << "\n";
  }
  if (r.ks) {
    out << "\nKS location-shift diagnostic (shift "
        << fmt(r.ks->shift_applied) << "): D=" << fmt(r.ks->d_stat)
        << ", p=" << fmt(r.ks->p_value) << " (n1=" << r.ks->n1
        << ", n0=" << r.ks->n0 << ")\n";
  }
  out << "\nparams: gamma=" << fmt(r.params.gamma) << " B=" << r.params.B
      << " B_boot=" << r.params.B_boot << " m=" << r.params.m
      << " seed=" << r.params.seed << " alpha="
      << (r.params.trim.policy == TrimSpec::Policy::Adaptive
              ? std::string("adaptive")
              : "fixed:" + fmt(r.params.trim.fixed_alpha))
      << "\n";
  return out.str();
}

// --- simulation outputs ---------------------------------------------------

inline std::string summaries_csv(const std::vector<ScenarioSummary>& rows) {
  std::ostringstream out;
  out << "scenario_id,table,method,K,failures,missing_arm1,missing_arm0,"
         "mean_arm1,mean_arm0,mean_diff,pct_bias,coverage,power,se_mc,mse,"
         "smnar\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return std::string(buf);
  };
  for (const ScenarioSummary& s : rows) {
    out << s.scenario_id << ',' << s.table << ',' << s.method << ',' << s.K
        << ',' << s.failures << ',' << num(s.realized_missing[1]) << ','
        << num(s.realized_missing[0]) << ',' << num(s.mean_arm1) << ','
        << num(s.mean_arm0) << ',' << num(s.mean_diff) << ','
        << num(s.pct_bias) << ',' << num(s.coverage) << ',' << num(s.power)
        << ',' << num(s.se_mc) << ',' << num(s.mse) << ','
        << (s.smnar_mean ? num(*s.smnar_mean) : "") << "\n";
  }
  return out.str();
}

inline json summaries_json(const std::vector<ScenarioSummary>& rows,
                           const std::vector<ScenarioSpec>& specs) {
  json j;
  for (const ScenarioSummary& s : rows) {
    json r;
    r["scenario_id"] = s.scenario_id;
    r["table"] = s.table;
    r["method"] = s.method;
    r["K"] = s.K;
    r["failures"] = s.failures;
    r["missing_arm1"] = s.realized_missing[1];
    r["missing_arm0"] = s.realized_missing[0];
    r["mean_arm1"] = s.mean_arm1;
    r["mean_arm0"] = s.mean_arm0;
    r["mean_diff"] = s.mean_diff;
    r["pct_bias"] = s.pct_bias;
    r["coverage"] = s.coverage;
    r["power"] = s.power;
    r["se_mc"] = s.se_mc;
    r["mse"] = s.mse;
    if (s.smnar_mean) r["smnar"] = *s.smnar_mean;
    j["results"].push_back(r);
  }
  for (const ScenarioSpec& s : specs) {
    json r;
    r["id"] = s.id;
    r["mechanism"] = s.mechanism == Mechanism::Mcar    ? "mcar"
                     : s.mechanism == Mechanism::Mar   ? "mar"
                     : s.mechanism == Mechanism::Mnar  ? "mnar"
                                                       : "mixture";
    r["n_per_arm"] = s.n_per_arm;
    r["beta0"] = s.beta0;
    r["beta_a"] = s.beta_a;
    r["sigma"] = s.sigma;
    r["a0"] = s.a0;
    r["a_a"] = s.a_a;
    r["a_y"] = s.a_y;
    if (s.mechanism == Mechanism::Mixture) {
      r["mar_rate_exp"] = s.mixture_mar_rate_exp;
      r["mcar_rate"] = s.mixture_mcar_rate;
    }
    r["K"] = s.K;
    r["B"] = s.B;
    r["B_boot"] = s.B_boot;
    r["m"] = s.m;
    r["gamma"] = s.gamma;
    r["seed"] = s.master_seed;
    json methods = json::array();
    for (const MethodSpec& m : s.methods) methods.push_back(m.name());
    r["methods"] = methods;
    j["scenarios"].push_back(r);
  }
  return j;
}

// Scenario batch file: {"scenarios": [ {...}, ... ]}; see README for the
// field list. Errors name the offending field.
inline std::vector<ScenarioSpec> parse_scenarios(const json& j,
                                                 std::uint64_t default_seed) {
  if (!j.contains("scenarios") || !j["scenarios"].is_array())
    throw SimError("scenario file: missing top-level 'scenarios' array");
  std::vector<ScenarioSpec> out;
  int index = 0;
  for (const json& c : j["scenarios"]) {
    ++index;
    ScenarioSpec s;
    const std::string where = "scenario #" + std::to_string(index);
    auto need = [&](const char* field) -> const json& {
      if (!c.contains(field))
        throw SimError(where + ": missing field '" + field + "'");
      return c[field];
    };
    auto opt_num = [&](const char* field, double dflt) {
      if (!c.contains(field)) return dflt;
      if (!c[field].is_number())
        throw SimError(where + ": field '" + field + "' must be a number");
      return c[field].get<double>();
    };
    s.id = need("id").get<std::string>();
    const std::string mech = need("mechanism").get<std::string>();
    if (mech == "mcar")
      s.mechanism = Mechanism::Mcar;
    else if (mech == "mar")
      s.mechanism = Mechanism::Mar;
    else if (mech == "mnar")
      s.mechanism = Mechanism::Mnar;
    else if (mech == "mixture")
      s.mechanism = Mechanism::Mixture;
    else
      throw SimError(where + ": field 'mechanism' must be mcar|mar|mnar|mixture");
    s.n_per_arm = static_cast<int>(opt_num("n_per_arm", 50));
    s.beta0 = opt_num("beta0", -1.0);
    s.beta_a = opt_num("beta_a", -1.0);
    s.sigma = opt_num("sigma", 1.5);
    s.a0 = opt_num("a0", 0.0);
    s.a_a = opt_num("a_a", 0.0);
    s.a_y = opt_num("a_y", 0.0);
    s.mixture_mar_rate_exp = opt_num("mar_rate_exp", 0.0);
    s.mixture_mcar_rate = opt_num("mcar_rate", 0.0);
    s.K = static_cast<int>(opt_num("K", 5000));
    s.B = static_cast<int>(opt_num("B", 1000));
    s.B_boot = static_cast<int>(opt_num("B_boot", 500));
    s.m = static_cast<int>(opt_num("m", 20));
    s.gamma = opt_num("gamma", 0.05);
    s.master_seed = c.contains("seed")
                        ? c["seed"].get<std::uint64_t>()
                        : default_seed;
    const json& methods = need("methods");
    if (!methods.is_array() || methods.empty())
      throw SimError(where + ": field 'methods' must be a non-empty array");
    for (const json& m : methods) {
      try {
        s.methods.push_back(parse_method(m.get<std::string>()));
      } catch (const SimError& e) {
        throw SimError(where + ": field 'methods': " + e.what());
      }
    }
    s.validate();
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace trimmed_means

#endif

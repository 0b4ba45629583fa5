// trimest: trimmed-means analysis of trials with informative dropout.
//
//   trimest analyze  --input data.csv --direction worse-high [...]
//   trimest simulate --paper-suite [--table N] [...] | --scenarios file.json
//   trimest diagnose --input data.csv --direction worse-high --shift 0.5

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "trimmed_means/report.hpp"

namespace tms = trimmed_means;

namespace {

std::uint64_t env_seed_default() {
  const char* s = std::getenv("TRIMEST_SEED");
  if (!s) return 0;
  try {
    return std::stoull(s);
  } catch (const std::exception&) {
    throw CLI::ValidationError("TRIMEST_SEED", "not an unsigned integer");
  }
}

tms::Direction parse_direction(const std::string& s) {
  if (s == "worse-low") return tms::Direction::WorseIsLow;
  if (s == "worse-high") return tms::Direction::WorseIsHigh;
  throw CLI::ValidationError("--direction", "must be worse-low or worse-high");
}

tms::TrimSpec parse_alpha(const std::string& s) {
  if (s == "adaptive") return tms::TrimSpec::adaptive();
  if (s.rfind("fixed:", 0) == 0) {
    try {
      return tms::TrimSpec::fixed(std::stod(s.substr(6)));
    } catch (const std::exception& e) {
      throw CLI::ValidationError("--alpha", e.what());
    }
  }
  throw CLI::ValidationError("--alpha", "must be adaptive or fixed:F");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  out << text;
}

struct AnalyzeArgs {
  std::string input, direction, methods = "trimmed,trimmed+mi,mi,complete-case";
  std::string alpha = "adaptive";
  int m = 20, perms = 1000, boot = 500;
  double gamma = 0.05;
  std::uint64_t seed = 0;
  std::string out;
  bool json = false;
};

int run_analyze(const AnalyzeArgs& a) {
  const tms::TrialDataset d = tms::load_csv(a.input, parse_direction(a.direction));
  tms::AnalysisParams params;
  params.methods = split_list(a.methods);
  params.trim = parse_alpha(a.alpha);
  params.m = a.m;
  params.B = a.perms;
  params.B_boot = a.boot;
  params.gamma = a.gamma;
  params.seed = a.seed;
  const tms::AnalysisReport rep = tms::analyze(d, params);
  emit(a.json ? tms::report_json(rep).dump(2) + "\n" : tms::report_text(rep),
       a.out);
  return 0;
}

struct SimulateArgs {
  std::string scenarios;
  bool paper_suite = false;
  int table = 0;
  std::optional<int> K, perms, boot, m;
  std::optional<double> gamma;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string out;
  bool json = false;
};

int run_simulate(const SimulateArgs& a) {
  std::vector<tms::ScenarioSpec> specs;
  if (a.paper_suite) {
    specs = a.table > 0 ? tms::suite_for_table(a.table, a.seed)
                        : tms::paper_suite(a.seed);
  } else if (!a.scenarios.empty()) {
    std::ifstream in(a.scenarios);
    if (!in) throw std::runtime_error("cannot open " + a.scenarios);
    tms::json j;
    in >> j;
    specs = tms::parse_scenarios(j, a.seed);
  } else {
    throw CLI::ValidationError("simulate",
                               "need --scenarios FILE or --paper-suite");
  }
  for (tms::ScenarioSpec& s : specs) {
    if (a.K) s.K = *a.K;
    if (a.perms) s.B = *a.perms;
    if (a.boot) s.B_boot = *a.boot;
    if (a.m) s.m = *a.m;
    if (a.gamma) s.gamma = *a.gamma;
    for (const std::string& w : s.validate()) std::cerr << "warning: " << w << "\n";
  }

  std::vector<tms::ScenarioSummary> all;
  for (const tms::ScenarioSpec& s : specs) {
    std::cerr << "scenario " << s.id << " (K=" << s.K << ")...\n";
    for (tms::ScenarioSummary& r : tms::run_scenario(s, a.workers))
      all.push_back(std::move(r));
  }
  emit(a.json ? tms::summaries_json(all, specs).dump(2) + "\n"
              : tms::summaries_csv(all),
       a.out);
  return 0;
}

struct DiagnoseArgs {
  std::string input, direction;
  std::optional<double> shift;
  bool shift_from_trimmed = false;
  std::string alpha = "adaptive";
  std::string out;
  bool json = false;
};

int run_diagnose(const DiagnoseArgs& a) {
  if (!a.shift && !a.shift_from_trimmed)
    throw CLI::ValidationError("diagnose",
                               "need --shift FLOAT or --shift-from-trimmed");
  const tms::TrialDataset d = tms::load_csv(a.input, parse_direction(a.direction));
  const double shift =
      a.shift ? *a.shift : tms::estimate(d, parse_alpha(a.alpha)).diff;
  const tms::KsResult ks = tms::ks_location_shift_test(d, shift);
  const auto arms = tms::arm_summary(d);

  if (a.json) {
    tms::json j;
    j["ks"] = {{"d_stat", ks.d_stat},
               {"p_value", ks.p_value},
               {"n1", ks.n1},
               {"n0", ks.n0},
               {"shift_applied", ks.shift_applied}};
    for (int arm = 0; arm < 2; ++arm) {
      const auto y = tms::observed_outcomes(d, arm);
      j["arms"][std::to_string(arm)] = {
          {"n", arms[arm].n},
          {"n_observed", static_cast<int>(y.size())},
          {"n_mar", arms[arm].n_mar},
          {"n_mnar", arms[arm].n_mnar},
          {"mean_observed", tms::mean(y)}};
    }
    emit(j.dump(2) + "\n", a.out);
  } else {
    std::ostringstream text;
    for (int arm : {1, 0}) {
      const auto y = tms::observed_outcomes(d, arm);
      text << "arm " << arm << ": n=" << arms[arm].n
           << " observed=" << y.size() << " mar=" << arms[arm].n_mar
           << " mnar=" << arms[arm].n_mnar
           << " mean_observed=" << tms::detail::fmt(tms::mean(y)) << "\n";
    }
    text << "KS location-shift (shift " << tms::detail::fmt(ks.shift_applied)
         << "): D=" << tms::detail::fmt(ks.d_stat)
         << ", p=" << tms::detail::fmt(ks.p_value) << "\n";
    emit(text.str(), a.out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trimmed-means estimation for trials with informative dropout"};
  app.require_subcommand(1);

  AnalyzeArgs aa;
  SimulateArgs sa;
  DiagnoseArgs da;
  try {
    aa.seed = sa.seed = env_seed_default();
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  CLI::App* analyze = app.add_subcommand("analyze", "analyze one trial dataset");
  analyze->add_option("--input", aa.input, "trial CSV")->required();
  analyze->add_option("--direction", aa.direction, "worse-low|worse-high")
      ->required();
  analyze->add_option("--methods", aa.methods,
                      "comma list of trimmed,trimmed+mi,mi,complete-case");
  analyze->add_option("--alpha", aa.alpha, "adaptive | fixed:F");
  analyze->add_option("--m", aa.m, "imputations");
  analyze->add_option("--perms", aa.perms, "permutations");
  analyze->add_option("--boot", aa.boot, "bootstrap resamples for the SE");
  analyze->add_option("--gamma", aa.gamma, "CI/test level");
  analyze->add_option("--seed", aa.seed, "RNG seed (default $TRIMEST_SEED)");
  analyze->add_option("--out", aa.out, "output path (default stdout)");
  analyze->add_flag("--json", aa.json, "JSON instead of text");

  CLI::App* simulate = app.add_subcommand("simulate", "run simulation scenarios");
  simulate->add_option("--scenarios", sa.scenarios, "scenario JSON file");
  simulate->add_flag("--paper-suite", sa.paper_suite,
                     "run the built-in table-1..10 grid");
  simulate->add_option("--table", sa.table, "restrict --paper-suite to one table");
  simulate->add_option("--K", sa.K, "replications per scenario (override)");
  simulate->add_option("--perms", sa.perms, "permutations (override)");
  simulate->add_option("--boot", sa.boot, "bootstrap resamples (override)");
  simulate->add_option("--m", sa.m, "imputations (override)");
  simulate->add_option("--gamma", sa.gamma, "CI/test level (override)");
  simulate->add_option("--seed", sa.seed, "master seed (default $TRIMEST_SEED)");
  simulate->add_option("--workers", sa.workers, "worker threads");
  simulate->add_option("--out", sa.out, "output path (default stdout)");
  simulate->add_flag("--json", sa.json, "JSON instead of CSV");

  CLI::App* diagnose =
      app.add_subcommand("diagnose", "KS location-shift diagnostic");
  diagnose->add_option("--input", da.input, "trial CSV")->required();
  diagnose->add_option("--direction", da.direction, "worse-low|worse-high")
      ->required();
  diagnose->add_option("--shift", da.shift, "location shift to test");
  diagnose->add_flag("--shift-from-trimmed", da.shift_from_trimmed,
                     "use the trimmed-means difference as the shift");
  diagnose->add_option("--alpha", da.alpha,
                       "trim policy for --shift-from-trimmed");
  diagnose->add_option("--out", da.out, "output path (default stdout)");
  diagnose->add_flag("--json", da.json, "JSON instead of text");

  CLI11_PARSE(app, argc, argv);

  try {
    if (analyze->parsed()) return run_analyze(aa);
    if (simulate->parsed()) return run_simulate(sa);
    return run_diagnose(da);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

#include <catch_amalgamated.hpp>

#include <cmath>

#include "trimmed_means/sim_lab.hpp"

namespace tms = trimmed_means;

namespace {

tms::ScenarioSpec small_mnar(std::uint64_t seed) {
  tms::ScenarioSpec s;
  s.id = "unit_mnar";
  s.mechanism = tms::Mechanism::Mnar;
  s.a0 = 2.85;
  s.a_y = -2.5;
  s.K = 30;
  s.B = 50;
  s.B_boot = 30;
  s.m = 3;
  s.master_seed = seed;
  s.methods = {tms::parse_method("trimmed-adaptive"), tms::parse_method("mi"),
               tms::parse_method("trimmed+mi")};
  return s;
}

}  // namespace

TEST_CASE("parse_method covers every method and rejects unknowns") {
  CHECK(tms::parse_method("trimmed-adaptive").kind ==
        tms::MethodKind::TrimmedAdaptive);
  CHECK(tms::parse_method("trimmed").kind == tms::MethodKind::TrimmedAdaptive);
  const auto fixed = tms::parse_method("trimmed-fixed:0.35");
  CHECK(fixed.kind == tms::MethodKind::TrimmedFixed);
  CHECK(fixed.fixed_alpha == Catch::Approx(0.35));
  CHECK(tms::parse_method("mi").kind == tms::MethodKind::MiGlobal);
  CHECK(tms::parse_method("trimmed+mi").kind == tms::MethodKind::TrimPlusMi);
  CHECK(tms::parse_method("complete-case").kind == tms::MethodKind::CompleteCase);
  CHECK_THROWS_AS(tms::parse_method("median"), tms::SimError);
  // names round-trip
  for (const char* n : {"trimmed-adaptive", "trimmed-fixed:0.5", "mi",
                        "trimmed+mi", "complete-case"})
    CHECK(tms::parse_method(n).name() == n);
}

TEST_CASE("scenario validation rejects bad parameters and warns on mismatches") {
  tms::ScenarioSpec s = small_mnar(1);
  CHECK(s.validate().empty());
  s.mechanism = tms::Mechanism::Mcar;  // but a_y is nonzero
  REQUIRE(s.validate().size() == 1);
  CHECK_THAT(s.validate()[0], Catch::Matchers::ContainsSubstring("MCAR"));

  tms::ScenarioSpec bad = small_mnar(1);
  bad.n_per_arm = 1;
  CHECK_THROWS_AS(bad.validate(), tms::SimError);
  bad = small_mnar(1);
  bad.sigma = 0.0;
  CHECK_THROWS_AS(bad.validate(), tms::SimError);
  bad = small_mnar(1);
  bad.methods.clear();
  CHECK_THROWS_AS(bad.validate(), tms::SimError);
  bad = small_mnar(1);
  bad.gamma = 1.5;
  CHECK_THROWS_AS(bad.validate(), tms::SimError);
}

TEST_CASE("generate_replication is deterministic and well formed") {
  const tms::ScenarioSpec s = small_mnar(42);
  const auto [d1, t1] = tms::generate_replication(s, 3);
  const auto [d2, t2] = tms::generate_replication(s, 3);
  const auto [d3, t3] = tms::generate_replication(s, 4);

  REQUIRE(d1.records.size() == 100);
  CHECK(d1.direction == tms::Direction::WorseIsHigh);
  CHECK(d1.records[0].subject_id == "s0001");
  CHECK(d1.records[99].subject_id == "s0100");
  for (int i = 0; i < 100; ++i) CHECK(d1.records[i].arm == (i < 50 ? 1 : 0));

  for (int i = 0; i < 100; ++i) {
    CHECK(d1.records[i].outcome == d2.records[i].outcome);
    CHECK(d1.records[i].reason == d2.records[i].reason);
  }
  CHECK(t1.deleted_true[0] == t2.deleted_true[0]);
  CHECK(t1.deleted_true[1] == t2.deleted_true[1]);

  bool differs = false;
  for (int i = 0; i < 100; ++i)
    if (d1.records[i].outcome != d3.records[i].outcome) differs = true;
  CHECK(differs);

  // hidden truth sizes equal the per-arm deletion counts, tagged MNAR here
  const auto counts = tms::arm_summary(d1);
  CHECK(static_cast<int>(t1.deleted_true[0].size()) == counts[0].n_missing);
  CHECK(static_cast<int>(t1.deleted_true[1].size()) == counts[1].n_missing);
  for (const auto& r : d1.records)
    if (!r.outcome) CHECK(r.reason == tms::MissReason::MnarLike);
}

TEST_CASE("MCAR deletion hits its target rate on average") {
  tms::ScenarioSpec s;
  s.id = "unit_mcar";
  s.mechanism = tms::Mechanism::Mcar;
  s.a0 = 2.94;  // P(miss) = 1 - logit^-1(2.94) ~ 0.050
  s.master_seed = 7;
  s.methods = {tms::parse_method("complete-case")};
  double miss = 0.0;
  const int R = 400;
  for (int r = 0; r < R; ++r) {
    const auto [d, t] = tms::generate_replication(s, r);
    const auto c = tms::arm_summary(d);
    miss += 0.5 * (c[0].missing_prop + c[1].missing_prop);
  }
  miss /= R;
  const double target = 1.0 - tms::inv_logit(2.94);
  CHECK(miss == Catch::Approx(target).margin(0.01));

  s.a0 = 0.0;  // 50% deletion
  miss = 0.0;
  for (int r = 0; r < 100; ++r) {
    const auto [d, t] = tms::generate_replication(s, r);
    const auto c = tms::arm_summary(d);
    miss += 0.5 * (c[0].missing_prop + c[1].missing_prop);
  }
  CHECK(miss / 100 == Catch::Approx(0.5).margin(0.03));
}

TEST_CASE("MAR deletion concentrates in the arm selected by a_a") {
  tms::ScenarioSpec s;
  s.id = "unit_mar";
  s.mechanism = tms::Mechanism::Mar;
  s.a0 = 10.0;
  s.a_a = -8.27;  // experimental-arm dropout only
  s.master_seed = 5;
  s.methods = {tms::parse_method("complete-case")};
  double m1 = 0.0, m0 = 0.0;
  for (int r = 0; r < 200; ++r) {
    const auto [d, t] = tms::generate_replication(s, r);
    const auto c = tms::arm_summary(d);
    m1 += c[1].missing_prop;
    m0 += c[0].missing_prop;
    for (const auto& rec : d.records)
      if (!rec.outcome) CHECK(rec.reason == tms::MissReason::MarLike);
  }
  CHECK(m0 / 200 == Catch::Approx(0.0).margin(1e-3));
  CHECK(m1 / 200 == Catch::Approx(0.15).margin(0.02));
}

TEST_CASE("mixture deletion applies MNAR, then arm-1 MAR, then MCAR") {
  tms::ScenarioSpec s;
  s.id = "unit_mixture";
  s.mechanism = tms::Mechanism::Mixture;
  s.a0 = 2.85;
  s.a_y = -2.5;
  s.mixture_mar_rate_exp = 0.17;
  s.mixture_mcar_rate = 0.05;
  s.master_seed = 9;
  s.methods = {tms::parse_method("complete-case")};
  int n_mnar1 = 0, n_mar1 = 0, n_mnar0 = 0, n_mar0 = 0;
  double m1 = 0.0, m0 = 0.0;
  const int R = 200;
  for (int r = 0; r < R; ++r) {
    const auto [d, t] = tms::generate_replication(s, r);
    const auto c = tms::arm_summary(d);
    m1 += c[1].missing_prop;
    m0 += c[0].missing_prop;
    n_mnar1 += c[1].n_mnar;
    n_mar1 += c[1].n_mar;
    n_mnar0 += c[0].n_mnar;
    n_mar0 += c[0].n_mar;
  }
  CHECK(n_mnar1 > 0);
  CHECK(n_mnar0 > 0);
  CHECK(n_mar1 > 0);
  CHECK(n_mar0 > 0);           // MCAR deletions are MAR-coded
  CHECK(n_mar1 > 3 * n_mar0);  // arm 1 additionally gets the 17% MAR pass
  // arm 1 gets the extra 17% MAR pass; arm 0 has somewhat more MNAR because
  // its outcomes are higher (worse), so only a net gap is asserted
  CHECK(m1 / R > m0 / R + 0.05);
  CHECK(n_mnar0 > n_mnar1);
}

TEST_CASE("run_scenario is reproducible for any worker count") {
  const tms::ScenarioSpec s = small_mnar(2026);
  const auto seq = tms::run_scenario(s, 1);
  const auto par = tms::run_scenario(s, 3);
  REQUIRE(seq.size() == par.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    CAPTURE(i);
    CHECK(seq[i].method == par[i].method);
    CHECK(seq[i].mean_diff == par[i].mean_diff);
    CHECK(seq[i].mean_arm1 == par[i].mean_arm1);
    CHECK(seq[i].coverage == par[i].coverage);
    CHECK(seq[i].power == par[i].power);
    CHECK(seq[i].se_mc == par[i].se_mc);
    CHECK(seq[i].mse == par[i].mse);
    CHECK(seq[i].smnar_mean == par[i].smnar_mean);
    CHECK(seq[i].realized_missing == par[i].realized_missing);
  }
}

TEST_CASE("run_scenario summaries satisfy the error decomposition") {
  const tms::ScenarioSpec s = small_mnar(11);
  for (const auto& sum : tms::run_scenario(s, 2)) {
    CAPTURE(sum.method);
    CHECK(sum.K == 30);
    CHECK(sum.failures == 0);
    const double bias = sum.mean_diff - s.beta_a;
    CHECK(sum.mse == Catch::Approx(sum.se_mc * sum.se_mc + bias * bias)
                         .margin(1e-10));
    CHECK(sum.pct_bias ==
          Catch::Approx(100.0 * (s.beta_a - sum.mean_diff) / s.beta_a)
              .margin(1e-10));
    CHECK(sum.coverage >= 0.0);
    CHECK(sum.coverage <= 1.0);
    // only the trimmed method produces the sMNAR diagnostic
    if (sum.method == "trimmed-adaptive") {
      CHECK(sum.smnar_mean.has_value());
      CHECK(*sum.smnar_mean > 0.0);
    } else {
      CHECK_FALSE(sum.smnar_mean.has_value());
    }
  }
}

TEST_CASE("type-I error of the complete-case test sits near gamma under the null") {
  tms::ScenarioSpec s;
  s.id = "unit_null";
  s.mechanism = tms::Mechanism::Mcar;
  s.beta_a = 0.0;
  s.a0 = 2.94;
  s.K = 400;
  s.B = 1;
  s.master_seed = 31;
  s.methods = {tms::parse_method("complete-case")};
  const auto out = tms::run_scenario(s, 2);
  REQUIRE(out.size() == 1);
  // binomial(400, 0.05) => sd ~ 0.011; allow 4 sd
  CHECK(out[0].power > 0.05 - 0.044);
  CHECK(out[0].power < 0.05 + 0.044);
  CHECK(out[0].coverage > 0.95 - 0.044);
}

TEST_CASE("one-sided t benchmark rejects an obvious benefit") {
  tms::TrialDataset d;
  d.direction = tms::Direction::WorseIsHigh;
  for (int i = 0; i < 20; ++i) {
    tms::TrialRecord r1;
    r1.subject_id = "t" + std::to_string(i);
    r1.arm = 1;
    r1.outcome = -3.0 + 0.01 * i;
    d.records.push_back(std::move(r1));
    tms::TrialRecord r0;
    r0.subject_id = "c" + std::to_string(i);
    r0.arm = 0;
    r0.outcome = 0.0 + 0.01 * i;
    d.records.push_back(std::move(r0));
  }
  CHECK(tms::t_test_rejects_one_sided(d, 0.025));
  // flipped arms: benefit is on the other side, so no rejection
  for (auto& r : d.records) r.arm = 1 - r.arm;
  CHECK_FALSE(tms::t_test_rejects_one_sided(d, 0.025));
}

TEST_CASE("the built-in suite covers the full scenario grid") {
  const auto suite = tms::paper_suite(123);
  CHECK(suite.size() == 40);
  std::array<int, 11> per_table{};
  for (const auto& s : suite) {
    CHECK(s.master_seed == 123);
    CHECK(s.K == 5000);
    CHECK(s.B == 1000);
    for (const auto& m : s.methods) {
      REQUIRE(m.table >= 1);
      REQUIRE(m.table <= 10);
      ++per_table[m.table];
    }
  }
  // MAR has eight cells (experimental-arm and reference-arm dropout)
  for (int t = 1; t <= 9; ++t) CHECK(per_table[t] == (t == 3 || t == 4 ? 8 : 4));
  CHECK(per_table[10] == 20);

  const auto t5 = tms::suite_for_table(5, 9);
  REQUIRE(t5.size() == 4);
  for (const auto& s : t5) {
    REQUIRE(s.methods.size() == 1);
    CHECK(s.methods[0].kind == tms::MethodKind::TrimmedAdaptive);
    CHECK(s.mechanism == tms::Mechanism::Mnar);
  }
  const auto t10 = tms::suite_for_table(10, 9);
  CHECK(t10.size() == 20);
  CHECK_THROWS_AS(tms::suite_for_table(11, 9), tms::SimError);
}

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "trimmed_means/diagnostics.hpp"
#include "trimmed_means/trim_core.hpp"

namespace tms = trimmed_means;

namespace {

tms::TrialDataset two_arm(const std::vector<double>& arm1,
                          const std::vector<double>& arm0,
                          tms::Direction dir = tms::Direction::WorseIsHigh) {
  tms::TrialDataset d;
  d.direction = dir;
  int i = 0;
  for (double y : arm1) {
    tms::TrialRecord r;
    r.subject_id = "t" + std::to_string(i++);
    r.arm = 1;
    r.outcome = y;
    d.records.push_back(std::move(r));
  }
  i = 0;
  for (double y : arm0) {
    tms::TrialRecord r;
    r.subject_id = "c" + std::to_string(i++);
    r.arm = 0;
    r.outcome = y;
    d.records.push_back(std::move(r));
  }
  return d;
}

}  // namespace

TEST_CASE("KS statistic hand cases") {
  // identical samples, zero shift: D = 0, p = 1
  auto r = tms::ks_location_shift_test(two_arm({1, 2, 3, 4}, {1, 2, 3, 4}), 0.0);
  CHECK(r.d_stat == 0.0);
  CHECK(r.p_value == 1.0);
  CHECK(r.n1 == 4);
  CHECK(r.n0 == 4);

  // a pure shift is removed exactly by the right shift value
  r = tms::ks_location_shift_test(two_arm({1, 2, 3, 4}, {2, 3, 4, 5}), -1.0);
  CHECK(r.d_stat == 0.0);
  CHECK(r.shift_applied == -1.0);

  // and detected when not removed: ECDFs differ by one step of 1/4
  r = tms::ks_location_shift_test(two_arm({1, 2, 3, 4}, {2, 3, 4, 5}), 0.0);
  CHECK(r.d_stat == Catch::Approx(0.25));
  CHECK(r.p_value ==
        Catch::Approx(tms::kolmogorov_sf(std::sqrt(2.0) * 0.25)).margin(1e-12));

  // disjoint supports: D = 1
  r = tms::ks_location_shift_test(two_arm({1, 2, 3}, {10, 11, 12}), 0.0);
  CHECK(r.d_stat == Catch::Approx(1.0));
}

TEST_CASE("KS statistic is invariant under monotone relabeling of both samples") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> a, b;
  for (int i = 0; i < 40; ++i) a.push_back(g(rng));
  for (int i = 0; i < 30; ++i) b.push_back(0.4 + 1.3 * g(rng));
  const double d0 =
      tms::ks_location_shift_test(two_arm(a, b), 0.0).d_stat;
  auto mono = [](std::vector<double> v) {
    for (double& x : v) x = std::atan(x) * 3.0 + x;  // strictly increasing
    return v;
  };
  const double d1 =
      tms::ks_location_shift_test(two_arm(mono(a), mono(b)), 0.0).d_stat;
  CHECK(d0 == Catch::Approx(d1).margin(1e-12));
  CHECK(d0 > 0.0);
}

TEST_CASE("KS test requires two observed values per arm") {
  CHECK_THROWS_AS(tms::ks_location_shift_test(two_arm({1.0}, {1, 2, 3}), 0.0),
                  std::invalid_argument);
}

TEST_CASE("sMNAR fraction averages per-arm shares of beyond-boundary deletions") {
  using Arr = std::array<std::vector<double>, 2>;
  // WorseIsHigh: a deleted value is MNAR-consistent when it exceeds its arm's
  // boundary. arm0: 1 of 2 beyond, arm1: 1 of 1 -> (0.5 + 1.0) / 2 = 0.75
  Arr deleted{{{0.5, 2.0}, {5.0}}};
  auto s = tms::smnar_fraction(deleted, {1.0, 4.0}, tms::Direction::WorseIsHigh);
  REQUIRE(s.has_value());
  CHECK(*s == Catch::Approx(0.75));

  // one arm without deletions: the average runs over the other arm only
  Arr one_arm{{{}, {5.0, 3.0}}};
  s = tms::smnar_fraction(one_arm, {0.0, 4.0}, tms::Direction::WorseIsHigh);
  REQUIRE(s.has_value());
  CHECK(*s == Catch::Approx(0.5));

  // boundary values are not strictly beyond
  Arr at_boundary{{{1.0}, {4.0}}};
  s = tms::smnar_fraction(at_boundary, {1.0, 4.0}, tms::Direction::WorseIsHigh);
  CHECK(*s == 0.0);

  // direction flips the beyond side
  s = tms::smnar_fraction(deleted, {1.0, 4.0}, tms::Direction::WorseIsLow);
  CHECK(*s == Catch::Approx(0.25));  // arm0: 0.5 < 1.0 only; arm1: none

  CHECK_FALSE(tms::smnar_fraction(Arr{}, {0.0, 0.0}, tms::Direction::WorseIsHigh)
                  .has_value());
}

TEST_CASE("normal trimmed mean closed form") {
  // half trim of a standard normal: E[Y | Y > 0] = sqrt(2/pi)
  CHECK(tms::normal_trimmed_mean(0.0, 1.0, 0.5, tms::Direction::WorseIsLow) ==
        Catch::Approx(std::sqrt(2.0 / std::numbers::pi)).margin(1e-12));
  CHECK(tms::normal_trimmed_mean(0.0, 1.0, 0.5, tms::Direction::WorseIsHigh) ==
        Catch::Approx(-std::sqrt(2.0 / std::numbers::pi)).margin(1e-12));
  // alpha = 0 returns the untrimmed mean; location/scale equivariance
  CHECK(tms::normal_trimmed_mean(3.0, 2.0, 0.0, tms::Direction::WorseIsLow) == 3.0);
  for (double alpha : {0.05, 0.2, 0.5, 0.8}) {
    const double base =
        tms::normal_trimmed_mean(0.0, 1.0, alpha, tms::Direction::WorseIsLow);
    CHECK(tms::normal_trimmed_mean(3.0, 2.0, alpha, tms::Direction::WorseIsLow) ==
          Catch::Approx(3.0 + 2.0 * base).margin(1e-12));
  }
  CHECK_THROWS_AS(tms::normal_trimmed_mean(0, 1, 1.0, tms::Direction::WorseIsLow),
                  std::invalid_argument);
}

TEST_CASE("normal trimmed mean agrees with a Monte Carlo estimate") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(-1.0, 1.5);
  std::vector<double> v(200000);
  for (double& x : v) x = g(rng);
  for (double alpha : {0.1, 0.3, 0.5}) {
    const double mc =
        tms::trimmed_mean(v, alpha, tms::Direction::WorseIsHigh).mean;
    const double closed =
        tms::normal_trimmed_mean(-1.0, 1.5, alpha, tms::Direction::WorseIsHigh);
    CHECK(mc == Catch::Approx(closed).margin(0.02));
  }
}

TEST_CASE("generic tail integration matches the normal closed form") {
  const double mu = 0.7, sigma = 1.3;
  tms::GenericTail numeric(
      [=](double y) { return tms::normal_pdf((y - mu) / sigma) / sigma; },
      [=](double p) { return mu + sigma * tms::normal_quantile(p); });
  for (double alpha : {0.0, 0.05, 0.25, 0.5, 0.75, 0.9}) {
    CAPTURE(alpha);
    CHECK(numeric.mean_above(alpha) ==
          Catch::Approx(tms::normal_trimmed_mean(mu, sigma, alpha,
                                                 tms::Direction::WorseIsLow))
              .margin(1e-9));
  }
}

TEST_CASE("trimmed-mean profile is flat exactly under a location shift") {
  const std::vector<double> grid{0.0, 0.1, 0.25, 0.4, 0.6, 0.8};

  // same shape, shifted: profile constant at the shift
  tms::NormalTail f1(-2.0, 1.5), f0(-1.0, 1.5);
  auto prof = tms::theorem2_profile(f1, f0, grid);
  for (double v : prof) CHECK(v == Catch::Approx(-1.0).margin(1e-9));

  // shifted exponentials with equal rate: also a pure location shift
  tms::ShiftedExponentialTail e1(2.0, 0.0), e0(2.0, 0.75);
  prof = tms::theorem2_profile(e1, e0, grid);
  for (double v : prof) CHECK(v == Catch::Approx(-0.75).margin(1e-9));

  // different scales: the profile must move with alpha
  tms::NormalTail g1(-2.0, 2.5), g0(-1.0, 1.0);
  prof = tms::theorem2_profile(g1, g0, grid);
  double lo = prof.front(), hi = prof.front();
  for (double v : prof) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(hi - lo > 0.5);

  CHECK_THROWS_AS(tms::theorem2_profile(f1, f0, {1.0}), std::invalid_argument);
}

TEST_CASE("shifted exponential tail quantile/pdf consistency") {
  tms::ShiftedExponentialTail e(1.5, -2.0);
  CHECK(e.quantile(0.0) == Catch::Approx(-2.0));
  CHECK(e.pdf(-2.5) == 0.0);
  // memorylessness: mean above any quantile is the quantile plus 1/rate
  for (double a : {0.0, 0.3, 0.7}) {
    CHECK(e.mean_above(a) == Catch::Approx(e.quantile(a) + 1.0 / 1.5).margin(1e-12));
  }
  CHECK_THROWS_AS(tms::ShiftedExponentialTail(0.0, 0.0), std::invalid_argument);
}

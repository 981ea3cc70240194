#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "semlink/distortion.hpp"
#include "semlink/rate_opt.hpp"
#include "semlink/rng.hpp"
#include "oracles.hpp"

using namespace semlink;

namespace {

DistortionTable synthetic() { return make_synthetic_table(TaskKind::data, 12, 2.4e3, 9.3e4); }

double grid_search(const DistortionTable& t, double gamma, double delay_cap, int len,
                   int points) {
  const double lo = t.rate_min(), hi = t.rate_max();
  double best = objective_at(t, gamma, delay_cap, len, lo);
  for (int i = 1; i < points; ++i) {
    const double r = lo + (hi - lo) * i / (points - 1.0);
    best = std::min(best, objective_at(t, gamma, delay_cap, len, r));
  }
  return best;
}

int count_local_minima(const DistortionTable& t, double gamma, double delay_cap, int len,
                      int points) {
  std::vector<double> f(points);
  const double lo = t.rate_min(), hi = t.rate_max();
  for (int i = 0; i < points; ++i)
    f[i] = objective_at(t, gamma, delay_cap, len, lo + (hi - lo) * i / (points - 1.0));
  int minima = 0;
  for (int i = 1; i + 1 < points; ++i)
    if (f[i] < f[i - 1] && f[i] <= f[i + 1]) ++minima;
  return minima;
}

}  // namespace

TEST_CASE("objective composes the distortion and BER models") {
  const DistortionTable t = synthetic();
  // Huge SINR: BER ~ 0, objective at the lowest rate is that row's floor.
  CHECK(objective_at(t, 1e8, 2400.0, 256, t.rate_min()) ==
        Catch::Approx(t.rows.front().floor).margin(1e-9));
  // Channel rate far above capacity saturates the logistic at the BER
  // ceiling 1/(Rc L); pick a midpoint well above that ceiling so the
  // saturated value is floor + span.
  DistortionTable sat;
  sat.kind = TaskKind::data;
  sat.rows = {{1000.0, 0.10, 0.80, 8.0, -8.0}, {2000.0, 0.10, 0.80, 8.0, -8.0}};
  sat.validate();
  const double rho_sat = objective_at(sat, 0.01, 1000.0, 256, sat.rate_max());
  CHECK(rho_sat == Catch::Approx(0.90).margin(1e-9));
  // Mid-range matches the manual two-step composition.
  const double r = 3.1e4;
  const double expected =
      e2e_distortion(t, r, log10_ber(4.0, r / 2500.0, 256));
  CHECK(objective_at(t, 4.0, 2500.0, 256, r) == expected);
}

TEST_CASE("subgradient matches finite differences at interior rates") {
  const DistortionTable t = synthetic();
  Rng rng(23);
  for (int trial = 0; trial < 60; ++trial) {
    const double gamma = std::pow(10.0, rng.uniform(-0.3, 1.2));
    const double delay_cap = rng.uniform(1800.0, 4000.0);
    double r = rng.uniform(t.rate_min() * 1.01, t.rate_max() * 0.99);
    // Stay away from the interpolation kinks.
    bool near_kink = false;
    for (const auto& row : t.rows)
      if (std::abs(r - row.rate) < 1e-3 * row.rate) near_kink = true;
    if (near_kink) continue;
    const double h = 1e-6 * r;
    const double fd = oracles::central_diff(
        [&](double v) { return objective_at(t, gamma, delay_cap, 256, v); }, r, h);
    const double an = subgradient_at(t, gamma, delay_cap, 256, r);
    CAPTURE(gamma, delay_cap, r);
    if (std::abs(fd) > 1e-11) {
      REQUIRE(std::abs(an - fd) <= 1e-5 * std::abs(fd) + 1e-12);
    }
  }
}

TEST_CASE("subgradient at tabulated rates follows the endpoint rule") {
  const DistortionTable t = synthetic();
  const double gamma = 3.0, delay_cap = 2400.0;
  const int len = 256;
  auto f = [&](double v) { return objective_at(t, gamma, delay_cap, len, v); };

  // Lower endpoint: right-sided difference.
  const double r0 = t.rate_min();
  const double h0 = 1e-6 * r0;
  const double right = oracles::one_sided_diff(f, r0, h0);
  CHECK(subgradient_at(t, gamma, delay_cap, len, r0) ==
        Catch::Approx(right).epsilon(1e-4));

  // Upper endpoint: left-sided difference.
  const double rN = t.rate_max();
  const double left = oracles::one_sided_diff(f, rN, -1e-6 * rN);
  CHECK(subgradient_at(t, gamma, delay_cap, len, rN) ==
        Catch::Approx(left).epsilon(1e-4));

  // Interior tabulated rate: mean of one-sided differences.
  const double rm = t.rows[5].rate;
  const double hm = 1e-6 * rm;
  const double mean =
      0.5 * (oracles::one_sided_diff(f, rm, hm) + oracles::one_sided_diff(f, rm, -hm));
  CHECK(subgradient_at(t, gamma, delay_cap, len, rm) ==
        Catch::Approx(mean).epsilon(1e-3).margin(1e-10));
}

TEST_CASE("optimizer pins the endpoints in the monotone regimes") {
  const DistortionTable t = synthetic();
  // SINR so low that even the minimum rate saturates: minimum rate wins.
  const RateSolution low = optimize_rate(t, 1e-4, 2400.0, 256);
  CHECK(low.source_rate == Catch::Approx(t.rate_min()));
  // Enormous SINR with a generous delay cap: BER ~ 0 over the whole
  // range, floors decrease in rate, so the maximum rate wins.
  const RateSolution high = optimize_rate(t, 1e7, 93000.0, 256);
  CHECK(high.source_rate == Catch::Approx(t.rate_max()));
  CHECK(high.channel_rate == Catch::Approx(1.0));
}

TEST_CASE("optimizer matches a dense grid search on unimodal instances") {
  Rng rng(29);
  int tested = 0;
  for (int trial = 0; tested < 12 && trial < 60; ++trial) {
    const double gamma = std::pow(10.0, rng.uniform(-0.5, 1.3));
    const double delay_cap = rng.uniform(1500.0, 5000.0);
    const DistortionTable t = synthetic();
    if (count_local_minima(t, gamma, delay_cap, 256, 2000) > 1) continue;
    ++tested;
    const double oracle = grid_search(t, gamma, delay_cap, 256, 10000);
    const RateSolution sol = optimize_rate(t, gamma, delay_cap, 256);
    CAPTURE(gamma, delay_cap);
    REQUIRE(sol.objective <= oracle + 1e-4);
  }
  CHECK(tested >= 5);
}

TEST_CASE("multi-start never loses to the single start") {
  Rng rng(37);
  const DistortionTable t = synthetic();
  RateOptions multi;
  multi.multi_start = true;
  for (int trial = 0; trial < 10; ++trial) {
    const double gamma = std::pow(10.0, rng.uniform(-0.5, 1.5));
    const double delay_cap = rng.uniform(1500.0, 5000.0);
    const RateSolution single = optimize_rate(t, gamma, delay_cap, 256);
    const RateSolution best = optimize_rate(t, gamma, delay_cap, 256, multi);
    REQUIRE(best.objective <= single.objective + 1e-12);
  }
}

TEST_CASE("trajectories are monotone, feasible and deterministic") {
  const DistortionTable t = synthetic();
  const RateSolution a = optimize_rate(t, 2.5, 2400.0, 256);
  const RateSolution b = optimize_rate(t, 2.5, 2400.0, 256);
  REQUIRE(a.trajectory.size() == b.trajectory.size());
  for (std::size_t i = 0; i < a.trajectory.size(); ++i) {
    REQUIRE(a.trajectory[i] == b.trajectory[i]);
    if (i > 0) REQUIRE(a.trajectory[i].second <= a.trajectory[i - 1].second);
    REQUIRE(a.trajectory[i].first >= t.rate_min());
    REQUIRE(a.trajectory[i].first <= t.rate_max());
  }
  CHECK(a.channel_rate == a.source_rate / 2400.0);
}

TEST_CASE("fixed-channel-rate variant respects the delay bound") {
  const DistortionTable t = synthetic();
  // Delay cap times channel rate lands inside the table range.
  const double rc = 1.8, delay_cap = 3000.0;
  const RateSolution sol = optimize_rate_fixed_rc(t, 5.0, delay_cap, 256, rc);
  CHECK(sol.source_rate <= rc * delay_cap * (1.0 + 1e-12));
  CHECK(sol.source_rate >= t.rate_min());
  CHECK(sol.channel_rate == rc);
  // Degenerate SINR is allowed: the BER saturates and a rate is still chosen.
  const RateSolution sat = optimize_rate_fixed_rc(t, 0.0, delay_cap, 256, rc);
  CHECK(sat.source_rate >= t.rate_min());
}

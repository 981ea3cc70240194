#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <vector>

#include "semlink/channel.hpp"
#include "semlink/distortion.hpp"
#include "semlink/link_sim.hpp"
#include "semlink/scenario.hpp"

using namespace semlink;

TEST_CASE("forced-certain regimes") {
  // Huge SINR: packet error 0, no bit errors.
  const SimRun clean = simulate_ber(1e8, 1.0, 256, 10000, 1);
  CHECK(clean.empirical_ber == 0.0);
  CHECK(clean.failed_packets == 0);

  // Rate far above capacity: every packet fails, one bit error each.
  const SimRun broken = simulate_ber(0.01, 3.0, 256, 10000, 1);
  CHECK(broken.model_packet_error == Catch::Approx(1.0).margin(1e-12));
  CHECK(broken.empirical_ber == Catch::Approx(1.0 / (3.0 * 256.0)).epsilon(1e-12));
}

TEST_CASE("empirical BER concentrates on the converted packet error") {
  // At capacity: packet error exactly 1/2, expected BER 0.5/512.
  const double expected = 0.5 / 512.0;
  for (std::uint64_t seed = 1; seed <= 2; ++seed) {
    const SimRun run = simulate_ber(3.0, 2.0, 256, 1000000, seed);
    const double se =
        std::sqrt(0.5 * 0.5 / 1e6) / 512.0;  // binomial standard error / bits
    CAPTURE(seed);
    CHECK(std::abs(run.empirical_ber - expected) <= 3.0 * se);
    // Matches exp10(log10_ber) too.
    CHECK(std::abs(run.empirical_ber - std::pow(10.0, log10_ber(3.0, 2.0, 256))) <=
          3.0 * se);
  }
}

TEST_CASE("simulation is seed-deterministic") {
  const SimRun a = simulate_ber(2.0, 1.5, 256, 50000, 42);
  const SimRun b = simulate_ber(2.0, 1.5, 256, 50000, 42);
  CHECK(a.failed_packets == b.failed_packets);
  CHECK(a.empirical_ber == b.empirical_ber);
  const SimRun c = simulate_ber(2.0, 1.5, 256, 50000, 43);
  CHECK(a.failed_packets != c.failed_packets);
}

TEST_CASE("guards") {
  CHECK_THROWS_AS(simulate_ber(1.0, 1.0, 256, 0, 1), domain_error);
  CHECK_THROWS_AS(generate_fit_dataset(LogisticRow{0, 0.1, 0.4, 3, -4}, {}, 0.0, 1),
                  domain_error);
}

TEST_CASE("noiseless datasets lie exactly on the logistic") {
  const LogisticRow row{0.0, 0.08, 0.5, 2.8, -4.5};
  std::vector<double> grid;
  for (int i = 0; i < 25; ++i) grid.push_back(-9.0 + 8.0 * i / 24.0);
  const auto samples = generate_fit_dataset(row, grid, 0.0, 9);
  for (const auto& [rho, y] : samples) REQUIRE(y == evaluate(row, rho));
  const FitResult fit = fit_logistic(samples, row.floor);
  CHECK(fit.mse < 1e-12);
}

TEST_CASE("fitter round trip through the CSV interface") {
  const LogisticRow row{0.0, 0.05, 0.4, 3.0, -4.0};
  std::vector<double> grid;
  for (int i = 0; i < 40; ++i) grid.push_back(-9.0 + 8.0 * i / 39.0);
  const auto samples = generate_fit_dataset(row, grid, 0.005, 5);
  const auto tmp = std::filesystem::temp_directory_path() / "semlink_fit_samples.csv";
  save_samples_csv(samples, tmp.string());
  const auto loaded = load_samples_csv(tmp.string());
  REQUIRE(loaded.size() == samples.size());
  const FitResult fit = fit_logistic(loaded, row.floor);
  CHECK(std::abs(fit.span - row.span) / row.span < 0.10);
  CHECK(std::abs(fit.slope - row.slope) / row.slope < 0.10);
  std::filesystem::remove(tmp);
}

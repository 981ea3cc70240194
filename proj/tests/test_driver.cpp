#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "semlink/driver.hpp"
#include "semlink/scenario.hpp"
#include "test_util.hpp"

using namespace semlink;
using Eigen::MatrixXcd;
using Eigen::VectorXd;

namespace {

const std::string kDataDir = SEMLINK_DATA_DIR;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Single-user scenario built in memory around a synthetic table.
Scenario one_user_scenario(double channel_gain, double p_max, double delay_cap) {
  Scenario sc;
  MatrixXcd h(1, 1);
  h(0, 0) = std::sqrt(channel_gain);
  sc.system = test_util::make_config(h, p_max, 256, delay_cap);
  sc.kinds = {TaskKind::data};
  sc.tables = {make_synthetic_table(TaskKind::data, 12, 2.4e3, 9.3e4)};
  sc.table_paths = {"<memory>"};
  return sc;
}

}  // namespace

TEST_CASE("golden scenario file loads with converted delay caps") {
  const Scenario sc = load_scenario(kDataDir + "/golden_l256.json");
  CHECK(sc.system.n_tx == 2);
  CHECK(sc.system.users() == 2);
  CHECK(sc.system.n_data_users == 1);
  CHECK(sc.system.n_sem_users == 1);
  CHECK(sc.system.blocklength == 256);
  CHECK(sc.system.p_max == 3.0);
  // bandwidth_ratio * source_dim.
  CHECK(sc.system.delay_caps[0] == Catch::Approx(0.0356 * 65536));
  CHECK(sc.system.weights[0] == 0.8);
  CHECK(sc.kinds[0] == TaskKind::data);
  CHECK(sc.kinds[1] == TaskKind::semantic);
  CHECK(sc.tables[0].rows.size() == 23);
  // The experiment channel, column per user.
  CHECK(sc.system.channel(0, 0) == std::complex<double>(-0.4199, -1.2885));
  CHECK(sc.system.channel(1, 1) == std::complex<double>(-0.5603, 0.7316));
}

TEST_CASE("waterfilling splits power across gains") {
  VectorXd gains(2);
  gains << 1.0, 1.0;
  const VectorXd even = waterfill(gains, 2.0);
  CHECK(even[0] == Catch::Approx(1.0));
  CHECK(even[1] == Catch::Approx(1.0));

  gains << 10.0, 0.1;  // inverse gains 0.1 and 10: weak user shut off
  const VectorXd skew = waterfill(gains, 2.0);
  CHECK(skew[0] == Catch::Approx(2.0));
  CHECK(skew[1] == 0.0);
  CHECK(skew.sum() == Catch::Approx(2.0));
}

TEST_CASE("baseline: single user is a matched filter at full power") {
  Scenario sc = one_user_scenario(2.0, 4.0, 2400.0);
  const SolverReport r = zf_waterfilling_baseline(sc, VectorXd::Constant(1, 1.5));
  REQUIRE(r.success);
  CHECK(r.alloc.powers[0] == Catch::Approx(4.0));
  const double align = std::abs(
      r.alloc.beams.col(0).dot(test_util::matched_filters(sc.system.channel).col(0)));
  CHECK(align == Catch::Approx(1.0).epsilon(1e-12));
  CHECK(r.alloc.channel_rates[0] == 1.5);
}

TEST_CASE("baseline: zero-forcing kills interference on the experiment channel") {
  Scenario sc;
  sc.system = test_util::make_config(test_util::experiment_channel(), 3.0, 256, 2333.0);
  sc.kinds = {TaskKind::data, TaskKind::data};
  sc.tables = {make_synthetic_table(TaskKind::data, 12, 2.4e3, 9.3e4),
               make_synthetic_table(TaskKind::data, 12, 2.4e3, 9.3e4)};
  sc.table_paths = {"<memory>", "<memory>"};
  VectorXd rc(2);
  rc << 1.8, 1.3;
  const SolverReport r = zf_waterfilling_baseline(sc, rc);
  REQUIRE(r.success);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      if (i == j) continue;
      const double leak =
          std::abs(sc.system.channel.col(i).dot(r.alloc.beams.col(j)));
      REQUIRE(leak <= 1e-9);
    }
  // With orthogonal effective channels ZF beams coincide with matched filters.
  MatrixXcd ortho = MatrixXcd::Zero(2, 2);
  ortho(0, 0) = 1.4;
  ortho(1, 1) = 0.9;
  Scenario sc2 = sc;
  sc2.system = test_util::make_config(ortho, 3.0, 256, 2333.0);
  const SolverReport r2 = zf_waterfilling_baseline(sc2, rc);
  REQUIRE(r2.success);
  const MatrixXcd mf = test_util::matched_filters(ortho);
  for (int i = 0; i < 2; ++i)
    CHECK(std::abs(r2.alloc.beams.col(i).dot(mf.col(i))) == Catch::Approx(1.0));
}

TEST_CASE("baseline requires at most as many users as antennas") {
  Scenario sc;
  Eigen::MatrixXcd h(1, 2);
  h << 1.0, 0.5;
  sc.system = test_util::make_config(h, 3.0, 256, 2400.0);
  sc.kinds = {TaskKind::data, TaskKind::data};
  sc.tables = {make_synthetic_table(TaskKind::data, 4, 2.4e3, 9.3e4),
               make_synthetic_table(TaskKind::data, 4, 2.4e3, 9.3e4)};
  sc.table_paths = {"", ""};
  CHECK_THROWS_AS(zf_waterfilling_baseline(sc, VectorXd::Constant(2, 1.0)),
                  config_error);
}

TEST_CASE("single-user solve matches the closed pipeline") {
  Scenario sc = one_user_scenario(1.5, 2.0, 2400.0);
  const SolverReport r = solve_joint(sc);
  REQUIRE(r.success);
  // Oracle: all power on the matched filter, then the 1-D rate optimizer.
  const double gamma_full = 2.0 * 1.5;
  const RateSolution oracle =
      optimize_rate(sc.tables[0], gamma_full, 2400.0, 256, sc.knobs.rate);
  CHECK(r.alloc.powers[0] == Catch::Approx(2.0).epsilon(1e-3));
  CHECK(r.continuous_objective <= oracle.objective + 1e-4);
  // Discretized rate is a table rate no greater than the continuous one.
  bool tabulated = false;
  for (const auto& row : sc.tables[0].rows)
    if (row.rate == r.alloc.source_rates[0]) tabulated = true;
  CHECK(tabulated);
}

TEST_CASE("round-down is a no-op when the optimum sits on a table rate") {
  // Huge SINR and a generous delay cap: the continuous optimum is the top
  // tabulated rate, so discretization changes nothing.
  Scenario sc = one_user_scenario(1e7, 1.0, 9.3e4);
  const SolverReport r = solve_joint(sc);
  REQUIRE(r.success);
  CHECK(r.alloc.source_rates[0] == Catch::Approx(sc.tables[0].rate_max()));
  CHECK(std::abs(r.discretization_delta) <= 1e-9);
}

TEST_CASE("report objective re-validates through the evaluation path") {
  const Scenario sc = load_scenario(kDataDir + "/golden_l256.json");
  const SolverReport r = solve_joint(sc);
  REQUIRE(r.success);
  const auto [metrics, objective] = evaluate_allocation(sc, r.alloc);
  CHECK(std::abs(objective - r.objective) <= 1e-12);
  double weighted = 0.0;
  for (int i = 0; i < sc.system.users(); ++i)
    weighted += sc.system.weights[i] * metrics[i].distortion;
  CHECK(weighted == Catch::Approx(r.objective).epsilon(1e-12));
  CHECK(r.alloc.powers.sum() <= sc.system.p_max + 1e-8);
}

TEST_CASE("solve CSV output is byte-identical across runs") {
  const Scenario sc = load_scenario(kDataDir + "/golden_l256.json");
  const auto tmp = std::filesystem::temp_directory_path();
  const std::string a = (tmp / "semlink_det_a.csv").string();
  const std::string b = (tmp / "semlink_det_b.csv").string();
  const SolverReport ra = solve_scenario_to_csv(sc, a);
  const SolverReport rb = solve_scenario_to_csv(sc, b);
  REQUIRE(ra.success);
  REQUIRE(rb.success);
  CHECK(read_file(a) == read_file(b));
  CHECK(!read_file(a).empty());
  std::filesystem::remove(a);
  std::filesystem::remove(b);
}

TEST_CASE("weight sweep flags invalid grid points and continues") {
  const Scenario golden = load_scenario(kDataDir + "/golden_l256.json");
  const auto pts = sweep_weights(golden, {0.5, 1.5});
  REQUIRE(pts.size() == 2);
  CHECK(pts[0].report.success);
  CHECK_FALSE(pts[1].report.success);
  CHECK(!pts[1].report.message.empty());
}

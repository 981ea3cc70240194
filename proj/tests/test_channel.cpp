#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "semlink/channel.hpp"
#include "semlink/rng.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace semlink;
using test_util::make_config;

namespace {

// Independent SINR evaluation with plain complex arithmetic.
double sinr_oracle_downlink(const Eigen::MatrixXcd& h, const Eigen::VectorXd& p,
                            const Eigen::MatrixXcd& w, int user) {
  const int k = static_cast<int>(h.cols());
  const int nt = static_cast<int>(h.rows());
  auto gain = [&](int chan, int beam) {
    std::complex<double> acc = 0.0;
    for (int a = 0; a < nt; ++a) acc += std::conj(h(a, chan)) * w(a, beam);
    return std::norm(acc);
  };
  double interference = 1.0;
  for (int j = 0; j < k; ++j)
    if (j != user) interference += p[j] * gain(user, j);
  return p[user] * gain(user, user) / interference;
}

double sinr_oracle_uplink(const Eigen::MatrixXcd& h, const Eigen::VectorXd& q,
                          const Eigen::MatrixXcd& w, int user) {
  const int k = static_cast<int>(h.cols());
  const int nt = static_cast<int>(h.rows());
  auto gain = [&](int chan, int beam) {
    std::complex<double> acc = 0.0;
    for (int a = 0; a < nt; ++a) acc += std::conj(h(a, chan)) * w(a, beam);
    return std::norm(acc);
  };
  double interference = 1.0;
  for (int j = 0; j < k; ++j)
    if (j != user) interference += q[j] * gain(j, user);
  return q[user] * gain(user, user) / interference;
}

}  // namespace

TEST_CASE("downlink SINR, single user unit channel") {
  Eigen::MatrixXcd h(1, 1);
  h(0, 0) = 1.0;
  const auto cfg = make_config(h, 10.0, 256);
  Eigen::MatrixXcd w(1, 1);
  w(0, 0) = 1.0;
  Eigen::VectorXd p(1);
  p << 4.0;
  CHECK(sinr_downlink(cfg, p, w)[0] == Catch::Approx(4.0));
}

TEST_CASE("downlink SINR, two-user hand example") {
  Eigen::MatrixXcd h(2, 2);
  h << 1.0, 0.0, 0.0, 1.0;
  const auto cfg = make_config(h, 10.0, 256);
  Eigen::MatrixXcd w(2, 2);
  w.col(0) << 1.0, 0.0;
  w.col(1) << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  Eigen::VectorXd p(2);
  p << 2.0, 1.0;
  // gamma_1 = 2 * 1 / (1 * 0.5 + 1) = 4/3.
  CHECK(sinr_downlink(cfg, p, w)[0] == Catch::Approx(4.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("downlink SINR on the experiment channel matches the dense oracle") {
  const Eigen::MatrixXcd h = test_util::experiment_channel();
  const auto cfg = make_config(h, 3.0, 256);
  const Eigen::MatrixXcd w = test_util::matched_filters(h);
  Eigen::VectorXd p(2);
  p << 1.5, 1.5;
  const Eigen::VectorXd gamma = sinr_downlink(cfg, p, w);
  for (int i = 0; i < 2; ++i) {
    CHECK(gamma[i] == Catch::Approx(sinr_oracle_downlink(h, p, w, i)).epsilon(1e-12));
  }
}

TEST_CASE("uplink SINR basics") {
  Eigen::MatrixXcd h(1, 1);
  h(0, 0) = 2.0;  // |h|^2 = 4
  const auto cfg = make_config(h, 10.0, 256);
  Eigen::MatrixXcd w(1, 1);
  w(0, 0) = 1.0;
  Eigen::VectorXd q(1);
  q << 3.0;
  CHECK(sinr_uplink(cfg, q, w)[0] == Catch::Approx(12.0));

  // Symmetric orthogonal channels, equal power: equal SINRs.
  Eigen::MatrixXcd h2 = Eigen::MatrixXcd::Zero(2, 2);
  h2(0, 0) = 1.7;
  h2(1, 1) = 1.7;
  const auto cfg2 = make_config(h2, 10.0, 256);
  const Eigen::MatrixXcd w2 = test_util::matched_filters(h2);
  Eigen::VectorXd q2 = Eigen::VectorXd::Constant(2, 2.0);
  const Eigen::VectorXd g2 = sinr_uplink(cfg2, q2, w2);
  CHECK(g2[0] == Catch::Approx(g2[1]).epsilon(1e-14));
}

TEST_CASE("uplink SINR, random instance vs direct formula") {
  Rng rng(21);
  const Eigen::MatrixXcd h = test_util::random_channel(rng, 4, 3);
  const auto cfg = make_config(h, 10.0, 256);
  const Eigen::MatrixXcd w = test_util::random_unit_beams(rng, 4, 3);
  Eigen::VectorXd q(3);
  q << 0.7, 1.9, 0.4;
  const Eigen::VectorXd gamma = sinr_uplink(cfg, q, w);
  for (int i = 0; i < 3; ++i)
    CHECK(gamma[i] == Catch::Approx(sinr_oracle_uplink(h, q, w, i)).epsilon(1e-12));
}

TEST_CASE("packet error at capacity is one half") {
  CHECK(std::abs(packet_error(3.0, 2.0, 256) - 0.5) < 1e-12);
}

TEST_CASE("packet error vanishes far below capacity") {
  CHECK(packet_error(3.0, 1.0, 1 << 20) < 1e-300);
}

TEST_CASE("packet error against the quadrature oracle") {
  // gamma = 1, Rc = 1.5, L = 256.
  const long double arg = 16.0L * (std::log1p(1.0L) - 1.5L * std::log(2.0L)) /
                          std::sqrt(1.0L - 1.0L / 4.0L);
  const double expected = static_cast<double>(oracles::q_tail(static_cast<double>(arg)));
  CHECK(packet_error(1.0, 1.5, 256) == Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("packet error degenerate and invalid inputs") {
  CHECK(packet_error(0.0, 1.0, 256) == 1.0);
  CHECK_THROWS_AS(packet_error(-0.5, 1.0, 256), domain_error);
  CHECK_THROWS_AS(packet_error(1.0, 0.0, 256), domain_error);
  CHECK(packet_error(1e-12, 2.0, 256) <= 1.0);
}

TEST_CASE("log10 BER analytic values at capacity") {
  // Q-argument is 0, Q = 1/2: log10(0.5 / (Rc L)).
  CHECK(log10_ber(3.0, 2.0, 256) == Catch::Approx(-std::log10(1024.0)).epsilon(1e-12));
  CHECK(log10_ber(3.0, 2.0, 4096) == Catch::Approx(-std::log10(16384.0)).epsilon(1e-12));
}

TEST_CASE("log10 BER against the extended-precision oracle") {
  // gamma = 5, Rc = 1.8, L = 256.
  const long double arg = 16.0L * (std::log(6.0L) - 1.8L * std::log(2.0L)) /
                          std::sqrt(1.0L - 1.0L / 36.0L);
  const long double expected =
      -std::log10(1.8L * 256.0L) +
      oracles::log_q_tail(static_cast<double>(arg)) / std::log(10.0L);
  CHECK(log10_ber(5.0, 1.8, 256) ==
        Catch::Approx(static_cast<double>(expected)).epsilon(1e-10));
}

TEST_CASE("log10 BER is strictly decreasing in SINR") {
  const std::pair<double, int> settings[] = {{0.1, 256}, {0.05, 256}, {0.02, 4096}};
  for (const auto& [rc, len] : settings) {
    double prev = log10_ber(1e-2, rc, len);
    for (int i = 1; i < 1000; ++i) {
      const double gamma = 1e-2 * std::pow(1e6, i / 999.0);
      const double cur = log10_ber(gamma, rc, len);
      CAPTURE(rc, len, gamma);
      REQUIRE(cur < prev);
      prev = cur;
    }
  }
}

TEST_CASE("packet error and BER stay mutually consistent") {
  Rng rng(5);
  for (int i = 0; i < 2000; ++i) {
    const double gamma = std::pow(10.0, rng.uniform(-1.5, 2.0));
    const double rc = rng.uniform(0.2, 3.0);
    const int len = 1 << (6 + static_cast<int>(rng.uniform(0.0, 7.0)));
    const double rho = packet_error(gamma, rc, len);
    const double back = std::pow(10.0, log10_ber(gamma, rc, len)) * rc * len;
    CAPTURE(gamma, rc, len);
    if (rho < 1e-290) {
      REQUIRE(back < 1e-280);
    } else {
      REQUIRE(std::abs(back - rho) <= 1e-9 * rho);
    }
    REQUIRE(rho >= 0.0);
    REQUIRE(rho <= 1.0);
  }
}

TEST_CASE("coupling matrices, single user") {
  Eigen::MatrixXcd h(1, 1);
  h(0, 0) = std::complex<double>(0.6, -0.8);  // |h|^2 = 1
  const auto cfg = make_config(h, 10.0, 256);
  const Eigen::MatrixXcd w = test_util::matched_filters(h);
  Eigen::VectorXd gamma(1);
  gamma << 2.5;
  const Eigen::MatrixXd psi = psi_matrix(cfg, w, gamma);
  CHECK(psi(0, 0) == Catch::Approx(1.0 / 2.5));
  const Eigen::VectorXd p = downlink_powers_for_sinrs(cfg, w, gamma);
  CHECK(p[0] == Catch::Approx(2.5));

  // Single-user round trip is the identity.
  Eigen::VectorXd q(1);
  q << 3.0;
  const Eigen::VectorXd p2 = uplink_to_downlink_power(cfg, w, q);
  CHECK(p2[0] == Catch::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("downlink powers reproduce target SINRs") {
  Rng rng(31);
  const Eigen::MatrixXcd h = test_util::random_channel(rng, 2, 2);
  const auto cfg = make_config(h, 10.0, 256);
  const Eigen::MatrixXcd w = test_util::random_unit_beams(rng, 2, 2);
  Eigen::VectorXd q(2);
  q << 1.0, 2.0;
  const Eigen::VectorXd gamma_u = sinr_uplink(cfg, q, w);
  const Eigen::VectorXd p = downlink_powers_for_sinrs(cfg, w, gamma_u);
  const Eigen::VectorXd gamma_d = sinr_downlink(cfg, p, w);
  for (int i = 0; i < 2; ++i)
    CHECK(gamma_d[i] == Catch::Approx(gamma_u[i]).epsilon(1e-9));
}

TEST_CASE("duality transforms on the experiment channel") {
  const Eigen::MatrixXcd h = test_util::experiment_channel();
  const auto cfg = make_config(h, 3.0, 256);
  const Eigen::MatrixXcd w = test_util::matched_filters(h);
  Eigen::VectorXd q = Eigen::VectorXd::Constant(2, 1.5);
  const Eigen::VectorXd gamma_u = sinr_uplink(cfg, q, w);
  const Eigen::VectorXd p = uplink_to_downlink_power(cfg, w, q);
  const Eigen::VectorXd gamma_d = sinr_downlink(cfg, p, w);
  for (int i = 0; i < 2; ++i)
    CHECK(gamma_d[i] == Catch::Approx(gamma_u[i]).epsilon(1e-9));
  CHECK(p.sum() == Catch::Approx(q.sum()).epsilon(1e-9));
}

TEST_CASE("duality: SINR preservation, power conservation, round trips") {
  Rng rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform(0.0, 3.0));
    const Eigen::MatrixXcd h = test_util::random_channel(rng, 4, k);
    const auto cfg = make_config(h, 10.0, 256);
    const Eigen::MatrixXcd w = test_util::random_unit_beams(rng, 4, k);
    Eigen::VectorXd q(k);
    for (int i = 0; i < k; ++i) q[i] = rng.uniform(0.05, 10.0 / k);

    const Eigen::VectorXd gamma_u = sinr_uplink(cfg, q, w);
    const Eigen::VectorXd p = uplink_to_downlink_power(cfg, w, q);
    const Eigen::VectorXd gamma_d = sinr_downlink(cfg, p, w);
    CAPTURE(trial, k);
    REQUIRE(std::abs(p.sum() - q.sum()) <= 1e-9 * q.sum());
    for (int i = 0; i < k; ++i)
      REQUIRE(std::abs(gamma_d[i] - gamma_u[i]) <= 1e-8 * gamma_u[i]);

    const Eigen::VectorXd q_back = downlink_to_uplink_power(cfg, w, p);
    REQUIRE((q_back - q).cwiseAbs().maxCoeff() <= 1e-8 * q.maxCoeff());
  }
}

TEST_CASE("infeasible SINR targets raise a duality error") {
  Rng rng(51);
  const Eigen::MatrixXcd h = test_util::random_channel(rng, 2, 2);
  const auto cfg = make_config(h, 10.0, 256);
  // Both users demand more than the interference balance can support.
  const Eigen::MatrixXcd w = test_util::matched_filters(h);
  Eigen::VectorXd gamma = Eigen::VectorXd::Constant(2, 1e9);
  CHECK_THROWS_AS(downlink_powers_for_sinrs(cfg, w, gamma), duality_error);
}

TEST_CASE("dimension mismatches raise config errors") {
  Eigen::MatrixXcd h(2, 2);
  h << 1.0, 0.0, 0.0, 1.0;
  const auto cfg = make_config(h, 10.0, 256);
  Eigen::VectorXd p(1);
  p << 1.0;
  CHECK_THROWS_AS(sinr_downlink(cfg, p, test_util::matched_filters(h)), config_error);
  Eigen::VectorXd q(2);
  q << 1.0, 1.0;
  Eigen::MatrixXcd w_bad = 2.0 * test_util::matched_filters(h);
  CHECK_THROWS_AS(psi_matrix(cfg, w_bad, q), config_error);
}

TEST_CASE("raw channel ingestion normalizes by noise variance") {
  Eigen::MatrixXcd raw(1, 1);
  raw(0, 0) = 3.0;
  Eigen::VectorXd noise(1);
  noise << 2.0;
  const auto cfg = SystemConfig::from_raw(1, 1, 0, raw, noise, 5.0, 256,
                                          Eigen::VectorXd::Constant(1, 10.0),
                                          Eigen::VectorXd::Constant(1, 1.0));
  CHECK(std::abs(cfg.channel(0, 0) - std::complex<double>(1.5, 0.0)) < 1e-15);
}

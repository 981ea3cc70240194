// Multi-user MISO downlink/uplink SINR model, finite-blocklength error
// probabilities, and the uplink-downlink duality power transforms.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "semlink/errors.hpp"
#include "semlink/numerics.hpp"

namespace semlink {

// Immutable system description. Channel columns are the normalized
// per-user vectors h_i / sigma_i^2, so the effective noise power is 1.
struct SystemConfig {
  int n_tx = 0;
  int n_data_users = 0;
  int n_sem_users = 0;
  Eigen::MatrixXcd channel;   // n_tx x K, column i = user i
  double p_max = 0.0;         // total transmit power budget [W]
  int blocklength = 0;        // channel uses per codeword
  Eigen::VectorXd delay_caps; // max channel uses per source item, per user
  Eigen::VectorXd weights;    // distortion weights, per user

  int users() const { return n_data_users + n_sem_users; }

  void validate() const {
    const int k = users();
    if (k < 1) throw config_error("config: need at least one user");
    if (n_data_users < 0 || n_sem_users < 0)
      throw config_error("config: negative user count");
    if (n_tx < 1) throw config_error("config: need at least one antenna");
    if (channel.rows() != n_tx || channel.cols() != k)
      throw config_error("config: channel matrix must be n_tx x K");
    for (int i = 0; i < k; ++i) {
      if (channel.col(i).norm() == 0.0)
        throw config_error("config: channel column " + std::to_string(i) + " is zero");
    }
    if (!(p_max > 0.0)) throw config_error("config: p_max must be positive");
    if (blocklength < 1) throw config_error("config: blocklength must be >= 1");
    if (delay_caps.size() != k || weights.size() != k)
      throw config_error("config: delay_caps/weights must have one entry per user");
    for (int i = 0; i < k; ++i) {
      if (!(delay_caps[i] > 0.0)) throw config_error("config: delay cap must be positive");
      if (!(weights[i] > 0.0)) throw config_error("config: weight must be positive");
    }
  }

  // Build from raw channels and per-user noise variances; normalizes
  // columns to h_i / sigma_i^2 on ingest.
  static SystemConfig from_raw(int n_tx, int n_data_users, int n_sem_users,
                               Eigen::MatrixXcd raw_channel,
                               const Eigen::VectorXd& noise_vars, double p_max,
                               int blocklength, Eigen::VectorXd delay_caps,
                               Eigen::VectorXd weights) {
    if (noise_vars.size() != raw_channel.cols())
      throw config_error("config: one noise variance per user required");
    for (int i = 0; i < raw_channel.cols(); ++i) {
      if (!(noise_vars[i] > 0.0))
        throw config_error("config: noise variance must be positive");
      raw_channel.col(i) /= noise_vars[i];
    }
    SystemConfig cfg{n_tx,       n_data_users,          n_sem_users,
                     std::move(raw_channel), p_max,     blocklength,
                     std::move(delay_caps),  std::move(weights)};
    cfg.validate();
    return cfg;
  }
};

// Decision variables of the joint problem.
struct Allocation {
  Eigen::VectorXd source_rates;   // bits per source item
  Eigen::VectorXd channel_rates;  // bits per channel use
  Eigen::VectorXd powers;         // watts
  Eigen::MatrixXcd beams;         // n_tx x K, unit-norm columns

  void validate(const SystemConfig& cfg) const {
    const int k = cfg.users();
    if (source_rates.size() != k || channel_rates.size() != k ||
        powers.size() != k || beams.cols() != k || beams.rows() != cfg.n_tx)
      throw config_error("allocation: dimension mismatch with config");
    if (powers.minCoeff() < 0.0) throw config_error("allocation: negative power");
    if (powers.sum() > cfg.p_max * (1.0 + 1e-9) + 1e-12)
      throw config_error("allocation: power budget exceeded");
    for (int i = 0; i < k; ++i) {
      if (std::abs(beams.col(i).norm() - 1.0) > 1e-9)
        throw config_error("allocation: beam " + std::to_string(i) + " not unit norm");
      if (!(source_rates[i] > 0.0) || !(channel_rates[i] > 0.0))
        throw config_error("allocation: rates must be positive");
      if (source_rates[i] / channel_rates[i] > cfg.delay_caps[i] * (1.0 + 1e-9))
        throw config_error("allocation: delay cap violated for user " + std::to_string(i));
    }
  }
};

// Per-user link state derived from an allocation.
struct LinkMetrics {
  double sinr = 0.0;
  double packet_error = 0.0;
  double log10_ber = 0.0;
  double distortion = 0.0;
};

// Downlink SINR, user i: p_i |h_i^H w_i|^2 / (sum_{j!=i} p_j |h_i^H w_j|^2 + 1).
inline Eigen::VectorXd sinr_downlink(const SystemConfig& cfg,
                                     const Eigen::VectorXd& powers,
                                     const Eigen::MatrixXcd& beams) {
  const int k = cfg.users();
  if (powers.size() != k || beams.cols() != k || beams.rows() != cfg.n_tx)
    throw config_error("sinr_downlink: dimension mismatch");
  Eigen::VectorXd gamma(k);
  for (int i = 0; i < k; ++i) {
    double interference = 0.0;
    double signal = 0.0;
    for (int j = 0; j < k; ++j) {
      const double gain = std::norm(cfg.channel.col(i).dot(beams.col(j)));
      if (j == i)
        signal = powers[i] * gain;
      else
        interference += powers[j] * gain;
    }
    gamma[i] = signal / (interference + 1.0);
  }
  return gamma;
}

inline Eigen::VectorXd sinr_downlink(const SystemConfig& cfg, const Allocation& alloc) {
  return sinr_downlink(cfg, alloc.powers, alloc.beams);
}

// Virtual uplink SINR, user i: q_i |h_i^H w_i|^2 / (sum_{j!=i} q_j |h_j^H w_i|^2 + 1).
// The interference term runs over the other users' channels through user
// i's receive beam, unlike the downlink.
inline Eigen::VectorXd sinr_uplink(const SystemConfig& cfg,
                                   const Eigen::VectorXd& q,
                                   const Eigen::MatrixXcd& beams_u) {
  const int k = cfg.users();
  if (q.size() != k || beams_u.cols() != k || beams_u.rows() != cfg.n_tx)
    throw config_error("sinr_uplink: dimension mismatch");
  if (q.minCoeff() < 0.0) throw config_error("sinr_uplink: negative power");
  Eigen::VectorXd gamma(k);
  for (int i = 0; i < k; ++i) {
    double interference = 0.0;
    for (int j = 0; j < k; ++j) {
      if (j == i) continue;
      interference += q[j] * std::norm(cfg.channel.col(j).dot(beams_u.col(i)));
    }
    const double signal = q[i] * std::norm(cfg.channel.col(i).dot(beams_u.col(i)));
    gamma[i] = signal / (interference + 1.0);
  }
  return gamma;
}

// Argument of the Q-function in the normal approximation:
// sqrt(L) (log2(1+g) - Rc) / sqrt((1 - 1/(1+g)^2) log2(e)^2).
inline double normal_approx_argument(double gamma, double r_c, int blocklength) {
  if (!(gamma > 0.0)) throw domain_error("normal_approx_argument: gamma must be > 0");
  if (!(r_c > 0.0)) throw domain_error("normal_approx_argument: r_c must be > 0");
  if (blocklength < 1) throw domain_error("normal_approx_argument: blocklength must be >= 1");
  const double one_plus = 1.0 + gamma;
  const double dispersion = std::sqrt(1.0 - 1.0 / (one_plus * one_plus));
  constexpr double kLn2 = 0.69314718055994530941723212145818;
  // sqrt(L) (ln(1+g) - Rc ln 2) / dispersion == the log2 form above.
  return std::sqrt(static_cast<double>(blocklength)) *
         (std::log1p(gamma) - r_c * kLn2) / dispersion;
}

// Packet error probability of an (N, L) random code at SINR gamma.
// gamma == 0 is degenerate (zero dispersion): the packet is undecodable
// for any positive rate, so return 1.
inline double packet_error(double gamma, double r_c, int blocklength) {
  if (!(r_c > 0.0)) throw domain_error("packet_error: r_c must be > 0");
  if (gamma < 0.0) throw domain_error("packet_error: gamma must be >= 0");
  if (gamma == 0.0) return 1.0;
  return q_function(normal_approx_argument(gamma, r_c, blocklength));
}

// Base-10 log of the bit error rate: log10(1/(Rc L)) + log10 Q(arg).
// Computed through log Q so very small BERs stay finite.
inline double log10_ber(double gamma, double r_c, int blocklength) {
  if (!(r_c > 0.0)) throw domain_error("log10_ber: r_c must be > 0");
  if (gamma < 0.0) throw domain_error("log10_ber: gamma must be >= 0");
  constexpr double kLn10 = 2.30258509299404568401799145468436;
  const double prefix = -std::log10(r_c * static_cast<double>(blocklength));
  if (gamma == 0.0) return prefix;  // packet error 1: one bit error per packet
  return prefix + log_q(normal_approx_argument(gamma, r_c, blocklength)) / kLn10;
}

namespace detail {

inline double beam_gain(const SystemConfig& cfg, int chan, const Eigen::MatrixXcd& beams,
                        int beam) {
  return std::norm(cfg.channel.col(chan).dot(beams.col(beam)));
}

inline void require_unit_beams(const SystemConfig& cfg, const Eigen::MatrixXcd& beams,
                               const char* who) {
  if (beams.rows() != cfg.n_tx || beams.cols() != cfg.users())
    throw config_error(std::string(who) + ": beam matrix dimension mismatch");
  for (int i = 0; i < beams.cols(); ++i) {
    if (std::abs(beams.col(i).norm() - 1.0) > 1e-9)
      throw config_error(std::string(who) + ": beams must be unit norm");
  }
}

inline Eigen::VectorXd solve_power_system(const Eigen::MatrixXd& m, const char* who) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  if (!lu.isInvertible())
    throw duality_error(std::string(who) + ": singular coupling matrix");
  Eigen::VectorXd p = lu.solve(Eigen::VectorXd::Ones(m.rows()));
  if (p.minCoeff() < -1e-12)
    throw duality_error(std::string(who) + ": negative power component");
  return p.cwiseMax(0.0);
}

}  // namespace detail

// Coupling matrix of the downlink power system: with the sign convention
// used here, p = Psi^{-1} 1 achieves the target SINRs gamma_u under the
// shared beams. Diagonal |h_k^H w_k|^2 / gamma_k, off-diagonal
// -|h_k^H w_l|^2.
inline Eigen::MatrixXd psi_matrix(const SystemConfig& cfg, const Eigen::MatrixXcd& beams_u,
                                  const Eigen::VectorXd& gamma_u) {
  const int k = cfg.users();
  detail::require_unit_beams(cfg, beams_u, "psi_matrix");
  if (gamma_u.size() != k) throw config_error("psi_matrix: SINR vector size mismatch");
  if (gamma_u.minCoeff() <= 0.0)
    throw config_error("psi_matrix: SINRs must be strictly positive");
  Eigen::MatrixXd psi(k, k);
  for (int row = 0; row < k; ++row) {
    for (int col = 0; col < k; ++col) {
      const double gain = detail::beam_gain(cfg, row, beams_u, col);
      psi(row, col) = (row == col) ? gain / gamma_u[row] : -gain;
    }
  }
  return psi;
}

// Coupling matrix of the uplink power system: q = Phi^{-1} 1 achieves the
// target SINRs gamma under the shared beams. Diagonal |h_k^H w_k|^2 /
// gamma_k, off-diagonal -|h_l^H w_k|^2.
inline Eigen::MatrixXd phi_matrix(const SystemConfig& cfg, const Eigen::MatrixXcd& beams,
                                  const Eigen::VectorXd& gamma) {
  const int k = cfg.users();
  detail::require_unit_beams(cfg, beams, "phi_matrix");
  if (gamma.size() != k) throw config_error("phi_matrix: SINR vector size mismatch");
  if (gamma.minCoeff() <= 0.0)
    throw config_error("phi_matrix: SINRs must be strictly positive");
  Eigen::MatrixXd phi(k, k);
  for (int row = 0; row < k; ++row) {
    for (int col = 0; col < k; ++col) {
      const double gain = detail::beam_gain(cfg, col, beams, row);
      phi(row, col) = (row == col) ? gain / gamma[row] : -gain;
    }
  }
  return phi;
}

// Downlink powers achieving the given SINR targets under the given beams.
inline Eigen::VectorXd downlink_powers_for_sinrs(const SystemConfig& cfg,
                                                 const Eigen::MatrixXcd& beams_u,
                                                 const Eigen::VectorXd& gamma_u) {
  return detail::solve_power_system(psi_matrix(cfg, beams_u, gamma_u),
                                    "downlink_powers_for_sinrs");
}

// Uplink powers achieving the given SINR targets under the given beams.
inline Eigen::VectorXd uplink_powers_for_sinrs(const SystemConfig& cfg,
                                               const Eigen::MatrixXcd& beams,
                                               const Eigen::VectorXd& gamma) {
  return detail::solve_power_system(phi_matrix(cfg, beams, gamma),
                                    "uplink_powers_for_sinrs");
}

// SINR-preserving transform of uplink powers to downlink powers sharing
// the same beams. Conserves total power.
inline Eigen::VectorXd uplink_to_downlink_power(const SystemConfig& cfg,
                                                const Eigen::MatrixXcd& beams_u,
                                                const Eigen::VectorXd& q) {
  return downlink_powers_for_sinrs(cfg, beams_u, sinr_uplink(cfg, q, beams_u));
}

// SINR-preserving transform of downlink powers to uplink powers sharing
// the same beams. Conserves total power.
inline Eigen::VectorXd downlink_to_uplink_power(const SystemConfig& cfg,
                                                const Eigen::MatrixXcd& beams,
                                                const Eigen::VectorXd& p) {
  if (p.size() != cfg.users()) throw config_error("downlink_to_uplink_power: size mismatch");
  if (p.minCoeff() < 0.0) throw config_error("downlink_to_uplink_power: negative power");
  return uplink_powers_for_sinrs(cfg, beams, sinr_downlink(cfg, p, beams));
}

}  // namespace semlink

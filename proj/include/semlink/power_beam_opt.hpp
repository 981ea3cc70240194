// Joint power allocation and beamforming for the virtual uplink:
// MMSE receive beams, a successively-convexified power subproblem solved
// by the embedded barrier method, and the outer alternation that converts
// back to downlink powers through duality.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "semlink/barrier.hpp"
#include "semlink/channel.hpp"
#include "semlink/distortion.hpp"
#include "semlink/errors.hpp"
#include "semlink/numerics.hpp"

namespace semlink {

// Per-user objective data with the source/channel rates held fixed:
// the logistic parameters interpolated at the user's source rate, the
// channel rate, and the distortion weight.
struct ScaUserModel {
  double beta = 1.0;      // distortion weight
  double floor = 0.0;     // interpolated error-free distortion
  double span = 0.0;      // interpolated channel-distortion ceiling
  double slope = 1.0;     // interpolated logistic slope
  double midpoint = 0.0;  // interpolated logistic midpoint
  double r_c = 1.0;       // fixed channel coding rate
};

inline ScaUserModel make_sca_user(const DistortionTable& table, double r_s, double r_c,
                                  double beta) {
  const LogisticRow row = interpolate(table, r_s);
  return ScaUserModel{beta, row.floor, row.span, row.slope, row.midpoint, r_c};
}

// Slack-variable point of the convexified power subproblem.
struct ScaPoint {
  Eigen::VectorXd q;        // uplink powers
  Eigen::VectorXd t;        // logistic slack, t = exp(-slope * log10_ber)
  Eigen::VectorXd rho_hat;  // Q-argument slack
  Eigen::VectorXd g;        // dispersion slack in [0, 1]
  Eigen::VectorXd zeta;     // SINR lower slack
  Eigen::VectorXd xi;       // SINR upper slack
};

// Uplink gain matrix: entry (i, j) = |h_j^H w_i|^2 (channel j through
// user i's receive beam).
inline Eigen::MatrixXd gain_matrix(const SystemConfig& cfg, const Eigen::MatrixXcd& beams_u) {
  detail::require_unit_beams(cfg, beams_u, "gain_matrix");
  const int k = cfg.users();
  Eigen::MatrixXd g(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      g(i, j) = std::norm(cfg.channel.col(j).dot(beams_u.col(i)));
  return g;
}

inline Eigen::VectorXd sinr_uplink_from_gains(const Eigen::MatrixXd& gains,
                                              const Eigen::VectorXd& q) {
  const int k = static_cast<int>(q.size());
  Eigen::VectorXd gamma(k);
  for (int i = 0; i < k; ++i) {
    double interference = 0.0;
    for (int j = 0; j < k; ++j)
      if (j != i) interference += q[j] * gains(i, j);
    gamma[i] = q[i] * gains(i, i) / (interference + 1.0);
  }
  return gamma;
}

// Weighted-sum E2E distortion of the un-convexified uplink problem at the
// given powers (fixed rates).
inline double true_uplink_objective(const Eigen::MatrixXd& gains,
                                    const std::vector<ScaUserModel>& users,
                                    const Eigen::VectorXd& q, int blocklength) {
  const Eigen::VectorXd gamma = sinr_uplink_from_gains(gains, q);
  double obj = 0.0;
  for (std::size_t i = 0; i < users.size(); ++i) {
    const ScaUserModel& u = users[i];
    const double rho = log10_ber(gamma[static_cast<int>(i)], u.r_c, blocklength);
    obj += u.beta * (u.floor + u.span * detail::sigmoid(u.slope * (rho - u.midpoint)));
  }
  return obj;
}

namespace detail {

inline constexpr double kLn2 = 0.69314718055994530941723212145818;
inline constexpr double kLn10 = 2.30258509299404568401799145468436;

// The logistic slack t = exp(-slope * rho) overflows once the link is so
// clean that the channel term is below ~1e-20 of the span; anchoring at
// the clamped BER changes the modelled distortion by less than that.
inline double clamped_anchor_ber(const ScaUserModel& u, double rho) {
  return std::max(rho, u.midpoint - 46.0 / u.slope);
}

}  // namespace detail

// Exact slack values implied by the powers q: SINR slacks tight, the
// dispersion and Q-argument at their true values, t matching the true BER.
inline ScaPoint make_sca_anchor(const Eigen::MatrixXd& gains,
                                const std::vector<ScaUserModel>& users,
                                const Eigen::VectorXd& q, int blocklength) {
  const int k = static_cast<int>(users.size());
  if (q.size() != k || gains.rows() != k)
    throw config_error("make_sca_anchor: dimension mismatch");
  ScaPoint pt;
  pt.q = q;
  pt.t.resize(k);
  pt.rho_hat.resize(k);
  pt.g.resize(k);
  pt.zeta.resize(k);
  pt.xi.resize(k);
  const Eigen::VectorXd gamma = sinr_uplink_from_gains(gains, q);
  for (int i = 0; i < k; ++i) {
    if (!(gamma[i] > 0.0))
      throw sca_error("make_sca_anchor: zero SINR for user " + std::to_string(i));
    const ScaUserModel& u = users[i];
    const double one_plus = 1.0 + gamma[i];
    pt.zeta[i] = gamma[i];
    pt.xi[i] = gamma[i];
    pt.g[i] = std::sqrt(1.0 - 1.0 / (one_plus * one_plus));
    pt.rho_hat[i] = normal_approx_argument(gamma[i], u.r_c, blocklength);
    const double rho = log10_ber(gamma[i], u.r_c, blocklength);
    pt.t[i] = std::exp(-u.slope * detail::clamped_anchor_ber(u, rho));
  }
  return pt;
}

// The convexified power subproblem at an anchor point.
// Variables are stacked [q; theta; rho_hat; g; zeta; xi] with
// t_i = t_anchor_i * theta_i for conditioning. Constraint order: per-user
// logistic bound, Q-argument bound, SINR lower/upper bounds, dispersion
// bound; then the power budget; then the variable boxes.
class ScaSubproblem {
 public:
  ScaSubproblem(const Eigen::MatrixXd& gains, const std::vector<ScaUserModel>& users,
                int blocklength, double p_max, const ScaPoint& anchor)
      : gains_(gains), users_(users), p_max_(p_max), anchor_(anchor) {
    k_ = static_cast<int>(users.size());
    sqrt_l_ = std::sqrt(static_cast<double>(blocklength));
    log10_rcl_.resize(k_);
    kappa_.resize(k_);
    gamma_bar_.resize(k_);
    u_rho_.resize(k_);
    u_const_.resize(k_);
    for (int i = 0; i < k_; ++i) {
      const ScaUserModel& u = users_[i];
      log10_rcl_[i] = std::log10(u.r_c * static_cast<double>(blocklength));
      // kappa = c * t_anchor with c = exp(slope * midpoint).
      kappa_[i] = std::exp(u.slope * u.midpoint + std::log(anchor_.t[i]));
      gamma_bar_[i] = p_max_ * gains_(i, i);
      const double rho_n = anchor_.rho_hat[i];
      const double lq = log_q(rho_n);
      const double dlq = log_q_derivative(rho_n);
      u_rho_[i] = u.slope * dlq / detail::kLn10;
      u_const_[i] = std::log(anchor_.t[i]) - 1.0 +
                    u.slope * (-log10_rcl_[i] + (lq - dlq * rho_n) / detail::kLn10);
    }
  }

  int dim() const { return 6 * k_; }
  int num_constraints() const { return 13 * k_ + 1; }

  // Variable indices.
  int iq(int i) const { return i; }
  int it(int i) const { return k_ + i; }
  int ir(int i) const { return 2 * k_ + i; }
  int ig(int i) const { return 3 * k_ + i; }
  int iz(int i) const { return 4 * k_ + i; }
  int ix(int i) const { return 5 * k_ + i; }

  double objective(const Eigen::VectorXd& x) const {
    double v = 0.0;
    for (int i = 0; i < k_; ++i) {
      const ScaUserModel& u = users_[i];
      v += u.beta * u.span / (1.0 + kappa_[i] * x[it(i)]);
    }
    return v;
  }

  void objective_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& g) const {
    g.setZero(dim());
    for (int i = 0; i < k_; ++i) {
      const ScaUserModel& u = users_[i];
      const double den = 1.0 + kappa_[i] * x[it(i)];
      g[it(i)] = -u.beta * u.span * kappa_[i] / (den * den);
    }
  }

  void objective_hessian(const Eigen::VectorXd& x, Eigen::MatrixXd& h) const {
    h.setZero(dim(), dim());
    for (int i = 0; i < k_; ++i) {
      const ScaUserModel& u = users_[i];
      const double den = 1.0 + kappa_[i] * x[it(i)];
      h(it(i), it(i)) = 2.0 * u.beta * u.span * kappa_[i] * kappa_[i] / (den * den * den);
    }
  }

  double constraint(int c, const Eigen::VectorXd& x) const {
    if (c < k_) return logistic_bound(c, x);
    if (c < 2 * k_) return q_arg_bound(c - k_, x);
    if (c < 3 * k_) return sinr_lower_bound(c - 2 * k_, x);
    if (c < 4 * k_) return sinr_upper_bound(c - 3 * k_, x);
    if (c < 5 * k_) return dispersion_bound(c - 4 * k_, x);
    if (c == 5 * k_) return x.head(k_).sum() - p_max_;
    return box_value(c - 5 * k_ - 1, x);
  }

  void constraint_gradient(int c, const Eigen::VectorXd& x, Eigen::VectorXd& g) const {
    g.setZero(dim());
    if (c < k_) {
      const int i = c;
      g[it(i)] = 1.0;
      g[ir(i)] = u_rho_[i];
    } else if (c < 2 * k_) {
      const int i = c - k_;
      const double s = x[ir(i)] + x[ig(i)];
      const double d_n = anchor_.rho_hat[i] - anchor_.g[i];
      g[ir(i)] = 0.5 * s - 0.5 * d_n;
      g[ig(i)] = 0.5 * s + 0.5 * d_n;
      g[iz(i)] = -sqrt_l_ / (1.0 + x[iz(i)]);
    } else if (c < 3 * k_) {
      const int i = c - 2 * k_;
      double dz = 1.0;
      for (int j = 0; j < k_; ++j) {
        if (j == i) continue;
        const double sum_n = anchor_.zeta[i] - anchor_.q[j];
        dz += (0.5 * (x[iz(i)] + x[iq(j)]) - 0.5 * sum_n) * gains_(i, j);
        g[iq(j)] += (0.5 * (x[iz(i)] + x[iq(j)]) + 0.5 * sum_n) * gains_(i, j);
      }
      g[iz(i)] = dz;
      g[iq(i)] -= gains_(i, i);
    } else if (c < 4 * k_) {
      const int i = c - 3 * k_;
      double dx = -1.0;
      for (int j = 0; j < k_; ++j) {
        if (j == i) continue;
        const double sum_n = anchor_.xi[i] + anchor_.q[j];
        dx += (0.5 * (x[ix(i)] - x[iq(j)]) - 0.5 * sum_n) * gains_(i, j);
        g[iq(j)] += (-0.5 * (x[ix(i)] - x[iq(j)]) - 0.5 * sum_n) * gains_(i, j);
      }
      g[ix(i)] = dx;
      g[iq(i)] += gains_(i, i);
    } else if (c < 5 * k_) {
      const int i = c - 4 * k_;
      const double c1 = 1.0 + anchor_.xi[i];
      g[ix(i)] = 2.0 / (c1 * c1 * c1);
      g[ig(i)] = -2.0 * anchor_.g[i];
    } else if (c == 5 * k_) {
      g.head(k_).setOnes();
    } else {
      box_gradient(c - 5 * k_ - 1, g);
    }
  }

  void constraint_hessian(int c, const Eigen::VectorXd& x, Eigen::MatrixXd& h) const {
    h.setZero(dim(), dim());
    if (c < k_) return;  // linear
    if (c < 2 * k_) {
      const int i = c - k_;
      h(ir(i), ir(i)) = 0.5;
      h(ig(i), ig(i)) = 0.5;
      h(ir(i), ig(i)) = 0.5;
      h(ig(i), ir(i)) = 0.5;
      const double one_plus = 1.0 + x[iz(i)];
      h(iz(i), iz(i)) = sqrt_l_ / (one_plus * one_plus);
      return;
    }
    if (c < 3 * k_) {
      const int i = c - 2 * k_;
      for (int j = 0; j < k_; ++j) {
        if (j == i) continue;
        const double w = 0.5 * gains_(i, j);
        h(iz(i), iz(i)) += w;
        h(iq(j), iq(j)) += w;
        h(iz(i), iq(j)) += w;
        h(iq(j), iz(i)) += w;
      }
      return;
    }
    if (c < 4 * k_) {
      const int i = c - 3 * k_;
      for (int j = 0; j < k_; ++j) {
        if (j == i) continue;
        const double w = 0.5 * gains_(i, j);
        h(ix(i), ix(i)) += w;
        h(iq(j), iq(j)) += w;
        h(ix(i), iq(j)) -= w;
        h(iq(j), ix(i)) -= w;
      }
      return;
    }
    // dispersion bound, power budget and boxes are linear
  }

  const ScaPoint& anchor() const { return anchor_; }
  double t_anchor(int i) const { return anchor_.t[i]; }
  double gamma_bar(int i) const { return gamma_bar_[i]; }
  double u_rho(int i) const { return u_rho_[i]; }
  double u_const(int i) const { return u_const_[i]; }
  double sqrt_blocklength() const { return sqrt_l_; }
  int users() const { return k_; }

  // Stacks a ScaPoint into solver coordinates (t scaled by its anchor).
  Eigen::VectorXd pack(const ScaPoint& p) const {
    Eigen::VectorXd x(dim());
    for (int i = 0; i < k_; ++i) {
      x[iq(i)] = p.q[i];
      x[it(i)] = p.t[i] / anchor_.t[i];
      x[ir(i)] = p.rho_hat[i];
      x[ig(i)] = p.g[i];
      x[iz(i)] = p.zeta[i];
      x[ix(i)] = p.xi[i];
    }
    return x;
  }

  ScaPoint unpack(const Eigen::VectorXd& x) const {
    ScaPoint p;
    p.q.resize(k_);
    p.t.resize(k_);
    p.rho_hat.resize(k_);
    p.g.resize(k_);
    p.zeta.resize(k_);
    p.xi.resize(k_);
    for (int i = 0; i < k_; ++i) {
      p.q[i] = x[iq(i)];
      p.t[i] = x[it(i)] * anchor_.t[i];
      p.rho_hat[i] = x[ir(i)];
      p.g[i] = x[ig(i)];
      p.zeta[i] = x[iz(i)];
      p.xi[i] = x[ix(i)];
    }
    return p;
  }

 private:
  // Logistic bound: theta_i + u_rho_i rho_i + u_const_i <= 0, the tangent
  // majorant of log t + slope (log10(1/(Rc L)) + log10 Q(rho)).
  double logistic_bound(int i, const Eigen::VectorXd& x) const {
    return x[it(i)] + u_rho_[i] * x[ir(i)] + u_const_[i];
  }

  // Q-argument bound: 1/4 ((rho+g)^2 - l2(.)) - sqrt(L) (ln(1+zeta) - Rc ln 2) <= 0.
  double q_arg_bound(int i, const Eigen::VectorXd& x) const {
    const double rho = x[ir(i)], g = x[ig(i)], zeta = x[iz(i)];
    const double quad = 0.25 * ((rho + g) * (rho + g) -
                                tangent_l2(anchor_.rho_hat[i], anchor_.g[i], rho, g));
    return quad - sqrt_l_ * (std::log1p(zeta) - users_[i].r_c * detail::kLn2);
  }

  // SINR lower bound: sum_j 1/4 ((zeta+qj)^2 - l2(.)) G(i,j) + zeta - qi G(i,i) <= 0.
  double sinr_lower_bound(int i, const Eigen::VectorXd& x) const {
    const double zeta = x[iz(i)];
    double v = zeta - x[iq(i)] * gains_(i, i);
    for (int j = 0; j < k_; ++j) {
      if (j == i) continue;
      const double qj = x[iq(j)];
      v += 0.25 *
           ((zeta + qj) * (zeta + qj) - tangent_l2(anchor_.zeta[i], anchor_.q[j], zeta, qj)) *
           gains_(i, j);
    }
    return v;
  }

  // SINR upper bound: sum_j 1/4 ((xi-qj)^2 - l1(.)) G(i,j) - xi + qi G(i,i) <= 0.
  double sinr_upper_bound(int i, const Eigen::VectorXd& x) const {
    const double xi = x[ix(i)];
    double v = -xi + x[iq(i)] * gains_(i, i);
    for (int j = 0; j < k_; ++j) {
      if (j == i) continue;
      const double qj = x[iq(j)];
      v += 0.25 *
           ((xi - qj) * (xi - qj) - tangent_l1(anchor_.xi[i], anchor_.q[j], xi, qj)) *
           gains_(i, j);
    }
    return v;
  }

  // Dispersion bound: 1 + l3(xi_n, xi) - (g_n^2 + 2 g_n (g - g_n)) <= 0.
  double dispersion_bound(int i, const Eigen::VectorXd& x) const {
    const double gn = anchor_.g[i];
    return 1.0 + tangent_l3(anchor_.xi[i], x[ix(i)]) -
           (gn * gn + 2.0 * gn * (x[ig(i)] - gn));
  }

  // Boxes, 8 per user: -theta, -q, -g, g-1, -zeta, zeta-gbar, -xi, xi-gbar.
  double box_value(int b, const Eigen::VectorXd& x) const {
    const int i = b / 8;
    switch (b % 8) {
      case 0: return -x[it(i)];
      case 1: return -x[iq(i)];
      case 2: return -x[ig(i)];
      case 3: return x[ig(i)] - 1.0;
      case 4: return -x[iz(i)];
      case 5: return x[iz(i)] - gamma_bar_[i];
      case 6: return -x[ix(i)];
      default: return x[ix(i)] - gamma_bar_[i];
    }
  }

  void box_gradient(int b, Eigen::VectorXd& g) const {
    const int i = b / 8;
    switch (b % 8) {
      case 0: g[it(i)] = -1.0; break;
      case 1: g[iq(i)] = -1.0; break;
      case 2: g[ig(i)] = -1.0; break;
      case 3: g[ig(i)] = 1.0; break;
      case 4: g[iz(i)] = -1.0; break;
      case 5: g[iz(i)] = 1.0; break;
      case 6: g[ix(i)] = -1.0; break;
      default: g[ix(i)] = 1.0; break;
    }
  }

  Eigen::MatrixXd gains_;
  std::vector<ScaUserModel> users_;
  double p_max_;
  ScaPoint anchor_;
  int k_ = 0;
  double sqrt_l_ = 0.0;
  std::vector<double> log10_rcl_, kappa_, gamma_bar_, u_rho_, u_const_;
};

namespace detail {

// Builds a strictly feasible start for the subproblem by backing the
// anchor slacks off their (tight) boundaries: zeta down, xi up, g up to
// re-satisfy the dispersion bound, rho_hat re-solved from the quadratic
// Q-argument bound, theta from the linear logistic bound. Shrinks the
// margin until verification passes.
inline Eigen::VectorXd interior_start(const ScaSubproblem& prog, const ScaPoint& anchor) {
  const int k = prog.users();
  for (double delta = 1e-3; delta >= 1e-11; delta *= 0.1) {
    Eigen::VectorXd x = prog.pack(anchor);
    bool constructed = true;
    for (int i = 0; i < k && constructed; ++i) {
      const double zeta0 = (1.0 - delta) * anchor.zeta[i];
      const double head_room = prog.gamma_bar(i) - anchor.xi[i];
      if (!(head_room > 0.0)) {
        constructed = false;
        break;
      }
      const double xi0 = anchor.xi[i] + std::min(delta * anchor.xi[i], 0.5 * head_room);
      // Dispersion bound: linear in g, solve for margin delta. At very
      // high SINR g sits within rounding of its upper box, so the step is
      // capped by the remaining headroom.
      const double gn = anchor.g[i];
      const double g_headroom = 1.0 - gn;
      if (!(g_headroom > 0.0)) {
        constructed = false;
        break;
      }
      const double resid50 = 1.0 + tangent_l3(anchor.xi[i], xi0) - gn * gn;
      const double g0 =
          gn + std::min(0.5 * g_headroom, (resid50 + delta * 0.01) / (2.0 * gn));
      if (!(g0 < 1.0) || !(g0 > 0.0)) {
        constructed = false;
        break;
      }
      // Q-argument bound is a quadratic in rho at fixed (g, zeta); recover
      // its coefficients from three probes around the anchor and solve for
      // the margin level set, in anchor-shifted coordinates s = rho - rho_n.
      const double rho_n = anchor.rho_hat[i];
      const double margin47 = delta * (1.0 + std::abs(rho_n) * gn);
      Eigen::VectorXd probe = x;
      probe[prog.iz(i)] = zeta0;
      probe[prog.ig(i)] = g0;
      probe[prog.ir(i)] = rho_n;
      const double at_zero = prog.constraint(prog.users() + i, probe);
      probe[prog.ir(i)] = rho_n + 1.0;
      const double at_plus = prog.constraint(prog.users() + i, probe);
      probe[prog.ir(i)] = rho_n - 1.0;
      const double at_minus = prog.constraint(prog.users() + i, probe);
      const double a_q = 0.5 * (at_plus + at_minus) - at_zero;
      const double b_q = 0.5 * (at_plus - at_minus);
      const double c_q = at_zero + margin47;
      const double disc = b_q * b_q - 4.0 * a_q * c_q;
      if (!(disc > 0.0) || !(a_q > 0.0)) {
        constructed = false;
        break;
      }
      const double s1 = (-b_q - std::sqrt(disc)) / (2.0 * a_q);
      const double s2 = (-b_q + std::sqrt(disc)) / (2.0 * a_q);
      double rho0 = rho_n + (std::abs(s1) < std::abs(s2) ? s1 : s2);
      // Logistic bound: linear in theta.
      double theta0 = -delta - prog.u_const(i) - prog.u_rho(i) * rho0;
      if (!(theta0 > 0.0)) {
        // Fall back to the max-margin vertex of the quadratic.
        rho0 = rho_n - b_q / (2.0 * a_q);
        theta0 = -delta - prog.u_const(i) - prog.u_rho(i) * rho0;
        if (!(theta0 > 0.0)) {
          constructed = false;
          break;
        }
      }
      x[prog.iz(i)] = zeta0;
      x[prog.ix(i)] = xi0;
      x[prog.ig(i)] = g0;
      x[prog.ir(i)] = rho0;
      x[prog.it(i)] = theta0;
    }
    if (!constructed) continue;
    bool ok = true;
    for (int c = 0; c < prog.num_constraints() && ok; ++c) {
      const double v = prog.constraint(c, x);
      if (!std::isfinite(v) || !(v < 0.0)) ok = false;
    }
    if (ok) return x;
  }
  throw infeasible_error("interior_start: no strictly feasible start found");
}

// Clamp powers into the strict interior of the feasible set so that exact
// anchor slacks stay off the variable boxes.
inline Eigen::VectorXd sanitize_powers(Eigen::VectorXd q, double p_max) {
  const int k = static_cast<int>(q.size());
  const double floor_q = 1e-10 * p_max / k;
  for (int i = 0; i < k; ++i) q[i] = std::max(q[i], floor_q);
  const double budget = p_max * (1.0 - 1e-9);
  const double total = q.sum();
  if (total > budget) q *= budget / total;
  return q;
}

}  // namespace detail

// One convexified subproblem solve at the given anchor. Returns the
// optimal slack point of the convex program posed there.
inline ScaPoint sca_subproblem(const Eigen::MatrixXd& gains,
                               const std::vector<ScaUserModel>& users, int blocklength,
                               double p_max, const ScaPoint& anchor,
                               const BarrierOptions& barrier = {}) {
  ScaSubproblem prog(gains, users, blocklength, p_max, anchor);
  Eigen::VectorXd x0;
  try {
    x0 = detail::interior_start(prog, anchor);
  } catch (const infeasible_error& e) {
    throw sca_error(std::string("sca_subproblem: ") + e.what());
  }
  const BarrierResult res = barrier_solve(prog, x0, barrier);
  return prog.unpack(res.x);
}

struct ScaPowerResult {
  Eigen::VectorXd q;
  std::vector<double> trajectory;  // true objective per accepted iteration
  int iterations = 0;
  bool converged = false;
};

struct PowerBeamOptions {
  double sca_epsilon = 1e-4;  // fractional-decrease stop for the power loop
  int sca_max_iters = 50;
  double outer_epsilon = 1e-4;  // fractional-decrease stop for the alternation
  int outer_max_iters = 30;
  BarrierOptions barrier;
};

// Successive convex approximation on the uplink powers with the beams
// fixed: re-anchors the slacks at each accepted solution and stops when
// the true objective's fractional decrease falls below the threshold and
// the power iterate has stabilized. The iterate condition matters on
// logistic plateaus, where the powers still march toward their fixed
// point while the true objective is momentarily flat. A solution is
// accepted only if the true objective does not increase, which keeps the
// trajectory monotone.
inline ScaPowerResult sca_power(const Eigen::MatrixXd& gains,
                                const std::vector<ScaUserModel>& users, int blocklength,
                                double p_max, const Eigen::VectorXd& q_init,
                                const PowerBeamOptions& opt = {}) {
  if (q_init.sum() > p_max * (1.0 + 1e-9))
    throw config_error("sca_power: initial powers exceed the budget");
  ScaPowerResult out;
  out.q = detail::sanitize_powers(q_init, p_max);
  double obj = true_uplink_objective(gains, users, out.q, blocklength);
  out.trajectory.push_back(obj);
  for (int it = 0; it < opt.sca_max_iters; ++it) {
    const ScaPoint anchor = make_sca_anchor(gains, users, out.q, blocklength);
    const ScaPoint sol = sca_subproblem(gains, users, blocklength, p_max, anchor, opt.barrier);
    const double obj_new = true_uplink_objective(gains, users, sol.q, blocklength);
    ++out.iterations;
    if (obj_new > obj) break;  // solver noise at a fixed point: keep incumbent
    const double frac = (obj - obj_new) / std::max(std::abs(obj), 1e-300);
    const double moved = (sol.q - out.q).cwiseAbs().maxCoeff();
    out.q = sol.q;
    obj = obj_new;
    out.trajectory.push_back(obj);
    if (frac < opt.sca_epsilon && moved <= 1e-6 * p_max) {
      out.converged = true;
      break;
    }
  }
  return out;
}

// MMSE receive beams for the virtual uplink at powers q:
// w_i = normalize((I + sum_j q_j h_j h_j^H)^{-1} h_i).
inline Eigen::MatrixXcd mmse_beam(const SystemConfig& cfg, const Eigen::VectorXd& q) {
  const int k = cfg.users();
  if (q.size() != k) throw config_error("mmse_beam: power vector size mismatch");
  if (q.minCoeff() < 0.0) throw config_error("mmse_beam: negative power");
  Eigen::MatrixXcd cov = Eigen::MatrixXcd::Identity(cfg.n_tx, cfg.n_tx);
  for (int j = 0; j < k; ++j)
    cov += q[j] * cfg.channel.col(j) * cfg.channel.col(j).adjoint();
  const Eigen::LLT<Eigen::MatrixXcd> llt(cov);
  Eigen::MatrixXcd beams = llt.solve(cfg.channel);
  for (int i = 0; i < k; ++i) beams.col(i).normalize();
  return beams;
}

struct PowerBeamSolution {
  Eigen::VectorXd p;           // downlink powers
  Eigen::MatrixXcd beams;      // downlink beams (= uplink beams)
  Eigen::VectorXd q;           // converged uplink powers
  Eigen::MatrixXcd beams_u;    // converged uplink beams
  std::vector<double> trajectory;  // uplink objective per outer iteration
  bool converged = false;
  double sinr_mismatch = 0.0;  // max relative downlink/uplink SINR gap
  std::string diagnostics;
};

// Alternation between MMSE beam updates and SCA power updates on the
// virtual uplink, with duality conversions at entry and exit.
inline PowerBeamSolution joint_power_beam(const SystemConfig& cfg,
                                          const std::vector<ScaUserModel>& users,
                                          const Eigen::VectorXd& p_init,
                                          const Eigen::MatrixXcd& w_init,
                                          const PowerBeamOptions& opt = {}) {
  const int k = cfg.users();
  if (static_cast<int>(users.size()) != k)
    throw config_error("joint_power_beam: one user model per user required");

  Eigen::VectorXd q;
  Eigen::MatrixXcd beams_u;
  auto fresh_start = [&]() {
    beams_u = cfg.channel;
    for (int i = 0; i < k; ++i) beams_u.col(i).normalize();
    q = Eigen::VectorXd::Constant(k, cfg.p_max / k);
  };
  PowerBeamSolution out;
  try {
    const Eigen::VectorXd p_in = detail::sanitize_powers(p_init, cfg.p_max);
    q = downlink_to_uplink_power(cfg, w_init, p_in);
    beams_u = w_init;
  } catch (const duality_error& e) {
    out.diagnostics = std::string("entry conversion failed (") + e.what() +
                      "); restarted from equal power and matched filters";
    fresh_start();
  }
  q = detail::sanitize_powers(q, cfg.p_max);

  Eigen::MatrixXd gains = gain_matrix(cfg, beams_u);
  double obj = true_uplink_objective(gains, users, q, cfg.blocklength);
  out.trajectory.push_back(obj);

  bool restarted = false;
  for (int it = 0; it < opt.outer_max_iters; ++it) {
    beams_u = mmse_beam(cfg, q);
    gains = gain_matrix(cfg, beams_u);
    ScaPowerResult pr;
    try {
      pr = sca_power(gains, users, cfg.blocklength, cfg.p_max, q, opt);
    } catch (const sca_error& e) {
      if (restarted) throw;  // persists: let the caller report it
      restarted = true;
      out.diagnostics += std::string(out.diagnostics.empty() ? "" : "; ") +
                         "power stage failed (" + e.what() +
                         "); restarted from equal power and matched filters";
      fresh_start();
      gains = gain_matrix(cfg, beams_u);
      obj = true_uplink_objective(gains, users, q, cfg.blocklength);
      continue;
    }
    q = pr.q;
    const double obj_new = true_uplink_objective(gains, users, q, cfg.blocklength);
    const double frac = (obj - obj_new) / std::max(std::abs(obj), 1e-300);
    obj = obj_new;
    out.trajectory.push_back(obj);
    if (frac < opt.outer_epsilon) {
      out.converged = true;
      break;
    }
  }

  const Eigen::VectorXd gamma_u = sinr_uplink_from_gains(gains, q);
  out.p = downlink_powers_for_sinrs(cfg, beams_u, gamma_u);
  out.beams = beams_u;
  out.q = q;
  out.beams_u = beams_u;
  const Eigen::VectorXd gamma_d = sinr_downlink(cfg, out.p, out.beams);
  for (int i = 0; i < k; ++i) {
    const double rel = std::abs(gamma_d[i] - gamma_u[i]) / std::max(gamma_u[i], 1e-300);
    out.sinr_mismatch = std::max(out.sinr_mismatch, rel);
  }
  return out;
}

}  // namespace semlink

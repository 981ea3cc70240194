// Per-user adaptive source/channel rate optimization: 1-D subgradient
// descent on the continuous-relaxed source rate with the delay constraint
// active (channel rate = source rate / delay cap).
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "semlink/channel.hpp"
#include "semlink/distortion.hpp"
#include "semlink/errors.hpp"
#include "semlink/numerics.hpp"

namespace semlink {

struct RateSolution {
  double source_rate = 0.0;
  double channel_rate = 0.0;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<std::pair<double, double>> trajectory;  // (rate, objective)
};

struct RateOptions {
  double epsilon = 1e-5;        // fractional-decrease stopping threshold
  int max_iters = 500;
  double armijo = 0.3;          // sufficient-decrease constant
  double shrink = 0.5;          // backtracking factor
  double initial_step = 0.05;   // first trial step, fraction of the rate range
  bool multi_start = false;     // restart from every tabulated rate
};

// Predicted E2E distortion at source rate r_s with the delay constraint
// active: channel rate r_s / delay_cap.
inline double objective_at(const DistortionTable& table, double gamma, double delay_cap,
                           int blocklength, double r_s) {
  if (!(gamma > 0.0)) throw domain_error("objective_at: gamma must be > 0");
  if (!(delay_cap > 0.0)) throw domain_error("objective_at: delay cap must be > 0");
  return e2e_distortion(table, r_s, log10_ber(gamma, r_s / delay_cap, blocklength));
}

namespace detail {

// Interpolated logistic parameters and their rate-derivatives on one side
// of r_s. side < 0 uses the bracket ending at r_s, side > 0 the bracket
// starting at r_s, side 0 whichever bracket contains r_s.
struct InterpDeriv {
  LogisticRow row;
  double d_floor, d_span, d_slope, d_midpoint;
};

inline InterpDeriv interp_with_derivatives(const DistortionTable& table, double r_s,
                                           int side) {
  const auto& rows = table.rows;
  const int n = static_cast<int>(rows.size());
  int lo = -1;
  for (int i = 0; i < n - 1; ++i) {
    const bool inside = (side > 0) ? (r_s >= rows[i].rate && r_s < rows[i + 1].rate)
                                   : (side < 0)
                                         ? (r_s > rows[i].rate && r_s <= rows[i + 1].rate)
                                         : (r_s >= rows[i].rate && r_s <= rows[i + 1].rate);
    if (inside) {
      lo = i;
      break;
    }
  }
  if (lo < 0) throw range_error("interp_with_derivatives: rate outside table range");
  const LogisticRow& a = rows[lo];
  const LogisticRow& b = rows[lo + 1];
  const double width = b.rate - a.rate;
  const double lambda = (r_s - a.rate) / width;
  InterpDeriv out;
  out.row = LogisticRow{r_s, a.floor + lambda * (b.floor - a.floor),
                        a.span + lambda * (b.span - a.span),
                        a.slope + lambda * (b.slope - a.slope),
                        a.midpoint + lambda * (b.midpoint - a.midpoint)};
  out.d_floor = (b.floor - a.floor) / width;
  out.d_span = (b.span - a.span) / width;
  out.d_slope = (b.slope - a.slope) / width;
  out.d_midpoint = (b.midpoint - a.midpoint) / width;
  return out;
}

// One-sided analytic derivative of objective_at with respect to r_s.
inline double objective_derivative_one_sided(const DistortionTable& table, double gamma,
                                             double delay_cap, int blocklength, double r_s,
                                             int side) {
  constexpr double kLn2 = 0.69314718055994530941723212145818;
  constexpr double kLn10 = 2.30258509299404568401799145468436;
  const InterpDeriv ip = interp_with_derivatives(table, r_s, side);

  const double r_c = r_s / delay_cap;
  const double rho = log10_ber(gamma, r_c, blocklength);
  const double arg = normal_approx_argument(gamma, r_c, blocklength);
  const double one_plus = 1.0 + gamma;
  const double dispersion = std::sqrt(1.0 - 1.0 / (one_plus * one_plus));
  // d(arg)/d(Rc) and d(rho)/d(Rc), then through Rc = r_s / T.
  const double darg_drc = -std::sqrt(static_cast<double>(blocklength)) * kLn2 / dispersion;
  const double drho_drc = -1.0 / (r_c * kLn10) + log_q_derivative(arg) * darg_drc / kLn10;
  const double drho = drho_drc / delay_cap;

  const double z = ip.row.slope * (rho - ip.row.midpoint);
  const double sig = sigmoid(z);
  const double dsig = sig * (1.0 - sig);
  return ip.d_floor + ip.d_span * sig +
         ip.row.span * dsig *
             (ip.d_slope * (rho - ip.row.midpoint) +
              ip.row.slope * (drho - ip.d_midpoint));
}

inline bool is_tabulated(const DistortionTable& table, double r_s, int* index = nullptr) {
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const double r = table.rows[i].rate;
    if (std::abs(r_s - r) <= 1e-12 * std::max(1.0, std::abs(r))) {
      if (index) *index = static_cast<int>(i);
      return true;
    }
  }
  return false;
}

}  // namespace detail

// Subgradient of the interpolated objective at r_s. Differentiable at
// non-tabulated rates; at tabulated rates the rule is: right derivative
// at the lower endpoint, left derivative at the upper endpoint, and the
// mean of the one-sided derivatives in between.
inline double subgradient_at(const DistortionTable& table, double gamma, double delay_cap,
                             int blocklength, double r_s) {
  int idx = -1;
  if (!detail::is_tabulated(table, r_s, &idx)) {
    return detail::objective_derivative_one_sided(table, gamma, delay_cap, blocklength,
                                                  r_s, 0);
  }
  const int last = static_cast<int>(table.rows.size()) - 1;
  const double snapped = table.rows[idx].rate;
  if (idx == 0)
    return detail::objective_derivative_one_sided(table, gamma, delay_cap, blocklength,
                                                  snapped, +1);
  if (idx == last)
    return detail::objective_derivative_one_sided(table, gamma, delay_cap, blocklength,
                                                  snapped, -1);
  const double left = detail::objective_derivative_one_sided(table, gamma, delay_cap,
                                                             blocklength, snapped, -1);
  const double right = detail::objective_derivative_one_sided(table, gamma, delay_cap,
                                                              blocklength, snapped, +1);
  return 0.5 * (left + right);
}

namespace detail {

// Projected subgradient descent with backtracking on a 1-D interval;
// shared by the delay-active objective and the fixed-channel-rate
// baseline objective. Returns the best visited point.
inline RateSolution descend_1d(const std::function<double(double)>& f,
                               const std::function<double(double)>& subgrad, double lo,
                               double hi, double start, const RateOptions& opt) {
  const double range = hi - lo;
  const double min_step = 1e-12 * std::max(range, 1.0);
  double r = std::clamp(start, lo, hi);
  double fr = f(r);
  RateSolution sol;
  sol.trajectory.emplace_back(r, fr);
  double best_r = r, best_f = fr;

  int it = 0;
  for (; it < opt.max_iters; ++it) {
    const double d = subgrad(r);
    const double dir = d > 0.0 ? -1.0 : (d < 0.0 ? 1.0 : 0.0);
    if (dir == 0.0) {
      sol.converged = true;
      break;
    }
    double step = opt.initial_step * range;
    double r_next = r, f_next = fr;
    bool accepted = false;
    while (step >= min_step) {
      const double trial = std::clamp(r + dir * step, lo, hi);
      const double moved = std::abs(trial - r);
      if (moved < min_step) {
        step *= opt.shrink;
        continue;
      }
      const double f_trial = f(trial);
      if (f_trial <= fr - opt.armijo * moved * std::abs(d)) {
        r_next = trial;
        f_next = f_trial;
        accepted = true;
        break;
      }
      step *= opt.shrink;
    }
    if (!accepted) {
      sol.converged = true;  // no descent possible along the subgradient
      break;
    }
    const double frac = (fr - f_next) / std::max(std::abs(fr), 1e-300);
    r = r_next;
    fr = f_next;
    sol.trajectory.emplace_back(r, fr);
    if (fr < best_f) {
      best_f = fr;
      best_r = r;
    }
    if (frac < opt.epsilon) {
      sol.converged = true;
      ++it;
      break;
    }
  }
  sol.iterations = it;
  sol.source_rate = best_r;
  sol.objective = best_f;
  return sol;
}

}  // namespace detail

// Minimize the E2E distortion over the table's rate range with the delay
// constraint active. Starts from the lowest tabulated rate; optionally
// restarts from every tabulated rate and keeps the best solution.
inline RateSolution optimize_rate(const DistortionTable& table, double gamma,
                                  double delay_cap, int blocklength,
                                  const RateOptions& opt = {}) {
  if (!(gamma > 0.0)) throw domain_error("optimize_rate: gamma must be > 0");
  if (!(delay_cap > 0.0)) throw domain_error("optimize_rate: delay cap must be > 0");
  auto f = [&](double r) { return objective_at(table, gamma, delay_cap, blocklength, r); };
  auto g = [&](double r) {
    return subgradient_at(table, gamma, delay_cap, blocklength, r);
  };
  const double lo = table.rate_min();
  const double hi = table.rate_max();

  RateSolution best = detail::descend_1d(f, g, lo, hi, lo, opt);
  if (opt.multi_start) {
    for (std::size_t i = 1; i < table.rows.size(); ++i) {
      RateSolution s = detail::descend_1d(f, g, lo, hi, table.rows[i].rate, opt);
      if (s.objective < best.objective) best = s;
    }
  }
  best.channel_rate = best.source_rate / delay_cap;
  return best;
}

// Baseline variant with a pinned channel rate: the BER is a constant, the
// delay cap bounds the source rate from above (r_s <= r_c * delay_cap),
// and only the interpolated logistic varies with the rate.
inline RateSolution optimize_rate_fixed_rc(const DistortionTable& table, double gamma,
                                           double delay_cap, int blocklength, double r_c,
                                           const RateOptions& opt = {}) {
  // gamma == 0 is allowed: the BER saturates and rate selection proceeds.
  if (gamma < 0.0) throw domain_error("optimize_rate_fixed_rc: gamma must be >= 0");
  if (!(r_c > 0.0)) throw domain_error("optimize_rate_fixed_rc: r_c must be > 0");
  const double rho = log10_ber(gamma, r_c, blocklength);
  const double lo = table.rate_min();
  const double hi = std::min(table.rate_max(), r_c * delay_cap);
  if (hi < lo)
    throw range_error("optimize_rate_fixed_rc: delay cap excludes every tabulated rate");

  auto f = [&](double r) { return e2e_distortion(table, r, rho); };
  auto g = [&](double r) {
    auto one_sided = [&](int side) {
      const detail::InterpDeriv ip = detail::interp_with_derivatives(table, r, side);
      const double z = ip.row.slope * (rho - ip.row.midpoint);
      const double sig = detail::sigmoid(z);
      const double dsig = sig * (1.0 - sig);
      return ip.d_floor + ip.d_span * sig +
             ip.row.span * dsig * (ip.d_slope * (rho - ip.row.midpoint) -
                                   ip.row.slope * ip.d_midpoint);
    };
    int idx = -1;
    if (!detail::is_tabulated(table, r, &idx)) return one_sided(0);
    if (idx == 0) return one_sided(+1);
    if (idx == static_cast<int>(table.rows.size()) - 1) return one_sided(-1);
    return 0.5 * (one_sided(-1) + one_sided(+1));
  };

  RateSolution best = detail::descend_1d(f, g, lo, hi, lo, opt);
  if (opt.multi_start) {
    for (std::size_t i = 1; i < table.rows.size(); ++i) {
      if (table.rows[i].rate > hi) break;
      RateSolution s = detail::descend_1d(f, g, lo, hi, table.rows[i].rate, opt);
      if (s.objective < best.objective) best = s;
    }
  }
  best.channel_rate = r_c;
  return best;
}

}  // namespace semlink

// Gaussian tail scalar functions and first-order tangent helpers.
//
// Everything here is a pure function of its arguments; safe to call from
// any number of threads.
#pragma once

#include <cmath>
#include <limits>

#include "semlink/errors.hpp"

namespace semlink {

namespace detail {

inline constexpr double kSqrt2 = 1.41421356237309504880168872420969808;
inline constexpr double kSqrt2Pi = 2.50662827463100050241576528481104525;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178032973640561764;

inline void require_finite(double x, const char* who) {
  if (!std::isfinite(x)) throw domain_error(std::string(who) + ": non-finite argument");
}

// Mills ratio Q(x)/phi(x) for x >= 8, by the continued fraction
// M(x) = 1/(x + 1/(x + 2/(x + 3/(...)))), evaluated backwards. Depth 64
// is far past full double accuracy for x >= 8.
inline double mills_ratio_tail(double x) {
  double r = 0.0;
  for (int k = 64; k >= 1; --k) r = static_cast<double>(k) / (x + r);
  return 1.0 / (x + r);
}

}  // namespace detail

// Gaussian Q-function: upper-tail probability of the standard normal.
inline double q_function(double x) {
  detail::require_finite(x, "q_function");
  return 0.5 * std::erfc(x / detail::kSqrt2);
}

// Natural log of Q(x), finite for any finite x. The x >= 8 tail goes
// through the Mills-ratio continued fraction so log Q(37) and beyond do
// not underflow; the far-left tail uses log1p(-Q(-x)).
inline double log_q(double x) {
  detail::require_finite(x, "log_q");
  if (x >= 8.0) {
    return -0.5 * x * x - detail::kLogSqrt2Pi + std::log(detail::mills_ratio_tail(x));
  }
  if (x > -8.0) {
    return std::log(0.5 * std::erfc(x / detail::kSqrt2));
  }
  // Q(x) = 1 - Q(-x) with Q(-x) tiny.
  return std::log1p(-std::exp(log_q(-x)));
}

// d/dx log Q(x) = -phi(x)/Q(x); strictly negative, equals -sqrt(2/pi) at 0.
inline double log_q_derivative(double x) {
  detail::require_finite(x, "log_q_derivative");
  double d;
  if (x >= 8.0) {
    d = -1.0 / detail::mills_ratio_tail(x);
  } else {
    const double phi = std::exp(-0.5 * x * x) / detail::kSqrt2Pi;
    d = -phi / (0.5 * std::erfc(x / detail::kSqrt2));
  }
  // phi underflows near x = -39; keep the sign of the true derivative.
  if (d == 0.0) d = -std::numeric_limits<double>::denorm_min();
  return d;
}

// Bundled evaluation of Q and log Q at one argument.
struct QEval {
  double x = 0.0;
  double q = 0.0;
  double log_q = 0.0;
};

inline QEval evaluate_q(double x) {
  return QEval{x, q_function(x), log_q(x)};
}

// First-order expansion of (x + y)^2 at (x0, y0); under-bounds the function.
inline double tangent_l1(double x0, double y0, double x, double y) {
  detail::require_finite(x0, "tangent_l1");
  detail::require_finite(y0, "tangent_l1");
  const double s = x0 + y0;
  return 2.0 * s * ((x - x0) + (y - y0)) + s * s;
}

// First-order expansion of (x - y)^2 at (x0, y0); under-bounds the function.
inline double tangent_l2(double x0, double y0, double x, double y) {
  detail::require_finite(x0, "tangent_l2");
  detail::require_finite(y0, "tangent_l2");
  const double d = x0 - y0;
  return 2.0 * d * ((x - x0) - (y - y0)) + d * d;
}

// First-order expansion of -1/(1+x)^2 at x0 >= 0; over-bounds the function.
inline double tangent_l3(double x0, double x) {
  detail::require_finite(x0, "tangent_l3");
  if (x0 < 0.0) throw domain_error("tangent_l3: operating point must be >= 0");
  const double c = 1.0 + x0;
  return 2.0 / (c * c * c) * (x - x0) - 1.0 / (c * c);
}

}  // namespace semlink

// Logistic end-to-end distortion models: per-rate parameter rows, linear
// interpolation between rows, and least-squares fitting of the logistic
// parameters from sampled (log10-BER, distortion) data.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "semlink/errors.hpp"

namespace semlink {

enum class TaskKind { data, semantic };

inline const char* to_string(TaskKind k) {
  return k == TaskKind::data ? "data" : "semantic";
}

inline TaskKind task_kind_from_string(const std::string& s) {
  if (s == "data") return TaskKind::data;
  if (s == "semantic") return TaskKind::semantic;
  throw config_error("unknown task kind '" + s + "'");
}

// One fitted model: distortion(r) = floor + span / (1 + exp(-slope (r - midpoint)))
// with r the base-10 log of the bit error rate.
struct LogisticRow {
  double rate = 0.0;      // source coding rate [bits per source item]
  double floor = 0.0;     // distortion under error-free transmission
  double span = 0.0;      // channel-induced distortion ceiling
  double slope = 0.0;     // logistic steepness, > 0
  double midpoint = 0.0;  // logistic center [log10-BER units]
};

struct DistortionTable {
  TaskKind kind = TaskKind::data;
  std::vector<LogisticRow> rows;

  double rate_min() const { return rows.front().rate; }
  double rate_max() const { return rows.back().rate; }

  void validate() const {
    if (rows.size() < 2)
      throw config_error("distortion table needs at least 2 rows for interpolation");
    for (std::size_t n = 0; n < rows.size(); ++n) {
      const LogisticRow& r = rows[n];
      if (!(r.rate > 0.0)) throw config_error("table row rate must be positive");
      if (n > 0 && !(rows[n - 1].rate < r.rate))
        throw config_error("table rows must be strictly ascending in rate");
      if (r.floor < 0.0 || r.span < 0.0)
        throw config_error("table row floor/span must be nonnegative");
      if (r.floor + r.span > 1.0 + 1e-9)
        throw config_error("table row floor + span must not exceed 1");
      if (!(r.slope > 0.0)) throw config_error("table row slope must be positive");
    }
  }

  // Non-monotone floors are legal (empirical tables are noisy) but worth
  // flagging; returns warning strings instead of throwing.
  std::vector<std::string> validation_warnings() const {
    std::vector<std::string> w;
    for (std::size_t n = 1; n < rows.size(); ++n) {
      if (rows[n].floor > rows[n - 1].floor + 1e-12) {
        w.push_back("floor increases between rates " + std::to_string(rows[n - 1].rate) +
                    " and " + std::to_string(rows[n].rate));
      }
    }
    return w;
  }
};

namespace detail {

// Numerically stable logistic sigmoid.
inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace detail

// E2E distortion of one model at the given log10-BER.
inline double evaluate(const LogisticRow& row, double log10_ber) {
  return row.floor + row.span * detail::sigmoid(row.slope * (log10_ber - row.midpoint));
}

// Parameters at a non-tabulated rate, by linear interpolation of all four
// logistic parameters between the bracketing rows. Exact row when r_s hits
// a tabulated rate. Out-of-range rates are an error; clamping is the
// optimizer's job.
inline LogisticRow interpolate(const DistortionTable& table, double r_s) {
  const auto& rows = table.rows;
  if (rows.size() < 2) throw config_error("interpolate: table needs >= 2 rows");
  if (r_s < table.rate_min() || r_s > table.rate_max())
    throw range_error("interpolate: rate " + std::to_string(r_s) + " outside table range [" +
                      std::to_string(table.rate_min()) + ", " +
                      std::to_string(table.rate_max()) + "]");
  auto upper = std::upper_bound(rows.begin(), rows.end(), r_s,
                                [](double v, const LogisticRow& r) { return v < r.rate; });
  if (upper == rows.begin()) return rows.front();
  if (upper == rows.end()) return rows.back();
  const LogisticRow& lo = *(upper - 1);
  const LogisticRow& hi = *upper;
  const double lambda = (r_s - lo.rate) / (hi.rate - lo.rate);
  return LogisticRow{r_s,
                     lo.floor + lambda * (hi.floor - lo.floor),
                     lo.span + lambda * (hi.span - lo.span),
                     lo.slope + lambda * (hi.slope - lo.slope),
                     lo.midpoint + lambda * (hi.midpoint - lo.midpoint)};
}

inline double e2e_distortion(const DistortionTable& table, double r_s, double log10_ber) {
  return evaluate(interpolate(table, r_s), log10_ber);
}

struct FitResult {
  double span = 0.0;
  double slope = 0.0;
  double midpoint = 0.0;
  double mse = 0.0;
  int iterations = 0;
};

// Fit (span, slope, midpoint) of the logistic to samples of
// (log10_ber, distortion) with a known error-free floor, by damped
// Gauss-Newton (Levenberg-Marquardt) with the analytic Jacobian.
// Deterministic: fixed initialization from the data.
inline FitResult fit_logistic(const std::vector<std::pair<double, double>>& samples,
                              double floor) {
  if (samples.size() < 4) throw fit_error("fit_logistic: need at least 4 samples");
  double y_min = samples.front().second, y_max = samples.front().second;
  for (const auto& s : samples) {
    y_min = std::min(y_min, s.second);
    y_max = std::max(y_max, s.second);
  }
  if (y_max - y_min < 1e-12)
    throw fit_error("fit_logistic: degenerate samples (constant distortion)");

  const int m = static_cast<int>(samples.size());
  // Initialization: span from the sample range, midpoint at the half-rise
  // abscissa, slope 2.
  Eigen::Vector3d theta;  // (span, slope, midpoint)
  theta[0] = std::max(y_max - floor, 1e-6);
  theta[1] = 2.0;
  const double half_rise = floor + 0.5 * theta[0];
  double best_gap = std::abs(samples.front().second - half_rise);
  theta[2] = samples.front().first;
  for (const auto& s : samples) {
    const double gap = std::abs(s.second - half_rise);
    if (gap < best_gap) {
      best_gap = gap;
      theta[2] = s.first;
    }
  }

  auto mse_at = [&](const Eigen::Vector3d& t) {
    double acc = 0.0;
    for (const auto& s : samples) {
      const double pred = floor + t[0] * detail::sigmoid(t[1] * (s.first - t[2]));
      acc += (pred - s.second) * (pred - s.second);
    }
    return acc / m;
  };

  double lambda = 1e-3;
  double mse = mse_at(theta);
  int iter = 0;
  bool done = false;
  while (iter < 200 && !done) {
    ++iter;
    Eigen::Matrix3d jtj = Eigen::Matrix3d::Zero();
    Eigen::Vector3d jtr = Eigen::Vector3d::Zero();
    for (const auto& s : samples) {
      const double z = theta[1] * (s.first - theta[2]);
      const double sig = detail::sigmoid(z);
      const double dsig = sig * (1.0 - sig);
      const double resid = floor + theta[0] * sig - s.second;
      Eigen::Vector3d j;
      j[0] = sig;                                    // d/d span
      j[1] = theta[0] * dsig * (s.first - theta[2]); // d/d slope
      j[2] = -theta[0] * dsig * theta[1];            // d/d midpoint
      jtj += j * j.transpose();
      jtr += j * resid;
    }
    bool stepped = false;
    for (int attempt = 0; attempt < 24 && !stepped; ++attempt) {
      Eigen::Matrix3d damped = jtj;
      damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      const Eigen::Vector3d step = damped.ldlt().solve(-jtr);
      const Eigen::Vector3d trial = theta + step;
      const double trial_mse = mse_at(trial);
      if (trial_mse <= mse) {
        const double rel_drop = (mse - trial_mse) / std::max(mse, 1e-300);
        theta = trial;
        mse = trial_mse;
        lambda = std::max(lambda * 0.1, 1e-12);
        stepped = true;
        if (rel_drop < 1e-14 || step.norm() < 1e-13 * (1.0 + theta.norm())) done = true;
      } else {
        lambda *= 10.0;
      }
    }
    if (!stepped) break;  // damping exhausted: local minimum reached
  }

  if (!(theta[0] > 0.0) || !(theta[1] > 0.0))
    throw fit_error("fit_logistic: converged to a non-increasing logistic");
  return FitResult{theta[0], theta[1], theta[2], mse, iter};
}

// Deterministic synthetic table standing in for a bank of trained models:
// floors decrease with rate, the saturation ceiling creeps up slightly,
// and midpoints drop with rate (higher-rate models tolerate less BER).
inline DistortionTable make_synthetic_table(TaskKind kind, int n_rows, double rate_min,
                                            double rate_max) {
  if (n_rows < 2) throw config_error("make_synthetic_table: need at least 2 rows");
  if (!(rate_min > 0.0) || !(rate_max > rate_min))
    throw config_error("make_synthetic_table: bad rate range");
  DistortionTable table;
  table.kind = kind;
  const bool data = kind == TaskKind::data;
  const double f_lo = data ? 0.015 : 0.18;   // floor at the highest rate
  const double f_hi = data ? 0.28 : 0.62;    // floor at the lowest rate
  const double c0 = data ? 0.90 : 0.96;      // saturation ceiling at the lowest rate
  const double c1 = data ? 0.05 : 0.03;      // ceiling growth across the range
  const double s0 = data ? 2.2 : 2.6;
  const double s1 = data ? 0.6 : 0.4;
  const double m0 = data ? -4.2 : -3.8;      // midpoint at the lowest rate
  const double m1 = data ? -2.6 : -2.4;      // midpoint drop across the range
  const double log_lo = std::log(rate_min), log_hi = std::log(rate_max);
  for (int n = 0; n < n_rows; ++n) {
    const double u = static_cast<double>(n) / (n_rows - 1);
    LogisticRow row;
    row.rate = std::exp(log_lo + u * (log_hi - log_lo));
    row.floor = f_lo + (f_hi - f_lo) * std::pow(1.0 - u, 1.35);
    row.span = (c0 + c1 * u) - row.floor;
    row.slope = s0 + s1 * u;
    row.midpoint = m0 + m1 * u;
    table.rows.push_back(row);
  }
  table.validate();
  return table;
}

}  // namespace semlink

// Outer solver loop: alternates per-user rate optimization with the joint
// power/beamforming stage, discretizes the converged source rates to
// tabulated values, and emits reports. Also hosts the ZF + waterfilling
// baseline and the power/weight sweeps.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "semlink/channel.hpp"
#include "semlink/distortion.hpp"
#include "semlink/errors.hpp"
#include "semlink/power_beam_opt.hpp"
#include "semlink/rate_opt.hpp"
#include "semlink/scenario.hpp"

namespace semlink {

struct SolverReport {
  Allocation alloc;
  std::vector<LinkMetrics> metrics;
  double objective = 0.0;             // weighted-sum E2E distortion
  std::vector<double> ao_trajectory;  // objective after each AO phase
  double continuous_objective = 0.0;  // before rate discredization
  double discretization_delta = 0.0;  // discrete minus continuous objective
  double wall_seconds = 0.0;
  bool converged = false;
  bool success = true;
  std::string message;
};

// Per-user link metrics and the weighted objective for an allocation.
inline std::pair<std::vector<LinkMetrics>, double> evaluate_allocation(
    const Scenario& sc, const Allocation& alloc) {
  const SystemConfig& cfg = sc.system;
  const Eigen::VectorXd gamma = sinr_downlink(cfg, alloc);
  std::vector<LinkMetrics> metrics(cfg.users());
  double objective = 0.0;
  for (int i = 0; i < cfg.users(); ++i) {
    LinkMetrics& m = metrics[i];
    m.sinr = gamma[i];
    m.packet_error = packet_error(gamma[i], alloc.channel_rates[i], cfg.blocklength);
    m.log10_ber = log10_ber(gamma[i], alloc.channel_rates[i], cfg.blocklength);
    m.distortion = e2e_distortion(sc.tables[i], alloc.source_rates[i], m.log10_ber);
    objective += cfg.weights[i] * m.distortion;
  }
  return {std::move(metrics), objective};
}

namespace detail {

inline Eigen::MatrixXcd matched_filter_beams(const SystemConfig& cfg) {
  Eigen::MatrixXcd beams = cfg.channel;
  for (int i = 0; i < beams.cols(); ++i) beams.col(i).normalize();
  return beams;
}

inline std::vector<ScaUserModel> sca_users_at_rates(const Scenario& sc,
                                                    const Allocation& alloc) {
  std::vector<ScaUserModel> users;
  users.reserve(sc.system.users());
  for (int i = 0; i < sc.system.users(); ++i) {
    users.push_back(make_sca_user(sc.tables[i], alloc.source_rates[i],
                                  alloc.channel_rates[i], sc.system.weights[i]));
  }
  return users;
}

// Largest tabulated rate not above r; clamps to the lowest row if r sits
// below the table (cannot happen after clamping, but guarded).
inline double round_down_rate(const DistortionTable& table, double r) {
  double best = table.rate_min();
  for (const auto& row : table.rows) {
    if (row.rate <= r * (1.0 + 1e-12)) best = row.rate;
  }
  return best;
}

// Rate phase of the alternation: per-user 1-D solves at the current
// SINRs. Keeps the incumbent rate when it scores better at the new SINR
// (the descent start is prescribed and may find a worse local optimum).
inline void rate_phase(const Scenario& sc, Allocation& alloc, bool have_incumbent) {
  const Eigen::VectorXd gamma = sinr_downlink(sc.system, alloc.powers, alloc.beams);
  for (int i = 0; i < sc.system.users(); ++i) {
    if (!(gamma[i] > 0.0))
      throw sca_error("rate_phase: zero SINR for user " + std::to_string(i));
    const RateSolution sol = optimize_rate(sc.tables[i], gamma[i], sc.system.delay_caps[i],
                                           sc.system.blocklength, sc.knobs.rate);
    double new_rate = sol.source_rate;
    if (have_incumbent) {
      const double incumbent = objective_at(sc.tables[i], gamma[i],
                                            sc.system.delay_caps[i],
                                            sc.system.blocklength, alloc.source_rates[i]);
      if (incumbent < sol.objective) new_rate = alloc.source_rates[i];
    }
    alloc.source_rates[i] = new_rate;
    alloc.channel_rates[i] = new_rate / sc.system.delay_caps[i];
  }
}

}  // namespace detail

// Full solve of the joint rate/power/beamforming problem: alternating
// optimization on the continuous relaxation, then round-down rate
// discretization and one more power/beam pass from the converged point.
inline SolverReport solve_joint(const Scenario& sc) {
  const auto t_start = std::chrono::steady_clock::now();
  sc.validate();
  const SystemConfig& cfg = sc.system;
  const int k = cfg.users();

  SolverReport report;
  Allocation alloc;
  alloc.powers = Eigen::VectorXd::Constant(k, cfg.p_max / k);
  alloc.beams = detail::matched_filter_beams(cfg);
  alloc.source_rates = Eigen::VectorXd::Zero(k);
  alloc.channel_rates = Eigen::VectorXd::Zero(k);

  try {
    double cycle_obj = 0.0;
    for (int ao = 0; ao < sc.knobs.ao_max_iters; ++ao) {
      detail::rate_phase(sc, alloc, /*have_incumbent=*/ao > 0);
      report.ao_trajectory.push_back(evaluate_allocation(sc, alloc).second);

      const std::vector<ScaUserModel> users = detail::sca_users_at_rates(sc, alloc);
      const PowerBeamSolution pb =
          joint_power_beam(cfg, users, alloc.powers, alloc.beams, sc.knobs.power);
      alloc.powers = pb.p;
      alloc.beams = pb.beams;
      const double obj = evaluate_allocation(sc, alloc).second;
      report.ao_trajectory.push_back(obj);

      if (ao > 0) {
        const double frac = (cycle_obj - obj) / std::max(std::abs(cycle_obj), 1e-300);
        if (frac < sc.knobs.ao_epsilon) {
          report.converged = true;
          cycle_obj = obj;
          break;
        }
      }
      cycle_obj = obj;
    }
    report.continuous_objective = cycle_obj;

    // Round the relaxed source rates down to tabulated values, keep the
    // delay constraint active, and re-run the power/beam stage once from
    // the converged point.
    for (int i = 0; i < k; ++i) {
      alloc.source_rates[i] = detail::round_down_rate(sc.tables[i], alloc.source_rates[i]);
      alloc.channel_rates[i] = alloc.source_rates[i] / cfg.delay_caps[i];
    }
    const std::vector<ScaUserModel> users = detail::sca_users_at_rates(sc, alloc);
    const PowerBeamSolution pb =
        joint_power_beam(cfg, users, alloc.powers, alloc.beams, sc.knobs.power);
    alloc.powers = pb.p;
    alloc.beams = pb.beams;
  } catch (const error& e) {
    report.success = false;
    report.message = e.what();
  }

  report.alloc = alloc;
  if (report.success) {
    try {
      alloc.validate(cfg);
      auto [metrics, objective] = evaluate_allocation(sc, alloc);
      report.metrics = std::move(metrics);
      report.objective = objective;
      report.discretization_delta = report.objective - report.continuous_objective;
      // Report integrity: the emitted objective must re-validate.
      const double recheck = evaluate_allocation(sc, alloc).second;
      if (std::abs(recheck - report.objective) > 1e-9) {
        report.success = false;
        report.message = "objective failed re-validation";
      }
    } catch (const error& e) {
      report.success = false;
      report.message = e.what();
    }
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return report;
}

// Classical waterfilling on interference-free gains: p_i = max(0, mu - 1/g_i)
// with the water level chosen so the budget is met exactly.
inline Eigen::VectorXd waterfill(const Eigen::VectorXd& gains, double p_max) {
  const int k = static_cast<int>(gains.size());
  std::vector<double> inv(k);
  for (int i = 0; i < k; ++i) {
    if (!(gains[i] > 0.0)) throw config_error("waterfill: gains must be positive");
    inv[i] = 1.0 / gains[i];
  }
  std::vector<double> sorted = inv;
  std::sort(sorted.begin(), sorted.end());
  double mu = 0.0;
  double acc = 0.0;
  for (int n = 0; n < k; ++n) {
    acc += sorted[n];
    const double level = (p_max + acc) / (n + 1);
    const bool last = n == k - 1;
    if (last || level <= sorted[n + 1]) {
      mu = level;
      break;
    }
  }
  Eigen::VectorXd p(k);
  for (int i = 0; i < k; ++i) p[i] = std::max(0.0, mu - inv[i]);
  return p;
}

// ZF + waterfilling benchmark at fixed channel coding rates: pseudo-inverse
// beams wipe out interference, classical waterfilling splits the power,
// and each user picks the best tabulated source rate at its (fixed) BER.
inline SolverReport zf_waterfilling_baseline(const Scenario& sc,
                                             const Eigen::VectorXd& fixed_rc) {
  const auto t_start = std::chrono::steady_clock::now();
  sc.validate();
  const SystemConfig& cfg = sc.system;
  const int k = cfg.users();
  if (fixed_rc.size() != k)
    throw config_error("baseline: one fixed channel rate per user required");
  if (k > cfg.n_tx)
    throw config_error("baseline: zero-forcing needs K <= n_tx");

  // W = H (H^H H)^{-1}, columns normalized; then h_i^H w_j = 0 for i != j.
  const Eigen::MatrixXcd gram = cfg.channel.adjoint() * cfg.channel;
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(gram);
  if (!lu.isInvertible())
    throw config_error("baseline: channel columns are linearly dependent");
  Eigen::MatrixXcd beams =
      cfg.channel * lu.solve(Eigen::MatrixXcd::Identity(k, k));
  Eigen::VectorXd gains(k);
  for (int i = 0; i < k; ++i) {
    const double norm = beams.col(i).norm();
    beams.col(i) /= norm;
    gains[i] = 1.0 / (norm * norm);  // |h_i^H w_i|^2 after normalization
  }

  SolverReport report;
  Allocation alloc;
  alloc.powers = waterfill(gains, cfg.p_max);
  alloc.beams = beams;
  alloc.source_rates = Eigen::VectorXd::Zero(k);
  alloc.channel_rates = fixed_rc;

  const Eigen::VectorXd gamma = sinr_downlink(cfg, alloc.powers, alloc.beams);
  try {
    for (int i = 0; i < k; ++i) {
      if (!(fixed_rc[i] > 0.0)) throw config_error("baseline: channel rates must be > 0");
      const RateSolution sol =
          optimize_rate_fixed_rc(sc.tables[i], std::max(gamma[i], 0.0),
                                 cfg.delay_caps[i], cfg.blocklength, fixed_rc[i],
                                 sc.knobs.rate);
      alloc.source_rates[i] = sol.source_rate;
    }
    report.converged = true;
  } catch (const error& e) {
    report.success = false;
    report.message = e.what();
  }

  report.alloc = alloc;
  if (report.success) {
    auto [metrics, objective] = evaluate_allocation(sc, alloc);
    report.metrics = std::move(metrics);
    report.objective = objective;
    report.continuous_objective = objective;
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return report;
}

// ---- Sweeps ----------------------------------------------------------

struct SweepPoint {
  double p_max = 0.0;
  Eigen::VectorXd weights;
  SolverReport report;
};

inline std::vector<SweepPoint> sweep_power(const Scenario& sc,
                                           const std::vector<double>& p_grid) {
  std::vector<SweepPoint> points;
  for (const double p : p_grid) {
    Scenario s = sc;
    s.system.p_max = p;
    SweepPoint pt;
    pt.p_max = p;
    pt.weights = s.system.weights;
    try {
      pt.report = solve_joint(s);
    } catch (const error& e) {
      pt.report.success = false;
      pt.report.message = e.what();
    }
    points.push_back(std::move(pt));
  }
  return points;
}

// Weight sweep over user 0's weight; the remaining users share the
// complement in proportion to their scenario weights.
inline std::vector<SweepPoint> sweep_weights(const Scenario& sc,
                                             const std::vector<double>& w_grid) {
  const int k = sc.system.users();
  double rest = 0.0;
  for (int i = 1; i < k; ++i) rest += sc.system.weights[i];
  std::vector<SweepPoint> points;
  for (const double w : w_grid) {
    if (!(w > 0.0) || !(w < 1.0)) {
      SweepPoint pt;
      pt.p_max = sc.system.p_max;
      pt.weights = sc.system.weights;
      pt.report.success = false;
      pt.report.message = "weight must lie strictly between 0 and 1";
      points.push_back(std::move(pt));
      continue;
    }
    Scenario s = sc;
    s.system.weights[0] = w;
    for (int i = 1; i < k; ++i)
      s.system.weights[i] = (1.0 - w) * sc.system.weights[i] / rest;
    SweepPoint pt;
    pt.p_max = s.system.p_max;
    pt.weights = s.system.weights;
    try {
      pt.report = solve_joint(s);
    } catch (const error& e) {
      pt.report.success = false;
      pt.report.message = e.what();
    }
    points.push_back(std::move(pt));
  }
  return points;
}

// ---- CSV emission ----------------------------------------------------

inline void write_csv_header(std::ostream& out, int k) {
  out << "p_max";
  auto cols = [&](const char* name) {
    for (int i = 1; i <= k; ++i) out << "," << name << i;
  };
  cols("beta");
  cols("R_s");
  cols("R_c");
  cols("p");
  cols("gamma");
  cols("log10_ber");
  cols("distortion");
  out << ",objective\n";
}

inline void write_csv_row(std::ostream& out, double p_max, const Eigen::VectorXd& weights,
                          const SolverReport& r) {
  const int k = static_cast<int>(weights.size());
  using detail::format_value;
  out << format_value(p_max);
  for (int i = 0; i < k; ++i) out << "," << format_value(weights[i]);
  for (int i = 0; i < k; ++i) out << "," << format_value(r.alloc.source_rates[i]);
  for (int i = 0; i < k; ++i) out << "," << format_value(r.alloc.channel_rates[i]);
  for (int i = 0; i < k; ++i) out << "," << format_value(r.alloc.powers[i]);
  for (int i = 0; i < k; ++i) out << "," << format_value(r.metrics[i].sinr);
  for (int i = 0; i < k; ++i) out << "," << format_value(r.metrics[i].log10_ber);
  for (int i = 0; i < k; ++i) out << "," << format_value(r.metrics[i].distortion);
  out << "," << format_value(r.objective) << "\n";
}

// Shared by the CLI `solve` subcommand and the acceptance suite so both
// exercise the exact same path.
inline SolverReport solve_scenario_to_csv(const Scenario& sc, const std::string& csv_path) {
  const SolverReport report = solve_joint(sc);
  std::ofstream out(csv_path);
  if (!out) throw config_error("cannot write '" + csv_path + "'");
  write_csv_header(out, sc.system.users());
  if (report.success) write_csv_row(out, sc.system.p_max, sc.system.weights, report);
  return report;
}

}  // namespace semlink

// Command-line front end: scenario solves, sweeps, the ZF+WF baseline,
// logistic fitting, table generation, Monte-Carlo BER simulation, and
// scenario validation.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "semlink/driver.hpp"
#include "semlink/link_sim.hpp"
#include "semlink/rng.hpp"
#include "semlink/scenario.hpp"

namespace {

using namespace semlink;

std::vector<double> parse_grid(const std::string& spec) {
  // "a:b:n" -> n points linearly spaced on [a, b].
  double a = 0.0, b = 0.0;
  int n = 0;
  char c1 = 0, c2 = 0;
  std::istringstream ss(spec);
  if (!(ss >> a >> c1 >> b >> c2 >> n) || c1 != ':' || c2 != ':' || n < 1)
    throw config_error("bad grid '" + spec + "', expected a:b:n");
  std::vector<double> grid;
  if (n == 1) {
    grid.push_back(a);
    return grid;
  }
  for (int i = 0; i < n; ++i) grid.push_back(a + (b - a) * i / (n - 1.0));
  return grid;
}

std::vector<double> parse_list(const std::string& spec) {
  std::vector<double> values;
  std::istringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) values.push_back(std::stod(item));
  return values;
}

void print_report(const Scenario& sc, const SolverReport& r) {
  if (!r.success) {
    std::cout << "solve FAILED: " << r.message << "\n";
    return;
  }
  const int k = sc.system.users();
  std::printf("%-6s %-10s %12s %10s %10s %10s %12s %12s\n", "user", "kind", "R_s", "R_c",
              "p [W]", "SINR", "log10 BER", "distortion");
  for (int i = 0; i < k; ++i) {
    std::printf("%-6d %-10s %12.6g %10.6g %10.6g %10.6g %12.6g %12.6g\n", i + 1,
                to_string(sc.kinds[i]), r.alloc.source_rates[i], r.alloc.channel_rates[i],
                r.alloc.powers[i], r.metrics[i].sinr, r.metrics[i].log10_ber,
                r.metrics[i].distortion);
  }
  std::printf("objective            %.9g\n", r.objective);
  std::printf("continuous objective %.9g (discretization delta %+.3g)\n",
              r.continuous_objective, r.discretization_delta);
  std::printf("converged            %s in %zu objective evaluations\n",
              r.converged ? "yes" : "no", r.ao_trajectory.size());
  std::printf("wall time            %.3f s\n", r.wall_seconds);
}

int cmd_solve(const std::string& scenario_path, const std::string& out_csv,
              bool multi_start) {
  Scenario sc = load_scenario(scenario_path);
  sc.knobs.rate.multi_start = sc.knobs.rate.multi_start || multi_start;
  const SolverReport r = solve_scenario_to_csv(sc, out_csv);
  print_report(sc, r);
  std::cout << "csv written to " << out_csv << "\n";
  return r.success ? 0 : 1;
}

int cmd_baseline(const std::string& scenario_path, const std::string& rc_list,
                 const std::string& out_csv) {
  const Scenario sc = load_scenario(scenario_path);
  const std::vector<double> rc = parse_list(rc_list);
  Eigen::VectorXd fixed_rc(rc.size());
  for (std::size_t i = 0; i < rc.size(); ++i) fixed_rc[i] = rc[i];
  const SolverReport r = zf_waterfilling_baseline(sc, fixed_rc);
  std::ofstream out(out_csv);
  if (!out) throw config_error("cannot write '" + out_csv + "'");
  write_csv_header(out, sc.system.users());
  if (r.success) write_csv_row(out, sc.system.p_max, sc.system.weights, r);
  print_report(sc, r);
  std::cout << "csv written to " << out_csv << "\n";
  return r.success ? 0 : 1;
}

int write_sweep_csv(const Scenario& sc, const std::vector<SweepPoint>& points,
                    const std::string& out_csv) {
  std::ofstream out(out_csv);
  if (!out) throw config_error("cannot write '" + out_csv + "'");
  write_csv_header(out, sc.system.users());
  int failures = 0;
  for (const auto& pt : points) {
    if (pt.report.success) {
      write_csv_row(out, pt.p_max, pt.weights, pt.report);
    } else {
      ++failures;
      std::cerr << "point skipped (" << pt.report.message << ")\n";
    }
  }
  std::cout << "csv written to " << out_csv << " (" << points.size() - failures << "/"
            << points.size() << " points)\n";
  return failures == 0 ? 0 : 1;
}

int cmd_sweep_power(const std::string& scenario_path, const std::string& grid,
                    const std::string& out_csv) {
  const Scenario sc = load_scenario(scenario_path);
  const auto points = sweep_power(sc, parse_grid(grid));
  for (const auto& pt : points) {
    if (pt.report.success)
      std::printf("p_max %8.4g  objective %.9g\n", pt.p_max, pt.report.objective);
  }
  return write_sweep_csv(sc, points, out_csv);
}

int cmd_sweep_weights(const std::string& scenario_path, const std::string& grid,
                      const std::string& out_csv) {
  const Scenario sc = load_scenario(scenario_path);
  const auto points = sweep_weights(sc, parse_grid(grid));
  for (const auto& pt : points) {
    if (pt.report.success) {
      std::printf("w1 %6.4g  per-user distortion", pt.weights[0]);
      for (const auto& m : pt.report.metrics) std::printf(" %.6g", m.distortion);
      std::printf("  objective %.9g\n", pt.report.objective);
    }
  }
  return write_sweep_csv(sc, points, out_csv);
}

int cmd_fit(const std::string& samples_path, double floor, const std::string& kind,
            double rate, const std::string& out_json) {
  const auto samples = load_samples_csv(samples_path);
  const FitResult fit = fit_logistic(samples, floor);
  std::printf("span     %.8g\nslope    %.8g\nmidpoint %.8g\nmse      %.3e\niters    %d\n",
              fit.span, fit.slope, fit.midpoint, fit.mse, fit.iterations);
  if (!out_json.empty()) {
    DistortionTable t;
    t.kind = task_kind_from_string(kind);
    // A one-row document in the table schema; rate comes from the caller.
    t.rows.push_back(LogisticRow{rate, floor, fit.span, fit.slope, fit.midpoint});
    std::ofstream out(out_json);
    if (!out) throw config_error("cannot write '" + out_json + "'");
    out << table_to_json(t, "fit from " + samples_path).dump(2) << "\n";
    std::cout << "table written to " << out_json << "\n";
  }
  return 0;
}

int cmd_gen_samples(double floor, double span, double slope, double midpoint,
                    const std::string& grid, double sigma, std::uint64_t seed,
                    const std::string& out_csv) {
  const std::vector<double> ber_grid = parse_grid(grid);
  const LogisticRow row{1.0, floor, span, slope, midpoint};
  const auto samples = generate_fit_dataset(row, ber_grid, sigma, seed);
  save_samples_csv(samples, out_csv);
  std::cout << samples.size() << " samples written to " << out_csv << "\n";
  return 0;
}

int cmd_gen_table(const std::string& kind, int rows, double rate_min, double rate_max,
                  const std::string& out_json) {
  const DistortionTable t =
      make_synthetic_table(task_kind_from_string(kind), rows, rate_min, rate_max);
  save_table(t, out_json, "synthetic stand-in for a bank of trained models");
  std::cout << "table written to " << out_json << "\n";
  return 0;
}

int cmd_simulate(double gamma, double rc, int blocklength, long packets,
                 std::uint64_t seed) {
  const SimRun run = simulate_ber(gamma, rc, blocklength, packets, seed);
  const double model = std::pow(10.0, log10_ber(gamma, rc, blocklength));
  std::printf("packets        %ld\nfailed         %ld\npacket error   %.8g (model)\n",
              run.trials, run.failed_packets, run.model_packet_error);
  std::printf("empirical BER  %.8g\nmodel BER      %.8g\n", run.empirical_ber, model);
  return 0;
}

int cmd_validate(const std::string& scenario_path) {
  int hard_failures = 0;
  const Scenario sc = load_scenario(scenario_path);  // throws on structural problems
  std::cout << "ok: scenario structure and table kinds\n";

  for (int i = 0; i < sc.system.users(); ++i) {
    for (const auto& w : sc.tables[i].validation_warnings())
      std::cout << "warning: user " << i + 1 << " table: " << w << "\n";
  }

  // Duality round trip at equal power and matched filters.
  try {
    const int k = sc.system.users();
    Eigen::MatrixXcd beams = sc.system.channel;
    for (int i = 0; i < k; ++i) beams.col(i).normalize();
    const Eigen::VectorXd p = Eigen::VectorXd::Constant(k, sc.system.p_max / k);
    const Eigen::VectorXd q = downlink_to_uplink_power(sc.system, beams, p);
    const Eigen::VectorXd p_back = uplink_to_downlink_power(sc.system, beams, q);
    const double err = (p_back - p).cwiseAbs().maxCoeff();
    if (err <= 1e-8) {
      std::cout << "ok: duality round trip (max error " << err << ")\n";
    } else {
      std::cout << "FAIL: duality round trip error " << err << "\n";
      ++hard_failures;
    }
  } catch (const error& e) {
    std::cout << "FAIL: duality round trip threw: " << e.what() << "\n";
    ++hard_failures;
  }

  // Packet-error / BER conversion consistency across a SINR grid.
  {
    double worst = 0.0;
    for (int i = 0; i < sc.system.users(); ++i) {
      const double rc_probe = sc.tables[i].rate_min() / sc.system.delay_caps[i];
      for (int s = 0; s <= 40; ++s) {
        const double gamma = std::pow(10.0, -1.0 + 3.0 * s / 40.0);
        const double rho = packet_error(gamma, rc_probe, sc.system.blocklength);
        const double back = std::pow(10.0, log10_ber(gamma, rc_probe, sc.system.blocklength)) *
                            rc_probe * sc.system.blocklength;
        if (rho > 1e-290) worst = std::max(worst, std::abs(back - rho) / rho);
      }
    }
    if (worst <= 1e-9) {
      std::cout << "ok: packet-error/BER conversion (worst relative gap " << worst << ")\n";
    } else {
      std::cout << "FAIL: packet-error/BER conversion gap " << worst << "\n";
      ++hard_failures;
    }
  }

  // Tangent helpers: tangency and bounding on seeded random points.
  {
    Rng rng(sc.knobs.seed);
    bool ok = true;
    for (int s = 0; s < 1000 && ok; ++s) {
      const double x0 = rng.uniform(-4.0, 4.0), y0 = rng.uniform(-4.0, 4.0);
      const double x = rng.uniform(-4.0, 4.0), y = rng.uniform(-4.0, 4.0);
      ok = ok && tangent_l1(x0, y0, x, y) <= (x + y) * (x + y) + 1e-12;
      ok = ok && tangent_l2(x0, y0, x, y) <= (x - y) * (x - y) + 1e-12;
      const double z0 = rng.uniform(0.0, 8.0), z = rng.uniform(0.0, 8.0);
      ok = ok && tangent_l3(z0, z) >= -1.0 / ((1.0 + z) * (1.0 + z)) - 1e-12;
    }
    if (ok) {
      std::cout << "ok: tangent bounds\n";
    } else {
      std::cout << "FAIL: tangent bound violated\n";
      ++hard_failures;
    }
  }

  std::cout << (hard_failures == 0 ? "validate: PASS\n" : "validate: FAIL\n");
  return hard_failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-user downlink rate/power/beamforming optimizer"};
  app.require_subcommand(1);

  std::string scenario_path, out_csv, grid, rc_list, samples_path, kind = "data",
                             out_json;
  double floor = 0.0, rate = 1.0, gamma = 1.0, rc = 1.0;
  double rate_min = 2.4e3, rate_max = 9.3e4;
  double span = 0.4, slope = 3.0, midpoint = -4.0, sigma = 0.0;
  int blocklength = 256, rows = 23;
  long packets = 100000;
  std::uint64_t seed = 1;
  bool multi_start = false;

  auto* solve = app.add_subcommand("solve", "solve a scenario");
  solve->add_option("scenario", scenario_path)->required();
  solve->add_option("--out", out_csv, "output CSV path");
  solve->add_flag("--multi-start", multi_start,
                  "restart the rate stage from every tabulated rate");

  auto* sweep_p = app.add_subcommand("sweep-power", "solve across a power grid");
  sweep_p->add_option("scenario", scenario_path)->required();
  sweep_p->add_option("--grid", grid, "power grid a:b:n")->required();
  sweep_p->add_option("--out", out_csv);

  auto* sweep_w = app.add_subcommand("sweep-weights", "solve across user-1 weights");
  sweep_w->add_option("scenario", scenario_path)->required();
  sweep_w->add_option("--grid", grid, "weight grid a:b:n")->required();
  sweep_w->add_option("--out", out_csv);

  auto* baseline = app.add_subcommand("baseline", "ZF + waterfilling benchmark");
  baseline->add_option("scenario", scenario_path)->required();
  baseline->add_option("--rc", rc_list, "fixed channel rates, comma separated")->required();
  baseline->add_option("--out", out_csv);

  auto* fit = app.add_subcommand("fit", "fit a logistic to (log10_ber, distortion) samples");
  fit->add_option("samples", samples_path)->required();
  fit->add_option("--floor", floor, "error-free distortion floor")->required();
  fit->add_option("--kind", kind, "data|semantic");
  fit->add_option("--rate", rate, "source rate recorded in the emitted row");
  fit->add_option("--out", out_json, "write a one-row table JSON here");

  auto* gen_s = app.add_subcommand("gen-samples",
                                   "emit (log10_ber, distortion) samples from a logistic");
  gen_s->add_option("--floor", floor)->required();
  gen_s->add_option("--span", span);
  gen_s->add_option("--slope", slope);
  gen_s->add_option("--midpoint", midpoint);
  gen_s->add_option("--grid", grid, "log10-BER grid a:b:n")->required();
  gen_s->add_option("--sigma", sigma, "observation noise");
  gen_s->add_option("--seed", seed);
  gen_s->add_option("--out", out_json, "output CSV path")->required();

  auto* gen = app.add_subcommand("gen-table", "emit a synthetic distortion table");
  gen->add_option("--kind", kind, "data|semantic")->required();
  gen->add_option("--rows", rows);
  gen->add_option("--rate-min", rate_min);
  gen->add_option("--rate-max", rate_max);
  gen->add_option("--out", out_json)->required();

  auto* sim = app.add_subcommand("simulate", "Monte-Carlo packet/bit error simulation");
  sim->add_option("--gamma", gamma, "SINR (linear)")->required();
  sim->add_option("--rc", rc, "channel coding rate")->required();
  sim->add_option("--blocklength", blocklength);
  sim->add_option("--packets", packets);
  sim->add_option("--seed", seed);

  auto* validate = app.add_subcommand("validate", "run the invariant suite on a scenario");
  validate->add_option("scenario", scenario_path)->required();

  CLI11_PARSE(app, argc, argv);

  auto with_default = [&](const char* name) {
    return out_csv.empty() ? std::string(name) : out_csv;
  };
  try {
    if (solve->parsed())
      return cmd_solve(scenario_path, with_default("solve.csv"), multi_start);
    if (sweep_p->parsed())
      return cmd_sweep_power(scenario_path, grid, with_default("sweep_power.csv"));
    if (sweep_w->parsed())
      return cmd_sweep_weights(scenario_path, grid, with_default("sweep_weights.csv"));
    if (baseline->parsed())
      return cmd_baseline(scenario_path, rc_list, with_default("baseline.csv"));
    if (fit->parsed()) return cmd_fit(samples_path, floor, kind, rate, out_json);
    if (gen_s->parsed())
      return cmd_gen_samples(floor, span, slope, midpoint, grid, sigma, seed, out_json);
    if (gen->parsed()) return cmd_gen_table(kind, rows, rate_min, rate_max, out_json);
    if (sim->parsed()) return cmd_simulate(gamma, rc, blocklength, packets, seed);
    if (validate->parsed()) return cmd_validate(scenario_path);
  } catch (const semlink::error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

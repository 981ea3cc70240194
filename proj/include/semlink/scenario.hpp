// Scenario and distortion-table serialization: JSON scenario files with
// per-user table references, JSON table documents, and CSV sample sets
// for the fitter.
#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "semlink/channel.hpp"
#include "semlink/distortion.hpp"
#include "semlink/errors.hpp"
#include "semlink/power_beam_opt.hpp"
#include "semlink/rate_opt.hpp"

namespace semlink {

struct SolverKnobs {
  RateOptions rate;
  PowerBeamOptions power;
  double ao_epsilon = 1e-4;
  int ao_max_iters = 20;
  std::uint64_t seed = 1;
};

struct Scenario {
  SystemConfig system;
  std::vector<TaskKind> kinds;           // per user
  std::vector<DistortionTable> tables;   // per user
  std::vector<std::string> table_paths;  // as referenced by the scenario file
  SolverKnobs knobs;

  void validate() const {
    system.validate();
    const int k = system.users();
    if (static_cast<int>(kinds.size()) != k || static_cast<int>(tables.size()) != k)
      throw config_error("scenario: one kind and one table per user required");
    for (int i = 0; i < k; ++i) {
      tables[i].validate();
      if (tables[i].kind != kinds[i])
        throw config_error("scenario: table kind mismatch for user " + std::to_string(i));
    }
  }
};

namespace detail {

// Fixed-format floating point for byte-reproducible CSV output.
inline std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw config_error("bad JSON in '" + path + "': " + e.what());
  }
  return j;
}

}  // namespace detail

inline DistortionTable table_from_json(const nlohmann::json& j) {
  DistortionTable table;
  table.kind = task_kind_from_string(j.at("kind").get<std::string>());
  for (const auto& r : j.at("rows")) {
    LogisticRow row;
    row.rate = r.at("rate").get<double>();
    row.floor = r.at("floor").get<double>();
    row.span = r.at("span").get<double>();
    row.slope = r.at("slope").get<double>();
    row.midpoint = r.at("midpoint").get<double>();
    table.rows.push_back(row);
  }
  table.validate();
  return table;
}

inline nlohmann::json table_to_json(const DistortionTable& table,
                                    const std::string& provenance = {}) {
  nlohmann::json j;
  j["kind"] = to_string(table.kind);
  if (!provenance.empty()) j["provenance"] = provenance;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : table.rows) {
    j["rows"].push_back({{"rate", r.rate},
                         {"floor", r.floor},
                         {"span", r.span},
                         {"slope", r.slope},
                         {"midpoint", r.midpoint}});
  }
  return j;
}

inline DistortionTable load_table(const std::string& path) {
  return table_from_json(detail::load_json_file(path));
}

inline void save_table(const DistortionTable& table, const std::string& path,
                       const std::string& provenance = {}) {
  std::ofstream out(path);
  if (!out) throw config_error("cannot write '" + path + "'");
  out << table_to_json(table, provenance).dump(2) << "\n";
}

// Scenario JSON layout:
//   system: n_tx, p_max, blocklength,
//           users: [{kind, weight, delay_cap | bandwidth_ratio+source_dim, table}],
//           channel: one column per user, entries as [re, im],
//           noise_vars (optional): raw channels are normalized by these on load.
//   solver (optional): ao/rate/sca/outer epsilons and iteration caps, seed.
inline Scenario load_scenario(const std::string& path) {
  const nlohmann::json j = detail::load_json_file(path);
  const auto& sys = j.at("system");
  Scenario sc;

  const auto& users = sys.at("users");
  const int k = static_cast<int>(users.size());
  if (k < 1) throw config_error("scenario: need at least one user");
  const int n_tx = sys.at("n_tx").get<int>();

  Eigen::MatrixXcd channel(n_tx, k);
  const auto& chan = sys.at("channel");
  if (static_cast<int>(chan.size()) != k)
    throw config_error("scenario: channel needs one column per user");
  for (int i = 0; i < k; ++i) {
    const auto& col = chan.at(i);
    if (static_cast<int>(col.size()) != n_tx)
      throw config_error("scenario: channel column " + std::to_string(i) +
                         " needs n_tx entries");
    for (int a = 0; a < n_tx; ++a) {
      const auto& entry = col.at(a);
      channel(a, i) = std::complex<double>(entry.at(0).get<double>(),
                                           entry.at(1).get<double>());
    }
  }
  if (sys.contains("noise_vars")) {
    const auto& nv = sys.at("noise_vars");
    if (static_cast<int>(nv.size()) != k)
      throw config_error("scenario: noise_vars needs one entry per user");
    for (int i = 0; i < k; ++i) {
      const double var = nv.at(i).get<double>();
      if (!(var > 0.0)) throw config_error("scenario: noise variance must be positive");
      channel.col(i) /= var;
    }
  }

  Eigen::VectorXd weights(k), delay_caps(k);
  int n_data = 0, n_sem = 0;
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  for (int i = 0; i < k; ++i) {
    const auto& u = users.at(i);
    const TaskKind kind = task_kind_from_string(u.at("kind").get<std::string>());
    (kind == TaskKind::data ? n_data : n_sem) += 1;
    sc.kinds.push_back(kind);
    weights[i] = u.at("weight").get<double>();
    if (u.contains("delay_cap")) {
      delay_caps[i] = u.at("delay_cap").get<double>();
    } else if (u.contains("bandwidth_ratio")) {
      // Channel uses per source item = ratio x source dimension; the
      // multiplier is an explicit input, never guessed.
      if (!u.contains("source_dim"))
        throw config_error("scenario: bandwidth_ratio requires source_dim");
      delay_caps[i] =
          u.at("bandwidth_ratio").get<double>() * u.at("source_dim").get<double>();
    } else {
      throw config_error("scenario: user needs delay_cap or bandwidth_ratio");
    }
    const std::string table_ref = u.at("table").get<std::string>();
    const std::filesystem::path table_path = std::filesystem::path(table_ref).is_absolute()
                                                 ? std::filesystem::path(table_ref)
                                                 : base / table_ref;
    sc.table_paths.push_back(table_path.string());
    sc.tables.push_back(load_table(table_path.string()));
  }

  sc.system = SystemConfig{n_tx,
                           n_data,
                           n_sem,
                           std::move(channel),
                           sys.at("p_max").get<double>(),
                           sys.at("blocklength").get<int>(),
                           std::move(delay_caps),
                           std::move(weights)};

  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    auto get_or = [&](const char* key, double dflt) {
      return s.contains(key) ? s.at(key).get<double>() : dflt;
    };
    auto get_int_or = [&](const char* key, int dflt) {
      return s.contains(key) ? s.at(key).get<int>() : dflt;
    };
    sc.knobs.rate.epsilon = get_or("rate_epsilon", sc.knobs.rate.epsilon);
    sc.knobs.rate.max_iters = get_int_or("rate_max_iters", sc.knobs.rate.max_iters);
    if (s.contains("multi_start_rates"))
      sc.knobs.rate.multi_start = s.at("multi_start_rates").get<bool>();
    sc.knobs.power.sca_epsilon = get_or("sca_epsilon", sc.knobs.power.sca_epsilon);
    sc.knobs.power.sca_max_iters = get_int_or("sca_max_iters", sc.knobs.power.sca_max_iters);
    sc.knobs.power.outer_epsilon = get_or("outer_epsilon", sc.knobs.power.outer_epsilon);
    sc.knobs.power.outer_max_iters =
        get_int_or("outer_max_iters", sc.knobs.power.outer_max_iters);
    sc.knobs.power.barrier.gap = get_or("barrier_gap", sc.knobs.power.barrier.gap);
    sc.knobs.ao_epsilon = get_or("ao_epsilon", sc.knobs.ao_epsilon);
    sc.knobs.ao_max_iters = get_int_or("ao_max_iters", sc.knobs.ao_max_iters);
    if (s.contains("seed")) sc.knobs.seed = s.at("seed").get<std::uint64_t>();
  }

  sc.validate();
  return sc;
}

// CSV sample sets for the fitter: header then one "log10_ber,distortion"
// row per sample.
inline std::vector<std::pair<double, double>> load_samples_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open '" + path + "'");
  std::vector<std::pair<double, double>> samples;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first && line.find("log10_ber") != std::string::npos) {
      first = false;
      continue;
    }
    first = false;
    std::istringstream ss(line);
    std::string a, b;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b))
      throw config_error("bad sample line '" + line + "' in " + path);
    samples.emplace_back(std::stod(a), std::stod(b));
  }
  if (samples.empty()) throw config_error("no samples in '" + path + "'");
  return samples;
}

inline void save_samples_csv(const std::vector<std::pair<double, double>>& samples,
                             const std::string& path) {
  std::ofstream out(path);
  if (!out) throw config_error("cannot write '" + path + "'");
  out << "log10_ber,distortion\n";
  for (const auto& [rho, d] : samples)
    out << detail::format_value(rho) << "," << detail::format_value(d) << "\n";
}

}  // namespace semlink

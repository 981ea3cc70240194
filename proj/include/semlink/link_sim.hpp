// Monte-Carlo validation harness for the finite-blocklength error model:
// samples packet failures, converts them to an empirical bit error rate
// under the one-bit-error-per-failed-packet attribution, and generates
// noisy (log10-BER, distortion) datasets for the regression fitter.
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "semlink/channel.hpp"
#include "semlink/distortion.hpp"
#include "semlink/errors.hpp"
#include "semlink/rng.hpp"

namespace semlink {

struct SimRun {
  std::uint64_t seed = 0;
  long trials = 0;
  long failed_packets = 0;
  double model_packet_error = 0.0;
  double empirical_ber = 0.0;
};

// Draws n_packets i.i.d. packet failures at probability packet_error(...)
// and attributes one bit error per failed packet among its Rc * L message
// bits — exactly the assumption behind the packet-to-bit conversion, so
// the empirical BER concentrates on 10^log10_ber.
inline SimRun simulate_ber(double gamma, double r_c, int blocklength, long n_packets,
                           std::uint64_t seed) {
  if (n_packets < 1) throw domain_error("simulate_ber: need at least one packet");
  SimRun run;
  run.seed = seed;
  run.trials = n_packets;
  run.model_packet_error = packet_error(gamma, r_c, blocklength);
  Rng rng(seed);
  long failures = 0;
  for (long i = 0; i < n_packets; ++i) {
    if (rng.bernoulli(run.model_packet_error)) ++failures;
  }
  run.failed_packets = failures;
  const double bits_per_packet = r_c * static_cast<double>(blocklength);
  run.empirical_ber =
      static_cast<double>(failures) / (static_cast<double>(n_packets) * bits_per_packet);
  return run;
}

// Evaluates the logistic row on a log10-BER grid and adds Gaussian
// observation noise; the generator parameters are the fitter's oracle.
inline std::vector<std::pair<double, double>> generate_fit_dataset(
    const LogisticRow& row, const std::vector<double>& ber_grid, double noise_sigma,
    std::uint64_t seed) {
  if (ber_grid.empty()) throw domain_error("generate_fit_dataset: empty grid");
  Rng rng(seed);
  std::vector<std::pair<double, double>> samples;
  samples.reserve(ber_grid.size());
  for (const double rho : ber_grid) {
    double y = evaluate(row, rho);
    if (noise_sigma > 0.0) y += noise_sigma * rng.normal();
    samples.emplace_back(rho, y);
  }
  return samples;
}

}  // namespace semlink

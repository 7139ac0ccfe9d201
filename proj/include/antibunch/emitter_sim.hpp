#pragma once

#include <cstdint>
#include <utility>

#include "antibunch/core.hpp"

namespace antibunch {

/// Physical parameters of a continuously pumped two-level emitter.
///
/// The pump rate is beta_per_uW * pump_uW / tau_rad, so the count rate
/// saturates at P_sat = 1 / beta.
struct EmitterScenario {
  double tau_rad_ps = 1.61e6;
  double beta_per_uW = 1.0 / 0.93;
  double pump_uW = 0.0;
  double collection_efficiency = 1.0;
  double background_cps = 0.0;
  std::uint64_t duration_ps = 0;
  std::uint64_t seed = 0;

  void validate() const;
  double pump_rate_per_ps() const { return beta_per_uW * pump_uW / tau_rad_ps; }
  /// Decay constant of the antibunching dip, 1/ps.
  double gamma_c_per_ps() const { return (1.0 + beta_per_uW * pump_uW) / tau_rad_ps; }
};

struct DetectorModel {
  double jitter_sigma_ps = 0.0;
  std::uint64_t dead_time_ps = 0;
  double dark_cps = 0.0;
  double efficiency = 1.0;

  void validate() const;
};

/// Emission times of a two-level emitter alternating between an
/// Exponential(pump rate) wait in the ground state and an
/// Exponential(1/tau_rad) wait in the excited state, each emitted photon kept
/// with probability collection_efficiency. Output is channel 0.
///
/// The K cycles between two kept photons are drawn in aggregate:
/// K ~ Geometric(efficiency), ground time ~ Gamma(K, 1/pump rate), excited
/// time ~ Gamma(K, tau_rad). This is the same process as stepping every cycle
/// and costs O(kept photons).
TimeTagStream simulate_emission(const EmitterScenario& scenario);

/// Stationary detected rate eta/tau_rad * beta P / (1 + beta P).
CountRate expected_emission_rate(const EmitterScenario& scenario);

/// Superposes a homogeneous Poisson process of rate background + dark on
/// channel 0 over [0, duration].
TimeTagStream add_background(const TimeTagStream& stream, double background_cps,
                             double dark_cps, std::uint64_t seed);

/// Efficiency thinning, then Gaussian jitter (re-sorted, clamped to the
/// acquisition window), then non-extending dead time per channel.
TimeTagStream apply_detector(const TimeTagStream& stream, const DetectorModel& model,
                             std::uint64_t seed);

/// 50:50 beam splitter. Input must carry a single channel label.
std::pair<TimeTagStream, TimeTagStream> hbt_split(const TimeTagStream& stream,
                                                  std::uint64_t seed);

}  // namespace antibunch

#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

#include "antibunch/core.hpp"
#include "antibunch/random.hpp"

namespace antibunch::testing {

inline TimeTagStream stream_of(std::initializer_list<std::uint64_t> ts, std::uint8_t channel,
                               std::uint64_t duration) {
  std::vector<TimeTag> tags;
  for (auto t : ts) tags.push_back({channel, t});
  return TimeTagStream(std::move(tags), duration);
}

/// n sorted timestamps uniform on [0, duration], possibly with repeats.
inline TimeTagStream random_stream(Rng& rng, std::size_t n, std::uint64_t duration,
                                   std::uint8_t channel) {
  std::vector<TimeTag> tags;
  for (std::size_t i = 0; i < n; ++i)
    tags.push_back({channel, static_cast<std::uint64_t>(rng.uniform() * (duration + 1))});
  return TimeTagStream::from_unsorted(std::move(tags), duration);
}

/// Steps every ground/excited cycle and keeps each photon independently.
/// Reference for the aggregated sampler in simulate_emission.
inline std::vector<double> stepwise_emission_times(double pump_rate_per_ps, double tau_rad_ps,
                                                   double efficiency, double duration_ps,
                                                   std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> out;
  double t = 0.0;
  for (;;) {
    t += rng.exponential(1.0 / pump_rate_per_ps);
    t += rng.exponential(tau_rad_ps);
    if (t > duration_ps) break;
    if (rng.bernoulli(efficiency)) out.push_back(t);
  }
  return out;
}

}  // namespace antibunch::testing

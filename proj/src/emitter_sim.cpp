#include "antibunch/emitter_sim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>

#include "antibunch/random.hpp"

namespace antibunch {
namespace {

bool in_unit_interval(double x) { return x >= 0.0 && x <= 1.0; }

std::uint64_t floor_to_ps(double t) { return static_cast<std::uint64_t>(std::floor(t)); }

}  // namespace

void EmitterScenario::validate() const {
  if (!(tau_rad_ps > 0.0)) throw ContractError("tau_rad_ps must be positive");
  if (!(beta_per_uW > 0.0)) throw ContractError("beta_per_uW must be positive");
  if (!(pump_uW >= 0.0)) throw ContractError("pump_uW must be non-negative");
  if (!in_unit_interval(collection_efficiency))
    throw ContractError("collection_efficiency must lie in [0, 1]");
  if (!(background_cps >= 0.0)) throw ContractError("background_cps must be non-negative");
}

void DetectorModel::validate() const {
  if (!(jitter_sigma_ps >= 0.0)) throw ContractError("jitter_sigma_ps must be non-negative");
  if (!(dark_cps >= 0.0)) throw ContractError("dark_cps must be non-negative");
  if (!in_unit_interval(efficiency)) throw ContractError("detector efficiency must lie in [0, 1]");
}

TimeTagStream simulate_emission(const EmitterScenario& scenario) {
  scenario.validate();
  const auto duration = scenario.duration_ps;
  if (scenario.pump_uW == 0.0 || scenario.collection_efficiency == 0.0 || duration == 0)
    return TimeTagStream(duration);

  Rng rng(scenario.seed);
  const double ground_mean = 1.0 / scenario.pump_rate_per_ps();
  const double excited_mean = scenario.tau_rad_ps;
  const auto limit = static_cast<double>(duration);

  std::vector<TimeTag> tags;
  tags.reserve(static_cast<std::size_t>(
      expected_emission_rate(scenario).cps * limit / kPsPerSecond * 1.05 + 16));
  double t = 0.0;
  for (;;) {
    const auto cycles = static_cast<double>(rng.geometric(scenario.collection_efficiency));
    t += rng.gamma(cycles, ground_mean);
    t += rng.gamma(cycles, excited_mean);
    if (t > limit) break;
    tags.push_back({0, floor_to_ps(t)});
  }
  return TimeTagStream(std::move(tags), duration);
}

CountRate expected_emission_rate(const EmitterScenario& scenario) {
  scenario.validate();
  const double bp = scenario.beta_per_uW * scenario.pump_uW;
  return CountRate(scenario.collection_efficiency / scenario.tau_rad_ps * kPsPerSecond * bp /
                   (1.0 + bp));
}

TimeTagStream add_background(const TimeTagStream& stream, double background_cps,
                             double dark_cps, std::uint64_t seed) {
  if (!(background_cps >= 0.0) || !(dark_cps >= 0.0))
    throw ContractError("background rates must be non-negative");
  const double rate = background_cps + dark_cps;
  const auto duration = stream.duration_ps();
  if (rate == 0.0 || duration == 0) return stream;

  Rng rng(seed);
  const double mean_gap = kPsPerSecond / rate;
  const auto limit = static_cast<double>(duration);
  std::vector<TimeTag> extra;
  double t = 0.0;
  for (;;) {
    t += rng.exponential(mean_gap);
    if (t > limit) break;
    extra.push_back({0, floor_to_ps(t)});
  }
  return merge_streams(stream, TimeTagStream(std::move(extra), duration));
}

TimeTagStream apply_detector(const TimeTagStream& stream, const DetectorModel& model,
                             std::uint64_t seed) {
  model.validate();
  Rng rng(seed);
  const auto duration = stream.duration_ps();
  const auto limit = static_cast<double>(duration);

  std::vector<TimeTag> kept;
  kept.reserve(stream.size());
  for (const TimeTag& tag : stream.tags()) {
    if (model.efficiency < 1.0 && !rng.bernoulli(model.efficiency)) continue;
    kept.push_back(tag);
  }

  if (model.jitter_sigma_ps > 0.0) {
    for (TimeTag& tag : kept) {
      double t = static_cast<double>(tag.timestamp) + model.jitter_sigma_ps * rng.normal();
      t = std::clamp(std::round(t), 0.0, limit);
      tag.timestamp = static_cast<std::uint64_t>(t);
    }
    std::stable_sort(kept.begin(), kept.end(), tag_before);
  }

  if (model.dead_time_ps > 0) {
    std::array<std::optional<std::uint64_t>, 2> last{};
    std::erase_if(kept, [&](const TimeTag& tag) {
      auto& prev = last[tag.channel];
      if (prev && tag.timestamp - *prev < model.dead_time_ps) return true;
      prev = tag.timestamp;
      return false;
    });
  }
  return TimeTagStream(std::move(kept), duration);
}

std::pair<TimeTagStream, TimeTagStream> hbt_split(const TimeTagStream& stream,
                                                  std::uint64_t seed) {
  const auto tags = stream.tags();
  if (!tags.empty()) {
    const auto ch = tags.front().channel;
    if (std::any_of(tags.begin(), tags.end(), [&](const TimeTag& t) { return t.channel != ch; }))
      throw ContractError("hbt_split expects a single-channel stream");
  }
  Rng rng(seed);
  std::vector<TimeTag> a;
  std::vector<TimeTag> b;
  a.reserve(tags.size() / 2 + 16);
  b.reserve(tags.size() / 2 + 16);
  for (const TimeTag& tag : tags) {
    if (rng() >> 63)
      b.push_back({1, tag.timestamp});
    else
      a.push_back({0, tag.timestamp});
  }
  return {TimeTagStream(std::move(a), stream.duration_ps()),
          TimeTagStream(std::move(b), stream.duration_ps())};
}

}  // namespace antibunch

#include <cmath>
#include <numeric>

#include "doctest.h"

#include "antibunch/emitter_sim.hpp"
#include "test_support.hpp"

using namespace antibunch;
using antibunch::testing::stream_of;

namespace {

constexpr std::uint64_t kSecond = 1'000'000'000'000ull;

EmitterScenario paper_like(double pump_uW, std::uint64_t seconds, std::uint64_t seed = 1) {
  EmitterScenario s;
  s.tau_rad_ps = 1.61e6;
  s.beta_per_uW = 1.0 / 0.93;
  s.pump_uW = pump_uW;
  s.collection_efficiency = 1.0;
  s.duration_ps = seconds * kSecond;
  s.seed = seed;
  return s;
}

double rate_cps(const TimeTagStream& s) {
  return static_cast<double>(s.size()) / (static_cast<double>(s.duration_ps()) / kSecond);
}

}  // namespace

TEST_CASE("no pump or no time means no photons") {
  CHECK(simulate_emission(paper_like(0.0, 10)).empty());
  auto s = paper_like(1.0, 0);
  CHECK(simulate_emission(s).empty());
}

TEST_CASE("stationary emission rate of the two-state chain") {
  // gamma_p gamma_r / (gamma_p + gamma_r) -> 1/tau_rad far above saturation.
  const auto high = simulate_emission(paper_like(1000.0, 10));
  CHECK(rate_cps(high) == doctest::Approx(1e12 / 1.61e6).epsilon(0.01));
  CHECK(rate_cps(high) == doctest::Approx(6.21e5).epsilon(0.01));

  // beta P = 1: half the asymptote.
  const auto mid = simulate_emission(paper_like(0.93, 10));
  CHECK(rate_cps(mid) == doctest::Approx(3.11e5).epsilon(0.01));
}

TEST_CASE("simulation is deterministic given the seed") {
  auto s = paper_like(0.5, 1, 99);
  s.collection_efficiency = 0.1;
  CHECK(simulate_emission(s) == simulate_emission(s));
  auto other = s;
  other.seed = 100;
  CHECK_FALSE(simulate_emission(s) == simulate_emission(other));
}

TEST_CASE("invalid scenarios are rejected") {
  auto s = paper_like(1.0, 1);
  s.collection_efficiency = 1.5;
  CHECK_THROWS_AS(simulate_emission(s), ContractError);
  s = paper_like(-1.0, 1);
  CHECK_THROWS_AS(simulate_emission(s), ContractError);
  s = paper_like(1.0, 1);
  s.tau_rad_ps = 0.0;
  CHECK_THROWS_AS(simulate_emission(s), ContractError);
}

TEST_CASE("aggregated sampler matches per-cycle stepping") {
  auto s = paper_like(0.93, 2, 5);
  s.collection_efficiency = 0.3;
  const auto fast = simulate_emission(s);
  const auto slow = antibunch::testing::stepwise_emission_times(
      s.pump_rate_per_ps(), s.tau_rad_ps, s.collection_efficiency,
      static_cast<double>(s.duration_ps), 6);

  auto gap_stats = [](const std::vector<double>& times) {
    double sum = 0, sum2 = 0;
    for (std::size_t i = 1; i < times.size(); ++i) {
      const double g = times[i] - times[i - 1];
      sum += g;
      sum2 += g * g;
    }
    const double n = static_cast<double>(times.size() - 1);
    return std::pair{sum / n, sum2 / n - (sum / n) * (sum / n)};
  };
  std::vector<double> fast_times;
  for (const auto& t : fast.tags()) fast_times.push_back(static_cast<double>(t.timestamp));

  const auto [m_fast, v_fast] = gap_stats(fast_times);
  const auto [m_slow, v_slow] = gap_stats(slow);
  REQUIRE(fast.size() > 100000);
  CHECK(m_fast == doctest::Approx(m_slow).epsilon(0.01));
  CHECK(v_fast == doctest::Approx(v_slow).epsilon(0.03));
  CHECK(static_cast<double>(fast.size()) ==
        doctest::Approx(static_cast<double>(slow.size())).epsilon(0.01));
}

TEST_CASE("expected_emission_rate") {
  auto s = paper_like(0.0, 1);
  CHECK(expected_emission_rate(s).cps == 0.0);

  s.pump_uW = 1.0 / s.beta_per_uW;
  const double asymptote = s.collection_efficiency / s.tau_rad_ps * 1e12;
  CHECK(expected_emission_rate(s).cps == doctest::Approx(asymptote / 2).epsilon(1e-14));

  // Efficiency chosen so the asymptote is I_sat = 2423 cps with P_sat = 0.93 uW.
  s.collection_efficiency = 2423.0 * s.tau_rad_ps / 1e12;
  for (double p : {0.1, 0.3, 0.93, 1.5, 3.0}) {
    s.pump_uW = p;
    CHECK(expected_emission_rate(s).cps == doctest::Approx(2423.0 * p / (p + 0.93)).epsilon(1e-12));
  }
}

TEST_CASE("add_background") {
  const auto input = stream_of({10, 20, 30}, 0, kSecond);
  CHECK(add_background(input, 0.0, 0.0, 3) == input);

  const TimeTagStream empty(kSecond);
  double sum = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    sum += static_cast<double>(add_background(empty, 7e3, 3e3, seed).size());
  const double mean = sum / 20;
  CHECK(std::abs(mean - 1e4) < 3.0 * std::sqrt(1e4 / 20));

  const auto merged = add_background(input, 500.0, 0.0, 8);
  CHECK(merged.size() == input.size() + add_background(empty, 500.0, 0.0, 8).size());
  CHECK_THROWS_AS(add_background(input, -1.0, 0.0, 1), ContractError);
}

TEST_CASE("apply_detector") {
  const auto input = stream_of({100, 200, 200, 5000}, 0, 10'000);
  CHECK(apply_detector(input, DetectorModel{}, 1) == input);

  SUBCASE("dead time removes the second of two close tags") {
    DetectorModel m;
    m.dead_time_ps = 25'000;
    const auto s = stream_of({1'000'000, 1'010'000}, 0, 2'000'000);
    const auto out = apply_detector(s, m, 1);
    REQUIRE(out.size() == 1);
    CHECK(out.tags()[0].timestamp == 1'000'000);
  }
  SUBCASE("dead time is non-extending and per channel") {
    DetectorModel m;
    m.dead_time_ps = 10;
    const TimeTagStream s({{0, 0}, {1, 5}, {0, 8}, {0, 12}, {1, 14}, {0, 21}}, 100);
    const auto out = apply_detector(s, m, 1);
    const std::vector<TimeTag> expect{{0, 0}, {1, 5}, {0, 12}};
    CHECK(std::vector<TimeTag>(out.tags().begin(), out.tags().end()) == expect);
  }
  SUBCASE("efficiency thinning") {
    std::vector<TimeTag> tags;
    for (std::uint64_t i = 0; i < 1'000'000; ++i) tags.push_back({0, i});
    const TimeTagStream s(std::move(tags), 1'000'000);
    DetectorModel m;
    m.efficiency = 0.5;
    const auto out = apply_detector(s, m, 42);
    CHECK(std::abs(static_cast<double>(out.size()) - 5e5) < 3.0 * std::sqrt(2.5e5));
  }
  SUBCASE("jitter keeps the stream valid and unbiased") {
    std::vector<TimeTag> tags;
    for (std::uint64_t i = 0; i < 20'000; ++i) tags.push_back({0, 1'000 + i * 1'000});
    const TimeTagStream s(std::move(tags), 21'000'000);
    DetectorModel m;
    m.jitter_sigma_ps = 300.0;
    const auto out = apply_detector(s, m, 9);
    REQUIRE(out.size() == s.size());
    double shift = 0;
    for (std::size_t i = 0; i < out.size(); ++i)
      shift += static_cast<double>(out.tags()[i].timestamp) - static_cast<double>(s.tags()[i].timestamp);
    // Re-sorting pairs neighbours differently, but the total shift is unbiased.
    CHECK(std::abs(shift / 20'000) < 5.0 * 300.0 / std::sqrt(20'000.0));
  }
  SUBCASE("jitter near the window edges is clamped") {
    DetectorModel m;
    m.jitter_sigma_ps = 1e6;
    const auto out = apply_detector(stream_of({0, 10, 90, 100}, 0, 100), m, 3);
    for (const auto& t : out.tags()) CHECK(t.timestamp <= 100);
  }
}

TEST_CASE("hbt_split") {
  const TimeTagStream empty(100);
  const auto [e0, e1] = hbt_split(empty, 1);
  CHECK(e0.empty());
  CHECK(e1.empty());

  std::vector<TimeTag> tags;
  for (std::uint64_t i = 0; i < 1'000'000; ++i) tags.push_back({0, i * 3});
  const TimeTagStream s(std::move(tags), 3'000'000);
  const auto [a, b] = hbt_split(s, 77);
  CHECK(a.size() + b.size() == s.size());
  CHECK(std::abs(static_cast<double>(a.size()) - 5e5) < 3.0 * std::sqrt(2.5e5));
  CHECK(a.count_channel(0) == a.size());
  CHECK(b.count_channel(1) == b.size());

  // Union of the outputs is the input.
  auto joined = merge_streams(a, b);
  CHECK(joined.size() == s.size());
  CHECK(joined.timestamps() == s.timestamps());

  const auto [a2, b2] = hbt_split(s, 77);
  CHECK(a2 == a);
  CHECK(b2 == b);

  CHECK_THROWS_AS(hbt_split(TimeTagStream({{0, 1}, {1, 2}}, 5), 1), ContractError);
}

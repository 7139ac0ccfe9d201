#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace antibunch {

/// Thrown when a value lies outside the domain of a physical formula.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Thrown when a caller violates a documented precondition.
struct ContractError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Planck constant times speed of light, eV·nm (CODATA, rounded).
inline constexpr double kHcEvNm = 1239.84198;

inline constexpr double kPsPerSecond = 1e12;
inline constexpr double kPsPerMicrosecond = 1e6;

struct PhotonEnergy {
  double value_meV;

  explicit PhotonEnergy(double mev) : value_meV(mev) {
    if (!(mev > 0.0)) throw DomainError("photon energy must be positive");
  }
};

struct CountRate {
  double cps;

  explicit CountRate(double value) : cps(value) {
    if (!(value >= 0.0)) throw DomainError("count rate must be non-negative");
  }
};

double energy_to_wavelength(PhotonEnergy e);
PhotonEnergy wavelength_to_energy(double wavelength_nm);

struct TimeTag {
  std::uint8_t channel = 0;
  std::uint64_t timestamp = 0;  // ps since acquisition start

  friend bool operator==(const TimeTag&, const TimeTag&) = default;
};

/// Ordering used everywhere tags are sorted: timestamp, then channel.
constexpr bool tag_before(const TimeTag& a, const TimeTag& b) {
  return a.timestamp < b.timestamp ||
         (a.timestamp == b.timestamp && a.channel < b.channel);
}

/// Time-ordered, channel-labelled detection record over [0, duration_ps].
/// Validated on construction and immutable afterwards.
class TimeTagStream {
 public:
  TimeTagStream() = default;
  explicit TimeTagStream(std::uint64_t duration_ps) : duration_ps_(duration_ps) {}
  TimeTagStream(std::vector<TimeTag> tags, std::uint64_t duration_ps);

  /// Sorts `tags` before validating the remaining invariants.
  static TimeTagStream from_unsorted(std::vector<TimeTag> tags,
                                     std::uint64_t duration_ps);

  std::span<const TimeTag> tags() const { return tags_; }
  std::size_t size() const { return tags_.size(); }
  bool empty() const { return tags_.empty(); }
  std::uint64_t duration_ps() const { return duration_ps_; }
  std::uint32_t resolution_ps() const { return 1; }

  std::vector<std::uint64_t> timestamps() const;
  std::size_t count_channel(std::uint8_t channel) const;

  friend bool operator==(const TimeTagStream&, const TimeTagStream&) = default;

 private:
  std::vector<TimeTag> tags_;
  std::uint64_t duration_ps_ = 0;
};

/// All tags of both inputs in stream order. Durations must match.
TimeTagStream merge_streams(const TimeTagStream& a, const TimeTagStream& b);

/// Parses "10us", "250ns", "1000ps" or a bare integer (ps).
std::uint64_t parse_duration_ps(const std::string& text);

}  // namespace antibunch

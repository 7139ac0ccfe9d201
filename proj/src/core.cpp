#include "antibunch/core.hpp"

#include <algorithm>
#include <charconv>

namespace antibunch {

double energy_to_wavelength(PhotonEnergy e) {
  return kHcEvNm * 1e3 / e.value_meV;
}

PhotonEnergy wavelength_to_energy(double wavelength_nm) {
  if (!(wavelength_nm > 0.0)) throw DomainError("wavelength must be positive");
  return PhotonEnergy(kHcEvNm * 1e3 / wavelength_nm);
}

TimeTagStream::TimeTagStream(std::vector<TimeTag> tags, std::uint64_t duration_ps)
    : tags_(std::move(tags)), duration_ps_(duration_ps) {
  for (std::size_t i = 0; i < tags_.size(); ++i) {
    const TimeTag& t = tags_[i];
    if (t.channel > 1) throw ContractError("tag channel must be 0 or 1");
    if (t.timestamp > duration_ps_)
      throw ContractError("tag timestamp exceeds stream duration");
    if (i > 0 && tag_before(t, tags_[i - 1]))
      throw ContractError("tags are not sorted by (timestamp, channel)");
  }
}

TimeTagStream TimeTagStream::from_unsorted(std::vector<TimeTag> tags,
                                           std::uint64_t duration_ps) {
  std::sort(tags.begin(), tags.end(), tag_before);
  return TimeTagStream(std::move(tags), duration_ps);
}

std::vector<std::uint64_t> TimeTagStream::timestamps() const {
  std::vector<std::uint64_t> out;
  out.reserve(tags_.size());
  for (const auto& t : tags_) out.push_back(t.timestamp);
  return out;
}

std::size_t TimeTagStream::count_channel(std::uint8_t channel) const {
  return static_cast<std::size_t>(std::count_if(
      tags_.begin(), tags_.end(), [&](const TimeTag& t) { return t.channel == channel; }));
}

TimeTagStream merge_streams(const TimeTagStream& a, const TimeTagStream& b) {
  if (a.duration_ps() != b.duration_ps())
    throw ContractError("cannot merge streams with different durations");
  std::vector<TimeTag> out;
  out.reserve(a.size() + b.size());
  std::merge(a.tags().begin(), a.tags().end(), b.tags().begin(), b.tags().end(),
             std::back_inserter(out), tag_before);
  return TimeTagStream(std::move(out), a.duration_ps());
}

std::uint64_t parse_duration_ps(const std::string& text) {
  std::uint64_t value = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr == first)
    throw ContractError("invalid duration '" + text + "'");
  const std::string unit(ptr, last);
  std::uint64_t scale = 1;
  if (unit.empty() || unit == "ps")
    scale = 1;
  else if (unit == "ns")
    scale = 1000;
  else if (unit == "us")
    scale = 1000000;
  else
    throw ContractError("unknown time unit '" + unit + "' (use ps, ns or us)");
  return value * scale;
}

}  // namespace antibunch

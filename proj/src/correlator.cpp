#include "antibunch/correlator.hpp"

#include <algorithm>
#include <future>
#include <numeric>

namespace antibunch {
namespace {

void check_binning(std::int64_t tau_max_ps, std::int64_t bin_width_ps) {
  if (bin_width_ps < 1) throw ContractError("bin width must be at least 1 ps");
  if (tau_max_ps < bin_width_ps) throw ContractError("tau_max must be at least one bin width");
}

void check_streams(const TimeTagStream& ch0, const TimeTagStream& ch1) {
  if (ch0.duration_ps() != ch1.duration_ps())
    throw ContractError("correlated streams must share a duration");
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

CorrelationHistogram make_histogram(const TimeTagStream& ch0, const TimeTagStream& ch1,
                                    std::int64_t tau_max_ps, std::int64_t bin_width_ps) {
  auto h = CorrelationHistogram::empty(tau_max_ps, bin_width_ps);
  h.n_start = ch0.size();
  h.n_stop = ch1.size();
  h.duration_ps = ch0.duration_ps();
  return h;
}

// Accumulates coincidences for starts[first, last) into `counts`.
void sweep(std::span<const TimeTag> starts, std::span<const TimeTag> stops,
           std::int64_t tau_max, std::int64_t width, std::int64_t half,
           std::vector<std::uint64_t>& counts) {
  if (starts.empty() || stops.empty()) return;
  const auto tau = static_cast<std::uint64_t>(tau_max);
  // First stop with t >= s - tau_max for the first start.
  const std::uint64_t first_s = starts.front().timestamp;
  const std::uint64_t lower0 = first_s > tau ? first_s - tau : 0;
  std::size_t lo = static_cast<std::size_t>(
      std::lower_bound(stops.begin(), stops.end(), lower0,
                       [](const TimeTag& t, std::uint64_t v) { return t.timestamp < v; }) -
      stops.begin());
  const std::size_t n = stops.size();
  for (const TimeTag& start : starts) {
    const std::uint64_t s = start.timestamp;
    const std::uint64_t lower = s > tau ? s - tau : 0;
    while (lo < n && stops[lo].timestamp < lower) ++lo;
    const std::uint64_t upper = s + tau;  // exclusive
    for (std::size_t j = lo; j < n && stops[j].timestamp < upper; ++j) {
      const auto delay = static_cast<std::int64_t>(stops[j].timestamp - s);
      counts[static_cast<std::size_t>(floor_div(delay, width) + half)] += 1;
    }
  }
}

}  // namespace

CorrelationHistogram CorrelationHistogram::empty(std::int64_t tau_max_ps,
                                                 std::int64_t bin_width_ps) {
  check_binning(tau_max_ps, bin_width_ps);
  CorrelationHistogram h;
  h.tau_max_ps = tau_max_ps;
  h.bin_width_ps = bin_width_ps;
  const std::int64_t half = (tau_max_ps + bin_width_ps - 1) / bin_width_ps;
  h.counts.assign(static_cast<std::size_t>(2 * half), 0);
  return h;
}

double CorrelationHistogram::accidental_per_bin() const {
  return static_cast<double>(n_start) * static_cast<double>(n_stop) *
         static_cast<double>(bin_width_ps) / static_cast<double>(duration_ps);
}

std::uint64_t CorrelationHistogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

CorrelationHistogram& CorrelationHistogram::operator+=(const CorrelationHistogram& other) {
  if (other.tau_max_ps != tau_max_ps || other.bin_width_ps != bin_width_ps)
    throw ContractError("cannot add histograms with different binning");
  for (std::size_t k = 0; k < counts.size(); ++k) counts[k] += other.counts[k];
  return *this;
}

CorrelationHistogram correlate(const TimeTagStream& ch0, const TimeTagStream& ch1,
                               std::int64_t tau_max_ps, std::int64_t bin_width_ps) {
  check_streams(ch0, ch1);
  auto h = make_histogram(ch0, ch1, tau_max_ps, bin_width_ps);
  sweep(ch0.tags(), ch1.tags(), tau_max_ps, bin_width_ps, h.half_bins(), h.counts);
  return h;
}

CorrelationHistogram correlate_parallel(const TimeTagStream& ch0, const TimeTagStream& ch1,
                                        std::int64_t tau_max_ps, std::int64_t bin_width_ps,
                                        unsigned chunks) {
  check_streams(ch0, ch1);
  auto h = make_histogram(ch0, ch1, tau_max_ps, bin_width_ps);
  const auto starts = ch0.tags();
  chunks = std::max(1u, std::min<unsigned>(chunks, static_cast<unsigned>(starts.size())));
  if (chunks <= 1) {
    sweep(starts, ch1.tags(), tau_max_ps, bin_width_ps, h.half_bins(), h.counts);
    return h;
  }
  std::vector<std::future<std::vector<std::uint64_t>>> parts;
  const std::size_t step = (starts.size() + chunks - 1) / chunks;
  for (std::size_t begin = 0; begin < starts.size(); begin += step) {
    const auto slice = starts.subspan(begin, std::min(step, starts.size() - begin));
    parts.push_back(std::async(std::launch::async, [&, slice] {
      std::vector<std::uint64_t> local(h.counts.size(), 0);
      sweep(slice, ch1.tags(), tau_max_ps, bin_width_ps, h.half_bins(), local);
      return local;
    }));
  }
  for (auto& part : parts) {
    const auto local = part.get();
    for (std::size_t k = 0; k < local.size(); ++k) h.counts[k] += local[k];
  }
  return h;
}

CorrelationHistogram brute_force_correlate(const TimeTagStream& ch0, const TimeTagStream& ch1,
                                           std::int64_t tau_max_ps, std::int64_t bin_width_ps) {
  check_streams(ch0, ch1);
  auto h = make_histogram(ch0, ch1, tau_max_ps, bin_width_ps);
  const std::int64_t half = h.half_bins();
  for (const TimeTag& s : ch0.tags()) {
    for (const TimeTag& t : ch1.tags()) {
      const std::int64_t delay =
          static_cast<std::int64_t>(t.timestamp) - static_cast<std::int64_t>(s.timestamp);
      if (delay < -tau_max_ps || delay >= tau_max_ps) continue;
      // Offset so the dividend is non-negative: bin 0 starts at -half * w.
      const auto shifted = static_cast<std::uint64_t>(delay + half * bin_width_ps);
      h.counts[shifted / static_cast<std::uint64_t>(bin_width_ps)] += 1;
    }
  }
  return h;
}

CorrelationHistogram normalize(const CorrelationHistogram& h) {
  if (h.normalized) throw ContractError("histogram is already normalized");
  if (h.n_start == 0 || h.n_stop == 0)
    throw NormalizationError("cannot normalize: a channel recorded no events");
  if (h.duration_ps == 0) throw NormalizationError("cannot normalize: zero duration");
  CorrelationHistogram out = h;
  const double accidental = h.accidental_per_bin();
  out.values.resize(h.counts.size());
  for (std::size_t k = 0; k < h.counts.size(); ++k)
    out.values[k] = static_cast<double>(h.counts[k]) / accidental;
  out.normalized = true;
  return out;
}

}  // namespace antibunch

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "antibunch/core.hpp"

namespace antibunch {

struct NormalizationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Start-stop coincidence histogram between channel 0 (start) and channel 1
/// (stop). Bin k covers signed delays [(k - half) * w, (k - half + 1) * w)
/// where half = ceil(tau_max / w); pairs with delay outside
/// [-tau_max, tau_max) are never counted.
struct CorrelationHistogram {
  std::int64_t tau_max_ps = 0;
  std::int64_t bin_width_ps = 0;
  std::vector<std::uint64_t> counts;
  std::uint64_t n_start = 0;
  std::uint64_t n_stop = 0;
  std::uint64_t duration_ps = 0;
  bool normalized = false;
  std::vector<double> values;

  static CorrelationHistogram empty(std::int64_t tau_max_ps, std::int64_t bin_width_ps);

  std::size_t num_bins() const { return counts.size(); }
  std::int64_t half_bins() const { return static_cast<std::int64_t>(counts.size() / 2); }
  std::int64_t bin_lo_ps(std::size_t k) const {
    return (static_cast<std::int64_t>(k) - half_bins()) * bin_width_ps;
  }
  std::int64_t bin_hi_ps(std::size_t k) const { return bin_lo_ps(k) + bin_width_ps; }
  double bin_center_ps(std::size_t k) const {
    return static_cast<double>(bin_lo_ps(k)) + 0.5 * static_cast<double>(bin_width_ps);
  }
  /// Accidental coincidences expected per bin for uncorrelated streams.
  double accidental_per_bin() const;
  std::uint64_t total() const;

  /// Bin-wise sum; both must share binning.
  CorrelationHistogram& operator+=(const CorrelationHistogram& other);

  friend bool operator==(const CorrelationHistogram&, const CorrelationHistogram&) = default;
};

/// Two-pointer sweep, O(n + coincidences). Streams are sorted by construction;
/// the timestamps of both must share a duration.
CorrelationHistogram correlate(const TimeTagStream& ch0, const TimeTagStream& ch1,
                               std::int64_t tau_max_ps, std::int64_t bin_width_ps);

/// Same result as correlate(), sweeping `chunks` contiguous slices of the
/// start stream on separate threads and summing the partial histograms.
CorrelationHistogram correlate_parallel(const TimeTagStream& ch0, const TimeTagStream& ch1,
                                        std::int64_t tau_max_ps, std::int64_t bin_width_ps,
                                        unsigned chunks);

/// Exhaustive O(n0 * n1) reference with the same binning.
CorrelationHistogram brute_force_correlate(const TimeTagStream& ch0, const TimeTagStream& ch1,
                                           std::int64_t tau_max_ps, std::int64_t bin_width_ps);

/// values[k] = counts[k] / (n_start * n_stop * w / T).
CorrelationHistogram normalize(const CorrelationHistogram& h);

}  // namespace antibunch

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "antibunch/correlator.hpp"
#include "antibunch/emitter_sim.hpp"
#include "antibunch/fitters.hpp"

namespace antibunch {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when an expected pipeline artifact is absent or unreadable.
struct ManifestError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BudgetInput {
  double reflectivity = 0.0;
  double coupler_transmission = 1.0;
};

struct PipelineConfig {
  /// pump_uW and seed are set per power.
  EmitterScenario scenario;
  DetectorModel detector;
  std::vector<double> powers_uW;
  std::int64_t tau_max_ps = 10'000'000;
  std::int64_t bin_width_ps = 50'000;
  std::filesystem::path outputs = "out";
  std::uint64_t seed = 0;
  std::optional<BudgetInput> budget;

  void validate() const;
};

PipelineConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const PipelineConfig& config);
PipelineConfig load_config(const std::filesystem::path& path);

// Seed derivation. Power i uses sub = derive_seed(seed, i); its emission,
// background, splitter and the two detectors use derive_seed(sub, 0..4), and
// the background reference acquisition uses derive_seed(sub, 5..8).
struct PowerStreams {
  TimeTagStream ch0;
  TimeTagStream ch1;
  /// Detected rate of a background-only acquisition with the same chain.
  double background_cps;
};

PowerStreams simulate_power(const PipelineConfig& config, std::size_t power_index);

/// Writes power_<i>_ch0.ttg, power_<i>_ch1.ttg and manifest.json.
void cmd_simulate(const PipelineConfig& config);

struct PowerReport {
  double power_uW = 0;
  double detected_cps = 0;
  double background_cps = 0;
  std::optional<double> rho;
  std::optional<double> g2_zero;
  std::optional<double> g2_zero_err;
  std::optional<double> gamma_c_per_us;
  std::optional<double> gamma_c_err_per_us;
  std::optional<double> corrected_cps;
  bool converged = false;
  std::vector<std::string> flags;

  friend bool operator==(const PowerReport&, const PowerReport&) = default;
};

struct GlobalReport {
  std::optional<double> tau_rad_us;
  std::optional<double> tau_rad_err_us;
  std::optional<double> beta_per_uW;
  std::optional<double> I_sat_cps;
  std::optional<double> P_sat_uW;
  std::optional<double> alpha_cps_per_uW;
  std::optional<double> eta;
  bool lifetime_converged = false;
  bool saturation_converged = false;

  friend bool operator==(const GlobalReport&, const GlobalReport&) = default;
};

struct Report {
  std::vector<PowerReport> powers;
  GlobalReport global;
  bool all_converged = false;

  friend bool operator==(const Report&, const Report&) = default;
};

nlohmann::json report_to_json(const Report& report);
Report report_from_json(const nlohmann::json& j);
void print_report_table(std::ostream& out, const Report& report);

/// Reads the artifacts written by cmd_simulate, analyses every power and
/// writes power_<i>_g2.csv and report.json next to them.
Report cmd_report(const PipelineConfig& config);

// CSV helpers shared by the CLI.

using CsvRows = std::vector<std::vector<double>>;

/// Numeric rows; skips blank lines, '#' comments and a non-numeric header.
CsvRows read_csv(std::istream& in);

/// bin_lo_ps,bin_hi_ps,counts,normalized_value with a '#' metadata line.
void write_histogram_csv(std::ostream& out, const CorrelationHistogram& h,
                         const std::vector<double>* corrected = nullptr);
CorrelationHistogram read_histogram_csv(std::istream& in);

nlohmann::json fit_to_json(const std::vector<std::string>& names, const Eigen::VectorXd& values,
                           const Eigen::VectorXd& errors, const FitResultd& fit);

}  // namespace antibunch

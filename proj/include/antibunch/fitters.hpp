#pragma once

#include <optional>
#include <vector>

#include "antibunch/correlator.hpp"
#include "antibunch/lm.hpp"

namespace antibunch {

using FitResultd = FitResult<double>;

/// Model functions with their parameter layout. Each takes the abscissa and a
/// parameter vector and is what the corresponding fit minimizes against.
namespace model {

/// p = {I_sat [cps], P_sat [uW], alpha [cps/uW]}; x = pump power [uW].
double saturation(double pump_uW, const Eigen::VectorXd& p);

/// p = {b, gamma_c}; x = delay in the reciprocal unit of gamma_c.
double antibunching(double delay, const Eigen::VectorXd& p);

/// p = {c0, c1}; x = pump power [uW].
double line(double pump_uW, const Eigen::VectorXd& p);

/// p = {center [meV], fwhm [ueV], amplitude, offset}; x = energy [meV].
double lorentzian(double energy_meV, const Eigen::VectorXd& p);

}  // namespace model

struct SaturationPoint {
  double pump_uW;
  double rate_cps;
  double sigma;
};

struct SaturationParams {
  double I_sat_cps;
  double P_sat_uW;
  double alpha_cps_per_uW;
};

struct SaturationFit {
  SaturationParams params;
  FitResultd fit;
};

/// Fits I(P) = I_sat P / (P + P_sat) + alpha P.
SaturationFit fit_saturation(const std::vector<SaturationPoint>& points,
                             std::optional<Eigen::VectorXd> init = std::nullopt);

struct G2Params {
  double g2_zero;
  double gamma_c_per_us;
};

struct G2Fit {
  G2Params params;
  double g2_zero_err;
  double gamma_c_err_per_us;
  FitResultd fit;
};

struct G2FitOptions {
  /// Per-bin uncertainties of the values. When empty, Poisson errors of the
  /// counts: a first pass uses the observed counts, a second the fitted
  /// expectation.
  std::vector<double> sigmas;
  /// Signal fraction the values were background-corrected with (1: raw).
  double rho = 1.0;
  /// Delay unit of the fitted rate, in ps (1e6: per-microsecond rates).
  double time_unit_ps = 1e6;
  std::optional<Eigen::VectorXd> init;
};

/// Default Poisson uncertainties of a normalized histogram.
std::vector<double> poisson_sigmas(const CorrelationHistogram& h);

/// Fits g2(tau) = 1 - (1 - b) exp(-gamma_c |tau|) over every bin center.
/// `values` overrides h.values (e.g. background-corrected data).
G2Fit fit_g2(const CorrelationHistogram& h, const G2FitOptions& options = {},
             const std::vector<double>* values = nullptr);

struct LifetimePoint {
  double pump_uW;
  double gamma_c_per_us;
  double sigma;
};

struct LifetimeParams {
  double tau_rad_us;
  double beta_per_uW;
};

struct LifetimeFit {
  LifetimeParams params;
  double tau_rad_err_us;
  double beta_err_per_uW;
  FitResultd fit;
};

/// Linear fit gamma_c = c0 + c1 P, then tau_rad = 1/c0 and beta = c1/c0.
/// Throws FitError for fewer than two points or c0 <= 0.
LifetimeFit fit_lifetime(const std::vector<LifetimePoint>& points, bool weighted = true);

struct SpectrumPoint {
  double energy_meV;
  double intensity;
};

struct LorentzianParams {
  double center_meV;
  double fwhm_ueV;
  double amplitude;
  double offset;
};

struct LorentzianFit {
  LorentzianParams params;
  FitResultd fit;
};

/// offset + amplitude (G/2)^2 / ((E - E0)^2 + (G/2)^2), unit weights.
/// No instrument-response deconvolution is applied.
LorentzianFit fit_lorentzian(const std::vector<SpectrumPoint>& spectrum,
                             std::optional<Eigen::VectorXd> init = std::nullopt);

}  // namespace antibunch

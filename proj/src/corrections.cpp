#include "antibunch/corrections.hpp"

#include <cmath>

namespace antibunch {

double signal_fraction(const SignalBackground& sb) {
  const double total = sb.signal.cps + sb.background.cps;
  if (!(total > 0.0)) throw DomainError("signal fraction undefined for S + B = 0");
  return sb.signal.cps / total;
}

double background_correct_g2(double c_tau, double rho) {
  if (!(rho > 0.0 && rho <= 1.0)) throw DomainError("rho must lie in (0, 1]");
  const double rho2 = rho * rho;
  return (c_tau - (1.0 - rho2)) / rho2;
}

CorrectedG2 background_correct_g2(std::span<const double> c_tau, double rho) {
  CorrectedG2 out;
  out.values.reserve(c_tau.size());
  for (double c : c_tau) {
    const double g = background_correct_g2(c, rho);
    if (g < 0.0) ++out.negative_count;
    out.values.push_back(g);
  }
  return out;
}

CountRate corrected_rate(CountRate detected, CountRate background, double g2_zero) {
  if (detected.cps < background.cps)
    throw DomainError("detected rate is below the background rate");
  if (!(g2_zero >= 0.0 && g2_zero <= 1.0))
    throw DomainError("g2(0) must lie in [0, 1] for the brightness correction");
  return CountRate((detected.cps - background.cps) * std::sqrt(1.0 - g2_zero));
}

EfficiencyBudget fiber_coupling_efficiency(double reflectivity, double coupler_transmission) {
  if (!(coupler_transmission > 0.0 && coupler_transmission <= 1.0))
    throw DomainError("coupler transmission must lie in (0, 1]");
  if (!(reflectivity >= 0.0)) throw DomainError("reflectivity must be non-negative");
  if (reflectivity > coupler_transmission)
    throw DomainError("reflectivity above coupler transmission implies eta > 1");
  return {reflectivity, coupler_transmission, std::sqrt(reflectivity / coupler_transmission)};
}

}  // namespace antibunch

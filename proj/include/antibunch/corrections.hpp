#pragma once

#include <span>
#include <vector>

#include "antibunch/core.hpp"

namespace antibunch {

struct SignalBackground {
  CountRate signal;
  CountRate background;
};

/// rho = S / (S + B).
double signal_fraction(const SignalBackground& sb);

/// (C - (1 - rho^2)) / rho^2. Requires 0 < rho <= 1.
double background_correct_g2(double c_tau, double rho);

struct CorrectedG2 {
  std::vector<double> values;
  /// Values below zero, kept as-is. Clamping would bias later fits.
  std::size_t negative_count = 0;
};

CorrectedG2 background_correct_g2(std::span<const double> c_tau, double rho);

/// (I_det - B) sqrt(1 - g2(0)); defined for I_det >= B and 0 <= g2(0) <= 1.
CountRate corrected_rate(CountRate detected, CountRate background, double g2_zero);

struct EfficiencyBudget {
  double reflectivity;
  double coupler_transmission;
  double eta;
};

/// Symmetric in/out coupling: R = eta^2 T_fc.
EfficiencyBudget fiber_coupling_efficiency(double reflectivity, double coupler_transmission);

}  // namespace antibunch

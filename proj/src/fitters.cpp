#include "antibunch/fitters.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace antibunch {
namespace model {

double saturation(double pump_uW, const Eigen::VectorXd& p) {
  return p[0] * pump_uW / (pump_uW + p[1]) + p[2] * pump_uW;
}

double antibunching(double delay, const Eigen::VectorXd& p) {
  return 1.0 - (1.0 - p[0]) * std::exp(-p[1] * std::abs(delay));
}

double line(double pump_uW, const Eigen::VectorXd& p) { return p[0] + p[1] * pump_uW; }

double lorentzian(double energy_meV, const Eigen::VectorXd& p) {
  const double half = 0.5e-3 * p[1];
  const double d = energy_meV - p[0];
  return p[3] + p[2] * half * half / (d * d + half * half);
}

}  // namespace model

namespace {

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

FitResultd not_converged(Eigen::VectorXd params, std::string why) {
  FitResultd r;
  const auto m = params.size();
  r.params = std::move(params);
  r.covariance = Eigen::MatrixXd::Constant(m, m, nan());
  r.chi2 = r.chi2_reduced = nan();
  r.converged = false;
  r.diagnostic = std::move(why);
  return r;
}

}  // namespace

SaturationFit fit_saturation(const std::vector<SaturationPoint>& points,
                             std::optional<Eigen::VectorXd> init) {
  if (points.size() < 4) throw FitError("saturation fit needs at least 4 points");
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::VectorXd xs(n), ys(n), sig(n);
  std::vector<double> powers;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& pt = points[static_cast<std::size_t>(i)];
    if (!(pt.pump_uW >= 0.0)) throw FitError("pump powers must be non-negative");
    xs[i] = pt.pump_uW;
    ys[i] = pt.rate_cps;
    sig[i] = pt.sigma;
    powers.push_back(pt.pump_uW);
  }
  if (!init) {
    init = Eigen::VectorXd(3);
    *init << ys.maxCoeff(), median(powers), 0.0;
  }
  auto fit = lm_fit<double>(model::saturation, xs, ys, sig, *init);
  return {{fit.params[0], fit.params[1], fit.params[2]}, std::move(fit)};
}

std::vector<double> poisson_sigmas(const CorrelationHistogram& h) {
  const double norm = h.accidental_per_bin();
  std::vector<double> out(h.counts.size());
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = std::sqrt(std::max(static_cast<double>(h.counts[k]), 1.0)) / norm;
  return out;
}

G2Fit fit_g2(const CorrelationHistogram& h, const G2FitOptions& options,
             const std::vector<double>* values) {
  if (!values) {
    if (!h.normalized) throw ContractError("fit_g2 needs a normalized histogram");
    values = &h.values;
  }
  const auto& ys_in = *values;
  const std::size_t nb = h.counts.size();
  if (ys_in.size() != nb) throw ContractError("value count does not match bin count");
  const bool poisson = options.sigmas.empty();
  if (!(options.rho > 0.0 && options.rho <= 1.0)) throw ContractError("rho must lie in (0, 1]");
  const double rho2 = options.rho * options.rho;
  std::vector<double> sigmas = poisson ? poisson_sigmas(h) : options.sigmas;
  if (poisson)
    for (double& s : sigmas) s /= rho2;
  if (sigmas.size() != nb) throw ContractError("sigma count does not match bin count");

  const double unit = options.time_unit_ps;
  const auto n = static_cast<Eigen::Index>(nb);
  Eigen::VectorXd xs(n), ys(n), sig(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    xs[i] = h.bin_center_ps(k) / unit;
    ys[i] = ys_in[k];
    sig[i] = sigmas[k];
  }

  Eigen::VectorXd init(2);
  const double lo = ys.minCoeff();
  const double hi = ys.maxCoeff();
  if (options.init) {
    init = *options.init;
  } else {
    // Walk outward from zero delay, averaging mirrored bins, until the dip
    // recovers to 1 - (1 - b)/e.
    const double threshold = 1.0 - (1.0 - lo) / std::numbers::e;
    const std::size_t half = nb / 2;
    double recovery = 0.5 * static_cast<double>(h.tau_max_ps) / unit;
    for (std::size_t j = 0; j < half; ++j) {
      const double avg = 0.5 * (ys_in[half + j] + ys_in[half - 1 - j]);
      if (avg >= threshold) {
        recovery = std::max(h.bin_center_ps(half + j) / unit, 0.5 * h.bin_width_ps / unit);
        break;
      }
    }
    init << lo, 1.0 / recovery;
  }

  G2Fit out{};
  if (hi - lo <= 1e-12 * std::max(std::abs(hi), 1.0)) {
    out.fit = not_converged(init, "flat histogram: no antibunching dip to fit");
  } else {
    out.fit = lm_fit<double>(model::antibunching, xs, ys, sig, init);
    // Weights from observed counts pull the curve toward low-count bins.
    // Refit once with variances from the fitted expectation.
    if (poisson && out.fit.converged) {
      const double norm = h.accidental_per_bin();
      for (Eigen::Index i = 0; i < n; ++i) {
        const double g = model::antibunching(xs[i], out.fit.params);
        const double expected = std::max((rho2 * g + 1.0 - rho2) * norm, 1.0);
        sig[i] = std::sqrt(expected) / norm / rho2;
      }
      out.fit = lm_fit<double>(model::antibunching, xs, ys, sig, out.fit.params);
    }
  }
  const auto err = out.fit.stderrs();
  const double to_per_us = kPsPerMicrosecond / unit;
  out.params = {out.fit.params[0], out.fit.params[1] * to_per_us};
  out.g2_zero_err = err[0];
  out.gamma_c_err_per_us = err[1] * to_per_us;
  return out;
}

LifetimeFit fit_lifetime(const std::vector<LifetimePoint>& points, bool weighted) {
  if (points.size() < 2) throw FitError("lifetime fit is underdetermined with fewer than 2 points");
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::VectorXd xs(n), ys(n), sig(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& pt = points[static_cast<std::size_t>(i)];
    if (!(pt.pump_uW >= 0.0)) throw FitError("pump powers must be non-negative");
    xs[i] = pt.pump_uW;
    ys[i] = pt.gamma_c_per_us;
    sig[i] = weighted ? pt.sigma : 1.0;
  }

  FitResultd fit;
  if (n == 2) {
    // Exactly determined: the interpolating line, no residual scaling.
    if (xs[0] == xs[1]) throw FitError("lifetime fit needs two distinct pump powers");
    Eigen::Matrix2d design;
    design << 1.0, xs[0], 1.0, xs[1];
    const Eigen::Matrix2d w = sig.cwiseInverse().asDiagonal() * design;
    fit.params = design.partialPivLu().solve(ys);
    fit.covariance = (w.transpose() * w).inverse();
    fit.chi2 = 0.0;
    fit.chi2_reduced = nan();
    fit.converged = true;
    fit.iterations = 0;
    fit.cost_history = {0.0};
  } else {
    // Endpoint secant as the starting line.
    Eigen::Index imin = 0, imax = 0;
    xs.minCoeff(&imin);
    xs.maxCoeff(&imax);
    Eigen::VectorXd init(2);
    const double slope = xs[imax] > xs[imin] ? (ys[imax] - ys[imin]) / (xs[imax] - xs[imin]) : 0.0;
    init << ys[imin] - slope * xs[imin], slope;
    fit = lm_fit<double>(model::line, xs, ys, sig, init);
  }

  const double c0 = fit.params[0];
  const double c1 = fit.params[1];
  if (!(c0 > 0.0)) throw FitError("nonphysical lifetime: fitted intercept is not positive");
  LifetimeFit out{};
  out.params = {1.0 / c0, c1 / c0};
  const Eigen::MatrixXd& cov = fit.covariance;
  out.tau_rad_err_us = std::sqrt(cov(0, 0)) / (c0 * c0);
  const double var_beta = cov(1, 1) / (c0 * c0) + c1 * c1 * cov(0, 0) / std::pow(c0, 4) -
                          2.0 * c1 * cov(0, 1) / std::pow(c0, 3);
  out.beta_err_per_uW = std::sqrt(std::max(var_beta, 0.0));
  out.fit = std::move(fit);
  return out;
}

LorentzianFit fit_lorentzian(const std::vector<SpectrumPoint>& spectrum,
                             std::optional<Eigen::VectorXd> init) {
  if (spectrum.size() < 5) throw FitError("Lorentzian fit needs at least 5 points");
  auto pts = spectrum;
  std::sort(pts.begin(), pts.end(),
            [](const SpectrumPoint& a, const SpectrumPoint& b) { return a.energy_meV < b.energy_meV; });
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::VectorXd xs(n), ys(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    xs[i] = pts[static_cast<std::size_t>(i)].energy_meV;
    ys[i] = pts[static_cast<std::size_t>(i)].intensity;
  }

  if (!init) {
    Eigen::Index peak = 0;
    const double top = ys.maxCoeff(&peak);
    const double floor = ys.minCoeff();
    const double half_level = floor + 0.5 * (top - floor);
    auto crossing = [&](Eigen::Index from, Eigen::Index dir) {
      for (Eigen::Index i = from; i + dir >= 0 && i + dir < n; i += dir) {
        const Eigen::Index j = i + dir;
        if (ys[j] < half_level) {
          const double t = (ys[i] - half_level) / (ys[i] - ys[j]);
          return xs[i] + t * (xs[j] - xs[i]);
        }
      }
      return xs[dir > 0 ? n - 1 : 0];
    };
    double width_meV = crossing(peak, 1) - crossing(peak, -1);
    if (!(width_meV > 0.0)) width_meV = 0.1 * (xs[n - 1] - xs[0]);
    init = Eigen::VectorXd(4);
    *init << xs[peak], width_meV * 1e3, top - floor, floor;
  }
  // Fit the center as an offset from the starting guess: a relative
  // difference step on ~935 meV would span a sizeable part of the line.
  const double ref = (*init)[0];
  const Eigen::VectorXd shifted = xs.array() - ref;
  Eigen::VectorXd start = *init;
  start[0] = 0.0;
  LmOptions<double> opt;
  opt.jacobian_min_step = 1e-9;
  const Eigen::VectorXd unit = Eigen::VectorXd::Ones(n);
  auto fit = lm_fit<double>(model::lorentzian, shifted, ys, unit, start, opt);
  fit.params[0] += ref;
  return {{fit.params[0], std::abs(fit.params[1]), fit.params[2], fit.params[3]}, std::move(fit)};
}

}  // namespace antibunch

#include <cmath>
#include <random>

#include "doctest.h"

#include "antibunch/emitter_sim.hpp"
#include "antibunch/fitters.hpp"

using namespace antibunch;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

double rel(double got, double want) { return std::abs(got / want - 1.0); }

// Synthetic normalized histogram with given values in every bin.
CorrelationHistogram synthetic(std::int64_t tau_max, std::int64_t width,
                               const std::function<double(double)>& f) {
  auto h = CorrelationHistogram::empty(tau_max, width);
  h.normalized = true;
  h.values.resize(h.num_bins());
  for (std::size_t k = 0; k < h.num_bins(); ++k) h.values[k] = f(h.bin_center_ps(k));
  return h;
}

std::vector<SaturationPoint> saturation_curve(double I, double P, double a,
                                              const std::vector<double>& powers) {
  std::vector<SaturationPoint> pts;
  for (double p : powers) pts.push_back({p, I * p / (p + P) + a * p, 1.0});
  return pts;
}

}  // namespace

TEST_CASE("lm solves a linear model in a few steps") {
  const Eigen::VectorXd xs = Eigen::VectorXd::LinSpaced(20, 0.0, 10.0);
  const Eigen::VectorXd ys = (3.0 - 0.5 * xs.array()).matrix();
  LmOptions<double> opt;
  opt.max_iterations = 3;
  const auto fit = lm_fit<double>(model::line, xs, ys, Eigen::VectorXd::Ones(20), vec({0, 0}), opt);
  CHECK(fit.iterations <= 3);
  CHECK(std::abs(fit.params[0] - 3.0) < 1e-9);
  CHECK(std::abs(fit.params[1] + 0.5) < 1e-9);
}

TEST_CASE("lm recovers an exponential from a distant start") {
  auto expo = [](double x, const Eigen::VectorXd& p) { return p[0] * std::exp(-p[1] * x); };
  const Eigen::VectorXd xs = Eigen::VectorXd::LinSpaced(40, 0.0, 5.0);
  Eigen::VectorXd ys(40);
  for (int i = 0; i < 40; ++i) ys[i] = 2.5 * std::exp(-1.3 * xs[i]);
  const auto fit = lm_fit<double>(expo, xs, ys, Eigen::VectorXd::Ones(40), vec({5.0, 2.6}));
  CHECK(fit.converged);
  CHECK(std::abs(fit.params[0] - 2.5) < 1e-6);
  CHECK(std::abs(fit.params[1] - 1.3) < 1e-6);

  bool monotone = true;
  for (std::size_t i = 1; i < fit.cost_history.size(); ++i)
    monotone = monotone && fit.cost_history[i] <= fit.cost_history[i - 1];
  CHECK(monotone);
}

TEST_CASE("forward jacobian agrees with central differences") {
  struct Case {
    std::function<double(double, const Eigen::VectorXd&)> f;
    Eigen::VectorXd p;
    Eigen::VectorXd xs;
  };
  const std::vector<Case> cases{
      {model::saturation, vec({2423, 0.93, 50}), Eigen::VectorXd::LinSpaced(7, 0.1, 3.0)},
      {model::antibunching, vec({0.05, 0.8}), Eigen::VectorXd::LinSpaced(9, -4.0, 4.0)},
      {model::line, vec({0.62, 0.67}), Eigen::VectorXd::LinSpaced(5, 0.0, 2.0)},
      // Energies relative to a reference, as the Lorentzian fit uses them.
      {model::lorentzian, vec({0.01, 41, 100, 5}), Eigen::VectorXd::LinSpaced(11, -0.1, 0.1)},
  };
  for (const auto& c : cases) {
    const auto jac = forward_jacobian<double>(c.f, c.xs, c.p);
    for (Eigen::Index j = 0; j < c.p.size(); ++j) {
      const double h = 1e-5 * std::max(std::abs(c.p[j]), 1.0);
      Eigen::VectorXd up = c.p, dn = c.p;
      up[j] += h;
      dn[j] -= h;
      for (Eigen::Index i = 0; i < c.xs.size(); ++i) {
        const double central = (c.f(c.xs[i], up) - c.f(c.xs[i], dn)) / (2 * h);
        CHECK(std::abs(jac(i, j) - central) <= 1e-4 * std::max(std::abs(central), 1.0));
      }
    }
  }
}

TEST_CASE("lm failure modes") {
  const Eigen::VectorXd xs = Eigen::VectorXd::LinSpaced(10, 0.0, 1.0);
  const Eigen::VectorXd ys = Eigen::VectorXd::Ones(10);
  const Eigen::VectorXd sig = Eigen::VectorXd::Ones(10);

  // Two parameters that enter only through their sum.
  auto redundant = [](double x, const Eigen::VectorXd& p) { return (p[0] + p[1]) * x; };
  const auto fit = lm_fit<double>(redundant, xs, ys, sig, vec({1, 1}));
  CHECK_FALSE(fit.converged);
  CHECK_FALSE(fit.diagnostic.empty());

  auto nan_model = [](double, const Eigen::VectorXd&) { return std::nan(""); };
  CHECK_THROWS_AS(lm_fit<double>(nan_model, xs, ys, sig, vec({1})), FitError);
  CHECK_THROWS_AS(lm_fit<double>(model::line, xs, ys, -sig, vec({1, 1})), std::invalid_argument);
}

TEST_CASE("saturation model and fit") {
  const auto p = vec({2423, 0.93, 0});
  CHECK(model::saturation(0.93, p) == doctest::Approx(2423.0 / 2));
  CHECK(model::saturation(0.0, p) == 0.0);

  const std::vector<double> powers{0.1, 0.2, 0.4, 0.7, 1.0, 1.5, 2.0, 2.5, 3.0};
  const auto fit = fit_saturation(saturation_curve(2423, 0.93, 50, powers));
  CHECK(fit.fit.converged);
  CHECK(rel(fit.params.I_sat_cps, 2423) < 1e-3);
  CHECK(rel(fit.params.P_sat_uW, 0.93) < 1e-3);
  CHECK(rel(fit.params.alpha_cps_per_uW, 50) < 1e-3);

  CHECK_THROWS_AS(fit_saturation(saturation_curve(2423, 0.93, 50, {0.1, 0.5, 1.0})), FitError);
}

TEST_CASE("saturation fit on one-second Poisson counts") {
  const std::vector<double> powers{0.1, 0.25, 0.5, 1, 2, 4, 8, 16};
  double mean_I = 0, mean_P = 0;
  constexpr int kSeeds = 20;
  for (int seed = 0; seed < kSeeds; ++seed) {
    std::mt19937_64 gen(static_cast<std::uint64_t>(seed));
    std::vector<SaturationPoint> pts;
    for (double p : powers) {
      const double mu = 2423 * p / (p + 0.93) + 50 * p;
      const double n = static_cast<double>(std::poisson_distribution<long>(mu)(gen));
      pts.push_back({p, n, std::sqrt(std::max(n, 1.0))});
    }
    const auto fit = fit_saturation(pts);
    mean_I += fit.params.I_sat_cps / kSeeds;
    mean_P += fit.params.P_sat_uW / kSeeds;
  }
  CHECK(rel(mean_I, 2423) < 0.05);
  CHECK(rel(mean_P, 0.93) < 0.05);
}

TEST_CASE("antibunching model") {
  const auto p = vec({0.1, 2.0});
  CHECK(model::antibunching(0.0, p) == doctest::Approx(0.1));
  CHECK(model::antibunching(1e3, p) == doctest::Approx(1.0));
  CHECK(model::antibunching(-0.7, p) == model::antibunching(0.7, p));
  // Halfway between b and 1 at |tau| = ln 2 / gamma.
  CHECK(model::antibunching(std::log(2.0) / 2.0, p) == doctest::Approx(0.55));
}

TEST_CASE("g2 fit on noiseless data") {
  const double b = 0.03, gamma_per_us = 0.8;
  const auto h = synthetic(10'000'000, 50'000, [&](double t_ps) {
    return 1.0 - (1.0 - b) * std::exp(-gamma_per_us * std::abs(t_ps) / 1e6);
  });
  G2FitOptions opt;
  opt.sigmas.assign(h.num_bins(), 0.01);
  const auto fit = fit_g2(h, opt);
  CHECK(fit.fit.converged);
  CHECK(std::abs(fit.params.g2_zero - b) < 1e-6);
  CHECK(rel(fit.params.gamma_c_per_us, gamma_per_us) < 1e-6);

  // The same data in ps units gives the same rate up to the unit change.
  opt.time_unit_ps = 1.0;
  opt.init = vec({0.5, 1e-6});
  const auto ps = fit_g2(h, opt);
  CHECK(ps.fit.converged);
  CHECK(std::abs(ps.params.gamma_c_per_us / fit.params.gamma_c_per_us - 1.0) < 1e-9);
  CHECK(std::abs(ps.params.g2_zero - fit.params.g2_zero) < 1e-9);
}

TEST_CASE("g2 fit on a flat histogram does not converge") {
  const auto h = synthetic(1'000'000, 10'000, [](double) { return 1.0; });
  G2FitOptions opt;
  opt.sigmas.assign(h.num_bins(), 0.01);
  CHECK_FALSE(fit_g2(h, opt).fit.converged);
}

TEST_CASE("g2 closed loop on simulated single-emitter light") {
  EmitterScenario s;
  s.tau_rad_ps = 1.61e6;
  s.beta_per_uW = 1.0 / 0.93;
  s.pump_uW = 0.2 / s.beta_per_uW;
  s.collection_efficiency = 0.1;
  s.duration_ps = 400ull * 1'000'000'000'000ull;
  s.seed = 31;
  const auto [a, b] = hbt_split(simulate_emission(s), 32);
  const auto h = normalize(correlate(a, b, 10'000'000, 50'000));
  const auto fit = fit_g2(h);
  CHECK(fit.fit.converged);
  CHECK(fit.params.g2_zero <= 0.05);
  CHECK(rel(fit.params.gamma_c_per_us, 1.2 / 1.61) < 0.05);
}

TEST_CASE("lifetime from gamma_c versus pump") {
  const double tau = 1.61, beta = 1.0;
  std::vector<LifetimePoint> pts;
  for (double p : {0.1, 0.5, 1.0, 2.0}) pts.push_back({p, (1 + beta * p) / tau, 0.01});
  const auto fit = fit_lifetime(pts);
  CHECK(std::abs(fit.params.tau_rad_us - tau) < 1e-9);
  CHECK(std::abs(fit.params.beta_per_uW - beta) < 1e-9);

  const auto two = fit_lifetime({pts[0], pts[3]});
  CHECK(std::abs(two.params.tau_rad_us - tau) < 1e-12);
  CHECK(std::abs(two.params.beta_per_uW - beta) < 1e-12);

  CHECK_THROWS_AS(fit_lifetime({pts[0]}), FitError);
  CHECK_THROWS_AS(fit_lifetime({{0.1, -1.0, 0.01}, {1.0, -0.5, 0.01}, {2.0, 0.0, 0.01}}), FitError);
}

TEST_CASE("lorentzian fit") {
  const auto truth = vec({935.4, 41.0, 1000.0, 20.0});
  std::vector<SpectrumPoint> spec;
  for (double e = 935.2; e <= 935.6; e += 0.002) spec.push_back({e, model::lorentzian(e, truth)});

  CHECK(model::lorentzian(935.4, truth) == doctest::Approx(1020.0));
  CHECK(model::lorentzian(935.4 + 0.0205, truth) == doctest::Approx(520.0));
  CHECK(model::lorentzian(935.39, truth) == doctest::Approx(model::lorentzian(935.41, truth)));

  const auto fit = fit_lorentzian(spec);
  CHECK(fit.fit.converged);
  CHECK(std::abs(fit.params.center_meV - 935.4) < 1e-6);
  CHECK(rel(fit.params.fwhm_ueV, 41.0) < 1e-3);
  CHECK(rel(fit.params.amplitude, 1000.0) < 1e-3);

  SUBCASE("perturbed starting points") {
    for (double shift : {-0.5, 0.5})
      for (double scale : {0.5, 2.0}) {
        auto init = truth;
        init[0] += shift * 0.041;
        init[1] *= scale;
        const auto f = fit_lorentzian(spec, init);
        CHECK(std::abs(f.params.center_meV - 935.4) < 1e-4);
        CHECK(rel(f.params.fwhm_ueV, 41.0) < 1e-4);
      }
  }
  SUBCASE("five percent noise") {
    for (int seed = 0; seed < 20; ++seed) {
      std::mt19937_64 gen(static_cast<std::uint64_t>(seed));
      std::normal_distribution<double> noise(0.0, 0.05 * 1000.0);
      auto noisy = spec;
      for (auto& pt : noisy) pt.intensity += noise(gen);
      const auto f = fit_lorentzian(noisy);
      CHECK(rel(f.params.fwhm_ueV, 41.0) < 0.10);
    }
  }
  CHECK_THROWS_AS(fit_lorentzian({spec.begin(), spec.begin() + 4}), FitError);
}

TEST_CASE("uncertainties shrink with the noise") {
  const std::vector<double> powers{0.1, 0.2, 0.4, 0.7, 1.0, 1.5, 2.0, 2.5, 3.0};
  double previous = std::numeric_limits<double>::infinity();
  for (double level : {100.0, 10.0, 1.0}) {
    std::mt19937_64 gen(4);
    std::normal_distribution<double> noise(0.0, level);
    auto pts = saturation_curve(2423, 0.93, 50, powers);
    for (auto& pt : pts) {
      pt.rate_cps += noise(gen);
      pt.sigma = level;
    }
    const double err = fit_saturation(pts).fit.stderrs()[0];
    CHECK(err < previous);
    previous = err;
  }
}

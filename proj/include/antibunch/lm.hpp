#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace antibunch {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Raised when the model cannot be evaluated (non-finite output).
struct FitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename Scalar>
struct LmOptions {
  int max_iterations = 200;
  Scalar initial_lambda = Scalar(1e-3);
  Scalar lambda_factor = Scalar(10);
  Scalar relative_cost_tolerance = Scalar(1e-10);
  Scalar step_tolerance = Scalar(1e-12);
  Scalar jacobian_relative_step = Scalar(1e-6);
  Scalar jacobian_min_step = Scalar(1e-12);
};

template <typename Scalar>
struct FitResult {
  VectorX<Scalar> params;
  /// inv(J^T W J) scaled by chi2_reduced.
  MatrixX<Scalar> covariance;
  Scalar chi2 = 0;
  Scalar chi2_reduced = 0;
  int iterations = 0;
  bool converged = false;
  std::string diagnostic;
  /// Cost after the initial evaluation and after every accepted step.
  std::vector<Scalar> cost_history;

  VectorX<Scalar> stderrs() const {
    VectorX<Scalar> out(params.size());
    for (Eigen::Index i = 0; i < params.size(); ++i)
      out[i] = covariance.size() ? std::sqrt(std::max(covariance(i, i), Scalar(0)))
                                 : std::numeric_limits<Scalar>::quiet_NaN();
    return out;
  }
};

/// Forward-difference Jacobian of model(x, params) with respect to params,
/// per-parameter step max(rel * |p|, min_step).
template <typename Scalar, typename Model>
MatrixX<Scalar> forward_jacobian(const Model& model, const VectorX<Scalar>& xs,
                                 const VectorX<Scalar>& params,
                                 Scalar rel = Scalar(1e-6), Scalar min_step = Scalar(1e-12)) {
  const Eigen::Index n = xs.size();
  const Eigen::Index m = params.size();
  MatrixX<Scalar> jac(n, m);
  VectorX<Scalar> base(n);
  for (Eigen::Index i = 0; i < n; ++i) base[i] = model(xs[i], params);
  VectorX<Scalar> shifted = params;
  for (Eigen::Index j = 0; j < m; ++j) {
    const Scalar h = std::max(rel * std::abs(params[j]), min_step);
    shifted[j] = params[j] + h;
    const Scalar actual = shifted[j] - params[j];
    for (Eigen::Index i = 0; i < n; ++i) jac(i, j) = (model(xs[i], shifted) - base[i]) / actual;
    shifted[j] = params[j];
  }
  return jac;
}

namespace detail {

template <typename Scalar, typename Model>
VectorX<Scalar> weighted_residuals(const Model& model, const VectorX<Scalar>& xs,
                                   const VectorX<Scalar>& ys, const VectorX<Scalar>& inv_sigma,
                                   const VectorX<Scalar>& params) {
  VectorX<Scalar> r(xs.size());
  for (Eigen::Index i = 0; i < xs.size(); ++i) {
    const Scalar f = model(xs[i], params);
    if (!std::isfinite(f)) throw FitError("model returned a non-finite value");
    r[i] = (ys[i] - f) * inv_sigma[i];
  }
  return r;
}

}  // namespace detail

/// Minimizes sum(((y - model(x; p)) / sigma)^2) with Marquardt-scaled damping.
///
/// `model` is any callable Scalar(Scalar x, const VectorX<Scalar>& p).
/// Singular normal equations yield converged = false with a diagnostic
/// instead of an exception.
template <typename Scalar, typename Model>
FitResult<Scalar> lm_fit(const Model& model, const VectorX<Scalar>& xs, const VectorX<Scalar>& ys,
                         const VectorX<Scalar>& sigmas, const VectorX<Scalar>& init,
                         const LmOptions<Scalar>& opt = {}) {
  const Eigen::Index n = xs.size();
  const Eigen::Index m = init.size();
  if (ys.size() != n || sigmas.size() != n)
    throw std::invalid_argument("xs, ys and sigmas must have equal length");
  if (n <= m) throw std::invalid_argument("need more data points than parameters");
  if (!init.allFinite()) throw std::invalid_argument("initial parameters must be finite");
  if ((sigmas.array() <= Scalar(0)).any())
    throw std::invalid_argument("sigmas must be positive");

  const VectorX<Scalar> inv_sigma = sigmas.cwiseInverse();
  auto residuals = [&](const VectorX<Scalar>& p) {
    return detail::weighted_residuals(model, xs, ys, inv_sigma, p);
  };
  auto weighted_jacobian = [&](const VectorX<Scalar>& p) {
    MatrixX<Scalar> jac =
        forward_jacobian(model, xs, p, opt.jacobian_relative_step, opt.jacobian_min_step);
    return MatrixX<Scalar>(inv_sigma.asDiagonal() * jac);
  };

  FitResult<Scalar> result;
  VectorX<Scalar> p = init;
  VectorX<Scalar> r = residuals(p);
  Scalar cost = r.squaredNorm();
  result.cost_history.push_back(cost);
  Scalar lambda = opt.initial_lambda;

  MatrixX<Scalar> jac = weighted_jacobian(p);
  MatrixX<Scalar> jtj = jac.transpose() * jac;
  VectorX<Scalar> jtr = jac.transpose() * r;

  // Rank test on the unit-diagonal form so parameter scales do not matter.
  auto singular = [](const MatrixX<Scalar>& a) {
    const VectorX<Scalar> d = a.diagonal();
    if (!(d.array() > Scalar(0)).all()) return true;
    const VectorX<Scalar> s = d.cwiseSqrt().cwiseInverse();
    const MatrixX<Scalar> scaled = s.asDiagonal() * a * s.asDiagonal();
    Eigen::FullPivLU<MatrixX<Scalar>> lu(scaled);
    lu.setThreshold(Scalar(1e4) * std::numeric_limits<Scalar>::epsilon());
    return lu.rank() < a.rows();
  };

  while (result.iterations < opt.max_iterations) {
    if (cost == Scalar(0)) {
      result.converged = true;
      break;
    }
    if (singular(jtj)) {
      result.diagnostic = "singular normal equations";
      break;
    }
    MatrixX<Scalar> damped = jtj;
    damped.diagonal() += lambda * jtj.diagonal();
    const VectorX<Scalar> step = damped.ldlt().solve(jtr);
    if (!step.allFinite()) {
      result.diagnostic = "non-finite step";
      break;
    }
    const bool tiny_step = step.norm() <= opt.step_tolerance * (p.norm() + opt.step_tolerance);

    const VectorX<Scalar> trial = p + step;
    const VectorX<Scalar> trial_r = residuals(trial);
    const Scalar trial_cost = trial_r.squaredNorm();

    if (trial_cost < cost) {
      const Scalar decrease = (cost - trial_cost) / cost;
      p = trial;
      r = trial_r;
      cost = trial_cost;
      result.cost_history.push_back(cost);
      ++result.iterations;
      lambda /= opt.lambda_factor;
      if (decrease < opt.relative_cost_tolerance || tiny_step) {
        result.converged = true;
        break;
      }
      jac = weighted_jacobian(p);
      jtj = jac.transpose() * jac;
      jtr = jac.transpose() * r;
    } else {
      if (tiny_step) {
        // No representable improvement left around p.
        result.converged = true;
        break;
      }
      lambda *= opt.lambda_factor;
      if (lambda > Scalar(1e20)) {
        result.diagnostic = "damping diverged without an accepted step";
        break;
      }
    }
  }
  if (!result.converged && result.diagnostic.empty())
    result.diagnostic = "iteration limit reached";

  result.params = p;
  result.chi2 = cost;
  const auto dof = static_cast<Scalar>(n - m);
  result.chi2_reduced = cost / dof;

  const MatrixX<Scalar> final_jac = weighted_jacobian(p);
  const MatrixX<Scalar> normal = final_jac.transpose() * final_jac;
  if (singular(normal)) {
    result.covariance = MatrixX<Scalar>::Constant(m, m, std::numeric_limits<Scalar>::quiet_NaN());
    if (result.converged) {
      result.converged = false;
      result.diagnostic = "singular normal equations at optimum";
    }
  } else {
    MatrixX<Scalar> cov = normal.inverse() * result.chi2_reduced;
    result.covariance = Scalar(0.5) * (cov + cov.transpose());
  }
  return result;
}

}  // namespace antibunch

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>

#include "qop/errors.hpp"
#include "qop/rng.hpp"
#include "qop/sym_matrix.hpp"

namespace qop {

// Soft threshold: argmin_u ||u - x||^2 / 2 + t ||u||_1, coordinate-wise.
inline Vec prox_l1(const Vec& x, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("prox_l1: requires t >= 0");
  Vec out(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double v = x(j);
    out(j) = v > t ? v - t : (v < -t ? v + t : 0.0);
  }
  return out;
}

// Coordinate-wise clamp onto [-kappa, kappa]^d.
inline Vec proj_box(const Vec& x, double kappa) {
  if (!(kappa > 0.0)) throw std::invalid_argument("proj_box: requires kappa > 0");
  return x.cwiseMin(kappa).cwiseMax(-kappa);
}

// Composite problem handle consumed by the splitting solver:
//   min over theta in C of  sum_{i<n} l~(theta; z_i) + l1_weight ||theta||_1
// with C = [-box_radius, box_radius]^d (box_radius = +inf means
// unconstrained, l1_weight = 0 means no penalty). point_grad returns the
// smooth per-point gradient of l~, any perturbation terms already folded in
// with their 1/n share.
struct CompositeObjective {
  Eigen::Index dim = 0;
  std::size_t n = 1;
  double l1_weight = 0.0;
  double box_radius = std::numeric_limits<double>::infinity();
  std::function<Vec(const Vec&, std::size_t)> point_grad;

  Vec smooth_grad(const Vec& theta) const {
    Vec g = Vec::Zero(dim);
    for (std::size_t i = 0; i < n; ++i) g += point_grad(theta, i);
    return g;
  }

  Vec prox_reg(const Vec& v, double step) const {
    return l1_weight > 0.0 ? prox_l1(v, step * l1_weight) : v;
  }

  Vec project(const Vec& v) const {
    return std::isfinite(box_radius) ? proj_box(v, box_radius) : v;
  }

  void validate() const {
    if (dim < 1)
      throw std::invalid_argument("CompositeObjective: dim must be >= 1");
    if (n < 1) throw std::invalid_argument("CompositeObjective: n must be >= 1");
    if (!point_grad)
      throw std::invalid_argument("CompositeObjective: point_grad unset");
    if (!(l1_weight >= 0.0))
      throw std::invalid_argument("CompositeObjective: l1_weight >= 0");
    if (!(box_radius > 0.0))
      throw std::invalid_argument("CompositeObjective: box_radius > 0");
  }
};

struct SolverConfig {
  long iterations = 1000;            // K
  double step = 0.0;                 // rho; <= 0 means caller computes it
  double relaxation_exponent = 0.502;  // lambda_k = (k+1)^{-exponent}
  std::uint64_t seed = 0;

  void validate() const {
    if (iterations < 1)
      throw std::invalid_argument("SolverConfig: iterations must be >= 1");
    if (!(relaxation_exponent > 0.5 && relaxation_exponent <= 1.0))
      throw std::invalid_argument(
          "SolverConfig: relaxation_exponent must lie in (1/2, 1]");
  }
};

struct SolverResult {
  Vec theta;                    // released iterate theta_K (a prox output)
  Vec z_final;                  // last projected iterate, always feasible
  long iterations_run = 0;
  double stationarity_residual = 0.0;
  bool residual_used_clamp = false;  // theta left the box by more than 1e-12
};

// Distance from zero to the subdifferential of the full objective at theta,
// in closed form for the l1 penalty plus box constraint: per coordinate the
// set  d(omega |.|)(theta_j) + N_[-kappa, kappa](theta_j)  is an interval, so
// the residual is the Euclidean norm of the coordinate-wise distances of
// -grad_j to those intervals.
inline double stationarity_residual(const CompositeObjective& objective,
                                    const Vec& theta) {
  objective.validate();
  if (!theta.allFinite())
    throw std::invalid_argument("stationarity_residual: theta must be finite");
  const Vec g = objective.smooth_grad(theta);
  const double omega = objective.l1_weight;
  const double kappa = objective.box_radius;
  double sq = 0.0;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    double lo, hi;
    const double v = theta(j);
    if (v > 0.0) {
      lo = hi = omega;
    } else if (v < 0.0) {
      lo = hi = -omega;
    } else {
      lo = -omega;
      hi = omega;
    }
    if (std::isfinite(kappa)) {
      if (v >= kappa) hi = std::numeric_limits<double>::infinity();
      if (v <= -kappa) lo = -std::numeric_limits<double>::infinity();
    }
    const double target = -g(j);
    double r = 0.0;
    if (target < lo) r = lo - target;
    else if (target > hi) r = target - hi;
    sq += r * r;
  }
  return std::sqrt(sq);
}

// Surrogate stopping rule: residual <= sqrt(2 tau alpha sigma^2). Under
// alpha sigma^2-strong convexity a pass certifies tau-suboptimality.
inline bool check_stopping(double residual, double tau, double alpha,
                           double sigma2) {
  if (!(tau > 0.0 && alpha > 0.0 && sigma2 > 0.0))
    throw std::invalid_argument("check_stopping: tau, alpha, sigma2 > 0");
  return residual <= std::sqrt(2.0 * tau * alpha * sigma2);
}

// Stochastic three-operator splitting. Per iteration, with i_k uniform:
//   theta_k = prox_{rho r}(x_k)
//   z_k     = proj_C(2 theta_k - x_k - rho n grad l~(theta_k; z_{i_k}))
//   x_{k+1} = x_k - lambda_k theta_k + lambda_k z_k,
// x_0 = 0, lambda_k = (k+1)^{-exponent}. Returns theta_K = prox(x_K).
// The returned iterate is the prox output, which may sit marginally outside
// the box; its residual is evaluated at the clamped point when the excursion
// exceeds 1e-12 (flagged in the result).
inline SolverResult stotos(const CompositeObjective& objective,
                           const SolverConfig& config) {
  objective.validate();
  config.validate();
  if (!(config.step > 0.0))
    throw std::invalid_argument("stotos: step must be positive");

  Rng rng(config.seed);
  const double rho = config.step;
  const double n = static_cast<double>(objective.n);
  Vec x = Vec::Zero(objective.dim);
  Vec theta(objective.dim), z(objective.dim);
  for (long k = 0; k < config.iterations; ++k) {
    const std::size_t ik = rng.uniform_index(objective.n);
    theta = objective.prox_reg(x, rho);
    z = objective.project(2.0 * theta - x - rho * n * objective.point_grad(theta, ik));
    if (!z.allFinite())
      throw SolverDivergenceError(
          "stotos: nonfinite iterate at iteration " + std::to_string(k), k);
    const double lambda = std::pow(static_cast<double>(k + 1),
                                   -config.relaxation_exponent);
    x += lambda * (z - theta);
  }

  SolverResult result;
  result.theta = objective.prox_reg(x, rho);
  result.z_final = z;
  result.iterations_run = config.iterations;

  Vec res_point = result.theta;
  if (std::isfinite(objective.box_radius)) {
    const double excess =
        res_point.cwiseAbs().maxCoeff() - objective.box_radius;
    if (excess > 1e-12) {
      res_point = proj_box(res_point, objective.box_radius);
      result.residual_used_clamp = true;
    }
  }
  result.stationarity_residual = stationarity_residual(objective, res_point);
  return result;
}

}  // namespace qop

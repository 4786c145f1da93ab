#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "qop/errors.hpp"
#include "qop/mechanisms.hpp"
#include "qop/nelder_mead.hpp"
#include "qop/rmt.hpp"

namespace qop {

// Inputs of the empirical excess-risk bounds. dist_sq carries
// ||theta_ex - theta_*||^2 for the quadratic bound and ||theta_ex||^2 for the
// linear one.
struct BoundInputs {
  double L = 1.0;
  int d = 1;
  int n = 1;
  int hess_rank = 1;
  double G = 0.0;
  double tau = 0.0;
  double eta = 0.0;
  double dist_sq = 0.0;
  PrivacyBudget budget;

  void validate() const {
    budget.validate();
    if (!(L >= 0.0 && G >= 0.0 && tau >= 0.0 && eta >= 0.0 && dist_sq >= 0.0))
      throw std::invalid_argument("BoundInputs: entries must be nonnegative");
    if (d < 1 || n < 1 || hess_rank < 0)
      throw std::invalid_argument("BoundInputs: bad dimensions");
  }
};

// Free parameters of the quadratic bound: the budget split and the hidden
// dimension, relaxed to a real m > d since the constants are smooth in m.
struct FreeParams {
  BudgetSplit split;
  double m = 0.0;
};

// Risk-bound value given already-calibrated noise scales. The exact path
// (tau = eta = 0 with the whole budget on the curvature term) uses the
// sharper mu sigma^2 / 2 * dist_sq form; the general path uses
//   n d L sigma~^2 / 2 + G sqrt(d) sigma~ + tau + mu sigma^2 (dist_sq + eta^2).
// The overlapping tau = eta = 0 case of the two displays differs by a factor
// 2; each path keeps its own form.
inline double qop_bound_value(double mu, double sigma2, double sigma_tilde,
                              double tau, double eta, const BoundInputs& in,
                              bool exact_path) {
  if (exact_path) return 0.5 * mu * sigma2 * in.dist_sq;
  const double nd = static_cast<double>(in.n) * static_cast<double>(in.d);
  return 0.5 * nd * in.L * sigma_tilde * sigma_tilde +
         in.G * std::sqrt(static_cast<double>(in.d)) * sigma_tilde + tau +
         mu * sigma2 * (in.dist_sq + eta * eta);
}

// Evaluates the quadratic-mechanism bound at the given free parameters.
// Infeasible parameters (failed gamma inversion, eps2 = 0 with tau or eta
// positive, infinite beta on the release path) yield +infinity so the
// optimizer can treat them as out-of-domain.
inline double eval_qop_bound(const BoundInputs& inputs,
                             const FreeParams& params) {
  inputs.validate();
  if (!(params.m > inputs.d))
    return std::numeric_limits<double>::infinity();
  try {
    const RmtConstants constants =
        compute_constants(inputs.d, params.m, params.split.deltas);
    const QopCalibration calib =
        calibrate_qop(ProblemConstants{inputs.L, inputs.hess_rank},
                      params.split, constants, inputs.tau, inputs.eta);
    const bool exact =
        inputs.tau == 0.0 && inputs.eta == 0.0 && params.split.eps2 == 0.0;
    const double value =
        qop_bound_value(constants.mu, calib.sigma2, calib.sigma_tilde,
                        inputs.tau, inputs.eta, inputs, exact);
    return std::isfinite(value) ? value
                                : std::numeric_limits<double>::infinity();
  } catch (const InfeasibleError&) {
    return std::numeric_limits<double>::infinity();
  } catch (const std::domain_error&) {
    return std::numeric_limits<double>::infinity();
  } catch (const std::invalid_argument&) {
    return std::numeric_limits<double>::infinity();
  }
}

// Linear-mechanism bound 2 sigma^2 d / Delta + Delta dist_sq / 2 at equality
// calibration.
inline double eval_lop_bound(const BoundInputs& inputs, double zeta) {
  inputs.validate();
  const LopCalibration calib =
      calibrate_lop(ProblemConstants{inputs.L, inputs.hess_rank}, zeta,
                    inputs.budget);
  return 2.0 * calib.sigma2 * inputs.d / calib.Delta +
         0.5 * calib.Delta * inputs.dist_sq;
}

struct OptimizeBoundResult {
  FreeParams params;
  double bound = std::numeric_limits<double>::infinity();
  int restarts_used = 0;  // restarts that reached a feasible value
};

namespace detail {

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline double logit(double y) { return std::log(y / (1.0 - y)); }

// Unconstrained coordinates -> feasible parameters, bijective onto the open
// feasible set. Exact path (tau = eta = 0): vars (v, w) with
//   delta1 = delta sigmoid(v), delta3 = delta - delta1, eps1 = eps,
//   m = d + 1e-3 + exp(w).
// General path: vars (u, l1, l2, l3, w); eps1 = eps sigmoid(u) and the delta
// mass split by a softmax over logits (l1, l2, l3, 0).
inline FreeParams params_from_vars(const BoundInputs& in, bool exact,
                                   const Vec& v) {
  const double eps = in.budget.epsilon;
  const double delta = in.budget.delta;
  FreeParams out;
  if (exact) {
    const double d1 = delta * sigmoid(v(0));
    DeltaSplit ds{d1, 0.0, delta - d1, 0.0};
    out.split = BudgetSplit::make(in.budget, eps, 0.0, ds);
    out.m = in.d + 1e-3 + std::exp(v(1));
  } else {
    const double eps1 = eps * sigmoid(v(0));
    const double z1 = std::exp(v(1)), z2 = std::exp(v(2)), z3 = std::exp(v(3));
    const double zs = z1 + z2 + z3 + 1.0;
    const double d1 = delta * z1 / zs;
    const double d2 = delta * z2 / zs;
    const double d3 = delta * z3 / zs;
    DeltaSplit ds{d1, d2, d3, delta - d1 - d2 - d3};
    out.split = BudgetSplit::make(in.budget, eps1, eps - eps1, ds);
    out.m = in.d + 1e-3 + std::exp(v(4));
  }
  return out;
}

inline Vec vars_from_params(const BoundInputs& in, bool exact,
                            const FreeParams& p) {
  const double delta = in.budget.delta;
  if (exact) {
    Vec v(2);
    v(0) = logit(p.split.deltas.delta1 / delta);
    v(1) = std::log(p.m - in.d - 1e-3);
    return v;
  }
  Vec v(5);
  v(0) = logit(p.split.eps1 / in.budget.epsilon);
  const double z4 = p.split.deltas.delta4 / delta;
  v(1) = std::log(p.split.deltas.delta1 / delta) - std::log(z4);
  v(2) = std::log(p.split.deltas.delta2 / delta) - std::log(z4);
  v(3) = std::log(p.split.deltas.delta3 / delta) - std::log(z4);
  v(4) = std::log(p.m - in.d - 1e-3);
  return v;
}

// Eight deterministic restart centers spanning the corner regimes: delta mass
// on delta1 vs delta3, small vs large hidden dimension, and (inexact path)
// curvature-heavy vs release-heavy epsilon splits.
inline std::vector<Vec> restart_points(const BoundInputs& in, bool exact) {
  const double w_small = std::log(0.2 * in.d + 0.5);
  const double w_large = std::log(8.0 * in.d);
  std::vector<Vec> pts;
  if (exact) {
    for (double v0 : {-3.0, -1.0, 1.0, 3.0})
      for (double w : {w_small, w_large}) {
        Vec v(2);
        v << v0, w;
        pts.push_back(v);
      }
    return pts;
  }
  for (double u : {-1.5, 1.5})
    for (double l : {-2.0, 2.0})
      for (double w : {w_small, w_large}) {
        Vec v(5);
        // l > 0 loads delta1/delta3 against the release deltas and vice versa
        v << u, l, -l, l, w;
        pts.push_back(v);
      }
  return pts;
}

}  // namespace detail

// Minimizes the quadratic-mechanism bound over the free parameters by
// restarted Nelder-Mead. The exact path (tau = eta = 0) fixes
// eps2 = delta2 = delta4 = 0, collapsing the search to (delta1, delta3, m).
inline OptimizeBoundResult optimize_qop_bound(const BoundInputs& inputs) {
  inputs.validate();
  const bool exact = inputs.tau == 0.0 && inputs.eta == 0.0;
  const auto objective = [&](const Vec& v) -> double {
    try {
      return eval_qop_bound(inputs, detail::params_from_vars(inputs, exact, v));
    } catch (const std::exception&) {
      // coordinates far enough out to overflow the reparameterization
      return std::numeric_limits<double>::infinity();
    }
  };

  OptimizeBoundResult best;
  Vec best_vars;
  for (const Vec& start : detail::restart_points(inputs, exact)) {
    NelderMeadOptions opt;
    opt.max_iters = 6000;
    const NelderMeadResult r = nelder_mead(objective, start, opt);
    if (std::isfinite(r.value)) {
      ++best.restarts_used;
      if (r.value < best.bound) {
        best.bound = r.value;
        best_vars = r.x;
      }
    }
  }
  if (best.restarts_used == 0)
    throw InfeasibleError(
        "optimize_qop_bound: every restart was infeasible for this budget");
  best.params = detail::params_from_vars(inputs, exact, best_vars);
  return best;
}

}  // namespace qop

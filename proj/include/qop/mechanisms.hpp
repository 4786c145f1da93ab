#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "qop/erm.hpp"
#include "qop/errors.hpp"
#include "qop/rmt.hpp"
#include "qop/rng.hpp"
#include "qop/solver.hpp"

namespace qop {

struct PrivacyBudget {
  double epsilon = 0.0;
  double delta = 0.0;

  void validate() const {
    if (!(epsilon > 0.0))
      throw std::invalid_argument("PrivacyBudget: requires epsilon > 0");
    if (!(delta > 0.0 && delta < 1.0))
      throw std::invalid_argument("PrivacyBudget: requires delta in (0, 1)");
  }
};

// Budget split epsilon = eps1 + eps2 (curvature / Gaussian release) and
// delta = delta1 + delta2 + delta3 + delta4.
struct BudgetSplit {
  PrivacyBudget budget;
  double eps1 = 0.0;
  double eps2 = 0.0;
  DeltaSplit deltas;

  static BudgetSplit make(const PrivacyBudget& budget, double eps1, double eps2,
                          const DeltaSplit& deltas) {
    budget.validate();
    deltas.validate();
    if (!(eps1 >= 0.0 && eps2 >= 0.0))
      throw std::invalid_argument("BudgetSplit: eps components must be >= 0");
    const double eps_tol = 1e-9 * std::max(1.0, budget.epsilon);
    if (std::fabs(eps1 + eps2 - budget.epsilon) > eps_tol)
      throw std::invalid_argument("BudgetSplit: eps1 + eps2 must equal epsilon");
    const double del_tol = 1e-9 * std::max(1.0, budget.delta);
    if (std::fabs(deltas.sum() - budget.delta) > del_tol)
      throw std::invalid_argument(
          "BudgetSplit: delta components must sum to delta");
    return BudgetSplit{budget, eps1, eps2, deltas};
  }
};

struct ProblemConstants {
  double L = 0.0;     // per-point smoothness
  int hess_rank = 1;  // maximal per-point Hessian rank
};

// Curvature-noise calibration for the quadratic mechanism:
//   sigma^2 = max( (2L/eps1)(f(2) + 2(2 rho + 2)/alpha), 2L/alpha1 )
//   sigma~  = (sqrt(2 tau / (alpha sigma^2)) + beta eta / alpha)
//             * (2/eps2) sqrt(2 ln(1.25/delta2))        (eps2 > 0 path)
// both at equality, the minimal certified noise.
struct QopCalibration {
  double sigma2 = 0.0;
  double sigma_tilde = 0.0;  // 0 on the exact-solve path
  RmtConstants constants;
  double tau = 0.0;
  double eta = 0.0;
  BudgetSplit split;
};

// Linear-mechanism calibration: sigma^2 = zeta^2 (8 ln(2/delta) + 4 eps)/eps^2
// and Delta = 2L/eps, at equality.
struct LopCalibration {
  double sigma2 = 0.0;
  double Delta = 0.0;
  double zeta_used = 0.0;
  PrivacyBudget budget;
};

inline QopCalibration calibrate_qop(const ProblemConstants& problem,
                                    const BudgetSplit& split,
                                    const RmtConstants& constants, double tau,
                                    double eta) {
  if (!(problem.L >= 0.0))
    throw std::invalid_argument("calibrate_qop: requires L >= 0");
  if (problem.hess_rank < 0)
    throw std::invalid_argument("calibrate_qop: requires hess_rank >= 0");
  if (!(tau >= 0.0 && eta >= 0.0))
    throw std::invalid_argument("calibrate_qop: requires tau, eta >= 0");
  if (!(split.eps1 > 0.0))
    throw InfeasibleError("calibrate_qop: eps1 must be positive");

  const double rho = problem.hess_rank;
  const double sigma2 =
      std::max(2.0 * problem.L / split.eps1 *
                   (constants.f(2.0) + 2.0 * (2.0 * rho + 2.0) / constants.alpha),
               2.0 * problem.L / constants.alpha1);

  double sigma_tilde = 0.0;
  if (split.eps2 == 0.0) {
    if (tau != 0.0 || eta != 0.0)
      throw InfeasibleError("calibrate_qop: approximate solve requires eps2 > 0");
  } else {
    if (!std::isfinite(constants.beta))
      throw InfeasibleError(
          "calibrate_qop: delta4 must be positive for the Gaussian release");
    if (!(split.deltas.delta2 > 0.0))
      throw InfeasibleError(
          "calibrate_qop: delta2 must be positive for the Gaussian release");
    if (tau > 0.0 && !(sigma2 > 0.0))
      throw InfeasibleError(
          "calibrate_qop: tau > 0 needs positive curvature noise");
    const double sens = (tau > 0.0 ? std::sqrt(2.0 * tau / (constants.alpha * sigma2)) : 0.0) +
                        constants.beta * eta / constants.alpha;
    sigma_tilde = sens * (2.0 / split.eps2) *
                  std::sqrt(2.0 * std::log(1.25 / split.deltas.delta2));
  }
  return QopCalibration{sigma2, sigma_tilde, constants, tau, eta, split};
}

inline LopCalibration calibrate_lop(const ProblemConstants& problem, double zeta,
                                    const PrivacyBudget& budget) {
  budget.validate();
  if (!(zeta > 0.0))
    throw std::invalid_argument("calibrate_lop: requires zeta > 0");
  if (!(problem.L >= 0.0))
    throw std::invalid_argument("calibrate_lop: requires L >= 0");
  const double eps = budget.epsilon;
  const double sigma2 =
      zeta * zeta * (8.0 * std::log(2.0 / budget.delta) + 4.0 * eps) / (eps * eps);
  return LopCalibration{sigma2, 2.0 * problem.L / eps, zeta, budget};
}

// One mechanism execution. Only the released parameter vector and
// noise-scale/bookkeeping diagnostics appear here; the noise realizations
// (W, b, a) and the anchor never leave the mechanism.
struct MechanismOutput {
  Vec theta_final;
  std::string mechanism;
  double empirical_risk = 0.0;
  double solver_residual = 0.0;
  double wall_time_seconds = 0.0;
  std::uint64_t seed = 0;
  double sigma2 = 0.0;
  double sigma_tilde = std::numeric_limits<double>::quiet_NaN();  // quadratic
  double Delta = std::numeric_limits<double>::quiet_NaN();        // linear
};

inline nlohmann::json mechanism_output_to_json(const MechanismOutput& out) {
  nlohmann::json diag;
  diag["empirical_risk"] = out.empirical_risk;
  diag["solver_residual"] = out.solver_residual;
  diag["wall_time_seconds"] = out.wall_time_seconds;
  diag["seed"] = out.seed;
  diag["sigma2"] = out.sigma2;
  if (!std::isnan(out.sigma_tilde)) diag["sigma_tilde"] = out.sigma_tilde;
  if (!std::isnan(out.Delta)) diag["Delta"] = out.Delta;
  nlohmann::json j;
  j["mechanism"] = out.mechanism;
  j["theta_final"] = std::vector<double>(
      out.theta_final.data(), out.theta_final.data() + out.theta_final.size());
  j["diagnostics"] = std::move(diag);
  return j;
}

namespace detail {

inline SymMatrix data_gram(const LassoProblem& problem) {
  Mat h = Mat::Zero(problem.dim(), problem.dim());
  for (const auto& z : problem.data().points())
    h.selfadjointView<Eigen::Upper>().rankUpdate(z.x, 1.0);
  return SymMatrix::from_upper(h);
}

}  // namespace detail

// Step size 1/Lip(n grad l~), with the Lipschitz constant taken from the full
// smooth Hessian: lambda_max(sum_i x_i x_i^T + sigma^2 W) for the quadratic
// mechanism, lambda_max(sum_i x_i x_i^T) + Delta for the linear one. Exact for
// quadratic losses and sharper than the generic n L bound.
inline double qop_lipschitz(const LassoProblem& problem, double sigma2,
                            const SymMatrix& w) {
  const Mat h = detail::data_gram(problem).mat() + sigma2 * w.mat();
  return eig_extremes(SymMatrix::from_upper(h)).second;
}

inline double lop_lipschitz(const LassoProblem& problem, double Delta) {
  return eig_extremes(detail::data_gram(problem)).second + Delta;
}

// Quadratic objective perturbation: draw W, solve
//   min over theta in C of  J(theta) + sigma^2/2 (theta - anchor)^T W (theta - anchor)
// with the splitting solver, then add the Gaussian release b ~ N(0, sigma~^2 I)
// (skipped when sigma~ = 0). Noise draw order: W first (column-major G fill),
// then b.
inline MechanismOutput run_qop(const LassoProblem& problem, const Anchor& anchor,
                               const QopCalibration& calib,
                               const WishartSpec& spec,
                               const SolverConfig& solver_cfg, Rng& rng) {
  spec.validate();
  if (spec.d != problem.dim())
    throw std::invalid_argument("run_qop: Wishart dimension mismatch");
  if (anchor.theta_tilde_star.size() != problem.dim())
    throw std::invalid_argument("run_qop: anchor dimension mismatch");

  const SymMatrix w = sample_wishart(spec, rng);

  CompositeObjective obj;
  obj.dim = problem.dim();
  obj.n = problem.n();
  obj.l1_weight = problem.omega();
  obj.box_radius = problem.kappa();
  const double share = calib.sigma2 / static_cast<double>(problem.n());
  const Vec center = anchor.theta_tilde_star;
  obj.point_grad = [&problem, &w, share, &center](const Vec& theta,
                                                  std::size_t i) -> Vec {
    return loss_grad(problem, theta, i) + share * (w.mat() * (theta - center));
  };

  SolverConfig cfg = solver_cfg;
  if (!(cfg.step > 0.0)) cfg.step = 1.0 / qop_lipschitz(problem, calib.sigma2, w);

  const auto t0 = std::chrono::steady_clock::now();
  const SolverResult solved = stotos(obj, cfg);
  const auto t1 = std::chrono::steady_clock::now();

  Vec theta = solved.theta;
  if (calib.sigma_tilde > 0.0)
    for (Eigen::Index j = 0; j < theta.size(); ++j)
      theta(j) += calib.sigma_tilde * rng.normal();

  MechanismOutput out;
  out.theta_final = theta;
  out.mechanism = "qop";
  out.empirical_risk = empirical_objective(problem, theta);
  out.solver_residual = solved.stationarity_residual;
  out.wall_time_seconds = std::chrono::duration<double>(t1 - t0).count();
  out.seed = rng.seed();
  out.sigma2 = calib.sigma2;
  out.sigma_tilde = calib.sigma_tilde;
  return out;
}

// Linear objective perturbation: draw a ~ N(0, sigma^2 I) and solve
//   min over theta in C of  J(theta) + Delta/2 ||theta||^2 + a^T theta,
// releasing the solve directly. With a clip threshold the per-point data
// gradient is norm-clipped before the noise terms are added.
inline MechanismOutput run_lop(const LassoProblem& problem,
                               const LopCalibration& calib,
                               const SolverConfig& solver_cfg, Rng& rng,
                               std::optional<double> clip = std::nullopt) {
  if (clip && !(*clip > 0.0))
    throw std::invalid_argument("run_lop: clip must be positive");

  const double sigma = std::sqrt(calib.sigma2);
  Vec a(problem.dim());
  for (Eigen::Index j = 0; j < a.size(); ++j) a(j) = sigma * rng.normal();

  CompositeObjective obj;
  obj.dim = problem.dim();
  obj.n = problem.n();
  obj.l1_weight = problem.omega();
  obj.box_radius = problem.kappa();
  const double inv_n = 1.0 / static_cast<double>(problem.n());
  const double Delta = calib.Delta;
  if (clip) {
    const double c = *clip;
    obj.point_grad = [&problem, &a, Delta, inv_n, c](const Vec& theta,
                                                     std::size_t i) -> Vec {
      return clipped_loss_grad(problem, theta, i, c) +
             inv_n * (a + Delta * theta);
    };
  } else {
    obj.point_grad = [&problem, &a, Delta, inv_n](const Vec& theta,
                                                  std::size_t i) -> Vec {
      return loss_grad(problem, theta, i) + inv_n * (a + Delta * theta);
    };
  }

  SolverConfig cfg = solver_cfg;
  if (!(cfg.step > 0.0)) cfg.step = 1.0 / lop_lipschitz(problem, Delta);

  const auto t0 = std::chrono::steady_clock::now();
  const SolverResult solved = stotos(obj, cfg);
  const auto t1 = std::chrono::steady_clock::now();

  MechanismOutput out;
  out.theta_final = solved.theta;
  out.mechanism = clip ? "lop_clip" : "lop";
  out.empirical_risk = empirical_objective(problem, solved.theta);
  out.solver_residual = solved.stationarity_residual;
  out.wall_time_seconds = std::chrono::duration<double>(t1 - t0).count();
  out.seed = rng.seed();
  out.sigma2 = calib.sigma2;
  out.Delta = calib.Delta;
  return out;
}

}  // namespace qop

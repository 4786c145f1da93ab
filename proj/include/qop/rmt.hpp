#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include "qop/errors.hpp"
#include "qop/rng.hpp"
#include "qop/special.hpp"
#include "qop/sym_matrix.hpp"

namespace qop {

// Wishart(d, m): W = G G^T for G in R^{d x m} with i.i.d. standard normal
// entries. Sampling works for any m >= 1; the spectral constants below
// additionally require m > d.
struct WishartSpec {
  int d = 0;  // ambient dimension
  int m = 0;  // hidden dimension

  void validate() const {
    if (d < 1 || m < 1)
      throw std::invalid_argument("WishartSpec: d and m must be >= 1");
  }
};

// Failure-probability split delta = delta1 + delta2 + delta3 + delta4.
//   delta3 -- smallest-eigenvalue floor, delta1 -- boundary layer,
//   delta4 -- largest-eigenvalue cap, delta2 -- Gaussian release.
struct DeltaSplit {
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;
  double delta4 = 0.0;

  double sum() const { return delta1 + delta2 + delta3 + delta4; }

  void validate() const {
    for (double v : {delta1, delta2, delta3, delta4}) {
      if (!(v >= 0.0 && v <= 1.0))
        throw std::invalid_argument(
            "DeltaSplit: each component must lie in [0, 1]");
    }
    if (!(sum() <= 1.0 + 1e-12))
      throw std::invalid_argument("DeltaSplit: components must sum to <= 1");
  }
};

// Certified spectral constants of a Wishart ensemble:
//   P(lambda_min >= alpha)                          >= 1 - delta3
//   P(alpha <= lambda_min <= alpha + alpha1 | ...)  <= delta1
//   P(lambda_max <= beta | lambda_min >= alpha)     >= 1 - delta4
//   E[W] <= mu I, and the density ratio bound with slope f(rank).
// beta is +infinity when delta4 = 0; consumers must branch on it.
// The hidden dimension is kept real-valued: the constants are smooth in m,
// which the utility-bound optimizer exploits.
struct RmtConstants {
  double alpha = 0.0;
  double alpha1 = 0.0;
  double beta = std::numeric_limits<double>::infinity();
  double f_coeff = 0.0;  // f(rank) = f_coeff * rank
  double mu = 0.0;
  double big_d = 0.0;      // density-bound constant D
  double log_big_d = 0.0;  // log D, safe at large m
  double p = 0.0;          // (m - d + 1) / 2
  int d = 0;
  double m = 0.0;
  DeltaSplit split;

  double f(double rank) const { return f_coeff * rank; }
};

inline SymMatrix sample_wishart(const WishartSpec& spec, Rng& rng) {
  spec.validate();
  Mat g(spec.d, spec.m);
  // Column-major fill fixes the draw order: G(0,0), G(1,0), ..., G(d-1,0),
  // G(0,1), ... Changing it would silently change every seeded experiment.
  for (int j = 0; j < spec.m; ++j)
    for (int i = 0; i < spec.d; ++i) g(i, j) = rng.normal();
  return SymMatrix::from_upper(g * g.transpose());
}

// log q(W) of the Wishart density
//   q(W) = det(W)^{(m-d-1)/2} exp(-tr(W)/2) / (2^{md/2} Gamma_d(m/2)),
// evaluated fully in log space.
inline double log_wishart_density(const SymMatrix& w, const WishartSpec& spec) {
  spec.validate();
  if (w.dim() != spec.d)
    throw std::invalid_argument("log_wishart_density: dimension mismatch");
  if (spec.m <= spec.d)
    throw std::domain_error("log_wishart_density: requires m > d");
  Eigen::LLT<Mat> llt(w.mat());
  if (llt.info() != Eigen::Success)
    throw std::domain_error("log_wishart_density: W must be positive definite");
  const double log_det =
      2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double m = spec.m;
  const double d = spec.d;
  return -0.5 * m * d * std::log(2.0) - log_multigamma(spec.d, 0.5 * m) +
         0.5 * (m - d - 1.0) * log_det - 0.5 * w.mat().trace();
}

// Smallest and largest eigenvalue via a full symmetric eigendecomposition.
inline std::pair<double, double> eig_extremes(const SymMatrix& w) {
  Eigen::SelfAdjointEigenSolver<Mat> es(w.mat(), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("eig_extremes: eigensolver failed");
  const auto& ev = es.eigenvalues();
  return {ev(0), ev(ev.size() - 1)};
}

// Tail bound on the largest Wishart eigenvalue:
//   P(lambda_max >= t) <= 2 exp(-(sqrt(t) - sqrt(m) - sqrt(d))^2 / 2)
// for t >= (sqrt(m) + sqrt(d))^2, clipped to 1 elsewhere.
inline double largest_eig_tail(double t, const WishartSpec& spec) {
  spec.validate();
  if (!(t >= 0.0)) throw std::domain_error("largest_eig_tail: requires t >= 0");
  const double edge = std::sqrt(static_cast<double>(spec.m)) +
                      std::sqrt(static_cast<double>(spec.d));
  if (t < edge * edge) return 1.0;
  const double s = std::sqrt(t) - edge;
  return std::min(1.0, 2.0 * std::exp(-0.5 * s * s));
}

// Certified constants at equality in the defining inequalities:
//   alpha  = 2 gamma^{-1}(delta3 / D, p)
//   alpha1 = 2 gamma^{-1}(delta1 (1 - delta3) / D + gamma(alpha/2, p), p) - alpha
//   beta   = (sqrt(2 log(2 / (delta4 (1 - delta3)))) + sqrt(m) + sqrt(d))^2
//   f(rank) = ((p - 1)/alpha + 1/2) rank,   mu = m,   p = (m - d + 1)/2,
// with D the gamma-ratio constant of the smallest-eigenvalue density bound.
// Every gamma-ratio is assembled from log-gamma sums: Gamma((m+1)/2) alone
// overflows doubles near m ~ 340.
inline RmtConstants compute_constants(int d, double m, const DeltaSplit& split) {
  split.validate();
  if (d < 1) throw std::invalid_argument("compute_constants: requires d >= 1");
  if (!(m > d)) throw InfeasibleError("compute_constants: requires m > d");
  if (!(split.delta3 > 0.0))
    throw InfeasibleError(
        "compute_constants: delta3 must be positive (alpha inversion)");
  if (!(split.delta1 > 0.0))
    throw InfeasibleError(
        "compute_constants: delta1 must be positive (alpha1 inversion)");

  const double p = 0.5 * (m - d + 1.0);
  const double log_big_d = std::log(static_cast<double>(d)) + log_gamma(1.5) +
                           log_gamma(0.5 * (m + 1.0)) -
                           log_gamma(0.5 * d + 1.0) -
                           log_gamma(0.5 * (m - d + 1.0)) -
                           log_gamma(0.5 * (m - d + 2.0));
  const double lgam_p = log_gamma(p);

  const double target3 = std::log(split.delta3) - log_big_d;
  if (!(target3 < lgam_p))
    throw InfeasibleError(
        "compute_constants: delta3 / D >= Gamma(p); split infeasible in delta3");
  const double alpha = 2.0 * inverse_lower_incomplete_gamma_log(target3, p);
  if (!(alpha > 0.0))
    throw InfeasibleError("compute_constants: alpha underflowed to zero");

  const double target1 =
      log_add_exp(std::log(split.delta1) + std::log1p(-split.delta3) - log_big_d,
                  log_lower_incomplete_gamma(0.5 * alpha, p));
  if (!(target1 < lgam_p))
    throw InfeasibleError(
        "compute_constants: delta1 inversion argument >= Gamma(p); split "
        "infeasible in delta1");
  const double alpha1 =
      2.0 * inverse_lower_incomplete_gamma_log(target1, p) - alpha;
  if (!(alpha1 > 0.0))
    throw InfeasibleError("compute_constants: alpha1 collapsed to zero");

  double beta = std::numeric_limits<double>::infinity();
  if (split.delta4 > 0.0) {
    const double logarg =
        std::log(2.0) - std::log(split.delta4) - std::log1p(-split.delta3);
    const double root = std::sqrt(2.0 * logarg) + std::sqrt(m) +
                        std::sqrt(static_cast<double>(d));
    beta = root * root;
  }

  RmtConstants c;
  c.alpha = alpha;
  c.alpha1 = alpha1;
  c.beta = beta;
  c.f_coeff = (p - 1.0) / alpha + 0.5;
  c.mu = m;
  c.big_d = std::exp(log_big_d);
  c.log_big_d = log_big_d;
  c.p = p;
  c.d = d;
  c.m = m;
  c.split = split;
  return c;
}

inline RmtConstants compute_constants(const WishartSpec& spec,
                                      const DeltaSplit& split) {
  spec.validate();
  return compute_constants(spec.d, static_cast<double>(spec.m), split);
}

}  // namespace qop

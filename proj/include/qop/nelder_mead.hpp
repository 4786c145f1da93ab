#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "qop/sym_matrix.hpp"

namespace qop {

struct NelderMeadOptions {
  int max_iters = 4000;
  double f_tol = 1e-12;      // relative spread of simplex values
  double x_tol = 1e-11;      // simplex diameter
  double init_step = 0.6;    // offset of the initial simplex vertices
};

struct NelderMeadResult {
  Vec x;
  double value = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

// Derivative-free simplex minimization with the standard coefficients
// (reflection 1, expansion 2, contraction 1/2, shrink 1/2). Infinite
// objective values are legal and act as infeasibility sentinels.
inline NelderMeadResult nelder_mead(
    const std::function<double(const Vec&)>& f, const Vec& x0,
    const NelderMeadOptions& opt = NelderMeadOptions{}) {
  const Eigen::Index n = x0.size();
  std::vector<Vec> xs(n + 1, x0);
  for (Eigen::Index i = 0; i < n; ++i) xs[i + 1](i) += opt.init_step;
  std::vector<double> fs(n + 1);
  for (std::size_t i = 0; i < xs.size(); ++i) fs[i] = f(xs[i]);

  std::vector<std::size_t> order(n + 1);
  NelderMeadResult result;
  int it = 0;
  for (; it < opt.max_iters; ++it) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second_worst = order[n > 0 ? n - 1 : 0];

    if (std::isfinite(fs[best])) {
      const double spread = fs[worst] - fs[best];
      double diam = 0.0;
      for (std::size_t i = 0; i <= static_cast<std::size_t>(n); ++i)
        diam = std::max(diam, (xs[i] - xs[best]).lpNorm<Eigen::Infinity>());
      if ((std::isfinite(spread) &&
           spread <= opt.f_tol * (std::fabs(fs[best]) + 1e-30)) ||
          diam <= opt.x_tol) {
        result.converged = true;
        break;
      }
    }

    Vec centroid = Vec::Zero(n);
    for (std::size_t i = 0; i <= static_cast<std::size_t>(n); ++i)
      if (i != worst) centroid += xs[i];
    centroid /= static_cast<double>(n);

    const Vec xr = centroid + (centroid - xs[worst]);
    const double fr = f(xr);
    if (fr < fs[best]) {
      const Vec xe = centroid + 2.0 * (centroid - xs[worst]);
      const double fe = f(xe);
      if (fe < fr) {
        xs[worst] = xe;
        fs[worst] = fe;
      } else {
        xs[worst] = xr;
        fs[worst] = fr;
      }
    } else if (fr < fs[second_worst]) {
      xs[worst] = xr;
      fs[worst] = fr;
    } else {
      const bool outside = fr < fs[worst];
      const Vec xc = outside ? centroid + 0.5 * (xr - centroid)
                             : centroid + 0.5 * (xs[worst] - centroid);
      const double fc = f(xc);
      if (fc < std::min(fr, fs[worst])) {
        xs[worst] = xc;
        fs[worst] = fc;
      } else {
        for (std::size_t i = 0; i <= static_cast<std::size_t>(n); ++i) {
          if (i == best) continue;
          xs[i] = xs[best] + 0.5 * (xs[i] - xs[best]);
          fs[i] = f(xs[i]);
        }
      }
    }
  }

  const std::size_t best = static_cast<std::size_t>(
      std::min_element(fs.begin(), fs.end()) - fs.begin());
  result.x = xs[best];
  result.value = fs[best];
  result.iterations = it;
  return result;
}

}  // namespace qop

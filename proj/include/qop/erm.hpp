#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "qop/rng.hpp"
#include "qop/sym_matrix.hpp"

namespace qop {

struct DataPoint {
  Vec x;
  double y = 0.0;
};

// Immutable dataset with features confined to [-xi, xi]^d.
class Dataset {
 public:
  Dataset(std::vector<DataPoint> points, double xi)
      : points_(std::move(points)), xi_(xi) {
    if (points_.empty())
      throw std::invalid_argument("Dataset: needs at least one point");
    if (!(xi_ > 0.0)) throw std::invalid_argument("Dataset: requires xi > 0");
    d_ = points_.front().x.size();
    if (d_ < 1) throw std::invalid_argument("Dataset: dimension must be >= 1");
    max_abs_y_ = 0.0;
    for (const auto& p : points_) {
      if (p.x.size() != d_)
        throw std::invalid_argument("Dataset: inconsistent dimensions");
      if (!p.x.allFinite() || !std::isfinite(p.y))
        throw std::invalid_argument("Dataset: entries must be finite");
      if (p.x.cwiseAbs().maxCoeff() > xi_)
        throw std::invalid_argument("Dataset: a feature exceeds the xi bound");
      max_abs_y_ = std::max(max_abs_y_, std::fabs(p.y));
    }
  }

  Eigen::Index dim() const { return d_; }
  std::size_t size() const { return points_.size(); }
  double xi() const { return xi_; }
  double max_abs_y() const { return max_abs_y_; }

  const DataPoint& point(std::size_t i) const {
    if (i >= points_.size())
      throw std::out_of_range("Dataset: point index out of range");
    return points_[i];
  }

  const std::vector<DataPoint>& points() const { return points_; }

 private:
  std::vector<DataPoint> points_;
  double xi_;
  Eigen::Index d_;
  double max_abs_y_;
};

// Dataset-independent approximation of the common minimizer, together with
// its certified accuracy eta.
struct Anchor {
  Vec theta_tilde_star;
  double eta = 0.0;
};

// Least squares with an l1 penalty over the box [-kappa, kappa]^d:
//   sum_i (x_i^T theta - y_i)^2 / 2 + omega ||theta||_1.
// The derived constants follow the problem structure: each per-point Hessian
// x_i x_i^T has rank 1 and norm ||x_i||^2 <= d xi^2 = L; subgradients of the
// penalty are bounded by G = sqrt(d) omega; and over the box the data gradient
// is bounded by zeta = (diam(C) xi sqrt(d) + sup|y_i|) xi sqrt(d) with
// diam(C) = 2 kappa sqrt(d).
class LassoProblem {
 public:
  LassoProblem(Dataset data, double omega, double kappa)
      : data_(std::move(data)), omega_(omega), kappa_(kappa) {
    if (!(omega_ >= 0.0))
      throw std::invalid_argument("LassoProblem: requires omega >= 0");
    if (!(kappa_ > 0.0))
      throw std::invalid_argument("LassoProblem: requires kappa > 0");
    const double d = static_cast<double>(data_.dim());
    const double xi = data_.xi();
    l_ = d * xi * xi;
    g_ = std::sqrt(d) * omega_;
    const double diam = 2.0 * kappa_ * std::sqrt(d);
    zeta_ = (diam * xi * std::sqrt(d) + data_.max_abs_y()) * xi * std::sqrt(d);
  }

  const Dataset& data() const { return data_; }
  Eigen::Index dim() const { return data_.dim(); }
  std::size_t n() const { return data_.size(); }
  double omega() const { return omega_; }
  double kappa() const { return kappa_; }

  double L() const { return l_; }         // smoothness of each loss
  double G() const { return g_; }         // regularizer subgradient bound
  double zeta() const { return zeta_; }   // data gradient bound over the box
  int hess_rank() const { return 1; }     // rank of each per-point Hessian

 private:
  Dataset data_;
  double omega_;
  double kappa_;
  double l_;
  double g_;
  double zeta_;
};

struct GeneratedInstance {
  Dataset dataset;
  Vec theta_star;  // the common minimizer; used only by generators and tests
  Anchor anchor;
};

// Interpolation-regime generator: x_i standard normal rescaled into
// [-xi, xi]^d by a single global factor, theta_star standard normal,
// y_i = x_i^T theta_star (computed from the scaled features, so each
// per-point loss is exactly zero at theta_star), and the anchor
// theta_tilde_star = theta_star + anchor_noise_sd * N(0, I).
//
// Draw order: the n*d feature entries point by point, then theta_star, then
// the d anchor offsets.
inline GeneratedInstance generate_interpolation_dataset(int n, int d, double xi,
                                                        double anchor_noise_sd,
                                                        Rng& rng) {
  if (n < 1 || d < 1)
    throw std::invalid_argument(
        "generate_interpolation_dataset: requires n, d >= 1");
  if (!(xi > 0.0))
    throw std::invalid_argument("generate_interpolation_dataset: xi > 0");
  if (!(anchor_noise_sd >= 0.0))
    throw std::invalid_argument(
        "generate_interpolation_dataset: anchor_noise_sd >= 0");

  std::vector<Vec> xs(n, Vec(d));
  double max_abs = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) {
      xs[i](j) = rng.normal();
      max_abs = std::max(max_abs, std::fabs(xs[i](j)));
    }
  if (max_abs > 0.0) {
    const double scale = xi / max_abs;
    for (auto& x : xs)
      // clamp guards the one-ulp overshoot of scale * max_abs
      x = (x * scale).cwiseMin(xi).cwiseMax(-xi);
  }

  Vec theta_star(d);
  for (int j = 0; j < d; ++j) theta_star(j) = rng.normal();

  std::vector<DataPoint> points(n);
  for (int i = 0; i < n; ++i)
    points[i] = DataPoint{xs[i], xs[i].dot(theta_star)};

  Vec tilde = theta_star;
  for (int j = 0; j < d; ++j) tilde(j) += anchor_noise_sd * rng.normal();

  GeneratedInstance out{Dataset(std::move(points), xi), theta_star,
                        Anchor{tilde, (tilde - theta_star).norm()}};
  return out;
}

inline Vec loss_grad(const LassoProblem& problem, const Vec& theta,
                     std::size_t i) {
  if (theta.size() != problem.dim())
    throw std::invalid_argument("loss_grad: theta dimension mismatch");
  const DataPoint& z = problem.data().point(i);
  return (z.x.dot(theta) - z.y) * z.x;
}

inline Vec clipped_loss_grad(const LassoProblem& problem, const Vec& theta,
                             std::size_t i, double clip) {
  if (!(clip > 0.0))
    throw std::invalid_argument("clipped_loss_grad: requires clip > 0");
  Vec g = loss_grad(problem, theta, i);
  const double norm = g.norm();
  if (norm > clip) g *= clip / norm;
  return g;
}

// Full objective sum_i (x_i^T theta - y_i)^2 / 2 + omega ||theta||_1; this is
// the empirical risk reported by the benchmark harness.
inline double empirical_objective(const LassoProblem& problem,
                                  const Vec& theta) {
  if (theta.size() != problem.dim())
    throw std::invalid_argument("empirical_objective: dimension mismatch");
  double loss = 0.0;
  for (const auto& z : problem.data().points()) {
    const double r = z.x.dot(theta) - z.y;
    loss += 0.5 * r * r;
  }
  return loss + problem.omega() * theta.lpNorm<1>();
}

// --- serialization -----------------------------------------------------

inline nlohmann::json instance_to_json(const GeneratedInstance& inst) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : inst.dataset.points()) {
    nlohmann::json jp;
    jp["x"] = std::vector<double>(p.x.data(), p.x.data() + p.x.size());
    jp["y"] = p.y;
    points.push_back(std::move(jp));
  }
  nlohmann::json j;
  j["d"] = inst.dataset.dim();
  j["n"] = inst.dataset.size();
  j["xi"] = inst.dataset.xi();
  j["points"] = std::move(points);
  j["theta_star"] = std::vector<double>(
      inst.theta_star.data(), inst.theta_star.data() + inst.theta_star.size());
  j["theta_tilde_star"] = std::vector<double>(
      inst.anchor.theta_tilde_star.data(),
      inst.anchor.theta_tilde_star.data() + inst.anchor.theta_tilde_star.size());
  j["eta"] = inst.anchor.eta;
  return j;
}

inline GeneratedInstance instance_from_json(const nlohmann::json& j) {
  const int d = j.at("d").get<int>();
  const std::size_t n = j.at("n").get<std::size_t>();
  const double xi = j.at("xi").get<double>();
  std::vector<DataPoint> points;
  points.reserve(n);
  for (const auto& jp : j.at("points")) {
    const auto xv = jp.at("x").get<std::vector<double>>();
    if (static_cast<int>(xv.size()) != d)
      throw std::invalid_argument("instance_from_json: point dimension");
    points.push_back(
        DataPoint{Eigen::Map<const Vec>(xv.data(), d), jp.at("y").get<double>()});
  }
  if (points.size() != n)
    throw std::invalid_argument("instance_from_json: point count");
  const auto ts = j.at("theta_star").get<std::vector<double>>();
  const auto tts = j.at("theta_tilde_star").get<std::vector<double>>();
  if (static_cast<int>(ts.size()) != d || static_cast<int>(tts.size()) != d)
    throw std::invalid_argument("instance_from_json: parameter dimension");
  GeneratedInstance out{Dataset(std::move(points), xi),
                        Eigen::Map<const Vec>(ts.data(), d),
                        Anchor{Eigen::Map<const Vec>(tts.data(), d),
                               j.at("eta").get<double>()}};
  return out;
}

namespace detail {

inline void fnv1a_accumulate(std::uint64_t& h, const void* data,
                             std::size_t bytes) {
  const auto* b = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= b[i];
    h *= 1099511628211ULL;
  }
}

inline void fnv1a_accumulate(std::uint64_t& h, double v) {
  fnv1a_accumulate(h, &v, sizeof(v));
}

}  // namespace detail

// Content hash of a generated instance; the sweep harness uses it to certify
// that every mechanism in a paired comparison consumed the same dataset.
inline std::uint64_t instance_hash(const GeneratedInstance& inst) {
  std::uint64_t h = 1469598103934665603ULL;
  const std::uint64_t n = inst.dataset.size();
  const std::uint64_t d = inst.dataset.dim();
  detail::fnv1a_accumulate(h, &n, sizeof(n));
  detail::fnv1a_accumulate(h, &d, sizeof(d));
  detail::fnv1a_accumulate(h, inst.dataset.xi());
  for (const auto& p : inst.dataset.points()) {
    for (Eigen::Index j = 0; j < p.x.size(); ++j)
      detail::fnv1a_accumulate(h, p.x(j));
    detail::fnv1a_accumulate(h, p.y);
  }
  for (Eigen::Index j = 0; j < inst.theta_star.size(); ++j)
    detail::fnv1a_accumulate(h, inst.theta_star(j));
  for (Eigen::Index j = 0; j < inst.anchor.theta_tilde_star.size(); ++j)
    detail::fnv1a_accumulate(h, inst.anchor.theta_tilde_star(j));
  detail::fnv1a_accumulate(h, inst.anchor.eta);
  return h;
}

}  // namespace qop

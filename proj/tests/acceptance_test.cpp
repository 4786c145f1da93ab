// Acceptance suite: one test case per release criterion, each printing a
// single pass/fail line. Criteria marked "CLI" drive the installed binary;
// the rest call the library directly.

#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <tuple>

#include "qop/bounds.hpp"
#include "qop/harness.hpp"
#include "qop/property_checks.hpp"

using namespace qop;

namespace {

struct Stopwatch {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  }
};

void report(int criterion, bool pass, const std::string& detail) {
  std::ostringstream os;
  os << "[criterion " << criterion << "] " << (pass ? "PASS" : "FAIL") << " - "
     << detail;
  std::cout << os.str() << std::endl;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(QOP_CLI_PATH) + " " + args;
  return std::system(cmd.c_str());
}

}  // namespace

TEST_CASE("criterion 1: kappa-sweep scaling at the benchmark configuration") {
  Stopwatch watch;
  HarnessConfig cfg = config_from_json(nlohmann::json::object());
  cfg.out_dir =
      (std::filesystem::temp_directory_path() / "qop_acc_sweep").string();
  std::filesystem::remove_all(cfg.out_dir);
  const SweepOutcome outcome = run_kappa_sweep(cfg);
  const SweepCheckResult check = evaluate_sweep_check(outcome, cfg);
  const double elapsed = watch.seconds();
  std::ostringstream os;
  os << check.detail << "; runtime " << elapsed << " s (budget 60)";
  const bool pass = check.pass && elapsed < 60.0;
  report(1, pass, os.str());
  CHECK(check.pass);
  CHECK(elapsed < 60.0);
}

TEST_CASE("criterion 2: linear-mechanism calibration regression") {
  const auto calib = calibrate_lop(ProblemConstants{1.0, 1}, 1.0,
                                   PrivacyBudget{0.5, 0.01});
  const bool sigma_ok = std::fabs(calib.sigma2 - 177.546) <= 0.01;
  const bool delta_ok = calib.Delta == 4.0;
  std::ostringstream os;
  os << "sigma2=" << calib.sigma2 << " (want 177.546 +- 0.01), Delta="
     << calib.Delta << " (want 4 exactly)";
  report(2, sigma_ok && delta_ok, os.str());
  CHECK(sigma_ok);
  CHECK(delta_ok);
}

TEST_CASE("criterion 3: Gaussian-release calibration") {
  // tau=0.5, alpha=1, sigma2=1, beta=2, eta=0, eps2=1, delta2=0.05
  RmtConstants c;
  c.alpha = 1.0;
  c.alpha1 = 1.0;
  c.beta = 2.0;
  c.f_coeff = 0.0;
  c.mu = 4.0;
  const auto split = BudgetSplit::make(PrivacyBudget{2.0, 0.1}, 1.0, 1.0,
                                       DeltaSplit{0.02, 0.05, 0.02, 0.01});
  // L = 1/16 makes the curvature formula hit sigma2 = 1 exactly
  const auto calib =
      calibrate_qop(ProblemConstants{1.0 / 16.0, 1}, split, c, 0.5, 0.0);
  const bool sigma2_ok = std::fabs(calib.sigma2 - 1.0) <= 1e-12;
  const bool ok = std::fabs(calib.sigma_tilde - 5.0746) <= 1e-3;
  std::ostringstream os;
  os << "sigma_tilde=" << calib.sigma_tilde << " (want 5.0746 +- 1e-3)";
  report(3, ok && sigma2_ok, os.str());
  CHECK(sigma2_ok);
  CHECK(ok);
}

TEST_CASE("criterion 4: Wishart constant coverage by Monte Carlo") {
  Stopwatch watch;
  const int samples = 100000;
  bool all = true;
  std::ostringstream os;
  for (double delta3 : {0.01, 0.05}) {
    const auto rep = checks::check_wishart_coverage(5, 20, 0.05, delta3, 0.01,
                                                    samples, 777);
    all = all && rep.pass;
    os << "[delta3=" << delta3 << ": " << (rep.pass ? "ok" : "FAIL") << "] ";
  }
  const double elapsed = watch.seconds();
  os << "runtime " << elapsed << " s (budget 30)";
  const bool pass = all && elapsed < 30.0;
  report(4, pass, os.str());
  CHECK(all);
  CHECK(elapsed < 30.0);
}

TEST_CASE("criterion 5: density-ratio contract") {
  const auto rep = checks::check_density_ratio(4, 12, 0.05, 0.05, 1000, 888);
  report(5, rep.pass, rep.detail + " (1000 admissible pairs at d=4, m=12)");
  CHECK(rep.pass);
}

TEST_CASE("criterion 6: determinant and coupling identities") {
  const auto r1 = checks::check_rank1_update(50, 111, 1e-10);
  const auto r2 = checks::check_low_rank_bound(1000, 222);
  const auto r3 = checks::check_rank2_coupling(10, 1000, 333);
  const bool pass = r1.pass && r2.pass && r3.pass;
  std::ostringstream os;
  os << "rank1 " << r1.trials << " trials, low-rank " << r2.trials
     << " trials, coupling " << r3.trials << " trials";
  report(6, pass, os.str());
  CHECK(r1.pass);
  CHECK(r2.pass);
  CHECK(r3.pass);
}

TEST_CASE("criterion 7: special-function round trips") {
  const double g11 = lower_incomplete_gamma(1.0, 1.0);
  const bool anchor_ok = std::fabs(g11 - (1.0 - std::exp(-1.0))) <= 1e-12;
  const auto rep = checks::check_gamma_roundtrip(1e-8);
  std::ostringstream os;
  os << "gamma(1,1) err " << std::fabs(g11 - (1.0 - std::exp(-1.0))) << "; "
     << rep.detail;
  report(7, anchor_ok && rep.pass, os.str());
  CHECK(anchor_ok);
  CHECK(rep.pass);
}

TEST_CASE("criterion 8: solver correctness") {
  // strongly convex quadratic with a closed-form minimizer, d=10, n=5
  Rng rng(515);
  const int d = 10, n = 5;
  std::vector<Mat> hs;
  std::vector<Vec> cs;
  Mat h_total = Mat::Zero(d, d);
  Vec rhs = Vec::Zero(d);
  Vec c0(d);
  for (int r = 0; r < d; ++r) c0(r) = rng.uniform(-2.0, 2.0);
  for (int i = 0; i < n; ++i) {
    Mat g(d, d);
    for (int r = 0; r < d; ++r)
      for (int c2 = 0; c2 < d; ++c2) g(r, c2) = rng.normal();
    Mat h = g.transpose() * g / d + Mat::Identity(d, d);
    // per-point centers disagree mildly around a common region, so the
    // stochastic oracle has nonzero variance at the optimum
    Vec c = c0;
    for (int r = 0; r < d; ++r) c(r) += rng.uniform(-0.25, 0.25);
    h_total += h;
    rhs += h * c;
    hs.push_back(h);
    cs.push_back(c);
  }
  const Vec minimizer = h_total.ldlt().solve(rhs);

  CompositeObjective obj;
  obj.dim = d;
  obj.n = n;
  // per-point gradient of (theta - c_i)^T H_i (theta - c_i) / (2n)
  obj.point_grad = [&](const Vec& theta, std::size_t i) -> Vec {
    return hs[i] * (theta - cs[i]) / static_cast<double>(n);
  };
  SolverConfig cfg;
  cfg.iterations = 10000;
  cfg.seed = 31337;
  cfg.step = 1.0 / eig_extremes(SymMatrix::from_upper(h_total)).second;
  const SolverResult res = stotos(obj, cfg);
  const double rel_err = (res.theta - minimizer).norm() / minimizer.norm();
  const bool solver_ok = rel_err <= 1e-2;

  // prox and projection closed forms
  Vec x(3);
  x << 3.0, -1.0, 0.2;
  const Vec p = prox_l1(x, 1.0);
  const bool prox_ok = p(0) == 2.0 && p(1) == 0.0 && p(2) == 0.0;
  Vec q(2);
  q << 5.0, -7.0;
  const Vec pb = proj_box(q, 2.0);
  const bool proj_ok = pb(0) == 2.0 && pb(1) == -2.0;

  // stopping soundness over 100 random strongly convex instances
  Rng srng(616);
  bool stopping_ok = true;
  int passes = 0;
  for (int t = 0; t < 100; ++t) {
    Mat g(5, 5);
    for (int r = 0; r < 5; ++r)
      for (int c2 = 0; c2 < 5; ++c2) g(r, c2) = srng.normal();
    const Mat qq = Eigen::HouseholderQR<Mat>(g).householderQ();
    Vec lam(5);
    for (int j = 0; j < 5; ++j) lam(j) = srng.uniform(0.5, 5.0);
    const Mat h = qq * lam.asDiagonal() * qq.transpose();
    Vec c(5);
    for (int j = 0; j < 5; ++j) c(j) = srng.uniform(-2.0, 2.0);
    CompositeObjective sobj;
    sobj.dim = 5;
    sobj.n = 1;
    sobj.point_grad = [&h, &c](const Vec& theta, std::size_t) -> Vec {
      return h * (theta - c);
    };
    Vec theta = c;
    const double radius = srng.uniform(0.01, 0.4);
    for (int j = 0; j < 5; ++j) theta(j) += srng.uniform(-radius, radius);
    const double tau = 0.1;
    const double alpha = lam.minCoeff();
    if (check_stopping(stationarity_residual(sobj, theta), tau, alpha, 1.0)) {
      ++passes;
      const double subopt = 0.5 * (theta - c).dot(h * (theta - c));
      if (subopt > tau + 1e-12) stopping_ok = false;
    }
  }
  stopping_ok = stopping_ok && passes > 0;

  std::ostringstream os;
  os << "quadratic rel err " << rel_err << " (want <= 1e-2); prox/proj exact; "
     << passes << "/100 stopping passes all tau-sound";
  report(8, solver_ok && prox_ok && proj_ok && stopping_ok, os.str());
  CHECK(solver_ok);
  CHECK(prox_ok);
  CHECK(proj_ok);
  CHECK(stopping_ok);
}

TEST_CASE("criterion 9: optimized bound trends over the budget grid") {
  Stopwatch watch;
  const std::vector<double> eps_grid{0.25, 0.5, 1.0, 2.0};
  const std::vector<double> delta_grid{1e-3, 1e-2, 1e-1};
  bool monotone_eps = true, monotone_delta = true, dominance = true;
  std::map<std::tuple<int, std::size_t, std::size_t>, double> values;
  for (int path = 0; path < 2; ++path) {
    const double tau_eta = path == 0 ? 0.0 : 0.001;
    for (std::size_t di = 0; di < delta_grid.size(); ++di) {
      for (std::size_t ei = 0; ei < eps_grid.size(); ++ei) {
        BoundInputs in;
        in.L = 1.0;
        in.d = 12;
        in.n = 10;
        in.hess_rank = 1;
        in.G = 1.0;
        in.dist_sq = 1.0;
        in.tau = tau_eta;
        in.eta = tau_eta;
        in.budget = PrivacyBudget{eps_grid[ei], delta_grid[di]};
        values[{path, di, ei}] = optimize_qop_bound(in).bound;
      }
    }
  }
  for (int path = 0; path < 2; ++path) {
    for (std::size_t di = 0; di < delta_grid.size(); ++di)
      for (std::size_t ei = 0; ei + 1 < eps_grid.size(); ++ei)
        if (values[{path, di, ei + 1}] > values[{path, di, ei}] * (1.0 + 1e-9))
          monotone_eps = false;
    for (std::size_t ei = 0; ei < eps_grid.size(); ++ei)
      for (std::size_t di = 0; di + 1 < delta_grid.size(); ++di)
        if (values[{path, di + 1, ei}] > values[{path, di, ei}] * (1.0 + 1e-9))
          monotone_delta = false;
  }
  for (std::size_t di = 0; di < delta_grid.size(); ++di)
    for (std::size_t ei = 0; ei < eps_grid.size(); ++ei)
      if (values[{1, di, ei}] < values[{0, di, ei}] * (1.0 - 1e-9))
        dominance = false;
  const double elapsed = watch.seconds();
  std::ostringstream os;
  os << "nonincreasing in eps: " << (monotone_eps ? "yes" : "NO")
     << ", in delta: " << (monotone_delta ? "yes" : "NO")
     << ", inexact >= exact: " << (dominance ? "yes" : "NO") << "; runtime "
     << elapsed << " s (budget 120)";
  const bool pass = monotone_eps && monotone_delta && dominance && elapsed < 120.0;
  report(9, pass, os.str());
  CHECK(monotone_eps);
  CHECK(monotone_delta);
  CHECK(dominance);
  CHECK(elapsed < 120.0);
}

TEST_CASE("criterion 10: interpolation and problem constants") {
  Rng rng(919);
  const auto inst =
      generate_interpolation_dataset(300, 100, 5.0, std::sqrt(0.1), rng);
  bool interp_ok = true;
  for (const auto& z : inst.dataset.points()) {
    const double r = z.x.dot(inst.theta_star) - z.y;
    if (0.5 * r * r > 1e-18) interp_ok = false;
  }
  const LassoProblem prob(inst.dataset, 1.0, 10.0);
  const bool l_ok = prob.L() == 100.0 * 25.0;
  const bool g_ok = prob.G() == std::sqrt(100.0) * 1.0;
  bool zeta_ok = true;
  Rng trng(920);
  for (int t = 0; t < 1000 && zeta_ok; ++t) {
    Vec theta(prob.dim());
    for (Eigen::Index j = 0; j < theta.size(); ++j)
      theta(j) = trng.uniform(-prob.kappa(), prob.kappa());
    const std::size_t i = trng.uniform_index(prob.n());
    if (loss_grad(prob, theta, i).norm() > prob.zeta()) zeta_ok = false;
  }
  std::ostringstream os;
  os << "zero loss at theta_star: " << (interp_ok ? "yes" : "NO")
     << "; L=" << prob.L() << " G=" << prob.G()
     << "; zeta dominates 1000 sampled gradients: " << (zeta_ok ? "yes" : "NO");
  report(10, interp_ok && l_ok && g_ok && zeta_ok, os.str());
  CHECK(interp_ok);
  CHECK(l_ok);
  CHECK(g_ok);
  CHECK(zeta_ok);
}

TEST_CASE("criterion 11: CLI determinism (byte-identical outputs)") {
  namespace fs = std::filesystem;
  const fs::path base = fs::temp_directory_path() / "qop_acc_cli";
  fs::remove_all(base);
  fs::create_directories(base);

  // reduced config keeps the double execution cheap
  nlohmann::json j;
  j["seed"] = 777;
  j["data"] = {{"n", 40}, {"d", 12}, {"xi", 5.0}};
  j["wishart"] = {{"m", 24}};
  j["solver"] = {{"iterations", 150}};
  j["sweep"] = {{"kappas", std::vector<double>{0.5, 5.0}},
                {"runs", 2},
                {"mechanisms", std::vector<std::string>{"qop", "lop", "lop_clip"}}};
  j["bound"] = {{"epsilons", std::vector<double>{0.5, 1.0}},
                {"deltas", std::vector<double>{0.01}}};
  j["lemma"] = {{"trials", 60}, {"mc_samples", 2000}};
  const fs::path cfg_path = base / "config.json";
  std::ofstream(cfg_path) << j.dump(2);

  bool pass = true;
  std::ostringstream os;
  const auto compare = [&](const std::string& sub, const std::string& extra,
                           const std::vector<std::string>& files) {
    const fs::path a = base / (sub + "_a");
    const fs::path b = base / (sub + "_b");
    for (const fs::path& dir : {a, b}) {
      const int rc = run_cli("--config " + cfg_path.string() + " --out-dir " +
                             dir.string() + " " + sub + " " + extra +
                             " > " + (dir.string() + ".log") + " 2>&1");
      if (rc != 0) {
        pass = false;
        os << sub << " exited " << rc << "; ";
        return;
      }
    }
    for (const auto& f : files) {
      if (slurp(a / f) != slurp(b / f) || slurp(a / f).empty()) {
        pass = false;
        os << sub << "/" << f << " differs; ";
      }
    }
    const std::string la = slurp(fs::path(a.string() + ".log"));
    const std::string lb = slurp(fs::path(b.string() + ".log"));
    if (la != lb) {
      pass = false;
      os << sub << " stdout differs; ";
    }
  };

  compare("sweep-kappa", "", {"runs.csv", "summary.csv", "figure2.svg"});
  compare("calibrate", "", {"calibration.json"});
  compare("run-single", "--mechanism lop --kappa 2.0", {"run.json"});
  compare("optimize-bound", "",
          {"figure1_exact.csv", "figure1_inexact.csv", "figure1_exact.svg",
           "figure1_inexact.svg"});
  compare("lemma-check", "", {});

  if (pass) os << "sweep-kappa, calibrate, run-single, optimize-bound, lemma-check byte-identical across repeats";
  report(11, pass, os.str());
  CHECK(pass);
}

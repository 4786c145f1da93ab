#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "qop/bounds.hpp"
#include "qop/erm.hpp"
#include "qop/errors.hpp"
#include "qop/mechanisms.hpp"
#include "qop/property_checks.hpp"
#include "qop/rmt.hpp"
#include "qop/solver.hpp"
#include "qop/svg.hpp"

namespace qop {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;      // bad config or infeasible split
inline constexpr int kExitNumerical = 2;   // divergence or numeric failure
inline constexpr int kExitCheckFailed = 3; // --check assertions failed

namespace detail {

// Shortest round-trip decimal form; keeps CSV bytes deterministic.
inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::uint64_t fnv1a_bytes(std::uint64_t h, const void* data,
                                 std::size_t bytes) {
  const auto* b = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= b[i];
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace detail

// Cell seed for (mechanism, kappa, run): base_seed XOR a content hash, so
// cells are reproducible yet decorrelated.
inline std::uint64_t cell_seed(std::uint64_t base_seed,
                               const std::string& mechanism, double kappa,
                               int run) {
  std::uint64_t h = 1469598103934665603ULL;
  h = detail::fnv1a_bytes(h, mechanism.data(), mechanism.size());
  h = detail::fnv1a_bytes(h, &kappa, sizeof(kappa));
  h = detail::fnv1a_bytes(h, &run, sizeof(run));
  return base_seed ^ h;
}

// ---- configuration -------------------------------------------------------

struct HarnessConfig {
  std::uint64_t seed = 12345;
  std::string out_dir = "out";
  int threads = 0;              // 0 = hardware concurrency
  bool record_timings = false;  // keeps default outputs byte-reproducible

  struct {
    int n = 300;
    int d = 100;
    double xi = 5.0;
    double anchor_noise_sd = 0.31622776601683794;  // sqrt(0.1)
  } data;

  double omega = 1.0;
  PrivacyBudget budget{0.5, 0.01};
  double eps1 = 0.5;
  double eps2 = 0.0;
  DeltaSplit deltas{0.005, 0.0, 0.005, 0.0};
  int wishart_m = 200;  // 2d
  double tau = 0.0;
  double eta = 0.0;

  struct {
    long iterations = 1000;
    double step = 0.0;  // 0 = 1/Lip, computed per problem
    double relaxation_exponent = 0.502;
  } solver;

  struct {
    std::vector<double> kappas;  // default: 8 log-spaced in [0.1, 100]
    int runs = 10;
    std::vector<std::string> mechanisms{"qop", "lop", "lop_clip"};
    double clip = 10000.0;
  } sweep;

  struct {
    std::string mechanism = "qop";
    double kappa = 10.0;
    int run = 0;
  } single;

  struct {
    std::vector<double> epsilons{0.25, 0.5, 1.0, 2.0};
    std::vector<double> deltas{1e-3, 1e-2, 1e-1};
    double L = 1.0;
    int d = 12;
    int n = 10;
    int hess_rank = 1;
    double G = 1.0;
    double dist_sq = 1.0;
    double tau_inexact = 0.001;
  } bound;

  struct {
    int trials = 1000;
    int mc_samples = 20000;
  } lemma;

  void finalize() {
    if (sweep.kappas.empty()) {
      for (int i = 0; i < 8; ++i)
        sweep.kappas.push_back(0.1 * std::pow(1000.0, i / 7.0));
    }
    validate();
  }

  void validate() const {
    budget.validate();
    deltas.validate();
    if (data.n < 1 || data.d < 1 || !(data.xi > 0))
      throw ConfigError("config: data block requires n, d >= 1 and xi > 0");
    if (!(data.anchor_noise_sd >= 0))
      throw ConfigError("config: anchor_noise_sd must be >= 0");
    if (!(omega >= 0)) throw ConfigError("config: omega must be >= 0");
    if (wishart_m <= data.d)
      throw ConfigError("config: wishart m must exceed d");
    if (sweep.runs < 1) throw ConfigError("config: sweep.runs must be >= 1");
    if (sweep.kappas.empty())
      throw ConfigError("config: sweep.kappas must be nonempty");
    for (std::size_t i = 0; i + 1 < sweep.kappas.size(); ++i)
      if (!(sweep.kappas[i] < sweep.kappas[i + 1]))
        throw ConfigError("config: sweep.kappas must be strictly increasing");
    for (double k : sweep.kappas)
      if (!(k > 0)) throw ConfigError("config: kappa values must be positive");
    if (!(sweep.clip > 0)) throw ConfigError("config: clip must be positive");
    for (const auto& m : sweep.mechanisms)
      if (m != "qop" && m != "lop" && m != "lop_clip")
        throw ConfigError("config: unknown mechanism '" + m + "'");
    if (sweep.mechanisms.empty())
      throw ConfigError("config: mechanisms must be nonempty");
    if (!(tau >= 0) || !(eta >= 0))
      throw ConfigError("config: tau and eta must be >= 0");
    if (single.mechanism != "qop" && single.mechanism != "lop" &&
        single.mechanism != "lop_clip")
      throw ConfigError("config: unknown single.mechanism");
    if (!(single.kappa > 0)) throw ConfigError("config: single.kappa > 0");
    if (lemma.trials < 1) throw ConfigError("config: lemma.trials >= 1");
  }

  BudgetSplit split() const {
    return BudgetSplit::make(budget, eps1, eps2, deltas);
  }

  SolverConfig solver_config(std::uint64_t solver_seed) const {
    SolverConfig cfg;
    cfg.iterations = solver.iterations;
    cfg.step = solver.step;
    cfg.relaxation_exponent = solver.relaxation_exponent;
    cfg.seed = solver_seed;
    return cfg;
  }
};

namespace detail {

template <typename T>
void maybe_get(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline HarnessConfig config_from_json(const nlohmann::json& j) {
  HarnessConfig c;
  try {
    detail::maybe_get(j, "seed", c.seed);
    detail::maybe_get(j, "out_dir", c.out_dir);
    detail::maybe_get(j, "threads", c.threads);
    detail::maybe_get(j, "record_timings", c.record_timings);
    if (j.contains("data")) {
      const auto& d = j.at("data");
      detail::maybe_get(d, "n", c.data.n);
      detail::maybe_get(d, "d", c.data.d);
      detail::maybe_get(d, "xi", c.data.xi);
      detail::maybe_get(d, "anchor_noise_sd", c.data.anchor_noise_sd);
    }
    detail::maybe_get(j, "omega", c.omega);
    if (j.contains("budget")) {
      const auto& b = j.at("budget");
      detail::maybe_get(b, "epsilon", c.budget.epsilon);
      detail::maybe_get(b, "delta", c.budget.delta);
      // default split follows the budget unless overridden below
      c.eps1 = c.budget.epsilon;
      c.eps2 = 0.0;
      c.deltas = DeltaSplit{0.5 * c.budget.delta, 0.0, 0.5 * c.budget.delta, 0.0};
    }
    if (j.contains("split")) {
      const auto& s = j.at("split");
      detail::maybe_get(s, "eps1", c.eps1);
      detail::maybe_get(s, "eps2", c.eps2);
      detail::maybe_get(s, "delta1", c.deltas.delta1);
      detail::maybe_get(s, "delta2", c.deltas.delta2);
      detail::maybe_get(s, "delta3", c.deltas.delta3);
      detail::maybe_get(s, "delta4", c.deltas.delta4);
    }
    if (j.contains("wishart")) detail::maybe_get(j.at("wishart"), "m", c.wishart_m);
    detail::maybe_get(j, "tau", c.tau);
    detail::maybe_get(j, "eta", c.eta);
    if (j.contains("solver")) {
      const auto& s = j.at("solver");
      detail::maybe_get(s, "iterations", c.solver.iterations);
      detail::maybe_get(s, "step", c.solver.step);
      detail::maybe_get(s, "relaxation_exponent", c.solver.relaxation_exponent);
    }
    if (j.contains("sweep")) {
      const auto& s = j.at("sweep");
      detail::maybe_get(s, "kappas", c.sweep.kappas);
      detail::maybe_get(s, "runs", c.sweep.runs);
      detail::maybe_get(s, "mechanisms", c.sweep.mechanisms);
      detail::maybe_get(s, "clip", c.sweep.clip);
    }
    if (j.contains("single")) {
      const auto& s = j.at("single");
      detail::maybe_get(s, "mechanism", c.single.mechanism);
      detail::maybe_get(s, "kappa", c.single.kappa);
      detail::maybe_get(s, "run", c.single.run);
    }
    if (j.contains("bound")) {
      const auto& b = j.at("bound");
      detail::maybe_get(b, "epsilons", c.bound.epsilons);
      detail::maybe_get(b, "deltas", c.bound.deltas);
      detail::maybe_get(b, "L", c.bound.L);
      detail::maybe_get(b, "d", c.bound.d);
      detail::maybe_get(b, "n", c.bound.n);
      detail::maybe_get(b, "hess_rank", c.bound.hess_rank);
      detail::maybe_get(b, "G", c.bound.G);
      detail::maybe_get(b, "dist_sq", c.bound.dist_sq);
      detail::maybe_get(b, "tau_inexact", c.bound.tau_inexact);
    }
    if (j.contains("lemma")) {
      const auto& l = j.at("lemma");
      detail::maybe_get(l, "trials", c.lemma.trials);
      detail::maybe_get(l, "mc_samples", c.lemma.mc_samples);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.finalize();
  return c;
}

inline nlohmann::json config_to_json(const HarnessConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["threads"] = c.threads;
  j["record_timings"] = c.record_timings;
  j["data"] = {{"n", c.data.n},
               {"d", c.data.d},
               {"xi", c.data.xi},
               {"anchor_noise_sd", c.data.anchor_noise_sd}};
  j["omega"] = c.omega;
  j["budget"] = {{"epsilon", c.budget.epsilon}, {"delta", c.budget.delta}};
  j["split"] = {{"eps1", c.eps1},       {"eps2", c.eps2},
                {"delta1", c.deltas.delta1}, {"delta2", c.deltas.delta2},
                {"delta3", c.deltas.delta3}, {"delta4", c.deltas.delta4}};
  j["wishart"] = {{"m", c.wishart_m}};
  j["tau"] = c.tau;
  j["eta"] = c.eta;
  j["solver"] = {{"iterations", c.solver.iterations},
                 {"step", c.solver.step},
                 {"relaxation_exponent", c.solver.relaxation_exponent}};
  j["sweep"] = {{"kappas", c.sweep.kappas},
                {"runs", c.sweep.runs},
                {"mechanisms", c.sweep.mechanisms},
                {"clip", c.sweep.clip}};
  j["single"] = {{"mechanism", c.single.mechanism},
                 {"kappa", c.single.kappa},
                 {"run", c.single.run}};
  j["bound"] = {{"epsilons", c.bound.epsilons},
                {"deltas", c.bound.deltas},
                {"L", c.bound.L},
                {"d", c.bound.d},
                {"n", c.bound.n},
                {"hess_rank", c.bound.hess_rank},
                {"G", c.bound.G},
                {"dist_sq", c.bound.dist_sq},
                {"tau_inexact", c.bound.tau_inexact}};
  j["lemma"] = {{"trials", c.lemma.trials}, {"mc_samples", c.lemma.mc_samples}};
  return j;
}

inline HarnessConfig load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: parse error in ") + path + ": " +
                      e.what());
  }
  return config_from_json(j);
}

// ---- statistics ----------------------------------------------------------

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Sample standard deviation (ddof = 1); zero for a single observation.
inline double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

inline std::vector<double> ranks_of(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t jj = i;
    while (jj + 1 < idx.size() && v[idx[jj + 1]] == v[idx[i]]) ++jj;
    const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(jj)) + 1.0;
    for (std::size_t k = i; k <= jj; ++k) r[idx[k]] = avg;
    i = jj + 1;
  }
  return r;
}

inline double spearman(const std::vector<double>& a,
                       const std::vector<double>& b) {
  const auto ra = ranks_of(a), rb = ranks_of(b);
  const double ma = mean_of(ra), mb = mean_of(rb);
  double num = 0, da = 0, db = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  if (da == 0 || db == 0) return 0.0;
  return num / std::sqrt(da * db);
}

// ---- work pool -----------------------------------------------------------

inline void parallel_for(std::size_t count, int threads,
                         const std::function<void(std::size_t)>& fn) {
  unsigned workers = threads > 0 ? static_cast<unsigned>(threads)
                                 : std::thread::hardware_concurrency();
  workers = std::max(1u, std::min<unsigned>(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ---- kappa sweep ---------------------------------------------------------

struct RunRecord {
  std::string mechanism;
  double kappa = 0.0;
  int run = 0;
  std::uint64_t seed = 0;
  std::uint64_t dataset_hash = 0;
  double empirical_risk = 0.0;
  double solver_residual = 0.0;
  double wall_time_seconds = 0.0;
  bool ok = true;
  std::string error;
};

struct SummaryRow {
  std::string mechanism;
  double kappa = 0.0;
  int runs = 0;
  double mean_risk = 0.0;
  double std_risk = 0.0;
  double se_risk = 0.0;
  double mean_wall_time = 0.0;
};

struct SweepOutcome {
  std::vector<RunRecord> runs;
  std::vector<SummaryRow> summary;
};

// One dataset per run index (seed base_seed + run); every mechanism and kappa
// within a run consumes that same dataset, so the comparison is paired. Cells
// execute in a pool; records land in preallocated slots, so scheduling never
// changes output bytes.
inline SweepOutcome run_kappa_sweep(const HarnessConfig& config) {
  config.validate();
  const auto& mechs = config.sweep.mechanisms;
  const auto& kappas = config.sweep.kappas;
  const int runs = config.sweep.runs;

  std::vector<GeneratedInstance> instances;
  std::vector<std::uint64_t> hashes;
  instances.reserve(runs);
  for (int r = 0; r < runs; ++r) {
    Rng rng(config.seed + static_cast<std::uint64_t>(r));
    instances.push_back(generate_interpolation_dataset(
        config.data.n, config.data.d, config.data.xi,
        config.data.anchor_noise_sd, rng));
    hashes.push_back(instance_hash(instances.back()));
  }

  const RmtConstants constants = compute_constants(
      WishartSpec{config.data.d, config.wishart_m}, config.deltas);
  const BudgetSplit split = config.split();

  struct Cell {
    std::size_t mech;
    std::size_t kappa;
    int run;
  };
  std::vector<Cell> cells;
  for (std::size_t mi = 0; mi < mechs.size(); ++mi)
    for (std::size_t ki = 0; ki < kappas.size(); ++ki)
      for (int r = 0; r < runs; ++r) cells.push_back(Cell{mi, ki, r});

  std::vector<RunRecord> records(cells.size());
  parallel_for(cells.size(), config.threads, [&](std::size_t idx) {
    const Cell& cell = cells[idx];
    const std::string& mech = mechs[cell.mech];
    const double kappa = kappas[cell.kappa];
    const GeneratedInstance& inst = instances[cell.run];
    const std::uint64_t seed = cell_seed(config.seed, mech, kappa, cell.run);

    RunRecord rec;
    rec.mechanism = mech;
    rec.kappa = kappa;
    rec.run = cell.run;
    rec.seed = seed;
    rec.dataset_hash = hashes[cell.run];
    try {
      const LassoProblem problem(inst.dataset, config.omega, kappa);
      const ProblemConstants pc{problem.L(), problem.hess_rank()};
      Rng noise(seed);
      const SolverConfig scfg =
          config.solver_config(seed ^ 0x736f6c766572ULL /* "solver" */);
      MechanismOutput out;
      if (mech == "qop") {
        // the benchmark path omits the Gaussian release term, so the
        // calibration runs with tau = eta = 0 and the whole budget on eps1
        const QopCalibration calib =
            calibrate_qop(pc, split, constants, config.tau, config.eta);
        out = run_qop(problem, inst.anchor, calib,
                      WishartSpec{config.data.d, config.wishart_m}, scfg, noise);
      } else if (mech == "lop") {
        const LopCalibration calib =
            calibrate_lop(pc, problem.zeta(), config.budget);
        out = run_lop(problem, calib, scfg, noise);
      } else {
        const LopCalibration calib =
            calibrate_lop(pc, config.sweep.clip, config.budget);
        out = run_lop(problem, calib, scfg, noise, config.sweep.clip);
      }
      rec.empirical_risk = out.empirical_risk;
      rec.solver_residual = out.solver_residual;
      rec.wall_time_seconds = config.record_timings ? out.wall_time_seconds : 0.0;
      if (!std::isfinite(rec.empirical_risk)) {
        rec.ok = false;
        rec.error = "nonfinite risk";
      }
    } catch (const SolverDivergenceError& e) {
      rec.ok = false;
      rec.error = e.what();
      rec.empirical_risk = std::numeric_limits<double>::quiet_NaN();
      rec.solver_residual = std::numeric_limits<double>::quiet_NaN();
    }
    records[idx] = std::move(rec);
  });

  std::stable_sort(records.begin(), records.end(),
                   [](const RunRecord& a, const RunRecord& b) {
                     if (a.mechanism != b.mechanism) return a.mechanism < b.mechanism;
                     if (a.kappa != b.kappa) return a.kappa < b.kappa;
                     return a.run < b.run;
                   });

  SweepOutcome out;
  out.runs = std::move(records);
  for (const auto& mech : [&] {
         std::vector<std::string> ms = mechs;
         std::sort(ms.begin(), ms.end());
         return ms;
       }()) {
    for (double kappa : kappas) {
      std::vector<double> risks, walls;
      for (const auto& r : out.runs)
        if (r.ok && r.mechanism == mech && r.kappa == kappa) {
          risks.push_back(r.empirical_risk);
          walls.push_back(r.wall_time_seconds);
        }
      if (risks.empty()) continue;
      SummaryRow row;
      row.mechanism = mech;
      row.kappa = kappa;
      row.runs = static_cast<int>(risks.size());
      row.mean_risk = mean_of(risks);
      row.std_risk = sample_std(risks);
      row.se_risk = row.std_risk / std::sqrt(static_cast<double>(risks.size()));
      row.mean_wall_time = mean_of(walls);
      out.summary.push_back(row);
    }
  }
  return out;
}

inline void write_runs_csv(const std::string& path,
                           const std::vector<RunRecord>& records) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << "mechanism,kappa,run,seed,dataset_hash,empirical_risk,solver_residual,"
       "wall_time_seconds,status\n";
  for (const auto& r : records) {
    f << r.mechanism << ',' << detail::fmt_double(r.kappa) << ',' << r.run
      << ',' << r.seed << ',' << detail::hex64(r.dataset_hash) << ','
      << detail::fmt_double(r.empirical_risk) << ','
      << detail::fmt_double(r.solver_residual) << ','
      << detail::fmt_double(r.wall_time_seconds) << ','
      << (r.ok ? "ok" : "error") << '\n';
  }
}

inline void write_summary_csv(const std::string& path,
                              const std::vector<SummaryRow>& rows) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << "mechanism,kappa,runs,mean_risk,std_risk,se_risk,mean_wall_time_seconds\n";
  for (const auto& r : rows) {
    f << r.mechanism << ',' << detail::fmt_double(r.kappa) << ',' << r.runs
      << ',' << detail::fmt_double(r.mean_risk) << ','
      << detail::fmt_double(r.std_risk) << ',' << detail::fmt_double(r.se_risk)
      << ',' << detail::fmt_double(r.mean_wall_time) << '\n';
  }
}

inline void write_figure2_svg(const std::string& path,
                              const SweepOutcome& outcome) {
  std::vector<PlotSeries> series;
  std::vector<std::string> mechs;
  for (const auto& row : outcome.summary)
    if (std::find(mechs.begin(), mechs.end(), row.mechanism) == mechs.end())
      mechs.push_back(row.mechanism);
  for (const auto& m : mechs) {
    PlotSeries s;
    s.label = m;
    for (const auto& row : outcome.summary)
      if (row.mechanism == m) {
        s.x.push_back(row.kappa);
        s.y.push_back(row.mean_risk);
      }
    series.push_back(std::move(s));
  }
  write_line_plot(path, "Mean empirical risk vs box radius", "kappa",
                  "mean empirical risk", series, /*log_x=*/true, /*log_y=*/true);
}

// Scaling assertions behind `sweep-kappa --check`: over the kappa grid the
// linear mechanism's mean risk must rise with kappa on the top half of the
// grid (Spearman >= 0.9), the quadratic mechanism must stay within one order
// of magnitude overall, and at the largest kappa the linear/quadratic risk
// ratio must reach 100x.
struct SweepCheckResult {
  bool pass = true;
  std::string detail;
};

inline SweepCheckResult evaluate_sweep_check(const SweepOutcome& outcome,
                                             const HarnessConfig& config) {
  SweepCheckResult res;
  std::ostringstream os;
  const auto mean_for = [&](const std::string& mech,
                            double kappa) -> std::optional<double> {
    for (const auto& row : outcome.summary)
      if (row.mechanism == mech && row.kappa == kappa) return row.mean_risk;
    return std::nullopt;
  };
  const auto& kappas = config.sweep.kappas;

  std::vector<double> lop_top_k, lop_top_risk;
  for (std::size_t i = kappas.size() / 2; i < kappas.size(); ++i) {
    if (auto v = mean_for("lop", kappas[i])) {
      lop_top_k.push_back(kappas[i]);
      lop_top_risk.push_back(*v);
    }
  }
  if (lop_top_risk.size() >= 2) {
    const double rho = spearman(lop_top_k, lop_top_risk);
    os << "lop spearman(top half)=" << rho << "; ";
    if (!(rho >= 0.9)) res.pass = false;
  } else {
    os << "lop top-half data missing; ";
    res.pass = false;
  }

  double qop_min = std::numeric_limits<double>::infinity(), qop_max = 0.0;
  for (double k : kappas)
    if (auto v = mean_for("qop", k)) {
      qop_min = std::min(qop_min, *v);
      qop_max = std::max(qop_max, *v);
    }
  if (std::isfinite(qop_min) && qop_min > 0) {
    os << "qop max/min=" << qop_max / qop_min << "; ";
    if (!(qop_max / qop_min < 10.0)) res.pass = false;
  } else {
    os << "qop data missing; ";
    res.pass = false;
  }

  const double kmax = kappas.back();
  const auto lop_at_max = mean_for("lop", kmax);
  const auto qop_at_max = mean_for("qop", kmax);
  if (lop_at_max && qop_at_max && *qop_at_max > 0) {
    os << "lop/qop at kappa_max=" << *lop_at_max / *qop_at_max;
    if (!(*lop_at_max / *qop_at_max >= 100.0)) res.pass = false;
  } else {
    os << "kappa_max data missing";
    res.pass = false;
  }
  res.detail = os.str();
  return res;
}

// ---- commands ------------------------------------------------------------

inline nlohmann::json constants_to_json(const RmtConstants& c) {
  nlohmann::json j;
  j["alpha"] = c.alpha;
  j["alpha1"] = c.alpha1;
  j["beta"] = std::isfinite(c.beta) ? nlohmann::json(c.beta)
                                    : nlohmann::json();  // null = +infinity
  j["beta_finite"] = std::isfinite(c.beta);
  j["f_coeff"] = c.f_coeff;
  j["mu"] = c.mu;
  j["D"] = c.big_d;
  j["log_D"] = c.log_big_d;
  j["p"] = c.p;
  j["d"] = c.d;
  j["m"] = c.m;
  return j;
}

inline int cmd_calibrate(const HarnessConfig& config, std::ostream& out) {
  config.validate();
  std::filesystem::create_directories(config.out_dir);

  Rng rng(config.seed + static_cast<std::uint64_t>(config.single.run));
  const GeneratedInstance inst = generate_interpolation_dataset(
      config.data.n, config.data.d, config.data.xi, config.data.anchor_noise_sd,
      rng);
  const LassoProblem problem(inst.dataset, config.omega, config.single.kappa);

  const RmtConstants constants = compute_constants(
      WishartSpec{config.data.d, config.wishart_m}, config.deltas);
  const BudgetSplit split = config.split();
  const ProblemConstants pc{problem.L(), problem.hess_rank()};
  const QopCalibration qop =
      calibrate_qop(pc, split, constants, config.tau, config.eta);
  const LopCalibration lop = calibrate_lop(pc, problem.zeta(), config.budget);
  const LopCalibration lop_clip =
      calibrate_lop(pc, config.sweep.clip, config.budget);

  nlohmann::json j;
  j["inputs"] = {
      {"epsilon", config.budget.epsilon},
      {"delta", config.budget.delta},
      {"eps1", config.eps1},
      {"eps2", config.eps2},
      {"delta1", config.deltas.delta1},
      {"delta2", config.deltas.delta2},
      {"delta3", config.deltas.delta3},
      {"delta4", config.deltas.delta4},
      {"tau", config.tau},
      {"eta", config.eta},
      {"wishart", {{"d", config.data.d}, {"m", config.wishart_m}}},
      {"problem",
       {{"n", static_cast<int>(problem.n())},
        {"d", static_cast<int>(problem.dim())},
        {"xi", problem.data().xi()},
        {"omega", problem.omega()},
        {"kappa", problem.kappa()},
        {"L", problem.L()},
        {"G", problem.G()},
        {"zeta", problem.zeta()},
        {"clip", config.sweep.clip}}},
      {"seed", config.seed},
  };
  j["rmt_constants"] = constants_to_json(constants);
  j["qop"] = {{"sigma2", qop.sigma2}, {"sigma_tilde", qop.sigma_tilde}};
  j["lop"] = {{"sigma2", lop.sigma2}, {"Delta", lop.Delta}};
  j["lop_clip"] = {{"sigma2", lop_clip.sigma2},
                   {"Delta", lop_clip.Delta},
                   {"zeta_used", lop_clip.zeta_used}};

  const std::string text = j.dump(2) + "\n";
  out << text;
  std::ofstream f(std::filesystem::path(config.out_dir) / "calibration.json",
                  std::ios::binary);
  if (!f) throw std::runtime_error("cannot write calibration.json");
  f << text;
  return kExitOk;
}

inline int cmd_sweep_kappa(const HarnessConfig& config, bool check,
                           std::ostream& out) {
  config.validate();
  std::filesystem::create_directories(config.out_dir);
  const SweepOutcome outcome = run_kappa_sweep(config);
  const auto dir = std::filesystem::path(config.out_dir);
  write_runs_csv((dir / "runs.csv").string(), outcome.runs);
  write_summary_csv((dir / "summary.csv").string(), outcome.summary);
  write_figure2_svg((dir / "figure2.svg").string(), outcome);

  // per-mechanism aggregate in the style of the summary-statistics table
  std::vector<std::string> mechs;
  for (const auto& row : outcome.summary)
    if (std::find(mechs.begin(), mechs.end(), row.mechanism) == mechs.end())
      mechs.push_back(row.mechanism);
  out << "mechanism  avg_std      max_std      avg_se       max_se       avg_runtime_s\n";
  for (const auto& m : mechs) {
    std::vector<double> stds, ses, walls;
    for (const auto& row : outcome.summary)
      if (row.mechanism == m) {
        stds.push_back(row.std_risk);
        ses.push_back(row.se_risk);
        walls.push_back(row.mean_wall_time);
      }
    char line[256];
    std::snprintf(line, sizeof(line), "%-9s  %-11.6g  %-11.6g  %-11.6g  %-11.6g  %-11.6g\n",
                  m.c_str(), mean_of(stds),
                  *std::max_element(stds.begin(), stds.end()), mean_of(ses),
                  *std::max_element(ses.begin(), ses.end()), mean_of(walls));
    out << line;
  }

  long failed = 0;
  for (const auto& r : outcome.runs)
    if (!r.ok) ++failed;
  if (failed > 0) out << failed << " run(s) recorded a solver failure\n";

  if (check) {
    const SweepCheckResult res = evaluate_sweep_check(outcome, config);
    out << "check: " << (res.pass ? "PASS" : "FAIL") << " (" << res.detail
        << ")\n";
    if (!res.pass) return kExitCheckFailed;
  }
  return kExitOk;
}

struct BoundSweepRow {
  double epsilon = 0.0;
  double delta = 0.0;
  std::string path;
  double bound = std::numeric_limits<double>::infinity();
  double eps1 = 0.0;
  DeltaSplit deltas;
  double m = 0.0;
  int restarts_used = 0;
  bool feasible = true;
};

inline void write_bound_csv(const std::string& file,
                            const std::vector<BoundSweepRow>& rows) {
  std::ofstream f(file, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + file);
  f << "epsilon,delta,path,bound,eps1,delta1,delta2,delta3,delta4,m,restarts_used\n";
  for (const auto& r : rows) {
    f << detail::fmt_double(r.epsilon) << ',' << detail::fmt_double(r.delta)
      << ',' << r.path << ',' << detail::fmt_double(r.bound) << ','
      << detail::fmt_double(r.eps1) << ',' << detail::fmt_double(r.deltas.delta1)
      << ',' << detail::fmt_double(r.deltas.delta2) << ','
      << detail::fmt_double(r.deltas.delta3) << ','
      << detail::fmt_double(r.deltas.delta4) << ',' << detail::fmt_double(r.m)
      << ',' << r.restarts_used << '\n';
  }
}

inline std::vector<BoundSweepRow> run_bound_sweep(const HarnessConfig& config,
                                                  bool exact) {
  const double tau = exact ? 0.0 : config.bound.tau_inexact;
  std::vector<BoundSweepRow> rows;
  for (double delta : config.bound.deltas) {
    for (double eps : config.bound.epsilons) {
      BoundSweepRow row;
      row.epsilon = eps;
      row.delta = delta;
      row.path = exact ? "exact" : "inexact";
      BoundInputs in;
      in.L = config.bound.L;
      in.d = config.bound.d;
      in.n = config.bound.n;
      in.hess_rank = config.bound.hess_rank;
      in.G = config.bound.G;
      in.tau = tau;
      in.eta = tau;
      in.dist_sq = config.bound.dist_sq;
      in.budget = PrivacyBudget{eps, delta};
      try {
        const OptimizeBoundResult r = optimize_qop_bound(in);
        row.bound = r.bound;
        row.eps1 = r.params.split.eps1;
        row.deltas = r.params.split.deltas;
        row.m = r.params.m;
        row.restarts_used = r.restarts_used;
      } catch (const InfeasibleError&) {
        row.feasible = false;
      }
      rows.push_back(row);
    }
  }
  return rows;
}

inline void write_bound_svg(const std::string& file,
                            const std::vector<BoundSweepRow>& rows,
                            const std::string& title) {
  std::vector<double> deltas;
  for (const auto& r : rows)
    if (std::find(deltas.begin(), deltas.end(), r.delta) == deltas.end())
      deltas.push_back(r.delta);
  std::vector<PlotSeries> series;
  for (double d : deltas) {
    PlotSeries s;
    std::ostringstream label;
    label << "delta=" << detail::tick_label(d);
    s.label = label.str();
    for (const auto& r : rows)
      if (r.delta == d && r.feasible) {
        s.x.push_back(r.epsilon);
        s.y.push_back(r.bound);
      }
    series.push_back(std::move(s));
  }
  write_line_plot(file, title, "epsilon", "optimized bound", series,
                  /*log_x=*/false, /*log_y=*/true);
}

inline int cmd_optimize_bound(const HarnessConfig& config, std::ostream& out) {
  config.validate();
  std::filesystem::create_directories(config.out_dir);
  const auto dir = std::filesystem::path(config.out_dir);

  const auto exact_rows = run_bound_sweep(config, /*exact=*/true);
  const auto inexact_rows = run_bound_sweep(config, /*exact=*/false);
  write_bound_csv((dir / "figure1_exact.csv").string(), exact_rows);
  write_bound_csv((dir / "figure1_inexact.csv").string(), inexact_rows);
  write_bound_svg((dir / "figure1_exact.svg").string(), exact_rows,
                  "Optimized risk bound, exact solve");
  write_bound_svg((dir / "figure1_inexact.svg").string(), inexact_rows,
                  "Optimized risk bound, inexact solve");
  long infeasible = 0;
  for (const auto& r : exact_rows)
    if (!r.feasible) ++infeasible;
  for (const auto& r : inexact_rows)
    if (!r.feasible) ++infeasible;
  out << "optimize-bound: " << exact_rows.size() + inexact_rows.size()
      << " grid points (" << infeasible << " infeasible)\n";
  return kExitOk;
}

inline int report_check_results(const std::vector<checks::CheckReport>& reports,
                                std::ostream& out) {
  bool all_pass = true;
  for (const auto& r : reports) {
    out << (r.pass ? "[pass] " : "[FAIL] ") << r.name << ": " << r.trials
        << " trials, " << r.failures << " failures";
    if (!r.detail.empty()) out << " (" << r.detail << ")";
    out << "\n";
    all_pass = all_pass && r.pass;
  }
  out << (all_pass ? "lemma-check: PASS\n" : "lemma-check: FAIL\n");
  return all_pass ? kExitOk : kExitNumerical;
}

inline int cmd_lemma_check(const HarnessConfig& config, std::ostream& out) {
  config.validate();
  const int trials = config.lemma.trials;
  const int mc = config.lemma.mc_samples;
  const std::uint64_t seed = config.seed;

  std::vector<checks::CheckReport> reports;
  reports.push_back(checks::check_gamma_roundtrip());
  reports.push_back(checks::check_wishart_psd(5, 20, std::min(mc, 2000), seed));
  reports.push_back(checks::check_wishart_coverage(5, 20, 0.05, 0.01, 0.01, mc, seed + 1));
  reports.push_back(checks::check_density_ratio(4, 12, 0.05, 0.05,
                                                trials, seed + 2));
  reports.push_back(checks::check_largest_eig_tail_mc(
      5, 20, {60.0, 80.0, 100.0}, std::min(mc, 20000), seed + 3));
  reports.push_back(checks::check_alpha_monotone(5, 20));
  reports.push_back(checks::check_rank1_update(trials, seed + 4));
  reports.push_back(checks::check_low_rank_bound(trials, seed + 5));
  reports.push_back(checks::check_rank2_coupling(10, trials, seed + 6));
  return report_check_results(reports, out);
}

inline int cmd_run_single(const HarnessConfig& config, std::ostream& out) {
  config.validate();
  std::filesystem::create_directories(config.out_dir);

  Rng data_rng(config.seed + static_cast<std::uint64_t>(config.single.run));
  const GeneratedInstance inst = generate_interpolation_dataset(
      config.data.n, config.data.d, config.data.xi, config.data.anchor_noise_sd,
      data_rng);
  const LassoProblem problem(inst.dataset, config.omega, config.single.kappa);
  const ProblemConstants pc{problem.L(), problem.hess_rank()};

  const std::uint64_t seed = cell_seed(config.seed, config.single.mechanism,
                                       config.single.kappa, config.single.run);
  Rng noise(seed);
  const SolverConfig scfg = config.solver_config(seed ^ 0x736f6c766572ULL);

  MechanismOutput result;
  if (config.single.mechanism == "qop") {
    const RmtConstants constants = compute_constants(
        WishartSpec{config.data.d, config.wishart_m}, config.deltas);
    const QopCalibration calib = calibrate_qop(pc, config.split(), constants,
                                               config.tau, config.eta);
    result = run_qop(problem, inst.anchor, calib,
                     WishartSpec{config.data.d, config.wishart_m}, scfg, noise);
  } else if (config.single.mechanism == "lop") {
    result = run_lop(problem, calibrate_lop(pc, problem.zeta(), config.budget),
                     scfg, noise);
  } else {
    result = run_lop(problem, calibrate_lop(pc, config.sweep.clip, config.budget),
                     scfg, noise, config.sweep.clip);
  }
  if (!config.record_timings) result.wall_time_seconds = 0.0;

  nlohmann::json j = mechanism_output_to_json(result);
  j["kappa"] = config.single.kappa;
  j["run"] = config.single.run;
  j["dataset_hash"] = detail::hex64(instance_hash(inst));
  const std::string text = j.dump(2) + "\n";
  out << text;
  std::ofstream f(std::filesystem::path(config.out_dir) / "run.json",
                  std::ios::binary);
  if (!f) throw std::runtime_error("cannot write run.json");
  f << text;
  return kExitOk;
}

}  // namespace qop

// Command-line front end: calibration reports, the kappa sweep, the
// bound-optimization sweep, the lemma checks and single mechanism runs, all
// driven by one JSON config with flag overrides.

#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qop/harness.hpp"

namespace {

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const qop::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return qop::kExitConfig;
  } catch (const qop::InfeasibleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return qop::kExitConfig;
  } catch (const qop::SolverDivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return qop::kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return qop::kExitNumerical;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private ERM via objective perturbation"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int threads = 0;
  bool timings = false;
  app.add_option("--config", config_path, "JSON config file");
  auto* out_dir_opt = app.add_option("--out-dir", out_dir, "Output directory");
  auto* seed_opt = app.add_option("--seed", seed, "Base seed");
  auto* threads_opt =
      app.add_option("--threads", threads, "Worker threads (0 = auto)");
  app.add_flag("--timings", timings,
               "Record wall times (makes outputs run-dependent)");

  double kappa = 0.0;
  auto* calibrate = app.add_subcommand(
      "calibrate", "Print the spectral constants and noise calibrations");
  auto* cal_kappa_opt = calibrate->add_option(
      "--kappa", kappa, "Box radius for the data-dependent gradient bound");

  auto* sweep =
      app.add_subcommand("sweep-kappa", "Run the mechanisms over the kappa grid");
  bool check = false;
  std::string mechanisms_csv, kappas_csv;
  int runs = 0;
  sweep->add_flag("--check", check,
                  "Assert the scaling properties and exit 3 on failure");
  auto* mechs_opt = sweep->add_option("--mechanisms", mechanisms_csv,
                                      "Comma-separated subset of qop,lop,lop_clip");
  auto* kappas_opt =
      sweep->add_option("--kappas", kappas_csv, "Comma-separated kappa grid");
  auto* runs_opt = sweep->add_option("--runs", runs, "Runs per grid point");

  auto* optimize = app.add_subcommand(
      "optimize-bound", "Optimize the risk bound over the (epsilon, delta) grid");

  int trials = 0;
  auto* lemma = app.add_subcommand(
      "lemma-check", "Run the lemma and random-matrix property suites");
  auto* trials_opt =
      lemma->add_option("--trials", trials, "Trials per property suite");

  std::string mechanism;
  auto* single = app.add_subcommand("run-single", "Execute one mechanism run");
  auto* mech_opt =
      single->add_option("--mechanism", mechanism, "qop | lop | lop_clip");
  auto* single_kappa_opt = single->add_option("--kappa", kappa, "Box radius");

  // global flags remain valid after the subcommand name
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  return guarded([&]() -> int {
    qop::HarnessConfig cfg =
        config_path.empty() ? qop::config_from_json(nlohmann::json::object())
                            : qop::load_config_file(config_path);
    if (out_dir_opt->count()) cfg.out_dir = out_dir;
    if (seed_opt->count()) cfg.seed = seed;
    if (threads_opt->count()) cfg.threads = threads;
    if (timings) cfg.record_timings = true;
    if (mechs_opt->count()) cfg.sweep.mechanisms = split_csv(mechanisms_csv);
    if (kappas_opt->count()) {
      cfg.sweep.kappas.clear();
      for (const auto& item : split_csv(kappas_csv))
        cfg.sweep.kappas.push_back(std::stod(item));
    }
    if (runs_opt->count()) cfg.sweep.runs = runs;
    if (trials_opt->count()) cfg.lemma.trials = trials;
    if (cal_kappa_opt->count() || single_kappa_opt->count())
      cfg.single.kappa = kappa;
    if (mech_opt->count()) cfg.single.mechanism = mechanism;
    cfg.validate();

    if (calibrate->parsed()) return qop::cmd_calibrate(cfg, std::cout);
    if (sweep->parsed()) return qop::cmd_sweep_kappa(cfg, check, std::cout);
    if (optimize->parsed()) return qop::cmd_optimize_bound(cfg, std::cout);
    if (lemma->parsed()) return qop::cmd_lemma_check(cfg, std::cout);
    if (single->parsed()) return qop::cmd_run_single(cfg, std::cout);
    return qop::kExitConfig;
  });
}

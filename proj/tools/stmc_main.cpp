// Command-line front end: run experiments from a config file, compare
// kernels, validate configs, and print analytic oracle values.
//
// Exit codes: 0 success, 2 configuration error, 3 convergence abort.

#include <CLI11.hpp>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "stmc/engine.hpp"
#include "stmc/harness.hpp"
#include "stmc/version.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitConvergence = 3;

struct Overrides {
  std::optional<std::string> kernel;
  std::optional<long long> n_chains;
  std::optional<unsigned long long> seed;
  std::optional<int> repeat;
  std::optional<std::string> output_dir;
  std::optional<unsigned> workers;
  std::optional<double> rho_target;
};

void add_override_flags(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--kernel", ov.kernel, "Override kernel: rwm | mma | romma");
  cmd->add_option("--chains", ov.n_chains, "Override population size N");
  cmd->add_option("--seed", ov.seed, "Override RNG seed");
  cmd->add_option("--repeat", ov.repeat, "Override repeat count");
  cmd->add_option("--out", ov.output_dir, "Override output directory");
  cmd->add_option("--workers", ov.workers, "Override worker thread count");
  cmd->add_option("--rho", ov.rho_target, "Override correlation target");
}

// Flags beat config-file fields; the environment variable only relocates
// outputs (useful for sandboxed CI).
void apply(const Overrides& ov, stmc::harness::ExperimentConfig& cfg) {
  if (ov.kernel) cfg.kernel = stmc::kernel_from_name(*ov.kernel);
  if (ov.n_chains) cfg.n_chains = static_cast<Eigen::Index>(*ov.n_chains);
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.repeat) cfg.repeat = *ov.repeat;
  if (ov.output_dir) cfg.output_dir = *ov.output_dir;
  if (ov.workers) cfg.workers = *ov.workers;
  if (ov.rho_target) cfg.rho_target = *ov.rho_target;
  if (const char* env = std::getenv("STMC_OUTPUT_DIR"); env && !ov.output_dir)
    cfg.output_dir = env;
}

void print_summary(const stmc::harness::RunOutcome& outcome) {
  const auto& s = outcome.summary;
  std::cout << "manifest: " << outcome.manifest_path << '\n';
  if (!std::isnan(s.p_hat))
    std::cout << "p_hat: " << s.p_hat << " +/- " << s.sigma_hat << " (" << s.levels
              << " levels)\n";
  if (!std::isnan(s.log_evidence)) std::cout << "log_evidence: " << s.log_evidence << '\n';
  if (!std::isnan(s.analytic_reference))
    std::cout << "analytic_reference: " << s.analytic_reference << '\n';
  std::cout << "model_evaluations: " << s.model_evals << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential tempered MCMC experiment runner"};
  app.set_version_flag("--version", std::string("stmc ") + stmc::kVersion);
  app.require_subcommand(1);

  std::string config_path;
  Overrides overrides;
  auto* cmd_run = app.add_subcommand("run", "Execute the pipeline described by a config file");
  cmd_run->add_option("config", config_path, "Experiment config (JSON)")->required();
  add_override_flags(cmd_run, overrides);

  std::vector<std::string> compare_paths;
  std::string compare_out;
  auto* cmd_compare =
      app.add_subcommand("compare", "Run several configs (kernels) and tabulate ratios");
  cmd_compare->add_option("configs", compare_paths, "Two or more config files")
      ->required()
      ->expected(-2);
  cmd_compare->add_option("--table", compare_out, "Comparison CSV path (default <out>/comparison.csv)");

  std::string validate_path;
  auto* cmd_validate = app.add_subcommand("validate", "Check a config without running it");
  cmd_validate->add_option("config", validate_path, "Experiment config (JSON)")->required();

  auto* cmd_oracle = app.add_subcommand("oracle", "Print analytic reference values");
  double threshold = 4.5;
  auto* cmd_tail = cmd_oracle->add_subcommand("gaussian-tail", "Standard-normal tail P(x >= t)");
  cmd_tail->add_option("--threshold", threshold, "Tail threshold t")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_run->parsed()) {
      auto cfg = stmc::harness::load_config(config_path);
      apply(overrides, cfg);
      const auto issues = stmc::harness::validate_config(cfg);
      if (!issues.empty()) {
        std::cerr << "config invalid:\n";
        for (const auto& s : issues) std::cerr << "  - " << s << '\n';
        return kExitConfig;
      }
      print_summary(stmc::harness::run(cfg));
      return 0;
    }

    if (cmd_compare->parsed()) {
      std::vector<stmc::harness::ExperimentConfig> configs;
      for (const auto& path : compare_paths) configs.push_back(stmc::harness::load_config(path));
      if (compare_out.empty()) compare_out = configs.front().output_dir + "/comparison.csv";
      const auto rows = stmc::harness::compare(configs, compare_out);
      std::cout << "comparison: " << compare_out << '\n';
      for (const auto& r : rows)
        std::cout << r.kernel << ": evals=" << r.summary.model_evals
                  << " eval_ratio=" << r.eval_ratio << " wall_ratio=" << r.wall_ratio << '\n';
      return 0;
    }

    if (cmd_validate->parsed()) {
      const auto cfg = stmc::harness::load_config(validate_path);
      const auto issues = stmc::harness::validate_config(cfg);
      if (issues.empty()) {
        std::cout << "ok\n";
        return 0;
      }
      for (const auto& s : issues) std::cerr << "  - " << s << '\n';
      return kExitConfig;
    }

    if (cmd_tail->parsed()) {
      const double p = stmc::harness::gaussian_tail_probability(threshold);
      std::cout.precision(10);
      std::cout << "P(theta_1 >= " << threshold << ") = " << p << " (log10 " << std::log10(p)
                << ")\n";
      return 0;
    }
  } catch (const stmc::ConvergenceAbort& e) {
    std::cerr << "convergence abort: " << e.what() << '\n';
    return kExitConvergence;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

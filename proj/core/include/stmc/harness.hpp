#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stmc/engine.hpp"
#include "stmc/hydro/network.hpp"
#include "stmc/hydro/observation.hpp"

namespace stmc::harness {

enum class Pipeline { PriorFail, Update, PosteriorFail, EvidenceDemo, EssTable };

Pipeline pipeline_from_name(const std::string& name);
const char* pipeline_name(Pipeline p);

struct MarginalSpec {
  std::string type = "gaussian";  // gaussian | exponential | uniform
  double mean = 0.0;
  double sd = 1.0;
  double lo = 0.0;
  double hi = 1.0;
};

// Dataset for updating pipelines: either CSV files on disk or a synthetic
// set generated from a documented seed and persisted with the run outputs.
struct DatasetConfig {
  bool synthetic = true;
  std::string conditions_path;
  std::string observations_path;
  // synthetic generation
  std::uint64_t seed = 2024;
  int n_conditions = 10;
  double noise_sd = 1.0;
  bool truth_from_prior = true;                     // baseline leaks drawn from the prior
  std::uint64_t truth_seed = 7;
  std::vector<std::pair<int, double>> truth_leaks;  // (pipe id, coeff) overrides
};

struct ExperimentConfig {
  Pipeline pipeline = Pipeline::PriorFail;
  std::string problem = "network";  // network | gaussian-tail | conjugate-gaussian
  KernelKind kernel = KernelKind::Romma;
  Eigen::Index n_chains = 1024;
  double kappa_star = 1.0;
  double kappa = 0.5;
  double rho_target = 0.6;
  double alpha_target = 0.234;
  double gain = 2.1;
  double sigma0 = 1.0;
  std::optional<CorrMeasure> corr_measure;
  int corr_block = 5;
  int max_chain_len = 200;
  int max_levels = 40;
  std::uint64_t seed = 1;
  int repeat = 1;
  unsigned workers = 0;  // 0: hardware concurrency
  std::string output_dir = "out";
  bool write_populations = true;

  // network problem
  std::string network_path;
  double min_head_m = 30.0;
  MarginalSpec demand_prior{"gaussian", 0.75, 0.15, 0.0, 0.0};
  MarginalSpec leak_size_prior{"exponential", 0.002, 0.0, 0.0, 0.0};
  MarginalSpec leak_pos_prior{"uniform", 0.0, 0.0, 0.0, 1.0};
  DatasetConfig dataset;

  // gaussian-tail problem
  double tail_threshold = 4.5;
  int tail_dim = 2;

  // conjugate-gaussian problem
  int conjugate_n_obs = 5;
  double conjugate_obs_sd = 1.0;
  double conjugate_truth = 0.7;
  std::uint64_t conjugate_data_seed = 11;

  std::string to_canonical_json() const;  // sorted keys; basis of the config hash
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

// Configuration problems, empty when the config is runnable. All checks run
// before any compute.
std::vector<std::string> validate_config(const ExperimentConfig& cfg);

struct RunSummary {
  double p_hat = std::numeric_limits<double>::quiet_NaN();
  double sigma_hat = std::numeric_limits<double>::quiet_NaN();
  double log_evidence = std::numeric_limits<double>::quiet_NaN();
  double analytic_reference = std::numeric_limits<double>::quiet_NaN();
  int levels = 0;
  std::uint64_t model_evals = 0;
  double wall_seconds = 0.0;
};

struct RunOutcome {
  RunSummary summary;
  std::string manifest_path;
  std::string config_hash;
  std::vector<std::string> artifacts;
};

// Execute one experiment and write manifest.json, schedule JSONL files,
// population CSVs and plotdata.csv under cfg.output_dir. With repeat > 1 the
// run is repeated with seed, seed+1, ... and a repeats.csv is emitted; the
// summary is the first repeat's.
RunOutcome run(const ExperimentConfig& cfg);

// Run several configs that differ only in kernel and write a side-by-side
// comparison CSV with evaluation/wall-time ratios against the first config.
struct ComparisonRow {
  std::string kernel;
  RunSummary summary;
  double eval_ratio = 1.0;
  double wall_ratio = 1.0;
};
std::vector<ComparisonRow> compare(const std::vector<ExperimentConfig>& configs,
                                   const std::string& output_csv);

// Analytic standard-normal tail P(theta_1 >= t), the gaussian-tail oracle.
double gaussian_tail_probability(double threshold);

}  // namespace stmc::harness

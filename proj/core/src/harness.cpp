#include "stmc/harness.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "stmc/hydro/network_io.hpp"
#include "stmc/version.hpp"

namespace stmc::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

json marginal_to_json(const MarginalSpec& m) {
  if (m.type == "gaussian") return {{"type", m.type}, {"mean", m.mean}, {"sd", m.sd}};
  if (m.type == "exponential") return {{"type", m.type}, {"mean", m.mean}};
  return {{"type", m.type}, {"lo", m.lo}, {"hi", m.hi}};
}

MarginalSpec marginal_from_json(const json& j, const std::string& where) {
  MarginalSpec m;
  m.type = j.at("type").get<std::string>();
  if (m.type == "gaussian") {
    m.mean = j.at("mean").get<double>();
    m.sd = j.at("sd").get<double>();
  } else if (m.type == "exponential") {
    m.mean = j.at("mean").get<double>();
  } else if (m.type == "uniform") {
    m.lo = j.at("lo").get<double>();
    m.hi = j.at("hi").get<double>();
  } else {
    throw std::invalid_argument("config: " + where + ": unknown marginal type '" + m.type + "'");
  }
  return m;
}

Marginal make_marginal(const MarginalSpec& m) {
  if (m.type == "gaussian") return GaussianMarginal{m.mean, m.sd};
  if (m.type == "exponential") return ExponentialMarginal{m.mean};
  return UniformMarginal{m.lo, m.hi};
}

void require_known_keys(const json& j, const std::vector<std::string>& known,
                        const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const auto& k : known)
      if (k == key) ok = true;
    if (!ok) throw std::invalid_argument("config: unknown key '" + key + "' in " + where);
  }
}

EngineConfig engine_config(const ExperimentConfig& cfg, std::uint64_t seed) {
  EngineConfig e;
  e.kernel = cfg.kernel;
  e.n_chains = cfg.n_chains;
  e.kappa_star = cfg.kappa_star;
  e.kappa = cfg.kappa;
  e.rho_target = cfg.rho_target;
  e.corr_measure = cfg.corr_measure;
  e.sigma0 = cfg.sigma0;
  e.alpha_target = cfg.alpha_target;
  e.gain = cfg.gain;
  e.corr_block = cfg.corr_block;
  e.max_chain_len = cfg.max_chain_len;
  e.max_levels = cfg.max_levels;
  e.seed = seed;
  e.workers = cfg.workers == 0 ? default_workers() : cfg.workers;
  return e;
}

// Everything a pipeline needs to run, independent of which test problem
// produced it.
struct ProblemSetup {
  std::shared_ptr<const BlockPrior> prior;
  std::shared_ptr<const LogLikelihood> likelihood;
  std::shared_ptr<const FailureFn> failure;
  std::shared_ptr<const hydro::NetworkSpec> network;
  double analytic_reference = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> artifacts;
};

std::shared_ptr<const BlockPrior> network_prior(const hydro::NetworkSpec& net,
                                                const ExperimentConfig& cfg) {
  auto layout = hydro::make_theta_layout(net);
  std::vector<Marginal> marginals;
  append_block(marginals, static_cast<std::size_t>(net.n_demand_nodes()),
               make_marginal(cfg.demand_prior));
  append_block(marginals, static_cast<std::size_t>(net.n_pipes()),
               make_marginal(cfg.leak_size_prior));
  append_block(marginals, static_cast<std::size_t>(net.n_pipes()),
               make_marginal(cfg.leak_pos_prior));
  return std::make_shared<BlockPrior>(layout, std::move(marginals));
}

hydro::HeadObservationSet obtain_dataset(const hydro::NetworkSpec& net,
                                         const ExperimentConfig& cfg, const fs::path& out_dir,
                                         ProblemSetup& setup) {
  const DatasetConfig& ds = cfg.dataset;
  if (!ds.synthetic) return hydro::load_observations(net, ds.conditions_path, ds.observations_path,
                                                     ds.noise_sd);

  hydro::SyntheticTruth truth;
  truth.leak_coeff = Eigen::VectorXd::Zero(net.n_pipes());
  truth.leak_position = Eigen::VectorXd::Constant(net.n_pipes(), 0.5);
  RngStream rng(mix_seed({ds.truth_seed, 0x7247ULL}));
  if (ds.truth_from_prior) {
    const Marginal size_m = make_marginal(cfg.leak_size_prior);
    const Marginal pos_m = make_marginal(cfg.leak_pos_prior);
    for (Eigen::Index k = 0; k < net.n_pipes(); ++k) {
      truth.leak_coeff[k] = std::max(marginal_sample(size_m, rng), 0.0);
      truth.leak_position[k] = marginal_sample(pos_m, rng);
    }
  }
  for (const auto& [pipe_id, coeff] : ds.truth_leaks)
    truth.leak_coeff[net.pipe_index(pipe_id)] = coeff;

  const auto data = hydro::make_synthetic_observations(
      net, truth, ds.n_conditions, ds.noise_sd, cfg.demand_prior.mean, cfg.demand_prior.sd,
      ds.seed);

  const auto cond = (out_dir / "conditions.csv").string();
  const auto obs = (out_dir / "observations.csv").string();
  hydro::save_observations(net, data, cond, obs);
  json truth_json{{"seed", ds.seed},
                  {"truth_seed", ds.truth_seed},
                  {"noise_sd", ds.noise_sd},
                  {"leak_coeff", std::vector<double>(truth.leak_coeff.data(),
                                                     truth.leak_coeff.data() + net.n_pipes())},
                  {"leak_position",
                   std::vector<double>(truth.leak_position.data(),
                                       truth.leak_position.data() + net.n_pipes())}};
  std::ofstream(out_dir / "truth.json") << truth_json.dump(2) << '\n';
  setup.artifacts.push_back(cond);
  setup.artifacts.push_back(obs);
  setup.artifacts.push_back((out_dir / "truth.json").string());
  return data;
}

ProblemSetup build_problem(const ExperimentConfig& cfg, const fs::path& out_dir,
                           bool needs_likelihood, bool needs_failure) {
  ProblemSetup setup;
  if (cfg.problem == "network") {
    auto net = std::make_shared<const hydro::NetworkSpec>(hydro::load_network(cfg.network_path));
    setup.network = net;
    setup.prior = network_prior(*net, cfg);
    if (needs_failure) setup.failure = hydro::make_failure_fn(net, cfg.min_head_m);
    if (needs_likelihood)
      setup.likelihood = hydro::make_head_likelihood(net, obtain_dataset(*net, cfg, out_dir, setup));
    return setup;
  }

  if (cfg.problem == "gaussian-tail") {
    auto layout = std::make_shared<BlockLayout>();
    layout->add_block("theta", static_cast<std::size_t>(cfg.tail_dim));
    std::vector<Marginal> marginals;
    append_block(marginals, static_cast<std::size_t>(cfg.tail_dim), GaussianMarginal{0.0, 1.0});
    setup.prior = std::make_shared<BlockPrior>(layout, std::move(marginals));
    auto fail = std::make_shared<FailureFn>();
    auto counter = fail->evals;
    const double threshold = cfg.tail_threshold;
    fail->fn = [threshold, counter](const Eigen::VectorXd& theta) {
      counter->fetch_add(1, std::memory_order_relaxed);
      return theta[0] / threshold;
    };
    setup.failure = std::move(fail);
    setup.analytic_reference = gaussian_tail_probability(cfg.tail_threshold);
    if (needs_likelihood) {
      // Constant likelihood: the posterior is the prior. Used by composition
      // checks of the posterior-fail pipeline.
      auto like = std::make_shared<LogLikelihood>();
      auto lcounter = like->evals;
      like->fn = [lcounter](const Eigen::VectorXd&) {
        lcounter->fetch_add(1, std::memory_order_relaxed);
        return 0.0;
      };
      setup.likelihood = std::move(like);
    }
    return setup;
  }

  if (cfg.problem == "conjugate-gaussian") {
    auto layout = std::make_shared<BlockLayout>();
    layout->add_block("theta", 1);
    setup.prior = std::make_shared<BlockPrior>(layout, std::vector<Marginal>{GaussianMarginal{0.0, 1.0}});
    RngStream rng(mix_seed({cfg.conjugate_data_seed, 0xc0daULL}));
    auto data = std::make_shared<Eigen::VectorXd>(cfg.conjugate_n_obs);
    for (Eigen::Index i = 0; i < data->size(); ++i)
      (*data)[i] = cfg.conjugate_truth + cfg.conjugate_obs_sd * rng.normal();

    const double obs_sd = cfg.conjugate_obs_sd;
    auto like = std::make_shared<LogLikelihood>();
    auto counter = like->evals;
    like->fn = [data, obs_sd, counter](const Eigen::VectorXd& theta) {
      counter->fetch_add(1, std::memory_order_relaxed);
      double ll = 0.0;
      for (Eigen::Index i = 0; i < data->size(); ++i) {
        const double z = ((*data)[i] - theta[0]) / obs_sd;
        ll += -0.5 * z * z - std::log(obs_sd) - 0.91893853320467274178;
      }
      return ll;
    };
    setup.likelihood = std::move(like);

    // Closed-form evidence of the conjugate pair.
    const double n = static_cast<double>(cfg.conjugate_n_obs);
    const double v = obs_sd * obs_sd;
    const double sum = data->sum();
    const double sum_sq = data->squaredNorm();
    const double log_det = n * std::log(v) + std::log1p(n / v);
    const double quad = sum_sq / v - (sum * sum) / (v * (v + n));
    setup.analytic_reference =
        -0.5 * (n * std::log(2.0 * M_PI) + log_det + quad);
    return setup;
  }

  throw std::invalid_argument("config: unknown problem '" + cfg.problem + "'");
}

std::uint64_t setup_eval_count(const ProblemSetup& s) {
  std::uint64_t n = 0;
  if (s.likelihood) n += s.likelihood->eval_count();
  if (s.failure) n += s.failure->eval_count();
  return n;
}

void write_population_csv(const Population& pop, const BlockLayout& layout,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  for (const auto& b : layout.blocks())
    for (std::size_t i = 0; i < b.length; ++i) out << b.name << '[' << i << "],";
  out << "log_prior,log_like,failure\n";
  for (Eigen::Index s = 0; s < pop.size(); ++s) {
    for (Eigen::Index r = 0; r < pop.dim(); ++r) out << pop.samples(r, s) << ',';
    out << pop.log_prior[s] << ',' << pop.log_like[s] << ',' << pop.failure[s] << '\n';
  }
}

void write_plotdata_csv(const std::vector<std::pair<std::string, const LevelSchedule*>>& phases,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  out << "phase,level,beta,chain_len,sigma,stage2_rate,min_component_rate,model_evals,"
         "cum_model_evals\n";
  std::uint64_t cum = 0;
  for (const auto& [name, sched] : phases) {
    for (const auto& r : sched->rows) {
      cum += r.model_evals;
      out << name << ',' << r.level << ',' << r.beta << ',' << r.chain_len << ',' << r.sigma
          << ',' << r.stage2_rate << ',' << r.min_component_rate << ',' << r.model_evals << ','
          << cum << '\n';
    }
  }
}

struct PipelineOutputs {
  RunSummary summary;
  std::vector<std::pair<std::string, LevelSchedule>> schedules;
  std::vector<std::pair<std::string, Population>> populations;
};

PipelineOutputs execute_pipeline(const ExperimentConfig& cfg, const ProblemSetup& setup,
                                 std::uint64_t seed) {
  PipelineOutputs out;
  const EngineConfig ecfg = engine_config(cfg, seed);
  const auto t0 = Clock::now();
  const std::uint64_t evals0 = setup_eval_count(setup);

  switch (cfg.pipeline) {
    case Pipeline::PriorFail: {
      auto res = run_subset(setup.prior, setup.failure, nullptr, ecfg);
      out.summary.p_hat = res.p_hat;
      out.summary.sigma_hat = res.sigma_hat;
      out.summary.levels = res.levels;
      out.schedules.emplace_back("failure", std::move(res.schedule));
      out.populations.emplace_back("failure_population", std::move(res.failure_population));
      break;
    }
    case Pipeline::Update:
    case Pipeline::EvidenceDemo: {
      auto res = run_updating(setup.prior, setup.likelihood, ecfg);
      out.summary.log_evidence = res.log_evidence;
      out.summary.levels = static_cast<int>(res.schedule.rows.size()) - 1;
      out.schedules.emplace_back("updating", std::move(res.schedule));
      out.populations.emplace_back("posterior", std::move(res.posterior));
      break;
    }
    case Pipeline::PosteriorFail: {
      auto res = run_posterior_reliability(setup.prior, setup.likelihood, setup.failure, ecfg);
      out.summary.p_hat = res.subset.p_hat;
      out.summary.sigma_hat = res.subset.sigma_hat;
      out.summary.log_evidence = res.updating.log_evidence;
      out.summary.levels = res.subset.levels;
      out.schedules.emplace_back("updating", std::move(res.updating.schedule));
      out.schedules.emplace_back("failure", std::move(res.subset.schedule));
      out.populations.emplace_back("posterior", std::move(res.updating.posterior));
      out.populations.emplace_back("failure_population", std::move(res.subset.failure_population));
      break;
    }
    case Pipeline::EssTable:
      throw std::logic_error("execute_pipeline: ess-table handled separately");
  }

  out.summary.model_evals = setup_eval_count(setup) - evals0;
  out.summary.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  out.summary.analytic_reference = setup.analytic_reference;
  return out;
}

json summary_to_json(const RunSummary& s) {
  return {{"p_hat", s.p_hat},
          {"sigma_hat", s.sigma_hat},
          {"log_evidence", s.log_evidence},
          {"analytic_reference", s.analytic_reference},
          {"levels", s.levels},
          {"model_evaluations", s.model_evals}};
}

RunOutcome run_ess_table(const ExperimentConfig& cfg, const fs::path& out_dir) {
  RunOutcome outcome;
  const auto path = (out_dir / "ess_table.csv").string();
  std::ofstream out(path);
  out.precision(10);
  out << "kappa,rho,n,levels,learning,fixed_point,ess_final\n";
  const std::vector<double> kappas{0.25, 0.5, 1.0, 2.0};
  for (double kappa : kappas) {
    for (int ri = 1; ri <= 19; ++ri) {
      const double rho = 0.05 * ri;
      const auto pred = predict_ess(kappa, rho, static_cast<double>(cfg.n_chains),
                                    cfg.max_levels);
      out << kappa << ',' << rho << ',' << cfg.n_chains << ',' << cfg.max_levels << ','
          << (pred.learning ? 1 : 0) << ',' << pred.fixed_point << ','
          << pred.trajectory.back() << '\n';
    }
  }
  outcome.artifacts.push_back(path);
  return outcome;
}

}  // namespace

Pipeline pipeline_from_name(const std::string& name) {
  if (name == "prior-fail") return Pipeline::PriorFail;
  if (name == "update") return Pipeline::Update;
  if (name == "posterior-fail") return Pipeline::PosteriorFail;
  if (name == "evidence-demo") return Pipeline::EvidenceDemo;
  if (name == "ess-table") return Pipeline::EssTable;
  throw std::invalid_argument("unknown pipeline: " + name);
}

const char* pipeline_name(Pipeline p) {
  switch (p) {
    case Pipeline::PriorFail: return "prior-fail";
    case Pipeline::Update: return "update";
    case Pipeline::PosteriorFail: return "posterior-fail";
    case Pipeline::EvidenceDemo: return "evidence-demo";
    default: return "ess-table";
  }
}

std::string ExperimentConfig::to_canonical_json() const {
  json j;
  j["pipeline"] = pipeline_name(pipeline);
  j["problem"] = problem;
  j["kernel"] = kernel_name(kernel);
  j["n_chains"] = n_chains;
  j["kappa_star"] = kappa_star;
  j["kappa"] = kappa;
  j["rho_target"] = rho_target;
  j["alpha_target"] = alpha_target;
  j["gain"] = gain;
  j["sigma0"] = sigma0;
  if (corr_measure)
    j["corr_measure"] = *corr_measure == CorrMeasure::Cca ? "cca" : "log-target";
  j["corr_block"] = corr_block;
  j["max_chain_len"] = max_chain_len;
  j["max_levels"] = max_levels;
  j["seed"] = seed;
  j["repeat"] = repeat;
  j["output_dir"] = output_dir;
  j["write_populations"] = write_populations;
  j["network"] = network_path;
  j["min_head_m"] = min_head_m;
  j["priors"] = {{"demand_factor", marginal_to_json(demand_prior)},
                 {"leak_size", marginal_to_json(leak_size_prior)},
                 {"leak_pos", marginal_to_json(leak_pos_prior)}};
  j["dataset"] = {{"synthetic", dataset.synthetic},
                  {"conditions", dataset.conditions_path},
                  {"observations", dataset.observations_path},
                  {"seed", dataset.seed},
                  {"n_conditions", dataset.n_conditions},
                  {"noise_sd", dataset.noise_sd},
                  {"truth_from_prior", dataset.truth_from_prior},
                  {"truth_seed", dataset.truth_seed},
                  {"truth_leaks", dataset.truth_leaks}};
  j["tail_threshold"] = tail_threshold;
  j["tail_dim"] = tail_dim;
  j["conjugate"] = {{"n_obs", conjugate_n_obs},
                    {"obs_sd", conjugate_obs_sd},
                    {"truth", conjugate_truth},
                    {"data_seed", conjugate_data_seed}};
  return j.dump();
}

ExperimentConfig parse_config(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw std::invalid_argument("config: malformed JSON");

  require_known_keys(
      j,
      {"pipeline", "problem", "kernel", "n_chains", "kappa_star", "kappa", "rho_target",
       "alpha_target", "gain", "sigma0", "corr_measure", "corr_block", "max_chain_len",
       "max_levels", "seed", "repeat", "workers", "output_dir", "write_populations", "network",
       "min_head_m", "priors", "dataset", "tail_threshold", "tail_dim", "conjugate"},
      "top level");

  ExperimentConfig cfg;
  try {
    cfg.pipeline = pipeline_from_name(j.at("pipeline").get<std::string>());
    cfg.problem = j.value("problem", cfg.problem);
    if (j.contains("kernel")) cfg.kernel = kernel_from_name(j.at("kernel").get<std::string>());
    cfg.n_chains = j.value("n_chains", cfg.n_chains);
    cfg.kappa_star = j.value("kappa_star", cfg.kappa_star);
    cfg.kappa = j.value("kappa", cfg.kappa);
    cfg.rho_target = j.value("rho_target", cfg.rho_target);
    cfg.alpha_target = j.value("alpha_target", cfg.alpha_target);
    cfg.gain = j.value("gain", cfg.gain);
    cfg.sigma0 = j.value("sigma0", cfg.sigma0);
    if (j.contains("corr_measure")) {
      const std::string m = j.at("corr_measure").get<std::string>();
      if (m == "cca")
        cfg.corr_measure = CorrMeasure::Cca;
      else if (m == "log-target")
        cfg.corr_measure = CorrMeasure::LogTarget;
      else
        throw std::invalid_argument("config: unknown corr_measure '" + m + "'");
    }
    cfg.corr_block = j.value("corr_block", cfg.corr_block);
    cfg.max_chain_len = j.value("max_chain_len", cfg.max_chain_len);
    cfg.max_levels = j.value("max_levels", cfg.max_levels);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.repeat = j.value("repeat", cfg.repeat);
    cfg.workers = j.value("workers", cfg.workers);
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    cfg.write_populations = j.value("write_populations", cfg.write_populations);
    cfg.network_path = j.value("network", cfg.network_path);
    cfg.min_head_m = j.value("min_head_m", cfg.min_head_m);
    if (j.contains("priors")) {
      const auto& jp = j.at("priors");
      require_known_keys(jp, {"demand_factor", "leak_size", "leak_pos"}, "priors");
      if (jp.contains("demand_factor"))
        cfg.demand_prior = marginal_from_json(jp.at("demand_factor"), "priors.demand_factor");
      if (jp.contains("leak_size"))
        cfg.leak_size_prior = marginal_from_json(jp.at("leak_size"), "priors.leak_size");
      if (jp.contains("leak_pos"))
        cfg.leak_pos_prior = marginal_from_json(jp.at("leak_pos"), "priors.leak_pos");
    }
    if (j.contains("dataset")) {
      const auto& jd = j.at("dataset");
      require_known_keys(jd,
                         {"synthetic", "conditions", "observations", "seed", "n_conditions",
                          "noise_sd", "truth_from_prior", "truth_seed", "truth_leaks"},
                         "dataset");
      cfg.dataset.synthetic = jd.value("synthetic", cfg.dataset.synthetic);
      cfg.dataset.conditions_path = jd.value("conditions", cfg.dataset.conditions_path);
      cfg.dataset.observations_path = jd.value("observations", cfg.dataset.observations_path);
      cfg.dataset.seed = jd.value("seed", cfg.dataset.seed);
      cfg.dataset.n_conditions = jd.value("n_conditions", cfg.dataset.n_conditions);
      cfg.dataset.noise_sd = jd.value("noise_sd", cfg.dataset.noise_sd);
      cfg.dataset.truth_from_prior = jd.value("truth_from_prior", cfg.dataset.truth_from_prior);
      cfg.dataset.truth_seed = jd.value("truth_seed", cfg.dataset.truth_seed);
      if (jd.contains("truth_leaks"))
        cfg.dataset.truth_leaks =
            jd.at("truth_leaks").get<std::vector<std::pair<int, double>>>();
    }
    cfg.tail_threshold = j.value("tail_threshold", cfg.tail_threshold);
    cfg.tail_dim = j.value("tail_dim", cfg.tail_dim);
    if (j.contains("conjugate")) {
      const auto& jc = j.at("conjugate");
      require_known_keys(jc, {"n_obs", "obs_sd", "truth", "data_seed"}, "conjugate");
      cfg.conjugate_n_obs = jc.value("n_obs", cfg.conjugate_n_obs);
      cfg.conjugate_obs_sd = jc.value("obs_sd", cfg.conjugate_obs_sd);
      cfg.conjugate_truth = jc.value("truth", cfg.conjugate_truth);
      cfg.conjugate_data_seed = jc.value("data_seed", cfg.conjugate_data_seed);
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::vector<std::string> validate_config(const ExperimentConfig& cfg) {
  std::vector<std::string> problems;
  const bool subset_pipeline =
      cfg.pipeline == Pipeline::PriorFail || cfg.pipeline == Pipeline::PosteriorFail;
  const bool update_pipeline = cfg.pipeline == Pipeline::Update ||
                               cfg.pipeline == Pipeline::PosteriorFail ||
                               cfg.pipeline == Pipeline::EvidenceDemo;

  if (cfg.n_chains < 2) problems.push_back("n_chains must be at least 2");
  if (!(cfg.kappa > 0.0 && cfg.kappa < 1.0)) problems.push_back("kappa must lie in (0,1)");
  if (!(cfg.kappa_star > 0.0)) problems.push_back("kappa_star must be positive");
  if (!(cfg.rho_target > 0.0 && cfg.rho_target <= 1.0))
    problems.push_back("rho_target must lie in (0,1]");
  if (!(cfg.sigma0 > 0.0)) problems.push_back("sigma0 must be positive");
  if (cfg.repeat < 1) problems.push_back("repeat must be >= 1");
  if (cfg.corr_block < 1) problems.push_back("corr_block must be >= 1");
  if (cfg.max_chain_len < cfg.corr_block)
    problems.push_back("max_chain_len must be >= corr_block");
  if (cfg.max_levels < 1) problems.push_back("max_levels must be >= 1");
  if (subset_pipeline) {
    const double prod = static_cast<double>(cfg.n_chains) * cfg.kappa;
    if (std::abs(prod - std::round(prod)) > 1e-9)
      problems.push_back("n_chains * kappa must be an integer (seed replication)");
  }

  if (cfg.pipeline == Pipeline::EssTable) return problems;  // pure prediction, no problem setup

  if (cfg.problem == "network") {
    if (cfg.network_path.empty()) {
      problems.push_back("network problem requires a network path");
    } else if (!fs::exists(cfg.network_path)) {
      problems.push_back("network file does not exist: " + cfg.network_path);
    }
    if (update_pipeline && !cfg.dataset.synthetic) {
      if (!fs::exists(cfg.dataset.conditions_path))
        problems.push_back("conditions file does not exist: " + cfg.dataset.conditions_path);
      if (!fs::exists(cfg.dataset.observations_path))
        problems.push_back("observations file does not exist: " + cfg.dataset.observations_path);
    }
    if (update_pipeline && cfg.dataset.synthetic && cfg.dataset.n_conditions < 1)
      problems.push_back("dataset.n_conditions must be >= 1");
  } else if (cfg.problem == "gaussian-tail") {
    if (cfg.tail_dim < 1) problems.push_back("tail_dim must be >= 1");
    if (!(cfg.tail_threshold > 0.0)) problems.push_back("tail_threshold must be positive");
    if (update_pipeline && cfg.pipeline != Pipeline::PosteriorFail)
      problems.push_back("gaussian-tail supports prior-fail and posterior-fail only");
  } else if (cfg.problem == "conjugate-gaussian") {
    if (cfg.conjugate_n_obs < 1) problems.push_back("conjugate.n_obs must be >= 1");
    if (!(cfg.conjugate_obs_sd > 0.0)) problems.push_back("conjugate.obs_sd must be positive");
    if (subset_pipeline) problems.push_back("conjugate-gaussian has no failure function");
  } else if (cfg.pipeline != Pipeline::EssTable) {
    problems.push_back("unknown problem '" + cfg.problem + "'");
  }
  return problems;
}

RunOutcome run(const ExperimentConfig& cfg) {
  const auto issues = validate_config(cfg);
  if (!issues.empty()) {
    std::string msg = "config invalid:";
    for (const auto& s : issues) msg += "\n  - " + s;
    throw std::invalid_argument(msg);
  }

  const fs::path out_dir(cfg.output_dir);
  fs::create_directories(out_dir);

  if (cfg.pipeline == Pipeline::EssTable) {
    RunOutcome outcome = run_ess_table(cfg, out_dir);
    outcome.config_hash = fnv1a_hex(cfg.to_canonical_json());
    json manifest{{"version", kVersion},
                  {"config_hash", outcome.config_hash},
                  {"pipeline", pipeline_name(cfg.pipeline)},
                  {"artifacts", outcome.artifacts}};
    outcome.manifest_path = (out_dir / "manifest.json").string();
    std::ofstream(outcome.manifest_path) << manifest.dump(2) << '\n';
    return outcome;
  }

  const bool needs_likelihood = cfg.pipeline == Pipeline::Update ||
                                cfg.pipeline == Pipeline::PosteriorFail ||
                                cfg.pipeline == Pipeline::EvidenceDemo;
  const bool needs_failure =
      cfg.pipeline == Pipeline::PriorFail || cfg.pipeline == Pipeline::PosteriorFail;

  RunOutcome outcome;
  outcome.config_hash = fnv1a_hex(cfg.to_canonical_json());

  ProblemSetup setup = build_problem(cfg, out_dir, needs_likelihood, needs_failure);
  outcome.artifacts = setup.artifacts;

  // Canonical-correlation chain-length control needs more chains than
  // parameters; catch that here rather than levels deep into a run.
  const bool uses_cca = needs_likelihood &&
                        cfg.corr_measure.value_or(CorrMeasure::Cca) == CorrMeasure::Cca;
  if (uses_cca && setup.prior &&
      cfg.n_chains <= static_cast<Eigen::Index>(setup.prior->dim()))
    throw std::invalid_argument(
        "config invalid:\n  - updating with CCA chain-length control needs n_chains > " +
        std::to_string(setup.prior->dim()) + " (the parameter dimension)");

  std::vector<PipelineOutputs> repeats;
  repeats.reserve(static_cast<std::size_t>(cfg.repeat));
  for (int r = 0; r < cfg.repeat; ++r)
    repeats.push_back(execute_pipeline(cfg, setup, cfg.seed + static_cast<std::uint64_t>(r)));
  const PipelineOutputs& first = repeats.front();
  outcome.summary = first.summary;

  // Artifacts come from the first repeat; additional repeats contribute one
  // summary row each.
  for (const auto& [phase, sched] : first.schedules) {
    const auto path = (out_dir / ("schedule_" + phase + ".jsonl")).string();
    std::ofstream(path) << sched.to_jsonl();
    outcome.artifacts.push_back(path);
  }
  if (cfg.write_populations && setup.prior) {
    for (const auto& [name, pop] : first.populations) {
      const auto path = (out_dir / (name + ".csv")).string();
      write_population_csv(pop, setup.prior->layout(), path);
      outcome.artifacts.push_back(path);
    }
  }
  {
    std::vector<std::pair<std::string, const LevelSchedule*>> phases;
    for (const auto& [phase, sched] : first.schedules) phases.emplace_back(phase, &sched);
    const auto path = (out_dir / "plotdata.csv").string();
    write_plotdata_csv(phases, path);
    outcome.artifacts.push_back(path);
  }
  if (cfg.repeat > 1) {
    const auto path = (out_dir / "repeats.csv").string();
    std::ofstream out(path);
    out.precision(17);
    out << "repeat,seed,p_hat,sigma_hat,log_evidence,levels,model_evals\n";
    for (int r = 0; r < cfg.repeat; ++r) {
      const auto& s = repeats[static_cast<std::size_t>(r)].summary;
      out << r << ',' << cfg.seed + static_cast<std::uint64_t>(r) << ',' << s.p_hat << ','
          << s.sigma_hat << ',' << s.log_evidence << ',' << s.levels << ',' << s.model_evals
          << '\n';
    }
    outcome.artifacts.push_back(path);
  }

  double wall_total = 0.0;
  for (const auto& r : repeats) wall_total += r.summary.wall_seconds;
  json manifest{{"version", kVersion},
                {"config_hash", outcome.config_hash},
                {"pipeline", pipeline_name(cfg.pipeline)},
                {"kernel", kernel_name(cfg.kernel)},
                {"problem", cfg.problem},
                {"seed", cfg.seed},
                {"repeat", cfg.repeat},
                {"result", summary_to_json(outcome.summary)},
                {"model_evaluations", outcome.summary.model_evals},
                {"artifacts", outcome.artifacts},
                // Timing is the one non-deterministic section of the manifest.
                {"timing", {{"wall_seconds_total", wall_total}}}};
  outcome.manifest_path = (out_dir / "manifest.json").string();
  std::ofstream(outcome.manifest_path) << manifest.dump(2) << '\n';
  return outcome;
}

std::vector<ComparisonRow> compare(const std::vector<ExperimentConfig>& configs,
                                   const std::string& output_csv) {
  if (configs.size() < 2) throw std::invalid_argument("compare: need at least two configs");
  for (std::size_t i = 1; i < configs.size(); ++i) {
    if (configs[i].pipeline != configs[0].pipeline)
      throw std::invalid_argument("compare: configs must share one pipeline");
    if (configs[i].problem != configs[0].problem)
      throw std::invalid_argument("compare: configs must share one problem");
  }

  std::vector<ComparisonRow> rows;
  for (const auto& cfg : configs) {
    ExperimentConfig sub = cfg;
    sub.output_dir = (fs::path(cfg.output_dir) / kernel_name(cfg.kernel)).string();
    const RunOutcome outcome = run(sub);
    ComparisonRow row;
    row.kernel = kernel_name(cfg.kernel);
    row.summary = outcome.summary;
    rows.push_back(row);
  }
  for (auto& row : rows) {
    row.eval_ratio = static_cast<double>(row.summary.model_evals) /
                     static_cast<double>(std::max<std::uint64_t>(rows[0].summary.model_evals, 1));
    row.wall_ratio = row.summary.wall_seconds / std::max(rows[0].summary.wall_seconds, 1e-12);
  }

  std::ofstream out(output_csv);
  if (!out) throw std::runtime_error("compare: cannot write " + output_csv);
  out.precision(17);
  out << "kernel,p_hat,sigma_hat,log_evidence,levels,model_evals,wall_seconds,eval_ratio,"
         "wall_ratio\n";
  for (const auto& r : rows)
    out << r.kernel << ',' << r.summary.p_hat << ',' << r.summary.sigma_hat << ','
        << r.summary.log_evidence << ',' << r.summary.levels << ',' << r.summary.model_evals
        << ',' << r.summary.wall_seconds << ',' << r.eval_ratio << ',' << r.wall_ratio << '\n';
  return rows;
}

double gaussian_tail_probability(double threshold) {
  return 0.5 * std::erfc(threshold / std::sqrt(2.0));
}

}  // namespace stmc::harness

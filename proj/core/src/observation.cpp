#include "stmc/hydro/observation.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace stmc::hydro {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

std::map<int, Eigen::Index> node_columns(const NetworkSpec& net) {
  std::map<int, Eigen::Index> cols;
  Eigen::Index i = 0;
  for (int id : net.demand_node_ids()) cols[id] = i++;
  return cols;
}

Eigen::MatrixXd read_triplet_csv(const NetworkSpec& net, const std::string& path,
                                 const std::string& value_name) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("observations: cannot open " + path);
  const auto cols = node_columns(net);

  std::map<int, Eigen::VectorXd> rows;
  std::string line;
  std::getline(in, line);  // header
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string cell;
    int condition = 0, node = 0;
    double value = 0.0;
    try {
      std::getline(ss, cell, ',');
      condition = std::stoi(cell);
      std::getline(ss, cell, ',');
      node = std::stoi(cell);
      std::getline(ss, cell, ',');
      value = std::stod(cell);
    } catch (const std::exception&) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": malformed row");
    }
    const auto it = cols.find(node);
    if (it == cols.end())
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": unknown node id " +
                                  std::to_string(node));
    auto [row, inserted] = rows.try_emplace(
        condition, Eigen::VectorXd::Constant(net.n_demand_nodes(),
                                             std::numeric_limits<double>::quiet_NaN()));
    row->second[it->second] = value;
  }

  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), net.n_demand_nodes());
  Eigen::Index r = 0;
  for (const auto& [condition, values] : rows) {
    if (values.hasNaN())
      throw std::invalid_argument(path + ": condition " + std::to_string(condition) +
                                  " is missing a " + value_name + " entry");
    out.row(r++) = values.transpose();
  }
  return out;
}

}  // namespace

HeadObservationSet load_observations(const NetworkSpec& net, const std::string& conditions_csv,
                                     const std::string& observations_csv, double noise_sd) {
  HeadObservationSet data;
  data.demand_factors = read_triplet_csv(net, conditions_csv, "demand factor");
  data.observed_head = read_triplet_csv(net, observations_csv, "head");
  data.noise_sd = noise_sd;
  if (data.demand_factors.rows() != data.observed_head.rows())
    throw std::invalid_argument("observations: condition count differs between the two files");
  return data;
}

void save_observations(const NetworkSpec& net, const HeadObservationSet& data,
                       const std::string& conditions_csv, const std::string& observations_csv) {
  const auto& ids = net.demand_node_ids();
  std::ofstream fc(conditions_csv);
  std::ofstream fo(observations_csv);
  if (!fc || !fo) throw std::invalid_argument("observations: cannot write output files");
  fc << "condition_id,node_id,demand_factor\n";
  fo << "condition_id,node_id,observed_head_m\n";
  fc.precision(17);
  fo.precision(17);
  for (Eigen::Index c = 0; c < data.n_conditions(); ++c) {
    for (Eigen::Index n = 0; n < data.demand_factors.cols(); ++n) {
      fc << c << ',' << ids[static_cast<std::size_t>(n)] << ',' << data.demand_factors(c, n)
         << '\n';
      fo << c << ',' << ids[static_cast<std::size_t>(n)] << ',' << data.observed_head(c, n)
         << '\n';
    }
  }
}

Eigen::VectorXd predict_heads(const NetworkSpec& net, const Eigen::VectorXd& demand_factors,
                              const LeakConfig& leaks) {
  const Eigen::VectorXd demand =
      demand_factors.cwiseProduct(net.reference_demand_m3h()) / 3600.0;
  const HydraulicState sol = solve_network(net, demand, leaks);
  if (!sol.converged) throw std::runtime_error("predict_heads: solver did not converge");
  Eigen::VectorXd heads(net.n_demand_nodes());
  Eigen::Index i = 0;
  for (const auto nrow : net.demand_node_rows())
    heads[i++] = sol.node_head[static_cast<Eigen::Index>(nrow)];
  return heads;
}

HeadObservationSet make_synthetic_observations(const NetworkSpec& net, const SyntheticTruth& truth,
                                               Eigen::Index n_conditions, double noise_sd,
                                               double demand_factor_mean, double demand_factor_sd,
                                               std::uint64_t seed) {
  if (truth.leak_coeff.size() != net.n_pipes() || truth.leak_position.size() != net.n_pipes())
    throw std::invalid_argument("make_synthetic_observations: truth size mismatch");
  HeadObservationSet data;
  data.noise_sd = noise_sd;
  data.demand_factors.resize(n_conditions, net.n_demand_nodes());
  data.observed_head.resize(n_conditions, net.n_demand_nodes());
  const LeakConfig leaks{truth.leak_coeff, truth.leak_position};
  RngStream rng(mix_seed({seed, 0xda7aULL}));
  for (Eigen::Index c = 0; c < n_conditions; ++c) {
    for (Eigen::Index n = 0; n < net.n_demand_nodes(); ++n)
      data.demand_factors(c, n) = demand_factor_mean + demand_factor_sd * rng.normal();
    const Eigen::VectorXd heads = predict_heads(net, data.demand_factors.row(c), leaks);
    for (Eigen::Index n = 0; n < net.n_demand_nodes(); ++n)
      data.observed_head(c, n) = heads[n] + noise_sd * rng.normal();
  }
  return data;
}

std::shared_ptr<LogLikelihood> make_head_likelihood(std::shared_ptr<const NetworkSpec> net,
                                                    HeadObservationSet data) {
  if (!net) throw std::invalid_argument("make_head_likelihood: null network");
  if (data.n_conditions() < 1) throw std::invalid_argument("make_head_likelihood: empty dataset");
  if (data.demand_factors.cols() != net->n_demand_nodes())
    throw std::invalid_argument("make_head_likelihood: dataset/network node count mismatch");

  auto like = std::make_shared<LogLikelihood>();
  auto counter = like->evals;
  auto dataset = std::make_shared<const HeadObservationSet>(std::move(data));
  like->fn = [net, dataset, counter](const Eigen::VectorXd& theta) -> double {
    const DecodedTheta dec = decode_theta(*net, theta);
    const double inv_var = 1.0 / (dataset->noise_sd * dataset->noise_sd);
    const double log_norm = std::log(dataset->noise_sd) + kHalfLog2Pi;
    double ll = 0.0;
    for (Eigen::Index c = 0; c < dataset->n_conditions(); ++c) {
      const Eigen::VectorXd demand =
          dataset->demand_factors.row(c).transpose().cwiseProduct(net->reference_demand_m3h()) /
          3600.0;
      const HydraulicState sol = solve_network(*net, demand, dec.leaks);
      counter->fetch_add(1, std::memory_order_relaxed);
      if (!sol.converged) return -std::numeric_limits<double>::infinity();
      Eigen::Index i = 0;
      for (const auto nrow : net->demand_node_rows()) {
        const double r = dataset->observed_head(c, i) - sol.node_head[static_cast<Eigen::Index>(nrow)];
        ll += -0.5 * r * r * inv_var - log_norm;
        ++i;
      }
    }
    return ll;
  };
  return like;
}

std::shared_ptr<FailureFn> make_failure_fn(std::shared_ptr<const NetworkSpec> net,
                                           double min_head_m) {
  if (!net) throw std::invalid_argument("make_failure_fn: null network");
  auto fail = std::make_shared<FailureFn>();
  auto counter = fail->evals;
  fail->fn = [net, min_head_m, counter](const Eigen::VectorXd& theta) -> double {
    counter->fetch_add(1, std::memory_order_relaxed);
    return failure_value(*net, theta, min_head_m);
  };
  return fail;
}

}  // namespace stmc::hydro

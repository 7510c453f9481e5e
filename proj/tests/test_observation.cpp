#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "stmc/hydro/network_io.hpp"
#include "stmc/hydro/observation.hpp"

using namespace stmc;
using namespace stmc::hydro;

namespace {

NetworkSpec hanoi() { return load_network(std::string(STMC_DATA_DIR) + "/hanoi.json"); }

HeadObservationSet noiseless_dataset(const NetworkSpec& net, const SyntheticTruth& truth,
                                     int n_conditions) {
  HeadObservationSet data;
  data.noise_sd = 1.0;
  data.demand_factors.resize(n_conditions, net.n_demand_nodes());
  data.observed_head.resize(n_conditions, net.n_demand_nodes());
  const LeakConfig leaks{truth.leak_coeff, truth.leak_position};
  for (int c = 0; c < n_conditions; ++c) {
    data.demand_factors.row(c).setConstant(0.6 + 0.05 * c);
    data.observed_head.row(c) = predict_heads(net, data.demand_factors.row(c), leaks).transpose();
  }
  return data;
}

}  // namespace

TEST_CASE("exact observations give the pure normalization constant") {
  const auto netv = hanoi();
  auto net = std::make_shared<const NetworkSpec>(netv);
  SyntheticTruth truth{Eigen::VectorXd::Zero(net->n_pipes()),
                      Eigen::VectorXd::Constant(net->n_pipes(), 0.5)};
  const int n_conditions = 3;
  auto data = noiseless_dataset(*net, truth, n_conditions);
  auto like = make_head_likelihood(net, data);

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(net->n_demand_nodes() + 2 * net->n_pipes());
  theta.head(net->n_demand_nodes()).setConstant(0.75);  // demand block is not observed
  theta.tail(net->n_pipes()).setConstant(0.5);
  const double value = (*like)(theta);
  const double expected =
      -0.5 * std::log(2.0 * M_PI) * static_cast<double>(n_conditions * net->n_demand_nodes());
  CHECK(value == doctest::Approx(expected).epsilon(1e-9));
  CHECK(like->eval_count() == static_cast<std::uint64_t>(n_conditions));
}

TEST_CASE("one observation offset by a meter costs exactly half a nat") {
  const auto netv = hanoi();
  auto net = std::make_shared<const NetworkSpec>(netv);
  SyntheticTruth truth{Eigen::VectorXd::Zero(net->n_pipes()),
                      Eigen::VectorXd::Constant(net->n_pipes(), 0.5)};
  auto data = noiseless_dataset(*net, truth, 2);
  auto like_exact = make_head_likelihood(net, data);
  data.observed_head(1, 7) += 1.0;
  auto like_offset = make_head_likelihood(net, data);

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(net->n_demand_nodes() + 2 * net->n_pipes());
  theta.head(net->n_demand_nodes()).setConstant(0.75);
  theta.tail(net->n_pipes()).setConstant(0.5);
  CHECK((*like_exact)(theta) - (*like_offset)(theta) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("the likelihood responds to the leak parameters it observes") {
  const auto netv = hanoi();
  auto net = std::make_shared<const NetworkSpec>(netv);
  SyntheticTruth truth{Eigen::VectorXd::Zero(net->n_pipes()),
                      Eigen::VectorXd::Constant(net->n_pipes(), 0.5)};
  truth.leak_coeff[net->pipe_index(31)] = 0.02;  // a large leak
  auto data = noiseless_dataset(*net, truth, 4);
  auto like = make_head_likelihood(net, data);

  Eigen::VectorXd at_truth = Eigen::VectorXd::Zero(net->n_demand_nodes() + 2 * net->n_pipes());
  at_truth.head(net->n_demand_nodes()).setConstant(0.75);
  at_truth.segment(net->n_demand_nodes(), net->n_pipes()) = truth.leak_coeff;
  at_truth.tail(net->n_pipes()) = truth.leak_position;

  Eigen::VectorXd no_leak = at_truth;
  no_leak.segment(net->n_demand_nodes(), net->n_pipes()).setZero();

  CHECK((*like)(at_truth) > (*like)(no_leak) + 10.0);
}

TEST_CASE("synthetic datasets round-trip through the CSV files") {
  const auto netv = hanoi();
  auto net = std::make_shared<const NetworkSpec>(netv);
  SyntheticTruth truth{Eigen::VectorXd::Zero(net->n_pipes()),
                      Eigen::VectorXd::Constant(net->n_pipes(), 0.5)};
  truth.leak_coeff[3] = 0.004;
  const auto data = make_synthetic_observations(*net, truth, 5, 1.0, 0.75, 0.15, 77);
  CHECK(data.n_conditions() == 5);

  const auto dir = std::filesystem::temp_directory_path() / "stmc_obs_test";
  std::filesystem::create_directories(dir);
  const auto cond = (dir / "conditions.csv").string();
  const auto obs = (dir / "observations.csv").string();
  save_observations(*net, data, cond, obs);
  const auto loaded = load_observations(*net, cond, obs, 1.0);
  CHECK((loaded.demand_factors - data.demand_factors).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((loaded.observed_head - data.observed_head).cwiseAbs().maxCoeff() < 1e-12);

  // Same seed, same dataset; different seed, different noise.
  const auto again = make_synthetic_observations(*net, truth, 5, 1.0, 0.75, 0.15, 77);
  CHECK(again.observed_head == data.observed_head);
  const auto other = make_synthetic_observations(*net, truth, 5, 1.0, 0.75, 0.15, 78);
  CHECK(other.observed_head != data.observed_head);
}

TEST_CASE("loading rejects unknown nodes and incomplete conditions") {
  const auto netv = hanoi();
  const auto dir = std::filesystem::temp_directory_path() / "stmc_obs_bad";
  std::filesystem::create_directories(dir);
  const auto cond = (dir / "conditions.csv").string();
  const auto obs = (dir / "observations.csv").string();
  {
    std::FILE* f = std::fopen(cond.c_str(), "w");
    std::fputs("condition_id,node_id,demand_factor\n0,9999,0.75\n", f);
    std::fclose(f);
    std::FILE* g = std::fopen(obs.c_str(), "w");
    std::fputs("condition_id,node_id,observed_head_m\n0,2,90.0\n", g);
    std::fclose(g);
  }
  CHECK_THROWS_WITH_AS(load_observations(netv, cond, obs, 1.0), doctest::Contains("9999"),
                       std::invalid_argument);
  {
    std::FILE* f = std::fopen(cond.c_str(), "w");
    std::fputs("condition_id,node_id,demand_factor\n0,2,0.75\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_observations(netv, cond, obs, 1.0), std::invalid_argument);
}

#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "stmc/block_layout.hpp"

namespace stmc::hydro {

// Hazen-Williams relation delta_h = q|q|^(beta-1) * w l / (C^beta D^gamma),
// with flows in m^3/s and lengths/diameters/heads in meters.
struct HydraulicConstants {
  double w = 10.5088;
  double roughness = 130.0;  // C, shared by all pipes
  double beta = 1.85;
  double gamma = 4.87;
};

struct NodeSpec {
  int id = 0;
  bool reservoir = false;
  double demand_m3h = 0.0;  // reference demand, m^3/h as tabulated
};

struct PipeSpec {
  int id = 0;
  int from = 0;  // "source" orientation; flows may be negative
  int to = 0;
  double length_m = 0.0;
  double diameter_m = 0.0;
};

struct LoopSpec {
  std::vector<std::pair<int, int>> pipes;  // (pipe id, +1/-1 traversal sign)
};

// Validated network: connected, single reservoir, loops form closed cycles
// and complete the flow equations (#pipes == #demand nodes + #loops).
class NetworkSpec {
 public:
  static NetworkSpec build(std::string name, std::vector<NodeSpec> nodes,
                           std::vector<PipeSpec> pipes, std::vector<LoopSpec> loops,
                           HydraulicConstants constants, double reservoir_head_m);

  const std::string& name() const { return name_; }
  const HydraulicConstants& constants() const { return constants_; }
  double reservoir_head() const { return reservoir_head_; }

  const std::vector<NodeSpec>& nodes() const { return nodes_; }
  const std::vector<PipeSpec>& pipes() const { return pipes_; }
  const std::vector<LoopSpec>& loops() const { return loops_; }

  Eigen::Index n_pipes() const { return static_cast<Eigen::Index>(pipes_.size()); }
  Eigen::Index n_demand_nodes() const { return static_cast<Eigen::Index>(demand_nodes_.size()); }

  // Demand-node order used by every vector interface (theta blocks,
  // observations, head outputs): fixture order.
  const std::vector<int>& demand_node_ids() const { return demand_node_ids_; }
  Eigen::VectorXd reference_demand_m3h() const;

  // internal indices
  int node_index(int id) const;
  int pipe_index(int id) const;
  const std::vector<std::size_t>& demand_node_rows() const { return demand_nodes_; }
  std::size_t reservoir_row() const { return reservoir_; }
  int pipe_from_row(std::size_t pipe) const { return pipe_from_[pipe]; }
  int pipe_to_row(std::size_t pipe) const { return pipe_to_[pipe]; }
  // Tree path reservoir -> node as (pipe row, sign) pairs.
  const std::vector<std::pair<int, int>>& tree_path(std::size_t node_row) const {
    return tree_paths_[node_row];
  }
  const std::vector<std::pair<int, int>>& loop_rows(std::size_t loop) const {
    return loop_rows_[loop];
  }

 private:
  std::string name_;
  std::vector<NodeSpec> nodes_;
  std::vector<PipeSpec> pipes_;
  std::vector<LoopSpec> loops_;
  HydraulicConstants constants_;
  double reservoir_head_ = 0.0;

  std::size_t reservoir_ = 0;
  std::vector<std::size_t> demand_nodes_;  // node rows in fixture order
  std::vector<int> demand_node_ids_;
  std::vector<int> pipe_from_;  // node rows
  std::vector<int> pipe_to_;
  std::vector<std::vector<std::pair<int, int>>> tree_paths_;  // per node row
  std::vector<std::vector<std::pair<int, int>>> loop_rows_;   // (pipe row, sign)
};

// Per-pipe pressure-dependent leaks: outflow c * sqrt(max(head, 0)) at the
// point a fraction `position` along the pipe. Coefficients are in
// m^3/s per sqrt(m); zero disables the leak.
struct LeakConfig {
  Eigen::VectorXd coeff;
  Eigen::VectorXd position;

  static LeakConfig none(Eigen::Index n_pipes) {
    return {Eigen::VectorXd::Zero(n_pipes), Eigen::VectorXd::Zero(n_pipes)};
  }
};

struct HydraulicState {
  Eigen::VectorXd flow;          // upstream-segment flow per pipe, m^3/s, signed
  Eigen::VectorXd leak_head;     // head at the leak point, NaN for leak-free pipes
  Eigen::VectorXd leak_outflow;  // m^3/s, zero for leak-free pipes
  Eigen::VectorXd node_head;     // per node row (reservoir included)
  double residual = 0.0;         // scaled infinity norm at exit
  int iterations = 0;
  bool converged = false;
};

double pipe_headloss(double flow_m3s, double length_m, double diameter_m,
                     const HydraulicConstants& c);
double pipe_headloss_dq(double flow_m3s, double length_m, double diameter_m,
                        const HydraulicConstants& c);
double leak_head(double upstream_head_m, double flow_m3s, double position, double length_m,
                 double diameter_m, const HydraulicConstants& c);

// Newton solve of the mass/energy/leak system. Unknowns are the pipe flows
// plus one leak head per leaking pipe; node heads are recovered along a
// spanning tree from the reservoir. Demands in m^3/s.
HydraulicState solve_network(const NetworkSpec& net, const Eigen::VectorXd& demand_m3s,
                             const LeakConfig& leaks);

// theta layout shared by the reliability and identification problems:
// demand factors | leak sizes | leak positions.
std::shared_ptr<const BlockLayout> make_theta_layout(const NetworkSpec& net);

struct DecodedTheta {
  Eigen::VectorXd demand_m3s;
  LeakConfig leaks;
};
DecodedTheta decode_theta(const NetworkSpec& net, const Eigen::VectorXd& theta);

// f(theta) = 2 - min_n H_n / min_head; failure (f >= 1) iff some demand-node
// head drops to min_head or below. Solver failure maps to +inf.
double failure_value(const NetworkSpec& net, const Eigen::VectorXd& theta,
                     double min_head_m = 30.0);

// Raw residual system over the Newton unknowns [pipe flows, leak heads],
// exposed so tests can difference the analytic Jacobian directly.
namespace detail {
Eigen::Index system_size(const NetworkSpec& net, const LeakConfig& leaks);
Eigen::VectorXd system_residual(const NetworkSpec& net, const Eigen::VectorXd& demand_m3s,
                                const LeakConfig& leaks, const Eigen::VectorXd& x);
Eigen::MatrixXd system_jacobian(const NetworkSpec& net, const Eigen::VectorXd& demand_m3s,
                                const LeakConfig& leaks, const Eigen::VectorXd& x);
}  // namespace detail

}  // namespace stmc::hydro

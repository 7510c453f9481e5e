#include "stmc/hydro/network.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace stmc::hydro {

namespace {
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
}

NetworkSpec NetworkSpec::build(std::string name, std::vector<NodeSpec> nodes,
                               std::vector<PipeSpec> pipes, std::vector<LoopSpec> loops,
                               HydraulicConstants constants, double reservoir_head_m) {
  NetworkSpec net;
  net.name_ = std::move(name);
  net.nodes_ = std::move(nodes);
  net.pipes_ = std::move(pipes);
  net.loops_ = std::move(loops);
  net.constants_ = constants;
  net.reservoir_head_ = reservoir_head_m;

  if (net.nodes_.size() < 2) throw std::invalid_argument("network: needs at least two nodes");

  std::unordered_map<int, int> node_row;
  int reservoirs = 0;
  for (std::size_t i = 0; i < net.nodes_.size(); ++i) {
    const auto& n = net.nodes_[i];
    if (!node_row.emplace(n.id, static_cast<int>(i)).second)
      throw std::invalid_argument("network: duplicate node id " + std::to_string(n.id));
    if (n.reservoir) {
      net.reservoir_ = i;
      ++reservoirs;
    } else {
      net.demand_nodes_.push_back(i);
      net.demand_node_ids_.push_back(n.id);
    }
  }
  if (reservoirs != 1)
    throw std::invalid_argument("network: expected exactly one reservoir, got " +
                                std::to_string(reservoirs));

  std::unordered_map<int, int> pipe_row;
  net.pipe_from_.resize(net.pipes_.size());
  net.pipe_to_.resize(net.pipes_.size());
  std::vector<std::vector<std::pair<int, int>>> adjacency(net.nodes_.size());  // (pipe, sign)
  for (std::size_t k = 0; k < net.pipes_.size(); ++k) {
    const auto& p = net.pipes_[k];
    if (!pipe_row.emplace(p.id, static_cast<int>(k)).second)
      throw std::invalid_argument("network: duplicate pipe id " + std::to_string(p.id));
    const auto from = node_row.find(p.from);
    const auto to = node_row.find(p.to);
    if (from == node_row.end())
      throw std::invalid_argument("network: pipe " + std::to_string(p.id) +
                                  " references unknown node " + std::to_string(p.from));
    if (to == node_row.end())
      throw std::invalid_argument("network: pipe " + std::to_string(p.id) +
                                  " references unknown node " + std::to_string(p.to));
    if (!(p.length_m > 0.0) || !(p.diameter_m > 0.0))
      throw std::invalid_argument("network: pipe " + std::to_string(p.id) +
                                  " needs positive length and diameter");
    net.pipe_from_[k] = from->second;
    net.pipe_to_[k] = to->second;
    adjacency[static_cast<std::size_t>(from->second)].push_back({static_cast<int>(k), +1});
    adjacency[static_cast<std::size_t>(to->second)].push_back({static_cast<int>(k), -1});
  }

  // Spanning tree (BFS from the reservoir) for head recovery; doubles as the
  // connectivity check.
  net.tree_paths_.assign(net.nodes_.size(), {});
  std::vector<char> seen(net.nodes_.size(), 0);
  std::deque<std::size_t> queue{net.reservoir_};
  seen[net.reservoir_] = 1;
  while (!queue.empty()) {
    const std::size_t at = queue.front();
    queue.pop_front();
    for (const auto& [pipe, sign] : adjacency[at]) {
      const auto next = static_cast<std::size_t>(sign > 0 ? net.pipe_to_[static_cast<std::size_t>(pipe)]
                                                          : net.pipe_from_[static_cast<std::size_t>(pipe)]);
      if (seen[next]) continue;
      seen[next] = 1;
      net.tree_paths_[next] = net.tree_paths_[at];
      net.tree_paths_[next].push_back({pipe, sign});
      queue.push_back(next);
    }
  }
  for (std::size_t i = 0; i < net.nodes_.size(); ++i)
    if (!seen[i])
      throw std::invalid_argument("network: node " + std::to_string(net.nodes_[i].id) +
                                  " is not connected to the reservoir");

  // Loops must chain head-to-tail and close.
  net.loop_rows_.resize(net.loops_.size());
  for (std::size_t li = 0; li < net.loops_.size(); ++li) {
    const auto& loop = net.loops_[li];
    if (loop.pipes.size() < 2)
      throw std::invalid_argument("network: loop " + std::to_string(li) + " is too short");
    int at = -1, start = -1;
    for (const auto& [pid, sign] : loop.pipes) {
      const auto it = pipe_row.find(pid);
      if (it == pipe_row.end())
        throw std::invalid_argument("network: loop " + std::to_string(li) +
                                    " references unknown pipe " + std::to_string(pid));
      if (sign != 1 && sign != -1)
        throw std::invalid_argument("network: loop " + std::to_string(li) +
                                    " has a sign other than +/-1");
      const auto k = static_cast<std::size_t>(it->second);
      const int a = sign > 0 ? net.pipe_from_[k] : net.pipe_to_[k];
      const int b = sign > 0 ? net.pipe_to_[k] : net.pipe_from_[k];
      if (at == -1) {
        start = a;
      } else if (a != at) {
        throw std::invalid_argument("network: loop " + std::to_string(li) +
                                    " breaks at pipe " + std::to_string(pid));
      }
      at = b;
      net.loop_rows_[li].push_back({it->second, sign});
    }
    if (at != start)
      throw std::invalid_argument("network: loop " + std::to_string(li) + " does not close");
  }

  if (net.pipes_.size() != net.demand_nodes_.size() + net.loops_.size())
    throw std::invalid_argument(
        "network: equation count mismatch (pipes=" + std::to_string(net.pipes_.size()) +
        ", demand nodes=" + std::to_string(net.demand_nodes_.size()) +
        ", loops=" + std::to_string(net.loops_.size()) + ")");
  return net;
}

Eigen::VectorXd NetworkSpec::reference_demand_m3h() const {
  Eigen::VectorXd d(n_demand_nodes());
  for (Eigen::Index i = 0; i < d.size(); ++i)
    d[i] = nodes_[demand_nodes_[static_cast<std::size_t>(i)]].demand_m3h;
  return d;
}

int NetworkSpec::node_index(int id) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].id == id) return static_cast<int>(i);
  throw std::out_of_range("network: unknown node id " + std::to_string(id));
}

int NetworkSpec::pipe_index(int id) const {
  for (std::size_t i = 0; i < pipes_.size(); ++i)
    if (pipes_[i].id == id) return static_cast<int>(i);
  throw std::out_of_range("network: unknown pipe id " + std::to_string(id));
}

double pipe_headloss(double q, double length_m, double diameter_m, const HydraulicConstants& c) {
  const double k = c.w * length_m / (std::pow(c.roughness, c.beta) * std::pow(diameter_m, c.gamma));
  return q * std::pow(std::abs(q), c.beta - 1.0) * k;
}

double pipe_headloss_dq(double q, double length_m, double diameter_m,
                        const HydraulicConstants& c) {
  const double k = c.w * length_m / (std::pow(c.roughness, c.beta) * std::pow(diameter_m, c.gamma));
  return c.beta * std::pow(std::abs(q), c.beta - 1.0) * k;
}

double leak_head(double upstream_head_m, double q, double position, double length_m,
                 double diameter_m, const HydraulicConstants& c) {
  return upstream_head_m - pipe_headloss(q, position * length_m, diameter_m, c);
}

namespace {

// Everything the Newton iteration needs from one point evaluation.
struct SystemEval {
  Eigen::VectorXd resid;       // scaled
  Eigen::VectorXd leak_out;    // S per pipe
  Eigen::VectorXd leak_dout;   // dS/dH_L per pipe
  Eigen::VectorXd dh;          // total head change per pipe
  Eigen::VectorXd dh_dq;       // d(dh)/dQ
  Eigen::VectorXd dh_dhl;      // d(dh)/dH_L
  Eigen::VectorXd node_head;   // per node row
  double norm = 0.0;
};

struct SolverShape {
  const NetworkSpec& net;
  Eigen::VectorXd demand;  // m^3/s per demand node
  LeakConfig leaks;
  std::vector<int> leak_col;        // per pipe: unknown index or -1
  std::vector<std::size_t> leak_pipes;
  Eigen::Index n_pipes = 0;
  Eigen::Index n_leaks = 0;
  double demand_scale = 1.0;
  double head_scale = 1.0;
};

void evaluate(const SolverShape& s, const Eigen::VectorXd& x, SystemEval& ev) {
  const auto& net = s.net;
  const auto& c = net.constants();
  const Eigen::Index P = s.n_pipes;
  const auto n_nodes = static_cast<Eigen::Index>(net.nodes().size());
  const auto n_demand = static_cast<Eigen::Index>(net.demand_node_rows().size());
  const auto n_loops = static_cast<Eigen::Index>(net.loops().size());

  ev.leak_out.setZero(P);
  ev.leak_dout.setZero(P);
  ev.dh.resize(P);
  ev.dh_dq.resize(P);
  ev.dh_dhl.setZero(P);

  for (Eigen::Index k = 0; k < P; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const auto& pipe = net.pipes()[ku];
    const double q = x[k];
    const int lc = s.leak_col[ku];
    if (lc < 0) {
      ev.dh[k] = pipe_headloss(q, pipe.length_m, pipe.diameter_m, c);
      ev.dh_dq[k] = pipe_headloss_dq(q, pipe.length_m, pipe.diameter_m, c);
      continue;
    }
    const double hl_unknown = x[P + lc];
    const double coeff = s.leaks.coeff[k];
    const double sqrt_h = hl_unknown > 0.0 ? std::sqrt(hl_unknown) : 0.0;
    ev.leak_out[k] = coeff * sqrt_h;
    ev.leak_dout[k] = hl_unknown > 0.0 ? 0.5 * coeff / sqrt_h : 0.0;
    const double pos = s.leaks.position[k];
    const double up_len = pos * pipe.length_m;
    const double down_len = (1.0 - pos) * pipe.length_m;
    const double q_down = q - ev.leak_out[k];
    ev.dh[k] = pipe_headloss(q, up_len, pipe.diameter_m, c) +
               pipe_headloss(q_down, down_len, pipe.diameter_m, c);
    ev.dh_dq[k] = pipe_headloss_dq(q, up_len, pipe.diameter_m, c) +
                  pipe_headloss_dq(q_down, down_len, pipe.diameter_m, c);
    ev.dh_dhl[k] = pipe_headloss_dq(q_down, down_len, pipe.diameter_m, c) * (-ev.leak_dout[k]);
  }

  ev.node_head.resize(n_nodes);
  for (Eigen::Index nrow = 0; nrow < n_nodes; ++nrow) {
    double h = net.reservoir_head();
    for (const auto& [pipe, sign] : net.tree_path(static_cast<std::size_t>(nrow)))
      h -= static_cast<double>(sign) * ev.dh[pipe];
    ev.node_head[nrow] = h;
  }

  ev.resid.setZero(P + s.n_leaks);
  for (Eigen::Index i = 0; i < n_demand; ++i) {
    const auto nrow = static_cast<int>(net.demand_node_rows()[static_cast<std::size_t>(i)]);
    double r = -s.demand[i];
    for (Eigen::Index k = 0; k < P; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      if (net.pipe_to_row(ku) == nrow) r += x[k] - ev.leak_out[k];
      if (net.pipe_from_row(ku) == nrow) r -= x[k];
    }
    ev.resid[i] = r / s.demand_scale;
  }
  for (Eigen::Index j = 0; j < n_loops; ++j) {
    double r = 0.0;
    for (const auto& [pipe, sign] : net.loop_rows(static_cast<std::size_t>(j)))
      r += static_cast<double>(sign) * ev.dh[pipe];
    ev.resid[n_demand + j] = r / s.head_scale;
  }
  for (Eigen::Index li = 0; li < s.n_leaks; ++li) {
    const auto k = s.leak_pipes[static_cast<std::size_t>(li)];
    const auto& pipe = net.pipes()[k];
    const double up = pipe_headloss(x[static_cast<Eigen::Index>(k)],
                                    s.leaks.position[static_cast<Eigen::Index>(k)] * pipe.length_m,
                                    pipe.diameter_m, c);
    const double r = x[P + li] - ev.node_head[net.pipe_from_row(k)] + up;
    ev.resid[n_demand + n_loops + li] = r / s.head_scale;
  }
  ev.norm = ev.resid.cwiseAbs().maxCoeff();
}

Eigen::MatrixXd jacobian(const SolverShape& s, const Eigen::VectorXd& x, const SystemEval& ev) {
  const auto& net = s.net;
  const auto& c = net.constants();
  const Eigen::Index P = s.n_pipes;
  const auto n_demand = static_cast<Eigen::Index>(net.demand_node_rows().size());
  const auto n_loops = static_cast<Eigen::Index>(net.loops().size());
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(P + s.n_leaks, P + s.n_leaks);

  for (Eigen::Index i = 0; i < n_demand; ++i) {
    const auto nrow = static_cast<int>(net.demand_node_rows()[static_cast<std::size_t>(i)]);
    for (Eigen::Index k = 0; k < P; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      if (net.pipe_to_row(ku) == nrow) {
        jac(i, k) += 1.0 / s.demand_scale;
        const int lc = s.leak_col[ku];
        if (lc >= 0) jac(i, P + lc) -= ev.leak_dout[k] / s.demand_scale;
      }
      if (net.pipe_from_row(ku) == nrow) jac(i, k) -= 1.0 / s.demand_scale;
    }
  }
  for (Eigen::Index j = 0; j < n_loops; ++j) {
    const Eigen::Index row = n_demand + j;
    for (const auto& [pipe, sign] : net.loop_rows(static_cast<std::size_t>(j))) {
      jac(row, pipe) += sign * ev.dh_dq[pipe] / s.head_scale;
      const int lc = s.leak_col[static_cast<std::size_t>(pipe)];
      if (lc >= 0) jac(row, P + lc) += sign * ev.dh_dhl[pipe] / s.head_scale;
    }
  }
  for (Eigen::Index li = 0; li < s.n_leaks; ++li) {
    const Eigen::Index row = n_demand + n_loops + li;
    const auto k = s.leak_pipes[static_cast<std::size_t>(li)];
    const auto& pipe = net.pipes()[k];
    jac(row, P + li) += 1.0 / s.head_scale;
    jac(row, static_cast<Eigen::Index>(k)) +=
        pipe_headloss_dq(x[static_cast<Eigen::Index>(k)],
                         s.leaks.position[static_cast<Eigen::Index>(k)] * pipe.length_m,
                         pipe.diameter_m, c) /
        s.head_scale;
    // Head at the pipe start depends on every tree pipe on the way there.
    for (const auto& [tp, sign] : net.tree_path(static_cast<std::size_t>(net.pipe_from_row(k)))) {
      jac(row, tp) += sign * ev.dh_dq[tp] / s.head_scale;
      const int lc = s.leak_col[static_cast<std::size_t>(tp)];
      if (lc >= 0) jac(row, P + lc) += sign * ev.dh_dhl[tp] / s.head_scale;
    }
  }
  return jac;
}

SolverShape make_shape(const NetworkSpec& net, const Eigen::VectorXd& demand_m3s,
                       const LeakConfig& leaks) {
  const Eigen::Index P = net.n_pipes();
  if (demand_m3s.size() != net.n_demand_nodes())
    throw std::invalid_argument("solve_network: demand vector size mismatch");
  if (!demand_m3s.allFinite()) throw std::invalid_argument("solve_network: non-finite demand");
  if (leaks.coeff.size() != P || leaks.position.size() != P)
    throw std::invalid_argument("solve_network: leak config size mismatch");
  if ((leaks.position.array() < 0.0).any() || (leaks.position.array() > 1.0).any())
    throw std::invalid_argument("solve_network: leak position outside [0,1]");

  SolverShape shape{net, demand_m3s, leaks, {}, {}, P, 0, 1.0, 1.0};
  shape.leak_col.assign(static_cast<std::size_t>(P), -1);
  for (Eigen::Index k = 0; k < P; ++k) {
    if (leaks.coeff[k] > 0.0) {
      shape.leak_col[static_cast<std::size_t>(k)] = static_cast<int>(shape.n_leaks++);
      shape.leak_pipes.push_back(static_cast<std::size_t>(k));
    }
  }
  shape.demand_scale = std::max(demand_m3s.cwiseAbs().sum(), 1e-6);
  shape.head_scale = std::max(net.reservoir_head(), 1.0);
  return shape;
}

}  // namespace

namespace detail {

Eigen::Index system_size(const NetworkSpec& net, const LeakConfig& leaks) {
  const SolverShape shape = make_shape(net, Eigen::VectorXd::Zero(net.n_demand_nodes()), leaks);
  return shape.n_pipes + shape.n_leaks;
}

Eigen::VectorXd system_residual(const NetworkSpec& net, const Eigen::VectorXd& demand_m3s,
                                const LeakConfig& leaks, const Eigen::VectorXd& x) {
  const SolverShape shape = make_shape(net, demand_m3s, leaks);
  SystemEval ev;
  evaluate(shape, x, ev);
  return ev.resid;
}

Eigen::MatrixXd system_jacobian(const NetworkSpec& net, const Eigen::VectorXd& demand_m3s,
                                const LeakConfig& leaks, const Eigen::VectorXd& x) {
  const SolverShape shape = make_shape(net, demand_m3s, leaks);
  SystemEval ev;
  evaluate(shape, x, ev);
  return jacobian(shape, x, ev);
}

}  // namespace detail

HydraulicState solve_network(const NetworkSpec& net, const Eigen::VectorXd& demand_m3s,
                             const LeakConfig& leaks) {
  const Eigen::Index P = net.n_pipes();
  const Eigen::Index n_demand = net.n_demand_nodes();
  SolverShape shape = make_shape(net, demand_m3s, leaks);

  // Initial flows: minimum-norm solution of the leak-free mass balance, which
  // spreads flow over parallel paths and keeps loop pipes off zero (where the
  // Hazen-Williams derivative vanishes).
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n_demand, P);
  for (Eigen::Index i = 0; i < n_demand; ++i) {
    const auto nrow = static_cast<int>(net.demand_node_rows()[static_cast<std::size_t>(i)]);
    for (Eigen::Index k = 0; k < P; ++k) {
      if (net.pipe_to_row(static_cast<std::size_t>(k)) == nrow) a(i, k) += 1.0;
      if (net.pipe_from_row(static_cast<std::size_t>(k)) == nrow) a(i, k) -= 1.0;
    }
  }
  Eigen::VectorXd x(P + shape.n_leaks);
  x.head(P) = a.transpose() * (a * a.transpose()).ldlt().solve(demand_m3s);

  SystemEval ev;
  if (shape.n_leaks > 0) {
    x.tail(shape.n_leaks).setZero();  // zero head: leaks off for the head pass
    evaluate(shape, x, ev);           // leak heads follow from the initial flows
    for (Eigen::Index li = 0; li < shape.n_leaks; ++li) {
      const auto k = shape.leak_pipes[static_cast<std::size_t>(li)];
      const auto& pipe = net.pipes()[k];
      x[P + li] = leak_head(ev.node_head[net.pipe_from_row(k)], x[static_cast<Eigen::Index>(k)],
                            leaks.position[static_cast<Eigen::Index>(k)], pipe.length_m,
                            pipe.diameter_m, net.constants());
    }
  }

  constexpr int kMaxIter = 100;
  constexpr double kTol = 1e-8;
  evaluate(shape, x, ev);
  HydraulicState state;
  int iter = 0;
  while (ev.norm >= kTol && iter < kMaxIter) {
    ++iter;
    const Eigen::MatrixXd jac = jacobian(shape, x, ev);
    const Eigen::VectorXd step = jac.partialPivLu().solve(-ev.resid);
    if (!step.allFinite()) break;

    double t = 1.0;
    const double norm_before = ev.norm;
    Eigen::VectorXd x_try;
    SystemEval ev_try;
    for (int halving = 0; halving <= 10; ++halving) {
      x_try = x + t * step;
      evaluate(shape, x_try, ev_try);
      if (ev_try.norm < norm_before) break;
      t *= 0.5;
    }
    x = x_try;
    ev = ev_try;
  }

  state.flow = x.head(P);
  state.leak_head = Eigen::VectorXd::Constant(P, kNan);
  state.leak_outflow = Eigen::VectorXd::Zero(P);
  for (Eigen::Index li = 0; li < shape.n_leaks; ++li) {
    const auto k = static_cast<Eigen::Index>(shape.leak_pipes[static_cast<std::size_t>(li)]);
    state.leak_head[k] = x[P + li];
    state.leak_outflow[k] = ev.leak_out[k];
  }
  state.node_head = ev.node_head;
  state.residual = ev.norm;
  state.iterations = iter;
  state.converged = ev.norm < kTol && ev.resid.allFinite() && x.allFinite();
  return state;
}

std::shared_ptr<const BlockLayout> make_theta_layout(const NetworkSpec& net) {
  auto layout = std::make_shared<BlockLayout>();
  layout->add_block("demand", static_cast<std::size_t>(net.n_demand_nodes()));
  layout->add_block("leak_size", static_cast<std::size_t>(net.n_pipes()));
  layout->add_block("leak_pos", static_cast<std::size_t>(net.n_pipes()));
  return layout;
}

DecodedTheta decode_theta(const NetworkSpec& net, const Eigen::VectorXd& theta) {
  const Eigen::Index nd = net.n_demand_nodes();
  const Eigen::Index np = net.n_pipes();
  if (theta.size() != nd + 2 * np)
    throw std::invalid_argument("decode_theta: parameter vector size mismatch");
  DecodedTheta out;
  out.demand_m3s = theta.head(nd).cwiseProduct(net.reference_demand_m3h()) / 3600.0;
  out.leaks.coeff = theta.segment(nd, np).cwiseMax(0.0);
  out.leaks.position = theta.tail(np).cwiseMax(0.0).cwiseMin(1.0);
  return out;
}

double failure_value(const NetworkSpec& net, const Eigen::VectorXd& theta, double min_head_m) {
  const DecodedTheta dec = decode_theta(net, theta);
  const HydraulicState sol = solve_network(net, dec.demand_m3s, dec.leaks);
  if (!sol.converged) return std::numeric_limits<double>::infinity();
  double min_head = std::numeric_limits<double>::infinity();
  for (const auto nrow : net.demand_node_rows())
    min_head = std::min(min_head, sol.node_head[static_cast<Eigen::Index>(nrow)]);
  return 2.0 - min_head / min_head_m;
}

}  // namespace stmc::hydro

#include "stmc/hydro/network_io.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

namespace stmc::hydro {

using nlohmann::json;

namespace {

json parse_or_throw(const std::string& text, const std::string& what) {
  json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw std::invalid_argument(what + ": malformed JSON");
  return j;
}

}  // namespace

NetworkSpec parse_network(const std::string& text) {
  const json j = parse_or_throw(text, "network");
  try {
    HydraulicConstants c;
    if (j.contains("constants")) {
      const auto& jc = j.at("constants");
      c.w = jc.value("w", c.w);
      c.roughness = jc.value("roughness_c", c.roughness);
      c.beta = jc.value("beta", c.beta);
      c.gamma = jc.value("gamma", c.gamma);
    }
    const double head = j.at("reservoir_head_m").get<double>();

    std::vector<NodeSpec> nodes;
    for (const auto& jn : j.at("nodes")) {
      NodeSpec n;
      n.id = jn.at("id").get<int>();
      const std::string kind = jn.at("kind").get<std::string>();
      if (kind == "reservoir") {
        n.reservoir = true;
      } else if (kind == "demand") {
        n.demand_m3h = jn.at("demand_m3h").get<double>();
      } else {
        throw std::invalid_argument("network: node " + std::to_string(n.id) +
                                    " has unknown kind '" + kind + "'");
      }
      nodes.push_back(n);
    }

    std::vector<PipeSpec> pipes;
    for (const auto& jp : j.at("pipes")) {
      PipeSpec p;
      p.id = jp.at("id").get<int>();
      p.from = jp.at("from").get<int>();
      p.to = jp.at("to").get<int>();
      p.length_m = jp.at("length_m").get<double>();
      p.diameter_m = jp.at("diameter_m").get<double>();
      pipes.push_back(p);
    }

    std::vector<LoopSpec> loops;
    for (const auto& jl : j.at("loops")) {
      LoopSpec l;
      for (const auto& je : jl)
        l.pipes.push_back({je.at("pipe").get<int>(), je.at("dir").get<int>()});
      loops.push_back(std::move(l));
    }

    return NetworkSpec::build(j.value("name", "network"), std::move(nodes), std::move(pipes),
                              std::move(loops), c, head);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("network: schema violation: ") + e.what());
  }
}

NetworkSpec load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("network: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_network(buf.str());
}

}  // namespace stmc::hydro

#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace stmc {

// One annealing level of a run: what was solved for, what the chains did,
// and what it cost. Fields that do not apply to a pipeline stay NaN.
struct LevelRecord {
  int level = 0;
  double beta = 0.0;        // annealing exponent or failure threshold after the level
  double delta_beta = std::numeric_limits<double>::quiet_NaN();
  double weight_cov = std::numeric_limits<double>::quiet_NaN();
  double ess = std::numeric_limits<double>::quiet_NaN();
  double log_evidence_inc = std::numeric_limits<double>::quiet_NaN();
  double level_prob = std::numeric_limits<double>::quiet_NaN();  // subset c_k
  double rel_var_inc = std::numeric_limits<double>::quiet_NaN(); // delta-method term
  double stage2_rate = std::numeric_limits<double>::quiet_NaN();
  double min_component_rate = std::numeric_limits<double>::quiet_NaN();
  int chain_len = 0;
  double corr_final = std::numeric_limits<double>::quiet_NaN();
  bool corr_cap_hit = false;
  double sigma = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t model_evals = 0;  // forward-model solves spent in this level
  double wall_seconds = 0.0;
};

struct LevelSchedule {
  std::vector<LevelRecord> rows;

  std::uint64_t total_model_evals() const {
    std::uint64_t n = 0;
    for (const auto& r : rows) n += r.model_evals;
    return n;
  }

  std::string to_jsonl() const;  // one JSON object per line
};

}  // namespace stmc

#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fastgate/gate_design.hpp"
#include "fastgate/ion_chain.hpp"

namespace fastgate {

enum class Objective {
  kMaxFidelity,
  kMinTimeWithFloor,  // lexicographic: fidelity floor first, then duration
};

struct OptimizationSpec {
  Objective objective = Objective::kMaxFidelity;
  int n = 1;                      // FRAG pulse-pair parameter
  int ion_i = 1, ion_j = 2;       // addressed adjacent pair
  double tau_min_periods = 1e-3;  // search bounds in units of the trap period
  double tau_max_periods = 2.0;
  double fidelity_floor = 0.0;    // used by kMinTimeWithFloor
  int restarts = 32;              // Latin-hypercube starts
  double param_tol = 1e-9;        // simplex edge tolerance, log space
  double objective_tol = 1e-13;
  int max_iterations = 600;
  std::uint64_t seed = 12345;

  void validate() const;
};

struct RestartRecord {
  int restart_id = 0;
  double fidelity = 0.0;
  double duration_s = 0.0;
  bool feasible = false;
  std::array<double, 3> tau_s{};
  int evaluations = 0;
};

struct OptimizeResult {
  GateOutcome outcome;
  bool feasible = false;  // only meaningful for kMinTimeWithFloor
  std::vector<RestartRecord> restarts;
};

// Derivative-free simplex search over (tau1, tau2, tau3) in log space,
// restarted from a Latin-hypercube design. Deterministic for a fixed seed.
// `progress_log`, when given, receives one JSON line per restart:
// {"restart": id, "iterations": k, "best_fidelity": F, "duration_s": T}.
OptimizeResult optimize_gate(const TrapConfig& cfg, const ModeStructure& modes,
                             const OptimizationSpec& spec,
                             std::ostream* progress_log = nullptr);

// One optimized gate per adjacent pair (1,2) ... (L-1,L); entries run
// concurrently and are returned in pair order.
std::vector<OptimizeResult> sweep_pairs(const TrapConfig& cfg, const ModeStructure& modes,
                                        const OptimizationSpec& base_spec);

void to_json(nlohmann::json& j, const OptimizationSpec& s);
void from_json(const nlohmann::json& j, OptimizationSpec& s);

}  // namespace fastgate

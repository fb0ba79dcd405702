#pragma once

#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fastgate/gate_design.hpp"

namespace fastgate {

enum class UmqStepKind { kPairGate, kSwap };

struct UmqStep {
  UmqStepKind kind = UmqStepKind::kPairGate;
  int ion_a = 1, ion_b = 2;  // adjacent pair, 1-based
};

// Schedule coupling the target ion to every other ion via adjacent pair gates
// and SWAP networks. A SWAP expands to 3 CNOTs; each CNOT is one pair phase
// gate plus 4 local rotations. Local rotations are counted but cost nothing.
struct UmqPlan {
  int ion_count = 2;
  int target_ion = 1;
  std::vector<UmqStep> steps;
  int fast_gate_count = 0;       // 4L - 7 for L >= 2
  int local_rotation_count = 0;  // 12 per SWAP
  double fidelity_lower_bound = 1.0;
  double total_duration_s = 0.0;
};

// Builds the plan from one optimized outcome per adjacent pair, in pair order
// (1,2) ... (L-1,L). The SWAP on a pair reuses that pair's gate three times.
UmqPlan umq_plan(int ion_count, int target_ion, const std::vector<GateOutcome>& pair_gates);

// target^(1/num_umq_gates): the per-UMQ fidelity needed for a product of
// `num_umq_gates` to reach `target_total_fidelity`.
double simulation_threshold(int num_umq_gates, double target_total_fidelity);

// Moelmer-Soerensen time model: sqrt(N) * t1.
double ms_time(int n_ions, double t1_s = 50e-6);

struct HeatingBudget {
  double absorption_probability = 0.0;  // 1 - exp(-rate * time)
  double implied_fidelity = 1.0;
  double per_umq_budget_s = 0.0;        // total time / UMQ count
};

HeatingBudget heating_time_budget(double heating_rate_per_s, double total_time_s,
                                  int umq_count = 1);

// Aggregate of uncorrelated per-gate pulse errors over `gate_count` gates.
double uncorrelated_error_aggregate(double per_gate_error, int gate_count);

void to_json(nlohmann::json& j, const UmqPlan& p);

}  // namespace fastgate

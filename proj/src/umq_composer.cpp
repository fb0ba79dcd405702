#include "fastgate/umq_composer.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace fastgate {

UmqPlan umq_plan(int ion_count, int target_ion, const std::vector<GateOutcome>& pair_gates) {
  if (ion_count < 2) throw std::invalid_argument("umq_plan: ion_count must be >= 2");
  if (target_ion < 1 || target_ion > ion_count)
    throw std::invalid_argument("umq_plan: target ion out of range");
  if (static_cast<int>(pair_gates.size()) != ion_count - 1)
    throw std::invalid_argument("umq_plan: need one GateOutcome per adjacent pair");

  UmqPlan plan;
  plan.ion_count = ion_count;
  plan.target_ion = target_ion;

  // Pair gate on (1,2), SWAP(1,2), pair gate on (2,3), ..., pair gate on
  // (L-1, L); the last pair needs no SWAP.
  for (int k = 0; k + 1 < ion_count; ++k) {
    const GateOutcome& g = pair_gates[k];
    plan.steps.push_back({UmqStepKind::kPairGate, k + 1, k + 2});
    plan.fast_gate_count += 1;
    plan.fidelity_lower_bound *= g.fidelity;
    plan.total_duration_s += g.duration_s;
    if (k + 2 < ion_count) {
      plan.steps.push_back({UmqStepKind::kSwap, k + 1, k + 2});
      plan.fast_gate_count += 3;
      plan.local_rotation_count += 12;
      plan.fidelity_lower_bound *= g.fidelity * g.fidelity * g.fidelity;
      plan.total_duration_s += 3.0 * g.duration_s;
    }
  }
  return plan;
}

double simulation_threshold(int num_umq_gates, double target_total_fidelity) {
  if (num_umq_gates < 1) throw std::invalid_argument("simulation_threshold: gate count must be >= 1");
  if (!(target_total_fidelity > 0 && target_total_fidelity < 1))
    throw std::invalid_argument("simulation_threshold: target must be in (0, 1)");
  return std::pow(target_total_fidelity, 1.0 / num_umq_gates);
}

double ms_time(int n_ions, double t1_s) {
  if (n_ions < 1) throw std::invalid_argument("ms_time: n_ions must be >= 1");
  return std::sqrt(static_cast<double>(n_ions)) * t1_s;
}

HeatingBudget heating_time_budget(double heating_rate_per_s, double total_time_s,
                                  int umq_count) {
  if (heating_rate_per_s < 0) throw std::invalid_argument("heating_time_budget: rate must be >= 0");
  if (total_time_s < 0) throw std::invalid_argument("heating_time_budget: time must be >= 0");
  if (umq_count < 1) throw std::invalid_argument("heating_time_budget: umq_count must be >= 1");
  HeatingBudget b;
  b.absorption_probability = 1.0 - std::exp(-heating_rate_per_s * total_time_s);
  b.implied_fidelity = 1.0 - b.absorption_probability;
  b.per_umq_budget_s = total_time_s / umq_count;
  return b;
}

double uncorrelated_error_aggregate(double per_gate_error, int gate_count) {
  if (per_gate_error < 0) throw std::invalid_argument("uncorrelated_error_aggregate: error must be >= 0");
  if (gate_count < 0) throw std::invalid_argument("uncorrelated_error_aggregate: count must be >= 0");
  return per_gate_error * std::sqrt(static_cast<double>(gate_count));
}

void to_json(nlohmann::json& j, const UmqPlan& p) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : p.steps)
    steps.push_back({{"kind", s.kind == UmqStepKind::kPairGate ? "pair_gate" : "swap"},
                     {"ion_a", s.ion_a},
                     {"ion_b", s.ion_b}});
  j = nlohmann::json{{"ion_count", p.ion_count},
                     {"target_ion", p.target_ion},
                     {"steps", steps},
                     {"fast_gate_count", p.fast_gate_count},
                     {"local_rotation_count", p.local_rotation_count},
                     {"fidelity_lower_bound", p.fidelity_lower_bound},
                     {"total_duration_s", p.total_duration_s}};
}

}  // namespace fastgate

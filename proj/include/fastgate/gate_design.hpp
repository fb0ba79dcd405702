#pragma once

#include <array>
#include <complex>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fastgate/ion_chain.hpp"

namespace fastgate {

// Internal-state branch of the addressed pair. Index bit 1 is ion i, bit 0 is
// ion j; bit value 0 means sigma_z eigenvalue +1. So branch 0 = (+,+),
// 1 = (+,-), 2 = (-,+), 3 = (-,-).
inline constexpr int kNumBranches = 4;
inline double branch_sign_i(int branch) { return (branch & 2) ? -1.0 : 1.0; }
inline double branch_sign_j(int branch) { return (branch & 1) ? -1.0 : 1.0; }
inline double branch_zz(int branch) { return branch_sign_i(branch) * branch_sign_j(branch); }

struct Kick {
  double time_s = 0.0;
  int pulse_pairs = 0;  // signed zeta_c; sign is the kick direction
};

// Ordered momentum-kick sequence addressed to one adjacent ion pair.
struct KickSequence {
  std::vector<Kick> kicks;  // times strictly increasing, magnitudes nonzero
  int ion_i = 1;            // 1-based ion indices
  int ion_j = 2;
  int base_pairs = 0;       // n for FRAG-built sequences, 0 otherwise

  void validate(int num_ions) const;  // throws std::invalid_argument
};

// Per-mode, per-branch residual displacements (interaction picture, time
// origin at t = 0).
using BranchDisplacements = std::array<std::vector<std::complex<double>>, kNumBranches>;

struct GateOutcome {
  KickSequence sequence;
  BranchDisplacements displacements;
  double conditional_phase = 0.0;  // chi, radians
  double fidelity = 0.0;           // state-averaged, thermal motional state
  double duration_s = 0.0;         // t_last - t_first
};

// The 6-kick antisymmetric sequence with magnitudes (-n, 2n, -2n, 2n, -2n, n)
// at times (-tau1, -tau2, -tau3, tau3, tau2, tau1). No ordering among the tau
// values is imposed; each keeps its own magnitude label.
KickSequence frag_sequence(int n, double tau1_s, double tau2_s, double tau3_s,
                           int ion_i = 1, int ion_j = 2);

// Summed kick displacements per mode and branch:
//   alpha_p = -2i * eta_p * (b_pi s_i + b_pj s_j) * sum_c zeta_c e^{i w_p t_c}
BranchDisplacements conditional_displacement(const KickSequence& seq,
                                             const ModeStructure& modes);

// Accumulated phase of branch `b`: sum over modes and kick pairs of
// kappa_c kappa_d sin(w_p (t_d - t_c)) with kappa = 2 zeta eta_p (b_pi s_i + b_pj s_j).
std::array<double, kNumBranches> branch_phases(const KickSequence& seq,
                                               const ModeStructure& modes);

// Coefficient of sigma_z^i sigma_z^j in the accumulated two-ion phase.
double conditional_phase(const KickSequence& seq, const ModeStructure& modes);

// Closed-form average of the overlap with the ideal exp(i pi/4 zz) gate over
// Haar-random two-qubit states, motional modes traced against a thermal
// product state of occupation nbar.
double state_averaged_fidelity(const KickSequence& seq, const ModeStructure& modes,
                               double nbar);

double gate_duration(const KickSequence& seq);

// Convenience bundle of the above.
GateOutcome evaluate_gate(const KickSequence& seq, const ModeStructure& modes, double nbar);

void to_json(nlohmann::json& j, const KickSequence& s);
void from_json(const nlohmann::json& j, KickSequence& s);
void to_json(nlohmann::json& j, const GateOutcome& g);
void from_json(const nlohmann::json& j, GateOutcome& g);

}  // namespace fastgate

#pragma once

#include <complex>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "fastgate/gate_design.hpp"
#include "fastgate/ion_chain.hpp"

namespace fastgate {

// Square-pulse parameters. area_scale is xi; xi = 1 is a perfect pi pulse.
struct PulseParams {
  double area_scale = 1.0;
  double pulse_duration_s = 1e-12;
  double relative_phase = std::numbers::pi;  // between the pulses of a pair

  void validate() const;
};

// ---------------------------------------------------------------------------
// Fock-space primitives
// ---------------------------------------------------------------------------

Eigen::MatrixXcd lowering_operator(int dim);

// Exact truncated exp(alpha a+ - alpha* a), computed by diagonalizing the
// Hermitian generator. Unitary on the truncated space for any alpha.
Eigen::MatrixXcd displacement_matrix(std::complex<double> alpha, int dim);

// Diagonal of exp(-i 2 pi f n dt) on the number basis.
Eigen::VectorXcd free_evolution_phases(double freq_hz, double dt_s, int dim);

// Schroedinger-picture displacement of kick c on mode p for internal branch b:
//   -2i zeta_c eta_p (b_pi s_i + b_pj s_j)
std::complex<double> kick_amplitude(const KickSequence& seq, const ModeStructure& modes,
                                    int kick_index, int mode, int branch);

// Largest |partial interaction-picture displacement| over branches and kick
// prefixes; used to size Fock truncations before simulating.
double running_displacement_bound(const KickSequence& seq, const ModeStructure& modes,
                                  int mode);

int suggest_fock_truncation(const KickSequence& seq, const ModeStructure& modes,
                            int mode, int initial_level = 0);

// Thermal number-state weights nbar^n / (1+nbar)^(n+1), truncated once the
// cumulative weight exceeds 1 - weight_cut.
std::vector<double> thermal_weights(double nbar, double weight_cut = 1e-8);

// ---------------------------------------------------------------------------
// Kick-sequence evolution (Eq.-of-motion brute force, exact within truncation)
// ---------------------------------------------------------------------------

// Per-mode motional operators for one internal branch: the ordered product of
// kick displacements and free-evolution phases over [t_first, t_last].
std::vector<Eigen::MatrixXcd> branch_mode_operators(const KickSequence& seq,
                                                    const ModeStructure& modes,
                                                    int branch, int n_max);

struct OracleFidelity {
  double fidelity = 0.0;
  int n_max = 0;       // truncation the result was accepted at
  double leakage = 0.0;  // worst top-two-level population seen
};

// State-averaged fidelity from the full truncated-Fock evolution, with the
// thermal state assembled as a convex mixture of number states. Independent
// of the closed-form path in gate_design: the Haar average is taken through
// the second-moment identity on the numerically assembled branch operators.
// n_max = 0 picks a truncation automatically and grows it until the top-two
// Fock-level leakage is below 1e-8.
OracleFidelity oracle_state_averaged_fidelity(const KickSequence& seq,
                                              const ModeStructure& modes, double nbar,
                                              int n_max = 0);

// Final interaction-picture displacement of each branch/mode extracted from
// the evolved vacuum state (phase-space centroid), time origin at t = 0.
BranchDisplacements oracle_displacements(const KickSequence& seq,
                                         const ModeStructure& modes, int n_max = 0);

// Two-qubit conditional phase extracted from the branch vacuum amplitudes.
// Defined modulo pi/2; returned in (-pi/4, pi/4].
double oracle_conditional_phase(const KickSequence& seq, const ModeStructure& modes,
                                int n_max = 0);

// ---------------------------------------------------------------------------
// Representative-state fidelity (even superposition of computational states)
// ---------------------------------------------------------------------------

Eigen::VectorXcd representative_qubit_state(int num_qubits);

// Diagonal of exp(i pi/4 sz_i sz_j) on `num_qubits` qubits (1-based ions).
Eigen::VectorXcd ideal_phase_gate_diagonal(int num_qubits, int ion_i, int ion_j);

// |<ideal|real>|^2 for normalized state vectors.
double representative_fidelity(const Eigen::VectorXcd& real_state,
                               const Eigen::VectorXcd& ideal_state);

// Representative fidelity of a perfect-kick gate started from number state
// `initial_level` in every mode.
double representative_fidelity_kicks(const KickSequence& seq, const ModeStructure& modes,
                                     int initial_level = 0, int n_max = 0);

// ---------------------------------------------------------------------------
// Finite square pulses
// ---------------------------------------------------------------------------

// Exact infidelity of one square pi pulse with area scale xi, measured on a
// computational basis state; asymptotically (pi^2/4)(1-xi)^2.
double rotational_infidelity(double xi);

// Internal-state unitary of a resonant square pulse: rotation angle xi*pi
// about the axis at azimuth phi.
Eigen::Matrix2cd square_pulse_unitary(double xi, double phi);

struct PulseGateResult {
  double fidelity = 0.0;
  double rotational_infidelity = 0.0;
  double separability_residual = -1.0;  // <0 when the check was not run
  bool accuracy_warning = false;
  int n_max = 0;
};

// Representative fidelity of the gate with every momentum kick implemented as
// |zeta| pairs of finite square pulses (relative phase pi within a pair).
// Motional modes are evolved separably, one truncated-Fock simulation per
// mode, and recombined as a product of per-mode return operators. Initial
// motional state: first excited number state in every mode. For 2-mode traps
// `check_separability` runs the full joint simulation and records the
// fidelity residual; a residual above 1e-4 sets accuracy_warning.
PulseGateResult pulse_error_gate(const KickSequence& seq, const ModeStructure& modes,
                                 const PulseParams& pulse, int n_max = 0,
                                 bool check_separability = false);

// Full UMQ circuit on a small trap with finite square pulses: fast gate on
// (1,2), SWAP(1,2), fast gate on (2,3), ..., with each SWAP expanded into 3
// CNOTs (one phase gate + 4 local rotations each). Local rotations are
// applied as perfect instantaneous unitaries. `pair_sequences[k]` is the
// optimized sequence for pair (k+1, k+2). Returns the representative fidelity
// against the same circuit built from ideal phase gates.
double umq_pulse_fidelity(int num_ions, const std::vector<KickSequence>& pair_sequences,
                          const ModeStructure& modes, const PulseParams& pulse,
                          int n_max = 0);

}  // namespace fastgate

#pragma once

#include <cstdint>
#include <vector>

#include "fastgate/gate_design.hpp"
#include "fastgate/ion_chain.hpp"

namespace fastgate {

enum class NoiseChannel { kHeating, kDephasing };

struct NoiseParams {
  double heating_rate = 0.0;    // per second; jump ops sqrt(G) a_p and sqrt(G) a_p+
  double dephasing_rate = 0.0;  // per second; jump ops sqrt(G) sz_k
  int trajectories = 2000;
  int n_max = 0;                // 0 = pick automatically
  std::uint64_t seed = 1;
  double target_stderr = 0.0;   // 0 = no requested precision

  void validate() const;  // the two channels are never combined
};

struct TrajectoryFidelity {
  double mean = 0.0;
  double stderr = 0.0;
  int trajectories = 0;
  bool converged = true;            // false: more trajectories needed
  int suggested_trajectories = 0;   // estimate to reach target_stderr
};

// Monte Carlo quantum-trajectory fidelity of a kick gate under one noise
// channel. Kicks are instantaneous unitaries; between kicks each trajectory
// follows the analytic no-jump evolution (the free Hamiltonian is diagonal in
// the number basis) with jump times found by inverse transform on the norm
// decay. Initial state: representative qubit superposition, motional ground
// state. Fidelity is the representative-state measure with the motional
// modes traced out. Trajectories run concurrently on counter-derived random
// streams, so the result is independent of scheduling.
TrajectoryFidelity trajectory_fidelity(const KickSequence& seq, const ModeStructure& modes,
                                       const NoiseParams& noise);

struct NoiseSweepRow {
  double rate = 0.0;
  double infidelity = 0.0;
  double stderr = 0.0;
  int trajectories = 0;
};

// Infidelity versus rate for one channel; all points reuse the same seed so
// neighbouring rates share their random streams.
std::vector<NoiseSweepRow> noise_sweep(const KickSequence& seq, const ModeStructure& modes,
                                       const std::vector<double>& rates, NoiseChannel channel,
                                       const NoiseParams& base);

struct IdleJumpStats {
  double jump_probability = 0.0;  // fraction of trajectories with >= 1 jump
  long long up_jumps = 0;         // a+ jumps, all trajectories
  long long down_jumps = 0;       // a jumps
  int trajectories = 0;
};

// Idle single-mode heating: no kicks, duration `duration_s`, initial level
// sampled from a thermal distribution of occupation `nbar0` (0 = ground).
IdleJumpStats idle_heating_jumps(double gamma_h, double duration_s, int trajectories,
                                 std::uint64_t seed, double nbar0 = 0.0, int n_max = 64);

struct CoherenceDecay {
  double mean_sx = 0.0;
  double stderr = 0.0;
};

// Idle single qubit prepared in |+> under dephasing: returns <sigma_x>.
CoherenceDecay idle_dephasing_coherence(double gamma_d, double duration_s, int trajectories,
                                        std::uint64_t seed);

}  // namespace fastgate

#include "fastgate/noise_mc.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

#include "fastgate/oracle_sim.hpp"
#include "fastgate/parallel.hpp"
#include "fastgate/rng.hpp"

namespace fastgate {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
using cplx = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;

// Trajectory state kept in branch-factored form: the kick evolution, the
// per-mode jump operators and the diagonal no-jump generator all preserve
//   sum_q c_q |q> (x) v_{q,1} (x) ... (x) v_{q,L}.
struct TrajState {
  std::array<cplx, kNumBranches> coeff;
  std::array<std::vector<VectorXcd>, kNumBranches> vecs;  // [branch][mode]

  double norm2() const {
    double total = 0.0;
    for (int q = 0; q < kNumBranches; ++q) {
      double prod = std::norm(coeff[q]);
      for (const auto& v : vecs[q]) prod *= v.squaredNorm();
      total += prod;
    }
    return total;
  }

  void renormalize() {
    for (int q = 0; q < kNumBranches; ++q) {
      for (auto& v : vecs[q]) {
        double n = v.norm();
        if (n < 1e-150) { coeff[q] = 0.0; v.setZero(); v[0] = 1.0; continue; }
        coeff[q] *= n;
        v /= n;
      }
    }
    double total = 0.0;
    for (int q = 0; q < kNumBranches; ++q) total += std::norm(coeff[q]);
    double scale = 1.0 / std::sqrt(total);
    for (int q = 0; q < kNumBranches; ++q) coeff[q] *= scale;
  }
};

struct HeatingEngine {
  double gamma;
  const std::vector<double>* freqs_hz;

  // Unnormalized norm^2 after decaying the current state for time t.
  double survival(const TrajState& s, double t) const {
    double total = 0.0;
    for (int q = 0; q < kNumBranches; ++q) {
      double prod = std::norm(s.coeff[q]);
      if (prod == 0.0) continue;
      for (const auto& v : s.vecs[q]) {
        double y = std::exp(-2.0 * gamma * t);
        double mode_sum = 0.0;
        double yn = std::exp(-gamma * t);  // (2n+1) exponent at n = 0
        for (Eigen::Index n = 0; n < v.size(); ++n) {
          mode_sum += std::norm(v[n]) * yn;
          yn *= y;
        }
        prod *= mode_sum;
      }
      total += prod;
    }
    return total;
  }

  void decay(TrajState& s, double t) const {
    for (int q = 0; q < kNumBranches; ++q) {
      if (s.coeff[q] == cplx(0.0, 0.0)) continue;
      for (std::size_t p = 0; p < s.vecs[q].size(); ++p) {
        VectorXcd& v = s.vecs[q][p];
        const double omega = kTwoPi * (*freqs_hz)[p];
        for (Eigen::Index n = 0; n < v.size(); ++n)
          v[n] *= std::exp(cplx(-gamma * (n + 0.5) * t, -omega * n * t));
      }
    }
  }
};

}  // namespace

void NoiseParams::validate() const {
  if (heating_rate < 0 || dephasing_rate < 0)
    throw std::invalid_argument("NoiseParams: rates must be >= 0");
  if (heating_rate > 0 && dephasing_rate > 0)
    throw std::invalid_argument("NoiseParams: heating and dephasing are simulated separately");
  if (trajectories < 1) throw std::invalid_argument("NoiseParams: trajectories must be >= 1");
}

namespace {

struct GateNoiseContext {
  const KickSequence* seq;
  const ModeStructure* modes;
  int n_max;
  double heating_rate;
  double dephasing_rate;
  // Displacement matrix per kick and branch and mode.
  std::vector<std::array<std::vector<MatrixXcd>, kNumBranches>> kick_ops;
  std::array<cplx, kNumBranches> target_amp;  // conj-ready ideal amplitudes
};

GateNoiseContext make_context(const KickSequence& seq, const ModeStructure& modes,
                              const NoiseParams& noise) {
  GateNoiseContext ctx;
  ctx.seq = &seq;
  ctx.modes = &modes;
  ctx.heating_rate = noise.heating_rate;
  ctx.dephasing_rate = noise.dephasing_rate;

  int n = noise.n_max;
  if (n <= 0) {
    n = 8;
    for (int p = 0; p < modes.num_ions(); ++p)
      n = std::max(n, suggest_fock_truncation(seq, modes, p, 0));
    n += 16;  // headroom for a+ jumps
  }
  ctx.n_max = n;

  const int dim = n + 1;
  const int num_modes = modes.num_ions();
  std::map<std::pair<double, double>, MatrixXcd> cache;
  ctx.kick_ops.resize(seq.kicks.size());
  for (std::size_t c = 0; c < seq.kicks.size(); ++c) {
    for (int b = 0; b < kNumBranches; ++b) {
      ctx.kick_ops[c][b].resize(num_modes);
      for (int p = 0; p < num_modes; ++p) {
        cplx alpha = kick_amplitude(seq, modes, static_cast<int>(c), p, b);
        auto key = std::make_pair(alpha.real(), alpha.imag());
        auto it = cache.find(key);
        if (it == cache.end()) it = cache.emplace(key, displacement_matrix(alpha, dim)).first;
        ctx.kick_ops[c][b][p] = it->second;
      }
    }
  }

  const double quarter_pi = std::numbers::pi / 4.0;
  for (int b = 0; b < kNumBranches; ++b)
    ctx.target_amp[b] = 0.5 * std::exp(cplx(0.0, quarter_pi * branch_zz(b)));
  return ctx;
}

// Evolves one no-jump/jump segment of length `span` under heating. Returns
// jump counts through the counters.
void evolve_heating_segment(const GateNoiseContext& ctx, TrajState& state, double span,
                            SplitMix64& rng, double& threshold, long long* up_jumps,
                            long long* down_jumps) {
  HeatingEngine engine{ctx.heating_rate, &ctx.modes->mode_freqs_hz};
  double remaining = span;
  while (remaining > 0) {
    double end_norm = engine.survival(state, remaining);
    if (end_norm > threshold) {
      engine.decay(state, remaining);
      return;
    }
    // Bisect the jump time: survival is monotone decreasing.
    double lo = 0.0, hi = remaining;
    for (int it = 0; it < 200 && (hi - lo) > 1e-16 * span; ++it) {
      double mid = 0.5 * (lo + hi);
      (engine.survival(state, mid) > threshold ? lo : hi) = mid;
    }
    double t_jump = 0.5 * (lo + hi);
    engine.decay(state, t_jump);
    remaining -= t_jump;

    // Jump operator weights: G ||a v||^2 or G ||a+ v||^2 per mode, summed
    // over branches with the spectator-mode norms factored in.
    const int num_modes = ctx.modes->num_ions();
    std::vector<double> weights(2 * num_modes, 0.0);
    for (int q = 0; q < kNumBranches; ++q) {
      double cq = std::norm(state.coeff[q]);
      if (cq == 0.0) continue;
      std::vector<double> norms(num_modes);
      for (int p = 0; p < num_modes; ++p) norms[p] = state.vecs[q][p].squaredNorm();
      for (int p = 0; p < num_modes; ++p) {
        double spectators = cq;
        for (int p2 = 0; p2 < num_modes; ++p2)
          if (p2 != p) spectators *= norms[p2];
        const VectorXcd& v = state.vecs[q][p];
        double down = 0.0, up = 0.0;
        for (Eigen::Index n = 1; n < v.size(); ++n) down += n * std::norm(v[n]);
        for (Eigen::Index n = 0; n + 1 < v.size(); ++n) up += (n + 1) * std::norm(v[n]);
        weights[2 * p] += spectators * down;
        weights[2 * p + 1] += spectators * up;
      }
    }
    double total = 0.0;
    for (double w : weights) total += w;
    double pick = rng.next_double() * total;
    int chosen = 0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      pick -= weights[k];
      if (pick <= 0) { chosen = static_cast<int>(k); break; }
    }
    int mode = chosen / 2;
    bool is_up = chosen % 2;
    if (is_up) ++(*up_jumps); else ++(*down_jumps);

    for (int q = 0; q < kNumBranches; ++q) {
      VectorXcd& v = state.vecs[q][mode];
      VectorXcd next = VectorXcd::Zero(v.size());
      if (is_up) {
        for (Eigen::Index n = 0; n + 1 < v.size(); ++n)
          next[n + 1] = std::sqrt(static_cast<double>(n + 1)) * v[n];
      } else {
        for (Eigen::Index n = 1; n < v.size(); ++n)
          next[n - 1] = std::sqrt(static_cast<double>(n)) * v[n];
      }
      v = std::move(next);
    }
    state.renormalize();
    threshold = rng.next_double_open0();
  }
}

void evolve_dephasing_segment(const GateNoiseContext& ctx, TrajState& state, double span,
                              SplitMix64& rng, double& threshold, long long* jumps) {
  // Uniform norm decay: rate K * G with K = 2 addressed ions.
  const double k_ions = 2.0;
  const double rate = k_ions * ctx.dephasing_rate;
  const int num_modes = ctx.modes->num_ions();

  auto free_phases = [&](double t) {
    for (int q = 0; q < kNumBranches; ++q)
      for (int p = 0; p < num_modes; ++p) {
        VectorXcd& v = state.vecs[q][p];
        const double omega = kTwoPi * ctx.modes->mode_freqs_hz[p];
        for (Eigen::Index n = 0; n < v.size(); ++n)
          v[n] *= std::exp(cplx(0.0, -omega * n * t));
      }
  };

  double remaining = span;
  double norm2 = state.norm2();
  while (remaining > 0) {
    if (rate == 0.0) { free_phases(remaining); return; }
    double t_jump = std::log(norm2 / threshold) / rate;  // norm2 e^{-rate t} = u
    if (t_jump > remaining) {
      free_phases(remaining);
      double decay = std::exp(-0.5 * rate * remaining);
      for (int q = 0; q < kNumBranches; ++q) state.coeff[q] *= decay;
      return;
    }
    free_phases(t_jump);
    remaining -= t_jump;
    ++(*jumps);
    // sz on a random addressed ion flips the sign of half the branches.
    bool on_ion_i = rng.next_double() < 0.5;
    for (int q = 0; q < kNumBranches; ++q)
      state.coeff[q] *= on_ion_i ? branch_sign_i(q) : branch_sign_j(q);
    state.renormalize();
    norm2 = 1.0;
    threshold = rng.next_double_open0();
  }
}

double run_trajectory(const GateNoiseContext& ctx, std::uint64_t master_seed,
                      std::uint64_t traj_id, long long* up, long long* down) {
  SplitMix64 rng(master_seed, traj_id);
  const int num_modes = ctx.modes->num_ions();
  const int dim = ctx.n_max + 1;

  TrajState state;
  for (int q = 0; q < kNumBranches; ++q) {
    state.coeff[q] = 0.5;
    state.vecs[q].assign(num_modes, VectorXcd::Zero(dim));
    for (int p = 0; p < num_modes; ++p) state.vecs[q][p][0] = 1.0;
  }

  double threshold = rng.next_double_open0();
  const auto& kicks = ctx.seq->kicks;
  for (std::size_t c = 0; c < kicks.size(); ++c) {
    // kick c
    for (int q = 0; q < kNumBranches; ++q)
      for (int p = 0; p < num_modes; ++p)
        state.vecs[q][p] = ctx.kick_ops[c][q][p] * state.vecs[q][p];
    // free + noise until the next kick
    if (c + 1 < kicks.size()) {
      double span = kicks[c + 1].time_s - kicks[c].time_s;
      if (ctx.heating_rate > 0)
        evolve_heating_segment(ctx, state, span, rng, threshold, up, down);
      else if (ctx.dephasing_rate > 0)
        evolve_dephasing_segment(ctx, state, span, rng, threshold, up);
      else {
        // noiseless free evolution
        for (int q = 0; q < kNumBranches; ++q)
          for (int p = 0; p < num_modes; ++p) {
            VectorXcd& v = state.vecs[q][p];
            const double omega = kTwoPi * ctx.modes->mode_freqs_hz[p];
            for (Eigen::Index n = 0; n < v.size(); ++n)
              v[n] *= std::exp(cplx(0.0, -omega * n * span));
          }
      }
    }
  }
  state.renormalize();

  // Traced representative fidelity: || sum_q conj(t_q) c_q (x)_p v_qp ||^2.
  Eigen::Index joint = 1;
  for (int p = 0; p < num_modes; ++p) joint *= dim;
  VectorXcd g = VectorXcd::Zero(joint);
  for (int q = 0; q < kNumBranches; ++q) {
    cplx w = std::conj(ctx.target_amp[q]) * state.coeff[q];
    if (w == cplx(0.0, 0.0)) continue;
    VectorXcd acc = VectorXcd::Ones(1);
    for (int p = 0; p < num_modes; ++p) {
      VectorXcd next(acc.size() * dim);
      for (Eigen::Index a = 0; a < acc.size(); ++a)
        next.segment(a * dim, dim) = acc[a] * state.vecs[q][p];
      acc = std::move(next);
    }
    g += w * acc;
  }
  return g.squaredNorm();
}

}  // namespace

TrajectoryFidelity trajectory_fidelity(const KickSequence& seq, const ModeStructure& modes,
                                       const NoiseParams& noise) {
  noise.validate();
  seq.validate(modes.num_ions());
  if (modes.num_ions() > 3)
    throw std::invalid_argument("trajectory_fidelity: limited to 2- and 3-ion traps");
  if (seq.kicks.empty()) throw std::invalid_argument("trajectory_fidelity: empty sequence");

  GateNoiseContext ctx = make_context(seq, modes, noise);

  std::vector<double> fid(noise.trajectories);
  std::vector<long long> ups(noise.trajectories, 0), downs(noise.trajectories, 0);
  parallel_for(noise.trajectories, [&](std::size_t t) {
    fid[t] = run_trajectory(ctx, noise.seed, t, &ups[t], &downs[t]);
  });

  double mean = 0.0;
  for (double f : fid) mean += f;
  mean /= noise.trajectories;
  double var = 0.0;
  for (double f : fid) var += (f - mean) * (f - mean);
  var = noise.trajectories > 1 ? var / (noise.trajectories - 1) : 0.0;

  TrajectoryFidelity out;
  out.mean = mean;
  out.stderr = std::sqrt(var / noise.trajectories);
  out.trajectories = noise.trajectories;
  if (noise.target_stderr > 0 && out.stderr > noise.target_stderr) {
    out.converged = false;
    double ratio = out.stderr / noise.target_stderr;
    out.suggested_trajectories =
        static_cast<int>(std::ceil(noise.trajectories * ratio * ratio));
  }
  return out;
}

std::vector<NoiseSweepRow> noise_sweep(const KickSequence& seq, const ModeStructure& modes,
                                       const std::vector<double>& rates, NoiseChannel channel,
                                       const NoiseParams& base) {
  std::vector<NoiseSweepRow> rows;
  for (double rate : rates) {
    NoiseParams p = base;
    p.heating_rate = channel == NoiseChannel::kHeating ? rate : 0.0;
    p.dephasing_rate = channel == NoiseChannel::kDephasing ? rate : 0.0;
    TrajectoryFidelity f = trajectory_fidelity(seq, modes, p);
    rows.push_back({rate, 1.0 - f.mean, f.stderr, f.trajectories});
  }
  return rows;
}

IdleJumpStats idle_heating_jumps(double gamma_h, double duration_s, int trajectories,
                                 std::uint64_t seed, double nbar0, int n_max) {
  if (gamma_h < 0) throw std::invalid_argument("idle_heating_jumps: rate must be >= 0");
  if (trajectories < 1) throw std::invalid_argument("idle_heating_jumps: trajectories >= 1");

  std::vector<double> weights = thermal_weights(nbar0, 1e-12);
  std::vector<long long> ups(trajectories, 0), downs(trajectories, 0);
  std::vector<int> jumped(trajectories, 0);
  const int dim = n_max + 1;

  parallel_for(trajectories, [&](std::size_t t) {
    SplitMix64 rng(seed, t);
    // thermal initial level
    double pick = rng.next_double();
    int level = 0;
    for (std::size_t n = 0; n < weights.size(); ++n) {
      pick -= weights[n];
      if (pick <= 0) { level = static_cast<int>(n); break; }
      level = static_cast<int>(n);
    }

    double remaining = duration_s;
    while (remaining > 0 && gamma_h > 0) {
      // survival e^{-G (2n+1) t} for a number state
      double rate = gamma_h * (2.0 * level + 1.0);
      double t_jump = -std::log(rng.next_double_open0()) / rate;
      if (t_jump > remaining) break;
      remaining -= t_jump;
      double up_w = gamma_h * (level + 1);
      double down_w = gamma_h * level;
      if (rng.next_double() * (up_w + down_w) < up_w) {
        if (level + 1 < dim) ++level;
        ++ups[t];
      } else {
        --level;
        ++downs[t];
      }
      jumped[t] = 1;
    }
  });

  IdleJumpStats out;
  out.trajectories = trajectories;
  long long jumped_count = 0;
  for (int t = 0; t < trajectories; ++t) {
    out.up_jumps += ups[t];
    out.down_jumps += downs[t];
    jumped_count += jumped[t];
  }
  out.jump_probability = static_cast<double>(jumped_count) / trajectories;
  return out;
}

CoherenceDecay idle_dephasing_coherence(double gamma_d, double duration_s, int trajectories,
                                        std::uint64_t seed) {
  if (gamma_d < 0) throw std::invalid_argument("idle_dephasing_coherence: rate must be >= 0");
  std::vector<double> sx(trajectories);
  parallel_for(trajectories, [&](std::size_t t) {
    SplitMix64 rng(seed, t);
    int jumps = 0;
    double remaining = duration_s;
    while (gamma_d > 0) {
      double t_jump = -std::log(rng.next_double_open0()) / gamma_d;
      if (t_jump > remaining) break;
      remaining -= t_jump;
      ++jumps;
    }
    sx[t] = (jumps % 2 == 0) ? 1.0 : -1.0;
  });
  double mean = 0.0;
  for (double v : sx) mean += v;
  mean /= trajectories;
  double var = 0.0;
  for (double v : sx) var += (v - mean) * (v - mean);
  var = trajectories > 1 ? var / (trajectories - 1) : 0.0;
  return {mean, std::sqrt(var / trajectories)};
}

}  // namespace fastgate

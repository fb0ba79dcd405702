#include "fastgate/oracle_sim.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <utility>

#include "fastgate/errors.hpp"

namespace fastgate {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kQuarterPi = std::numbers::pi / 4.0;
constexpr double kLeakageTol = 1e-8;
using cplx = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;

double ideal_branch_phase(int branch) { return kQuarterPi * branch_zz(branch); }

}  // namespace

void PulseParams::validate() const {
  if (!(area_scale > 0)) throw std::invalid_argument("PulseParams: area scale must be positive");
  if (pulse_duration_s < 0) throw std::invalid_argument("PulseParams: pulse duration must be >= 0");
}

Eigen::MatrixXcd lowering_operator(int dim) {
  MatrixXcd a = MatrixXcd::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

Eigen::MatrixXcd displacement_matrix(cplx alpha, int dim) {
  if (dim < 1) throw std::invalid_argument("displacement_matrix: dim must be >= 1");
  // exp(alpha a+ - alpha* a) = exp(-iH) with H = i(alpha a+ - alpha* a) Hermitian.
  MatrixXcd a = lowering_operator(dim);
  MatrixXcd h = cplx(0.0, 1.0) * (alpha * a.adjoint() - std::conj(alpha) * a);
  Eigen::SelfAdjointEigenSolver<MatrixXcd> solver(h);
  VectorXcd phases(dim);
  for (int k = 0; k < dim; ++k)
    phases[k] = std::exp(cplx(0.0, -solver.eigenvalues()[k]));
  return solver.eigenvectors() * phases.asDiagonal() * solver.eigenvectors().adjoint();
}

Eigen::VectorXcd free_evolution_phases(double freq_hz, double dt_s, int dim) {
  VectorXcd d(dim);
  const double omega = kTwoPi * freq_hz;
  for (int n = 0; n < dim; ++n) d[n] = std::exp(cplx(0.0, -omega * n * dt_s));
  return d;
}

std::complex<double> kick_amplitude(const KickSequence& seq, const ModeStructure& modes,
                                    int kick_index, int mode, int branch) {
  const int i = seq.ion_i - 1;
  const int j = seq.ion_j - 1;
  double coupling = modes.mode_lamb_dicke[mode] *
                    (modes.mode_matrix(mode, i) * branch_sign_i(branch) +
                     modes.mode_matrix(mode, j) * branch_sign_j(branch));
  return cplx(0.0, -2.0) * static_cast<double>(seq.kicks[kick_index].pulse_pairs) * coupling;
}

double running_displacement_bound(const KickSequence& seq, const ModeStructure& modes,
                                  int mode) {
  const double omega = kTwoPi * modes.mode_freqs_hz[mode];
  double worst = 0.0;
  for (int b = 0; b < kNumBranches; ++b) {
    cplx acc(0.0, 0.0);
    for (std::size_t c = 0; c < seq.kicks.size(); ++c) {
      acc += kick_amplitude(seq, modes, static_cast<int>(c), mode, b) *
             std::exp(cplx(0.0, omega * seq.kicks[c].time_s));
      worst = std::max(worst, std::abs(acc));
    }
  }
  return worst;
}

int suggest_fock_truncation(const KickSequence& seq, const ModeStructure& modes,
                            int mode, int initial_level) {
  double b = running_displacement_bound(seq, modes, mode) + std::sqrt(static_cast<double>(initial_level));
  return static_cast<int>(std::ceil(b * b + 8.0 * b + 16.0)) + 3 * initial_level;
}

std::vector<double> thermal_weights(double nbar, double weight_cut) {
  if (nbar < 0) throw std::invalid_argument("thermal_weights: nbar must be >= 0");
  std::vector<double> w;
  if (nbar == 0.0) {
    w.push_back(1.0);
    return w;
  }
  double ratio = nbar / (1.0 + nbar);
  double p = 1.0 / (1.0 + nbar);
  double cum = 0.0;
  while (cum < 1.0 - weight_cut) {
    w.push_back(p);
    cum += p;
    p *= ratio;
  }
  return w;
}

std::vector<Eigen::MatrixXcd> branch_mode_operators(const KickSequence& seq,
                                                    const ModeStructure& modes,
                                                    int branch, int n_max) {
  seq.validate(modes.num_ions());
  if (n_max < 2) throw std::invalid_argument("branch_mode_operators: n_max must be >= 2");
  const int num_modes = modes.num_ions();
  const int dim = n_max + 1;
  const int num_kicks = static_cast<int>(seq.kicks.size());

  std::vector<MatrixXcd> ops(num_modes, MatrixXcd::Identity(dim, dim));
  std::map<std::pair<double, double>, MatrixXcd> cache;

  for (int p = 0; p < num_modes; ++p) {
    for (int c = 0; c < num_kicks; ++c) {
      cplx alpha = kick_amplitude(seq, modes, c, p, branch);
      auto key = std::make_pair(alpha.real(), alpha.imag());
      auto it = cache.find(key);
      if (it == cache.end())
        it = cache.emplace(key, displacement_matrix(alpha, dim)).first;
      ops[p] = it->second * ops[p];
      if (c + 1 < num_kicks) {
        VectorXcd ph = free_evolution_phases(modes.mode_freqs_hz[p],
                                             seq.kicks[c + 1].time_s - seq.kicks[c].time_s, dim);
        ops[p] = ph.asDiagonal() * ops[p];
      }
    }
    cache.clear();
  }
  return ops;
}

namespace {

// Joint motional vector from per-mode vectors, mode 0 slowest index.
VectorXcd kron_vectors(const std::vector<VectorXcd>& vs) {
  VectorXcd out = VectorXcd::Ones(1);
  for (const auto& v : vs) {
    VectorXcd next(out.size() * v.size());
    for (Eigen::Index a = 0; a < out.size(); ++a)
      next.segment(a * v.size(), v.size()) = out[a] * v;
    out = std::move(next);
  }
  return out;
}

double top_two_population(const VectorXcd& v) {
  const int dim = static_cast<int>(v.size());
  return std::norm(v[dim - 1]) + std::norm(v[dim - 2]);
}

struct ThermalTerm {
  std::vector<int> levels;
  double weight;
};

std::vector<ThermalTerm> joint_thermal_terms(double nbar, int num_modes) {
  std::vector<double> w = thermal_weights(nbar);
  std::vector<ThermalTerm> terms;
  std::vector<int> idx(num_modes, 0);
  for (;;) {
    double weight = 1.0;
    for (int p = 0; p < num_modes; ++p) weight *= w[idx[p]];
    terms.push_back({idx, weight});
    int p = num_modes - 1;
    while (p >= 0) {
      if (++idx[p] < static_cast<int>(w.size())) break;
      idx[p] = 0;
      --p;
    }
    if (p < 0) break;
  }
  return terms;
}

struct OracleRun {
  double fidelity;
  double leakage;
};

OracleRun run_oracle_fidelity(const KickSequence& seq, const ModeStructure& modes,
                              double nbar, int n_max) {
  const int num_modes = modes.num_ions();
  const int dim = n_max + 1;

  std::array<std::vector<MatrixXcd>, kNumBranches> ops;
  for (int b = 0; b < kNumBranches; ++b) ops[b] = branch_mode_operators(seq, modes, b, n_max);

  const auto terms = joint_thermal_terms(nbar, num_modes);
  double t1 = 0.0;
  double covered = 0.0;
  double leakage = 0.0;

  for (const auto& term : terms) {
    VectorXcd joint;
    bool first = true;
    for (int b = 0; b < kNumBranches; ++b) {
      std::vector<VectorXcd> per_mode(num_modes);
      for (int p = 0; p < num_modes; ++p) {
        per_mode[p] = ops[b][p].col(term.levels[p]);
        leakage = std::max(leakage, top_two_population(per_mode[p]));
      }
      cplx phase = std::exp(cplx(0.0, -ideal_branch_phase(b)));
      if (first) {
        joint = phase * kron_vectors(per_mode);
        first = false;
      } else {
        joint += phase * kron_vectors(per_mode);
      }
    }
    t1 += term.weight * joint.squaredNorm();
    covered += term.weight;
  }

  // Haar second moment: F = (T1 + sum_b Tr[M_b rho M_b+]) / (d(d+1)); the
  // branch operators are unitary so the second term is 4 per unit weight.
  double f = (t1 + 4.0 * covered) / 20.0;
  return {std::clamp(f, 0.0, 1.0), leakage};
}

int auto_truncation(const KickSequence& seq, const ModeStructure& modes, int initial_level) {
  int n = 8;
  for (int p = 0; p < modes.num_ions(); ++p)
    n = std::max(n, suggest_fock_truncation(seq, modes, p, initial_level));
  return n;
}

}  // namespace

OracleFidelity oracle_state_averaged_fidelity(const KickSequence& seq,
                                              const ModeStructure& modes, double nbar,
                                              int n_max) {
  if (nbar < 0) throw std::invalid_argument("oracle_state_averaged_fidelity: nbar must be >= 0");
  constexpr int kDimCap = 4096;
  int thermal_levels = static_cast<int>(thermal_weights(nbar).size());
  int n = n_max > 0 ? n_max : auto_truncation(seq, modes, thermal_levels);
  for (;;) {
    OracleRun run = run_oracle_fidelity(seq, modes, nbar, n);
    if (run.leakage < kLeakageTol) return {run.fidelity, n, run.leakage};
    if (n_max > 0 || n > kDimCap)
      throw truncation_error("oracle_state_averaged_fidelity: truncation leakage " +
                                 std::to_string(run.leakage) + " at n_max " + std::to_string(n),
                             n * 2);
    n = n * 3 / 2 + 8;
  }
}

BranchDisplacements oracle_displacements(const KickSequence& seq, const ModeStructure& modes,
                                         int n_max) {
  const int num_modes = modes.num_ions();
  int n = n_max > 0 ? n_max : auto_truncation(seq, modes, 0);
  BranchDisplacements out;
  MatrixXcd a = lowering_operator(n + 1);
  for (int b = 0; b < kNumBranches; ++b) {
    auto ops = branch_mode_operators(seq, modes, b, n);
    out[b].resize(num_modes);
    for (int p = 0; p < num_modes; ++p) {
      VectorXcd v = ops[p].col(0);  // evolved vacuum
      if (top_two_population(v) > kLeakageTol)
        throw truncation_error("oracle_displacements: truncation too small", n * 2);
      // Undo the Schroedinger-picture rotation so the centroid sits at the
      // t = 0 interaction-picture value used by the analytic module.
      cplx centroid = (v.adjoint() * (a * v))(0, 0);
      double omega = kTwoPi * modes.mode_freqs_hz[p];
      out[b][p] = centroid * std::exp(cplx(0.0, omega * seq.kicks.back().time_s));
    }
  }
  return out;
}

double oracle_conditional_phase(const KickSequence& seq, const ModeStructure& modes,
                                int n_max) {
  int n = n_max > 0 ? n_max : auto_truncation(seq, modes, 0);
  std::array<cplx, kNumBranches> vacuum_amp;
  for (int b = 0; b < kNumBranches; ++b) {
    auto ops = branch_mode_operators(seq, modes, b, n);
    cplx amp(1.0, 0.0);
    for (const auto& op : ops) amp *= op(0, 0);
    vacuum_amp[b] = amp;
  }
  // exp(4 i chi) = A++ A-- conj(A+-) conj(A-+); defined modulo pi/2.
  cplx prod = vacuum_amp[0] * vacuum_amp[3] * std::conj(vacuum_amp[1]) * std::conj(vacuum_amp[2]);
  return std::arg(prod) / 4.0;
}

Eigen::VectorXcd representative_qubit_state(int num_qubits) {
  const int dim = 1 << num_qubits;
  return VectorXcd::Constant(dim, cplx(1.0 / std::sqrt(static_cast<double>(dim)), 0.0));
}

Eigen::VectorXcd ideal_phase_gate_diagonal(int num_qubits, int ion_i, int ion_j) {
  const int dim = 1 << num_qubits;
  VectorXcd d(dim);
  for (int q = 0; q < dim; ++q) {
    double si = (q >> (num_qubits - ion_i)) & 1 ? -1.0 : 1.0;
    double sj = (q >> (num_qubits - ion_j)) & 1 ? -1.0 : 1.0;
    d[q] = std::exp(cplx(0.0, kQuarterPi * si * sj));
  }
  return d;
}

double representative_fidelity(const Eigen::VectorXcd& real_state,
                               const Eigen::VectorXcd& ideal_state) {
  if (real_state.size() != ideal_state.size())
    throw std::invalid_argument("representative_fidelity: dimension mismatch");
  return std::norm(ideal_state.dot(real_state));
}

double representative_fidelity_kicks(const KickSequence& seq, const ModeStructure& modes,
                                     int initial_level, int n_max) {
  const int num_modes = modes.num_ions();
  int n = n_max > 0 ? n_max : auto_truncation(seq, modes, initial_level);
  const double total_t = seq.kicks.back().time_s - seq.kicks.front().time_s;

  // <Psi_id|Psi_re> = (1/4) sum_b e^{-i phi_id(b)} prod_p <n0| U0(T)+ M_bp |n0>
  cplx overlap(0.0, 0.0);
  for (int b = 0; b < kNumBranches; ++b) {
    auto ops = branch_mode_operators(seq, modes, b, n);
    cplx amp = std::exp(cplx(0.0, -ideal_branch_phase(b)));
    for (int p = 0; p < num_modes; ++p) {
      if (top_two_population(ops[p].col(initial_level)) > kLeakageTol)
        throw truncation_error("representative_fidelity_kicks: truncation too small", n * 2);
      double omega = kTwoPi * modes.mode_freqs_hz[p];
      amp *= std::exp(cplx(0.0, omega * initial_level * total_t)) *
             ops[p](initial_level, initial_level);
    }
    overlap += 0.25 * amp;
  }
  return std::norm(overlap);
}

Eigen::Matrix2cd square_pulse_unitary(double xi, double phi) {
  // Resonant square pulse: rotation by xi*pi about (cos phi, sin phi, 0).
  Eigen::Matrix2cd sx, sy;
  sx << 0, 1, 1, 0;
  sy << 0, cplx(0, -1), cplx(0, 1), 0;
  Eigen::Matrix2cd gen = std::cos(phi) * sx + std::sin(phi) * sy;
  double half = 0.5 * xi * std::numbers::pi;
  return std::cos(half) * Eigen::Matrix2cd::Identity() - cplx(0, 1) * std::sin(half) * gen;
}

double rotational_infidelity(double xi) {
  Eigen::Matrix2cd u_re = square_pulse_unitary(xi, 0.0);
  Eigen::Matrix2cd u_id = square_pulse_unitary(1.0, 0.0);
  Eigen::Vector2cd basis(1.0, 0.0);
  cplx overlap = (basis.adjoint() * (u_re.adjoint() * u_id) * basis)(0, 0);
  return 1.0 - std::norm(overlap);
}

// ---------------------------------------------------------------------------
// Finite-pulse simulation
// ---------------------------------------------------------------------------

namespace {

// State-vector simulator for a qubit register coupled to one or more Fock
// modes through resonant laser pulses. The state is stored as a (Q x M)
// matrix, rows over qubit basis states, columns over the joint Fock basis.
class PulseSim {
 public:
  PulseSim(const ModeStructure& modes, std::vector<int> mode_ids, int num_qubits,
           int n_max, const PulseParams& pulse)
      : modes_(modes),
        mode_ids_(std::move(mode_ids)),
        num_qubits_(num_qubits),
        dim_(n_max + 1),
        pulse_(pulse) {
    joint_dim_ = 1;
    for (std::size_t k = 0; k < mode_ids_.size(); ++k) joint_dim_ *= dim_;
  }

  // E+ = exp(i k x_ion) restricted to the simulated modes.
  const MatrixXcd& plus_kick_operator(int ion /*1-based*/) {
    auto it = e_plus_.find(ion);
    if (it != e_plus_.end()) return it->second;
    MatrixXcd e = MatrixXcd::Identity(1, 1);
    for (int mode : mode_ids_) {
      cplx arg(0.0, modes_.mode_lamb_dicke[mode] * modes_.mode_matrix(mode, ion - 1));
      MatrixXcd d = displacement_matrix(arg, dim_);
      MatrixXcd next(e.rows() * dim_, e.cols() * dim_);
      for (Eigen::Index r = 0; r < e.rows(); ++r)
        for (Eigen::Index c = 0; c < e.cols(); ++c)
          next.block(r * dim_, c * dim_, dim_, dim_) = e(r, c) * d;
      e = std::move(next);
    }
    return e_plus_.emplace(ion, std::move(e)).first->second;
  }

  void reset(int qubit_basis_state, int fock_level_per_mode) {
    state_ = MatrixXcd::Zero(1 << num_qubits_, joint_dim_);
    int col = 0;
    for (std::size_t k = 0; k < mode_ids_.size(); ++k) col = col * dim_ + fock_level_per_mode;
    state_(qubit_basis_state, col) = 1.0;
    time_ = 0.0;
  }

  void apply_local(const MatrixXcd& u) { state_ = u * state_; }

  void advance_to(double t) {
    if (t < time_ - 1e-18) throw std::invalid_argument("PulseSim: pulse trains overlap");
    if (t <= time_) return;
    apply_free(t - time_);
    time_ = t;
  }

  // One resonant square pulse on `ion`: rotation angle xi*pi, laser azimuth
  // phi, travelling so that sigma+ picks up E+ (plus_direction) or E-.
  void apply_pulse(int ion, int register_pos, bool plus_direction, double phi) {
    const MatrixXcd& e_plus = plus_kick_operator(ion);
    const double half = 0.5 * pulse_.area_scale * std::numbers::pi;
    const double c = std::cos(half);
    const double s = std::sin(half);
    const cplx up = -cplx(0, 1) * s * std::exp(cplx(0, phi));
    const cplx dn = -cplx(0, 1) * s * std::exp(cplx(0, -phi));

    const int q_dim = 1 << num_qubits_;
    const int bit = num_qubits_ - 1 - register_pos;  // row bit of this ion
    for (int q = 0; q < q_dim; ++q) {
      if ((q >> bit) & 1) continue;
      int q1 = q | (1 << bit);
      VectorXcd v0 = state_.row(q).transpose();
      VectorXcd v1 = state_.row(q1).transpose();
      if (plus_direction) {
        state_.row(q) = (c * v0 + dn * (e_plus.adjoint() * v1)).transpose();
        state_.row(q1) = (c * v1 + up * (e_plus * v0)).transpose();
      } else {
        state_.row(q) = (c * v0 + dn * (e_plus * v1)).transpose();
        state_.row(q1) = (c * v1 + up * (e_plus.adjoint() * v0)).transpose();
      }
    }
  }

  // A momentum kick of `zeta` pulse pairs on the addressed ions. The first
  // pulse of each pair couples sigma+ to E- for positive zeta (this is what
  // reproduces the perfect-kick sign convention; pinned by regression test).
  void apply_kick(const KickSequence& seq, int reg_i, int reg_j, int zeta) {
    const bool first_plus = zeta < 0;
    const int pairs = std::abs(zeta);
    for (int k = 0; k < pairs; ++k) {
      apply_pulse(seq.ion_i, reg_i, first_plus, 0.0);
      apply_pulse(seq.ion_j, reg_j, first_plus, 0.0);
      apply_pulse(seq.ion_i, reg_i, !first_plus, pulse_.relative_phase);
      apply_pulse(seq.ion_j, reg_j, !first_plus, pulse_.relative_phase);
      if (pulse_.pulse_duration_s > 0) {
        apply_free(2.0 * pulse_.pulse_duration_s);
        time_ += 2.0 * pulse_.pulse_duration_s;
      }
    }
  }

  // Runs a whole fast gate; kick trains start at their nominal kick times,
  // shifted so the first kick begins at the current simulation time.
  void apply_fast_gate(const KickSequence& seq, int reg_i, int reg_j) {
    const double offset = time_ - seq.kicks.front().time_s;
    for (const Kick& k : seq.kicks) {
      advance_to(offset + k.time_s);
      apply_kick(seq, reg_i, reg_j, k.pulse_pairs);
    }
  }

  double time() const { return time_; }
  const MatrixXcd& state() const { return state_; }

  double leakage() const {
    // Worst top-two-level population over the simulated modes.
    double worst = 0.0;
    const int q_dim = 1 << num_qubits_;
    for (std::size_t k = 0; k < mode_ids_.size(); ++k) {
      int stride = 1;
      for (std::size_t k2 = k + 1; k2 < mode_ids_.size(); ++k2) stride *= dim_;
      double pop = 0.0;
      for (int q = 0; q < q_dim; ++q)
        for (int col = 0; col < joint_dim_; ++col) {
          int level = (col / stride) % dim_;
          if (level >= dim_ - 2) pop += std::norm(state_(q, col));
        }
      worst = std::max(worst, pop);
    }
    return worst;
  }

 private:
  void apply_free(double dt) {
    // Joint diagonal phases e^{-i sum_p w_p n_p dt}.
    for (int col = 0; col < joint_dim_; ++col) {
      double phase = 0.0;
      int rem = col;
      for (std::size_t k = mode_ids_.size(); k-- > 0;) {
        int level = rem % dim_;
        rem /= dim_;
        phase -= kTwoPi * modes_.mode_freqs_hz[mode_ids_[k]] * level * dt;
      }
      state_.col(col) *= std::exp(cplx(0.0, phase));
    }
  }

  const ModeStructure& modes_;
  std::vector<int> mode_ids_;
  int num_qubits_;
  int dim_;
  int joint_dim_;
  PulseParams pulse_;
  MatrixXcd state_;
  double time_ = 0.0;
  std::map<int, MatrixXcd> e_plus_;
};

// Single-qubit unitary embedded on register position `pos` of `num_qubits`.
MatrixXcd embed_single_qubit(const Eigen::Matrix2cd& u, int num_qubits, int pos) {
  const int dim = 1 << num_qubits;
  const int bit = num_qubits - 1 - pos;
  MatrixXcd out = MatrixXcd::Zero(dim, dim);
  for (int q = 0; q < dim; ++q) {
    int b = (q >> bit) & 1;
    for (int b2 = 0; b2 < 2; ++b2) {
      int q2 = (q & ~(1 << bit)) | (b2 << bit);
      out(q2, q) = u(b2, b);
    }
  }
  return out;
}

Eigen::Matrix2cd hadamard() {
  Eigen::Matrix2cd h;
  h << 1, 1, 1, -1;
  return h / std::sqrt(2.0);
}

Eigen::Matrix2cd rz(double theta) {
  Eigen::Matrix2cd r = Eigen::Matrix2cd::Zero();
  r(0, 0) = std::exp(cplx(0.0, -0.5 * theta));
  r(1, 1) = std::exp(cplx(0.0, 0.5 * theta));
  return r;
}

struct CircuitOp {
  enum class Kind { kFastGate, kLocal };
  Kind kind;
  const KickSequence* seq = nullptr;  // kFastGate
  int reg_i = 0, reg_j = 0;
  MatrixXcd local;  // kLocal
};

// CNOT(control -> target) via one phase gate and four local rotations.
void append_cnot(std::vector<CircuitOp>& ops, const KickSequence& seq, int num_qubits,
                 int reg_control, int reg_target) {
  ops.push_back({CircuitOp::Kind::kLocal, nullptr, 0, 0,
                 embed_single_qubit(hadamard(), num_qubits, reg_target)});
  ops.push_back({CircuitOp::Kind::kLocal, nullptr, 0, 0,
                 embed_single_qubit(rz(std::numbers::pi / 2), num_qubits, reg_control)});
  ops.push_back({CircuitOp::Kind::kLocal, nullptr, 0, 0,
                 embed_single_qubit(rz(std::numbers::pi / 2), num_qubits, reg_target)});
  int ri = std::min(reg_control, reg_target);
  int rj = std::max(reg_control, reg_target);
  ops.push_back({CircuitOp::Kind::kFastGate, &seq, ri, rj, {}});
  ops.push_back({CircuitOp::Kind::kLocal, nullptr, 0, 0,
                 embed_single_qubit(hadamard(), num_qubits, reg_target)});
}

// Fast gate on (1,2), SWAP(1,2), fast gate on (2,3), SWAP(2,3), ...,
// fast gate on (L-1, L). SWAP = 3 CNOTs.
std::vector<CircuitOp> build_umq_circuit(int num_ions,
                                         const std::vector<KickSequence>& pair_sequences) {
  std::vector<CircuitOp> ops;
  for (int k = 0; k + 1 < num_ions; ++k) {
    ops.push_back({CircuitOp::Kind::kFastGate, &pair_sequences[k], k, k + 1, {}});
    if (k + 2 < num_ions) {
      append_cnot(ops, pair_sequences[k], num_ions, k, k + 1);
      append_cnot(ops, pair_sequences[k], num_ions, k + 1, k);
      append_cnot(ops, pair_sequences[k], num_ions, k, k + 1);
    }
  }
  return ops;
}

// Qubit-space unitary of the circuit with every fast gate ideal.
MatrixXcd ideal_circuit_unitary(const std::vector<CircuitOp>& ops, int num_qubits) {
  const int dim = 1 << num_qubits;
  MatrixXcd u = MatrixXcd::Identity(dim, dim);
  for (const auto& op : ops) {
    if (op.kind == CircuitOp::Kind::kLocal) {
      u = op.local * u;
    } else {
      VectorXcd d = ideal_phase_gate_diagonal(num_qubits, op.reg_i + 1, op.reg_j + 1);
      u = d.asDiagonal() * u;
    }
  }
  return u;
}

// Per-mode return matrix: Lambda[q', q] = <q' (x) 1_p freely evolved | U | q (x) 1_p>.
MatrixXcd mode_return_matrix(const std::vector<CircuitOp>& ops, const ModeStructure& modes,
                             int mode, int num_qubits, int n_max, const PulseParams& pulse,
                             int initial_level, double* leakage_out) {
  const int q_dim = 1 << num_qubits;
  MatrixXcd lambda(q_dim, q_dim);
  double leak = 0.0;
  PulseSim sim(modes, {mode}, num_qubits, n_max, pulse);
  for (int q = 0; q < q_dim; ++q) {
    sim.reset(q, initial_level);
    for (const auto& op : ops) {
      if (op.kind == CircuitOp::Kind::kLocal)
        sim.apply_local(op.local);
      else
        sim.apply_fast_gate(*op.seq, op.reg_i, op.reg_j);
    }
    leak = std::max(leak, sim.leakage());
    double omega = kTwoPi * modes.mode_freqs_hz[mode];
    cplx ref_phase = std::exp(cplx(0.0, omega * initial_level * sim.time()));
    lambda.col(q) = ref_phase * sim.state().col(initial_level);
  }
  if (leakage_out) *leakage_out = std::max(*leakage_out, leak);
  return lambda;
}

double circuit_fidelity_separable(const std::vector<CircuitOp>& ops, int num_qubits,
                                  const ModeStructure& modes, const PulseParams& pulse,
                                  int n_max, double* leakage_out) {
  const int q_dim = 1 << num_qubits;
  MatrixXcd lambda = MatrixXcd::Identity(q_dim, q_dim);
  for (int p = 0; p < modes.num_ions(); ++p)
    lambda = mode_return_matrix(ops, modes, p, num_qubits, n_max, pulse, 1, leakage_out) * lambda;
  VectorXcd psi0 = representative_qubit_state(num_qubits);
  VectorXcd ideal = ideal_circuit_unitary(ops, num_qubits) * psi0;
  return std::norm(ideal.dot(lambda * psi0));
}

double circuit_fidelity_full(const std::vector<CircuitOp>& ops, int num_qubits,
                             const ModeStructure& modes, const PulseParams& pulse,
                             int n_max, double* leakage_out) {
  std::vector<int> all_modes(modes.num_ions());
  for (int p = 0; p < modes.num_ions(); ++p) all_modes[p] = p;
  PulseSim sim(modes, all_modes, num_qubits, n_max, pulse);

  // |psi0> (x) |1...1>: run one simulation per computational component.
  const int q_dim = 1 << num_qubits;
  VectorXcd psi0 = representative_qubit_state(num_qubits);
  MatrixXcd final_state;
  double t_end = 0.0;
  for (int q = 0; q < q_dim; ++q) {
    sim.reset(q, 1);
    for (const auto& op : ops) {
      if (op.kind == CircuitOp::Kind::kLocal)
        sim.apply_local(op.local);
      else
        sim.apply_fast_gate(*op.seq, op.reg_i, op.reg_j);
    }
    if (q == 0) final_state = psi0[q] * sim.state();
    else final_state += psi0[q] * sim.state();
    t_end = sim.time();
    if (leakage_out) *leakage_out = std::max(*leakage_out, sim.leakage());
  }

  VectorXcd ideal_q = ideal_circuit_unitary(ops, num_qubits) * psi0;
  cplx overlap(0.0, 0.0);
  // Reference motional bra: |1...1> freely evolved for the circuit span.
  double ref = 0.0;
  for (int p = 0; p < modes.num_ions(); ++p) ref += kTwoPi * modes.mode_freqs_hz[p] * t_end;
  int col = 0;
  const int dim = n_max + 1;
  for (int p = 0; p < modes.num_ions(); ++p) col = col * dim + 1;
  for (int q = 0; q < q_dim; ++q)
    overlap += std::conj(ideal_q[q]) * std::exp(cplx(0.0, ref)) * final_state(q, col);
  return std::norm(overlap);
}

int pulse_auto_truncation(const std::vector<const KickSequence*>& seqs,
                          const ModeStructure& modes, int initial_level) {
  int n = 12;
  for (const KickSequence* s : seqs)
    for (int p = 0; p < modes.num_ions(); ++p)
      n = std::max(n, suggest_fock_truncation(*s, modes, p, initial_level));
  return n;
}

}  // namespace

PulseGateResult pulse_error_gate(const KickSequence& seq, const ModeStructure& modes,
                                 const PulseParams& pulse, int n_max,
                                 bool check_separability) {
  seq.validate(modes.num_ions());
  pulse.validate();

  std::vector<CircuitOp> ops;
  ops.push_back({CircuitOp::Kind::kFastGate, &seq, 0, 1, {}});

  PulseGateResult result;
  result.rotational_infidelity = rotational_infidelity(pulse.area_scale);
  int n = n_max > 0 ? n_max : pulse_auto_truncation({&seq}, modes, 1);
  constexpr int kDimCap = 4096;
  for (;;) {
    double leakage = 0.0;
    double f = circuit_fidelity_separable(ops, 2, modes, pulse, n, &leakage);
    if (leakage < kLeakageTol) {
      result.fidelity = f;
      result.n_max = n;
      break;
    }
    if (n_max > 0 || n > kDimCap)
      throw truncation_error("pulse_error_gate: truncation leakage too large", n * 2);
    n = n * 3 / 2 + 8;
  }

  if (check_separability) {
    if (modes.num_ions() != 2)
      throw std::invalid_argument("pulse_error_gate: separability check needs a 2-mode trap");
    double leakage = 0.0;
    double f_full = circuit_fidelity_full(ops, 2, modes, pulse, result.n_max, &leakage);
    result.separability_residual = std::abs(f_full - result.fidelity);
    result.accuracy_warning = result.separability_residual > 1e-4;
  }
  return result;
}

double umq_pulse_fidelity(int num_ions, const std::vector<KickSequence>& pair_sequences,
                          const ModeStructure& modes, const PulseParams& pulse, int n_max) {
  if (num_ions != modes.num_ions())
    throw std::invalid_argument("umq_pulse_fidelity: ion count mismatch");
  if (static_cast<int>(pair_sequences.size()) != num_ions - 1)
    throw std::invalid_argument("umq_pulse_fidelity: need one sequence per adjacent pair");
  if (num_ions > 4)
    throw std::invalid_argument("umq_pulse_fidelity: full circuit simulation is limited to small traps");
  pulse.validate();

  auto ops = build_umq_circuit(num_ions, pair_sequences);
  std::vector<const KickSequence*> seqs;
  for (const auto& s : pair_sequences) seqs.push_back(&s);
  int n = n_max > 0 ? n_max : pulse_auto_truncation(seqs, modes, 1);
  constexpr int kDimCap = 2048;
  for (;;) {
    double leakage = 0.0;
    double f = circuit_fidelity_separable(ops, num_ions, modes, pulse, n, &leakage);
    if (leakage < kLeakageTol) return f;
    if (n_max > 0 || n > kDimCap)
      throw truncation_error("umq_pulse_fidelity: truncation leakage too large", n * 2);
    n = n * 3 / 2 + 8;
  }
}

}  // namespace fastgate

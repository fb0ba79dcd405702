#include "fastgate/gate_design.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace fastgate {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kQuarterPi = std::numbers::pi / 4.0;
using cplx = std::complex<double>;
}  // namespace

void KickSequence::validate(int num_ions) const {
  if (ion_i < 1 || ion_i > num_ions || ion_j < 1 || ion_j > num_ions || ion_i == ion_j)
    throw std::invalid_argument("KickSequence: addressed pair out of range");
  for (std::size_t c = 0; c < kicks.size(); ++c) {
    if (kicks[c].pulse_pairs == 0)
      throw std::invalid_argument("KickSequence: zero-magnitude kick");
    if (c > 0 && !(kicks[c].time_s > kicks[c - 1].time_s))
      throw std::invalid_argument("KickSequence: kick times must be strictly increasing");
  }
}

KickSequence frag_sequence(int n, double tau1_s, double tau2_s, double tau3_s,
                           int ion_i, int ion_j) {
  if (n < 1) throw std::invalid_argument("frag_sequence: n must be >= 1");
  const double taus[3] = {tau1_s, tau2_s, tau3_s};
  for (double t : taus)
    if (!(t > 0) || !std::isfinite(t))
      throw std::invalid_argument("frag_sequence: tau values must be positive and finite");
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b)
      if (taus[a] == taus[b])
        throw std::invalid_argument("frag_sequence: duplicated tau collapses two kicks");

  KickSequence seq;
  seq.ion_i = ion_i;
  seq.ion_j = ion_j;
  seq.base_pairs = n;
  seq.kicks = {{-tau1_s, -n},    {-tau2_s, 2 * n}, {-tau3_s, -2 * n},
               {tau3_s, 2 * n},  {tau2_s, -2 * n}, {tau1_s, n}};
  std::sort(seq.kicks.begin(), seq.kicks.end(),
            [](const Kick& a, const Kick& b) { return a.time_s < b.time_s; });
  return seq;
}

BranchDisplacements conditional_displacement(const KickSequence& seq,
                                             const ModeStructure& modes) {
  seq.validate(modes.num_ions());
  const int num_modes = modes.num_ions();
  const int i = seq.ion_i - 1;
  const int j = seq.ion_j - 1;

  BranchDisplacements alpha;
  for (auto& a : alpha) a.assign(num_modes, cplx(0.0, 0.0));

  for (int p = 0; p < num_modes; ++p) {
    const double omega = kTwoPi * modes.mode_freqs_hz[p];
    cplx kick_sum(0.0, 0.0);  // sum_c zeta_c e^{i w t_c}
    for (const Kick& k : seq.kicks)
      kick_sum += static_cast<double>(k.pulse_pairs) *
                  std::exp(cplx(0.0, omega * k.time_s));
    for (int b = 0; b < kNumBranches; ++b) {
      double coupling = modes.mode_lamb_dicke[p] *
                        (modes.mode_matrix(p, i) * branch_sign_i(b) +
                         modes.mode_matrix(p, j) * branch_sign_j(b));
      alpha[b][p] = cplx(0.0, -2.0) * coupling * kick_sum;
    }
  }
  return alpha;
}

std::array<double, kNumBranches> branch_phases(const KickSequence& seq,
                                               const ModeStructure& modes) {
  seq.validate(modes.num_ions());
  const int num_modes = modes.num_ions();
  const int i = seq.ion_i - 1;
  const int j = seq.ion_j - 1;
  const int num_kicks = static_cast<int>(seq.kicks.size());

  std::array<double, kNumBranches> phases{};
  for (int p = 0; p < num_modes; ++p) {
    const double omega = kTwoPi * modes.mode_freqs_hz[p];
    double pair_sum = 0.0;  // sum_{c<d} zeta_c zeta_d sin(w (t_d - t_c))
    for (int c = 0; c < num_kicks; ++c)
      for (int d = c + 1; d < num_kicks; ++d)
        pair_sum += static_cast<double>(seq.kicks[c].pulse_pairs) *
                    static_cast<double>(seq.kicks[d].pulse_pairs) *
                    std::sin(omega * (seq.kicks[d].time_s - seq.kicks[c].time_s));
    for (int b = 0; b < kNumBranches; ++b) {
      double coupling = modes.mode_lamb_dicke[p] *
                        (modes.mode_matrix(p, i) * branch_sign_i(b) +
                         modes.mode_matrix(p, j) * branch_sign_j(b));
      phases[b] += 4.0 * coupling * coupling * pair_sum;
    }
  }
  return phases;
}

double conditional_phase(const KickSequence& seq, const ModeStructure& modes) {
  seq.validate(modes.num_ions());
  const int num_modes = modes.num_ions();
  const int i = seq.ion_i - 1;
  const int j = seq.ion_j - 1;
  const int num_kicks = static_cast<int>(seq.kicks.size());

  double chi = 0.0;
  for (int p = 0; p < num_modes; ++p) {
    const double omega = kTwoPi * modes.mode_freqs_hz[p];
    double pair_sum = 0.0;
    for (int c = 0; c < num_kicks; ++c)
      for (int d = c + 1; d < num_kicks; ++d)
        pair_sum += static_cast<double>(seq.kicks[c].pulse_pairs) *
                    static_cast<double>(seq.kicks[d].pulse_pairs) *
                    std::sin(omega * (seq.kicks[d].time_s - seq.kicks[c].time_s));
    double eta2 = modes.mode_lamb_dicke[p] * modes.mode_lamb_dicke[p];
    chi += 8.0 * eta2 * modes.mode_matrix(p, i) * modes.mode_matrix(p, j) * pair_sum;
  }
  return chi;
}

double state_averaged_fidelity(const KickSequence& seq, const ModeStructure& modes,
                               double nbar) {
  if (nbar < 0) throw std::invalid_argument("state_averaged_fidelity: nbar must be >= 0");
  const BranchDisplacements alpha = conditional_displacement(seq, modes);
  const std::array<double, kNumBranches> phi = branch_phases(seq, modes);
  const int num_modes = modes.num_ions();
  const double width = 2.0 * nbar + 1.0;

  // F = 1/5 + (1/20) sum_{s,s'} e^{i(D_s - D_s')} prod_p <D+(a_s') D(a_s)>_th
  // with D_s = phi_s - (pi/4) zz(s); the branch-independent part of phi
  // cancels in the difference.
  cplx total(0.0, 0.0);
  for (int s = 0; s < kNumBranches; ++s) {
    for (int t = 0; t < kNumBranches; ++t) {
      double dphase = (phi[s] - kQuarterPi * branch_zz(s)) -
                      (phi[t] - kQuarterPi * branch_zz(t));
      cplx term = std::exp(cplx(0.0, dphase));
      for (int p = 0; p < num_modes; ++p) {
        cplx cross = alpha[t][p] * std::conj(alpha[s][p]);
        double sep2 = std::norm(alpha[s][p] - alpha[t][p]);
        term *= std::exp(cplx(-0.5 * width * sep2, -cross.imag()));
      }
      total += term;
    }
  }
  double f = 0.2 + total.real() / 20.0;
  return std::clamp(f, 0.0, 1.0);
}

double gate_duration(const KickSequence& seq) {
  if (seq.kicks.empty()) throw std::invalid_argument("gate_duration: empty sequence");
  return seq.kicks.back().time_s - seq.kicks.front().time_s;
}

GateOutcome evaluate_gate(const KickSequence& seq, const ModeStructure& modes, double nbar) {
  GateOutcome out;
  out.sequence = seq;
  out.displacements = conditional_displacement(seq, modes);
  out.conditional_phase = conditional_phase(seq, modes);
  out.fidelity = state_averaged_fidelity(seq, modes, nbar);
  out.duration_s = gate_duration(seq);
  return out;
}

void to_json(nlohmann::json& j, const KickSequence& s) {
  nlohmann::json kicks = nlohmann::json::array();
  for (const Kick& k : s.kicks) kicks.push_back({{"time_s", k.time_s}, {"pulse_pairs", k.pulse_pairs}});
  j = nlohmann::json{{"kicks", kicks}, {"ion_i", s.ion_i}, {"ion_j", s.ion_j},
                     {"base_pairs", s.base_pairs}};
}

void from_json(const nlohmann::json& j, KickSequence& s) {
  s.kicks.clear();
  for (const auto& k : j.at("kicks"))
    s.kicks.push_back({k.at("time_s").get<double>(), k.at("pulse_pairs").get<int>()});
  j.at("ion_i").get_to(s.ion_i);
  j.at("ion_j").get_to(s.ion_j);
  j.at("base_pairs").get_to(s.base_pairs);
}

void to_json(nlohmann::json& j, const GateOutcome& g) {
  nlohmann::json disp = nlohmann::json::array();
  for (const auto& branch : g.displacements) {
    nlohmann::json row = nlohmann::json::array();
    for (const auto& a : branch) row.push_back({a.real(), a.imag()});
    disp.push_back(row);
  }
  j = nlohmann::json{{"sequence", g.sequence},
                     {"displacements", disp},
                     {"conditional_phase", g.conditional_phase},
                     {"fidelity", g.fidelity},
                     {"duration_s", g.duration_s}};
}

void from_json(const nlohmann::json& j, GateOutcome& g) {
  j.at("sequence").get_to(g.sequence);
  const auto& disp = j.at("displacements");
  for (int b = 0; b < kNumBranches; ++b) {
    g.displacements[b].clear();
    for (const auto& a : disp.at(b))
      g.displacements[b].emplace_back(a.at(0).get<double>(), a.at(1).get<double>());
  }
  j.at("conditional_phase").get_to(g.conditional_phase);
  j.at("fidelity").get_to(g.fidelity);
  j.at("duration_s").get_to(g.duration_s);
}

}  // namespace fastgate

#pragma once

#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

namespace fastgate {

// Physical description of a linear ion chain. All frequencies are ordinary
// frequencies in Hz (periods are 1/f); angular factors of 2*pi are applied
// where phases are accumulated.
struct TrapConfig {
  int ion_count = 2;                 // L >= 2
  double axial_freq_hz = 1.2e6;      // nu, center-of-mass axial frequency
  double transverse_freq_hz = 5e6;   // nu_x, must exceed nu for a stable line
  double base_lamb_dicke = 0.16;     // eta_0, defined for the two-ion trap
  double thermal_occupation = 0.0;   // nbar per mode

  double com_period_s() const { return 1.0 / axial_freq_hz; }
  void validate() const;  // throws std::invalid_argument
};

// Axial normal-mode data at the chain equilibrium. Mode index p runs 0..L-1
// in ascending frequency; mode 0 is the center-of-mass mode.
struct ModeStructure {
  std::vector<double> positions;       // dimensionless equilibrium positions
  std::vector<double> mode_freqs_hz;   // nu_p, ascending, nu_0 = trap axial freq
  Eigen::MatrixXd mode_matrix;         // b(p, i), orthonormal rows
  std::vector<double> mode_lamb_dicke; // eta_p

  int num_ions() const { return static_cast<int>(positions.size()); }
};

// Trap axial frequency scaling law: 2.1856 MHz * L^(-0.865).
double axial_frequency(int ion_count);

// Minimizes sum(u_i^2)/2 + sum_{i<j} 1/|u_i - u_j| by damped Newton iteration
// from the uniform-spacing ansatz. Positions are returned sorted ascending
// with gradient norm below `tol`.
std::vector<double> equilibrium_positions(int ion_count, double tol = 1e-12);

// As above but starting from caller-supplied positions (sorted internally).
std::vector<double> equilibrium_positions_from(std::vector<double> initial,
                                               double tol = 1e-12);

// Diagonalizes the dimensionless axial Hessian at equilibrium.
//   nu_p   = nu * sqrt(lambda_p)
//   eta(L) = eta_0 * sqrt(axial_frequency(2) / nu)
//   eta_p  = eta(L) * sqrt(nu_0 / nu_p)
// Row signs are fixed so the first nonzero entry of each row is positive.
ModeStructure normal_modes(const TrapConfig& cfg);

void to_json(nlohmann::json& j, const ModeStructure& m);
void from_json(const nlohmann::json& j, ModeStructure& m);
void to_json(nlohmann::json& j, const TrapConfig& c);
void from_json(const nlohmann::json& j, TrapConfig& c);

}  // namespace fastgate

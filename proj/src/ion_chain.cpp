#include "fastgate/ion_chain.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "fastgate/errors.hpp"

namespace fastgate {

void TrapConfig::validate() const {
  if (ion_count < 2) throw std::invalid_argument("TrapConfig: ion_count must be >= 2");
  if (!(axial_freq_hz > 0)) throw std::invalid_argument("TrapConfig: axial frequency must be positive");
  if (!(transverse_freq_hz > 0)) throw std::invalid_argument("TrapConfig: transverse frequency must be positive");
  if (!(transverse_freq_hz > axial_freq_hz))
    throw std::invalid_argument("TrapConfig: transverse frequency must exceed axial frequency");
  if (!(base_lamb_dicke > 0 && base_lamb_dicke < 1))
    throw std::invalid_argument("TrapConfig: base Lamb-Dicke parameter must be in (0, 1)");
  if (thermal_occupation < 0) throw std::invalid_argument("TrapConfig: thermal occupation must be >= 0");
}

double axial_frequency(int ion_count) {
  if (ion_count < 2) throw std::invalid_argument("axial_frequency: ion_count must be >= 2");
  return 2.1856e6 * std::pow(static_cast<double>(ion_count), -0.865);
}

namespace {

// Gradient of the dimensionless chain potential at ordered positions u.
Eigen::VectorXd potential_gradient(const Eigen::VectorXd& u) {
  const int n = static_cast<int>(u.size());
  Eigen::VectorXd g = u;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      double d = u[i] - u[j];
      g[i] -= (d > 0 ? 1.0 : -1.0) / (d * d);
    }
  }
  return g;
}

Eigen::MatrixXd potential_hessian(const Eigen::VectorXd& u) {
  const int n = static_cast<int>(u.size());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    double diag = 1.0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      double d = std::abs(u[i] - u[j]);
      double c = 2.0 / (d * d * d);
      diag += c;
      h(i, j) = -c;
    }
    h(i, i) = diag;
  }
  return h;
}

double potential_value(const Eigen::VectorXd& u) {
  const int n = static_cast<int>(u.size());
  double v = 0.5 * u.squaredNorm();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) v += 1.0 / std::abs(u[i] - u[j]);
  return v;
}

}  // namespace

std::vector<double> equilibrium_positions_from(std::vector<double> initial, double tol) {
  const int n = static_cast<int>(initial.size());
  if (n < 2) throw std::invalid_argument("equilibrium_positions: need at least 2 ions");
  std::sort(initial.begin(), initial.end());
  Eigen::VectorXd u = Eigen::Map<Eigen::VectorXd>(initial.data(), n);

  // Distinct starting positions are required for a finite potential.
  for (int i = 0; i + 1 < n; ++i) {
    if (u[i + 1] - u[i] < 1e-9) u[i + 1] = u[i] + 0.5;
  }

  const int max_iter = 200;
  for (int iter = 0; iter < max_iter; ++iter) {
    Eigen::VectorXd g = potential_gradient(u);
    double gnorm = g.norm();
    if (gnorm < tol) {
      std::vector<double> out(u.data(), u.data() + n);
      return out;
    }
    Eigen::MatrixXd h = potential_hessian(u);
    Eigen::VectorXd step = h.ldlt().solve(-g);

    // Damped update: halve the step until the ordering survives and the
    // potential decreases (or the gradient shrinks near the solution).
    double v0 = potential_value(u);
    double lambda = 1.0;
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      Eigen::VectorXd trial = u + lambda * step;
      bool ordered = true;
      for (int i = 0; i + 1 < n; ++i)
        if (!(trial[i] < trial[i + 1])) { ordered = false; break; }
      if (ordered && (potential_value(trial) < v0 || potential_gradient(trial).norm() < gnorm)) {
        u = trial;
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted) {
      throw numerical_error("equilibrium_positions: line search stalled, gradient norm " +
                            std::to_string(gnorm));
    }
  }
  double residual = potential_gradient(u).norm();
  throw numerical_error("equilibrium_positions: no convergence after iteration budget, residual " +
                        std::to_string(residual));
}

std::vector<double> equilibrium_positions(int ion_count, double tol) {
  if (ion_count < 2) throw std::invalid_argument("equilibrium_positions: ion_count must be >= 2");
  // Uniform-spacing ansatz; the 2.018/L^0.559 spacing fit keeps Newton in its
  // quadratic basin for every L of interest here.
  double spacing = 2.018 / std::pow(static_cast<double>(ion_count), 0.559);
  std::vector<double> init(ion_count);
  for (int i = 0; i < ion_count; ++i)
    init[i] = spacing * (i - 0.5 * (ion_count - 1));
  return equilibrium_positions_from(std::move(init), tol);
}

ModeStructure normal_modes(const TrapConfig& cfg) {
  cfg.validate();
  const int n = cfg.ion_count;

  ModeStructure out;
  out.positions = equilibrium_positions(n);
  Eigen::VectorXd u = Eigen::Map<Eigen::VectorXd>(out.positions.data(), n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(potential_hessian(u));
  if (solver.info() != Eigen::Success)
    throw numerical_error("normal_modes: Hessian eigendecomposition failed");

  Eigen::VectorXd lambda = solver.eigenvalues();
  if (lambda.minCoeff() <= 0)
    throw unstable_configuration("normal_modes: axial Hessian not positive definite");

  out.mode_freqs_hz.resize(n);
  out.mode_matrix = solver.eigenvectors().transpose();  // rows are modes
  for (int p = 0; p < n; ++p) {
    out.mode_freqs_hz[p] = cfg.axial_freq_hz * std::sqrt(lambda[p]);
    // Sign convention: first entry of each row above tolerance is positive.
    for (int i = 0; i < n; ++i) {
      double v = out.mode_matrix(p, i);
      if (std::abs(v) > 1e-12) {
        if (v < 0) out.mode_matrix.row(p) *= -1.0;
        break;
      }
    }
  }

  // Recoil scaling: eta ~ 1/sqrt(frequency), anchored at eta(2) = eta_0.
  double eta_chain = cfg.base_lamb_dicke * std::sqrt(axial_frequency(2) / cfg.axial_freq_hz);
  out.mode_lamb_dicke.resize(n);
  for (int p = 0; p < n; ++p)
    out.mode_lamb_dicke[p] = eta_chain * std::sqrt(out.mode_freqs_hz[0] / out.mode_freqs_hz[p]);

  return out;
}

void to_json(nlohmann::json& j, const ModeStructure& m) {
  std::vector<std::vector<double>> rows;
  for (int p = 0; p < m.mode_matrix.rows(); ++p) {
    rows.emplace_back(m.mode_matrix.row(p).begin(), m.mode_matrix.row(p).end());
  }
  j = nlohmann::json{{"positions", m.positions},
                     {"mode_freqs_hz", m.mode_freqs_hz},
                     {"mode_matrix", rows},
                     {"mode_lamb_dicke", m.mode_lamb_dicke}};
}

void from_json(const nlohmann::json& j, ModeStructure& m) {
  j.at("positions").get_to(m.positions);
  j.at("mode_freqs_hz").get_to(m.mode_freqs_hz);
  j.at("mode_lamb_dicke").get_to(m.mode_lamb_dicke);
  auto rows = j.at("mode_matrix").get<std::vector<std::vector<double>>>();
  const int n = static_cast<int>(rows.size());
  m.mode_matrix.resize(n, n);
  for (int p = 0; p < n; ++p)
    for (int i = 0; i < n; ++i) m.mode_matrix(p, i) = rows[p][i];
}

void to_json(nlohmann::json& j, const TrapConfig& c) {
  j = nlohmann::json{{"ion_count", c.ion_count},
                     {"axial_freq_hz", c.axial_freq_hz},
                     {"transverse_freq_hz", c.transverse_freq_hz},
                     {"base_lamb_dicke", c.base_lamb_dicke},
                     {"thermal_occupation", c.thermal_occupation}};
}

void from_json(const nlohmann::json& j, TrapConfig& c) {
  j.at("ion_count").get_to(c.ion_count);
  j.at("axial_freq_hz").get_to(c.axial_freq_hz);
  j.at("transverse_freq_hz").get_to(c.transverse_freq_hz);
  j.at("base_lamb_dicke").get_to(c.base_lamb_dicke);
  j.at("thermal_occupation").get_to(c.thermal_occupation);
}

}  // namespace fastgate

#pragma once

#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace fastgate {

struct FitResult {
  double amplitude = 0.0;   // A in y = A x^p
  double exponent = 0.0;    // p
  double residual_norm = 0.0;  // RMS of log-space residuals, unnormalized norm
  int point_count = 0;
  // covariance of (log A, p) from the linear least squares
  double cov_log_amplitude = 0.0;
  double cov_exponent = 0.0;
  double cov_cross = 0.0;
};

// Ordinary least squares of log y against log x.
FitResult power_law_fit(const std::vector<std::pair<double, double>>& points);

// Repetition rate implied by n pulse pairs in gate time T: f_r = n / T.
double rep_rate_map(double n, double gate_time_s);

void to_json(nlohmann::json& j, const FitResult& f);

}  // namespace fastgate

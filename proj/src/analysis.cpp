#include "fastgate/analysis.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace fastgate {

FitResult power_law_fit(const std::vector<std::pair<double, double>>& points) {
  const int n = static_cast<int>(points.size());
  if (n < 3) throw std::invalid_argument("power_law_fit: need at least 3 points");
  for (const auto& [x, y] : points)
    if (!(x > 0) || !(y > 0))
      throw std::invalid_argument("power_law_fit: points must be strictly positive");

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [x, y] : points) {
    double lx = std::log(x), ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  double det = n * sxx - sx * sx;
  if (det <= 0) throw std::invalid_argument("power_law_fit: degenerate abscissae");
  double p = (n * sxy - sx * sy) / det;
  double log_a = (sy * sxx - sx * sxy) / det;

  double rss = 0.0;
  for (const auto& [x, y] : points) {
    double r = std::log(y) - (log_a + p * std::log(x));
    rss += r * r;
  }
  double s2 = n > 2 ? rss / (n - 2) : 0.0;

  FitResult fit;
  fit.amplitude = std::exp(log_a);
  fit.exponent = p;
  fit.residual_norm = std::sqrt(rss);
  fit.point_count = n;
  fit.cov_log_amplitude = s2 * sxx / det;
  fit.cov_exponent = s2 * n / det;
  fit.cov_cross = -s2 * sx / det;
  return fit;
}

double rep_rate_map(double n, double gate_time_s) {
  if (!(gate_time_s > 0)) throw std::invalid_argument("rep_rate_map: gate time must be positive");
  return n / gate_time_s;
}

void to_json(nlohmann::json& j, const FitResult& f) {
  j = nlohmann::json{{"amplitude", f.amplitude},
                     {"exponent", f.exponent},
                     {"residual_norm", f.residual_norm},
                     {"point_count", f.point_count},
                     {"cov_log_amplitude", f.cov_log_amplitude},
                     {"cov_exponent", f.cov_exponent},
                     {"cov_cross", f.cov_cross}};
}

}  // namespace fastgate

#include "fastgate/optimizer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "fastgate/parallel.hpp"
#include "fastgate/rng.hpp"

namespace fastgate {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
using Point = std::array<double, 3>;  // log(tau / T_trap)

struct Evaluation {
  double fidelity = -1.0;
  double duration_s = kInf;
  bool valid = false;
};

class GateObjective {
 public:
  GateObjective(const ModeStructure& modes, const OptimizationSpec& spec,
                double trap_period_s, double nbar)
      : modes_(modes), spec_(spec), period_(trap_period_s), nbar_(nbar),
        log_lo_(std::log(spec.tau_min_periods)), log_hi_(std::log(spec.tau_max_periods)) {}

  Evaluation evaluate(const Point& x) {
    ++evaluations_;
    Evaluation e;
    try {
      KickSequence seq = sequence(x);
      e.fidelity = state_averaged_fidelity(seq, modes_, nbar_);
      e.duration_s = gate_duration(seq);
      e.valid = true;
    } catch (const std::invalid_argument&) {
      // collapsed kick times; leave invalid
    }
    return e;
  }

  KickSequence sequence(const Point& x) const {
    return frag_sequence(spec_.n, period_ * std::exp(x[0]), period_ * std::exp(x[1]),
                         period_ * std::exp(x[2]), spec_.ion_i, spec_.ion_j);
  }

  // Quadratic penalty outside the log-space search box.
  double bounds_penalty(const Point& x) const {
    double pen = 0.0;
    for (double v : x) {
      double below = std::max(0.0, log_lo_ - v);
      double above = std::max(0.0, v - log_hi_);
      pen += 1e4 * (below * below + above * above);
    }
    return pen;
  }

  double max_fidelity_cost(const Point& x) {
    Evaluation e = evaluate(x);
    if (!e.valid) return kInf;
    return -e.fidelity + bounds_penalty(x);
  }

  double min_time_cost(const Point& x) {
    Evaluation e = evaluate(x);
    if (!e.valid) return kInf;
    double shortfall = std::max(0.0, spec_.fidelity_floor - e.fidelity);
    return std::log(e.duration_s / period_) + 1e8 * shortfall + bounds_penalty(x);
  }

  int evaluations() const { return evaluations_; }
  double log_lo() const { return log_lo_; }
  double log_hi() const { return log_hi_; }

 private:
  const ModeStructure& modes_;
  const OptimizationSpec& spec_;
  double period_;
  double nbar_;
  double log_lo_, log_hi_;
  int evaluations_ = 0;
};

// Downhill simplex on 3 parameters. Returns the best vertex.
template <typename Cost>
Point nelder_mead(Cost&& cost, const Point& start, double scale, double param_tol,
                  double objective_tol, int max_iterations) {
  constexpr int kDim = 3;
  std::array<Point, kDim + 1> simplex;
  std::array<double, kDim + 1> value;
  simplex[0] = start;
  for (int k = 0; k < kDim; ++k) {
    simplex[k + 1] = start;
    simplex[k + 1][k] += scale;
  }
  for (int v = 0; v <= kDim; ++v) value[v] = cost(simplex[v]);

  auto order = [&]() {
    std::array<int, kDim + 1> idx;
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return value[a] < value[b]; });
    std::array<Point, kDim + 1> s2;
    std::array<double, kDim + 1> v2;
    for (int v = 0; v <= kDim; ++v) {
      s2[v] = simplex[idx[v]];
      v2[v] = value[idx[v]];
    }
    simplex = s2;
    value = v2;
  };

  for (int iter = 0; iter < max_iterations; ++iter) {
    order();

    double edge = 0.0;
    for (int v = 1; v <= kDim; ++v)
      for (int k = 0; k < kDim; ++k)
        edge = std::max(edge, std::abs(simplex[v][k] - simplex[0][k]));
    bool flat = std::isfinite(value[kDim]) &&
                value[kDim] - value[0] < objective_tol * (1.0 + std::abs(value[0]));
    if (edge < param_tol || (flat && edge < 1e-6)) break;

    Point centroid{};
    for (int v = 0; v < kDim; ++v)
      for (int k = 0; k < kDim; ++k) centroid[k] += simplex[v][k] / kDim;

    auto blend = [&](double t) {
      Point p;
      for (int k = 0; k < kDim; ++k)
        p[k] = centroid[k] + t * (simplex[kDim][k] - centroid[k]);
      return p;
    };

    Point reflected = blend(-1.0);
    double f_r = cost(reflected);
    if (f_r < value[0]) {
      Point expanded = blend(-2.0);
      double f_e = cost(expanded);
      if (f_e < f_r) {
        simplex[kDim] = expanded;
        value[kDim] = f_e;
      } else {
        simplex[kDim] = reflected;
        value[kDim] = f_r;
      }
      continue;
    }
    if (f_r < value[kDim - 1]) {
      simplex[kDim] = reflected;
      value[kDim] = f_r;
      continue;
    }
    Point contracted = blend(f_r < value[kDim] ? -0.5 : 0.5);
    double f_c = cost(contracted);
    if (f_c < std::min(f_r, value[kDim])) {
      simplex[kDim] = contracted;
      value[kDim] = f_c;
      continue;
    }
    for (int v = 1; v <= kDim; ++v) {  // shrink toward the best vertex
      for (int k = 0; k < kDim; ++k)
        simplex[v][k] = 0.5 * (simplex[v][k] + simplex[0][k]);
      value[v] = cost(simplex[v]);
    }
  }
  order();
  return simplex[0];
}

// Latin-hypercube start points in the log-space box.
std::vector<Point> latin_hypercube(int count, double lo, double hi, std::uint64_t seed) {
  std::vector<Point> points(count);
  for (int dim = 0; dim < 3; ++dim) {
    std::vector<int> perm(count);
    std::iota(perm.begin(), perm.end(), 0);
    SplitMix64 rng(seed, 1000 + dim);
    for (int k = count - 1; k > 0; --k)
      std::swap(perm[k], perm[rng.next_u64() % (k + 1)]);
    SplitMix64 jitter(seed, 2000 + dim);
    for (int r = 0; r < count; ++r) {
      double u = (perm[r] + jitter.next_double()) / count;
      points[r][dim] = lo + u * (hi - lo);
    }
  }
  return points;
}

}  // namespace

void OptimizationSpec::validate() const {
  if (n < 1) throw std::invalid_argument("OptimizationSpec: n must be >= 1");
  if (restarts < 1) throw std::invalid_argument("OptimizationSpec: restarts must be >= 1");
  if (!(tau_min_periods > 0) || !(tau_max_periods > tau_min_periods) ||
      !std::isfinite(tau_max_periods))
    throw std::invalid_argument("OptimizationSpec: bad tau bounds");
  if (objective == Objective::kMinTimeWithFloor &&
      !(fidelity_floor > 0 && fidelity_floor <= 1))
    throw std::invalid_argument("OptimizationSpec: fidelity floor must be in (0, 1]");
}

OptimizeResult optimize_gate(const TrapConfig& cfg, const ModeStructure& modes,
                             const OptimizationSpec& spec, std::ostream* progress_log) {
  cfg.validate();
  spec.validate();
  if (spec.ion_j != spec.ion_i + 1 || spec.ion_i < 1 || spec.ion_j > cfg.ion_count)
    throw std::invalid_argument("optimize_gate: addressed pair must be adjacent and in range");

  const double period = cfg.com_period_s();
  const double floor = spec.fidelity_floor;
  const bool min_time = spec.objective == Objective::kMinTimeWithFloor;

  std::vector<Point> starts = latin_hypercube(spec.restarts, std::log(spec.tau_min_periods),
                                              std::log(spec.tau_max_periods), spec.seed);
  const double start_scale =
      0.08 * (std::log(spec.tau_max_periods) - std::log(spec.tau_min_periods));

  std::vector<RestartRecord> records(spec.restarts);
  std::vector<Point> best_points(spec.restarts);
  std::mutex log_mutex;

  parallel_for(spec.restarts, [&](std::size_t r) {
    GateObjective obj(modes, spec, period, cfg.thermal_occupation);
    auto fidelity_cost = [&](const Point& p) { return obj.max_fidelity_cost(p); };
    Point best = nelder_mead(fidelity_cost, starts[r], start_scale, spec.param_tol,
                             spec.objective_tol, spec.max_iterations);

    if (min_time) {
      Evaluation e = obj.evaluate(best);
      if (e.valid && e.fidelity >= floor) {
        auto time_cost = [&](const Point& p) { return obj.min_time_cost(p); };
        Point timed = nelder_mead(time_cost, best, 0.5 * start_scale, spec.param_tol,
                                  spec.objective_tol, spec.max_iterations);
        Evaluation e2 = obj.evaluate(timed);
        if (e2.valid && e2.fidelity >= floor) best = timed;
      }
    }

    Evaluation e = obj.evaluate(best);
    RestartRecord rec;
    rec.restart_id = static_cast<int>(r);
    rec.fidelity = e.valid ? e.fidelity : -1.0;
    rec.duration_s = e.valid ? e.duration_s : kInf;
    rec.feasible = e.valid && e.fidelity >= floor;
    for (int k = 0; k < 3; ++k) rec.tau_s[k] = period * std::exp(best[k]);
    rec.evaluations = obj.evaluations();
    records[r] = rec;
    best_points[r] = best;

    if (progress_log) {
      std::lock_guard<std::mutex> lock(log_mutex);
      nlohmann::json line = {{"restart", rec.restart_id},
                             {"iterations", rec.evaluations},
                             {"best_fidelity", rec.fidelity},
                             {"duration_s", rec.duration_s}};
      (*progress_log) << line.dump() << "\n";
    }
  });

  // Pick the winner: min duration among feasible restarts for the timed
  // objective, best fidelity otherwise (ties broken by restart id).
  int winner = -1;
  for (int r = 0; r < spec.restarts; ++r) {
    if (!std::isfinite(records[r].duration_s) && records[r].fidelity < 0) continue;
    if (winner < 0) { winner = r; continue; }
    if (min_time && records[r].feasible != records[winner].feasible) {
      if (records[r].feasible) winner = r;
      continue;
    }
    if (min_time && records[r].feasible) {
      if (records[r].duration_s < records[winner].duration_s) winner = r;
    } else {
      if (records[r].fidelity > records[winner].fidelity) winner = r;
    }
  }
  if (winner < 0)
    throw std::invalid_argument("optimize_gate: every restart produced an invalid sequence");

  GateObjective obj(modes, spec, period, cfg.thermal_occupation);
  KickSequence seq = obj.sequence(best_points[winner]);
  OptimizeResult result;
  // Re-evaluated from the returned sequence, so the reported numbers cannot
  // drift from optimizer-internal state.
  result.outcome = evaluate_gate(seq, modes, cfg.thermal_occupation);
  result.feasible = min_time ? records[winner].feasible : true;
  result.restarts = std::move(records);
  return result;
}

std::vector<OptimizeResult> sweep_pairs(const TrapConfig& cfg, const ModeStructure& modes,
                                        const OptimizationSpec& base_spec) {
  cfg.validate();
  if (cfg.ion_count < 2) throw std::invalid_argument("sweep_pairs: need at least 2 ions");
  std::vector<OptimizeResult> results(cfg.ion_count - 1);
  parallel_for(results.size(), [&](std::size_t k) {
    OptimizationSpec spec = base_spec;
    spec.ion_i = static_cast<int>(k) + 1;
    spec.ion_j = static_cast<int>(k) + 2;
    results[k] = optimize_gate(cfg, modes, spec);
  });
  return results;
}

void to_json(nlohmann::json& j, const OptimizationSpec& s) {
  j = nlohmann::json{
      {"objective", s.objective == Objective::kMaxFidelity ? "max-fidelity" : "min-time"},
      {"n", s.n},
      {"ion_i", s.ion_i},
      {"ion_j", s.ion_j},
      {"tau_min_periods", s.tau_min_periods},
      {"tau_max_periods", s.tau_max_periods},
      {"fidelity_floor", s.fidelity_floor},
      {"restarts", s.restarts},
      {"param_tol", s.param_tol},
      {"objective_tol", s.objective_tol},
      {"max_iterations", s.max_iterations},
      {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, OptimizationSpec& s) {
  std::string obj = j.value("objective", "max-fidelity");
  if (obj == "max-fidelity") s.objective = Objective::kMaxFidelity;
  else if (obj == "min-time") s.objective = Objective::kMinTimeWithFloor;
  else throw std::invalid_argument("OptimizationSpec: unknown objective " + obj);
  s.n = j.value("n", s.n);
  s.ion_i = j.value("ion_i", s.ion_i);
  s.ion_j = j.value("ion_j", s.ion_j);
  s.tau_min_periods = j.value("tau_min_periods", s.tau_min_periods);
  s.tau_max_periods = j.value("tau_max_periods", s.tau_max_periods);
  s.fidelity_floor = j.value("fidelity_floor", s.fidelity_floor);
  s.restarts = j.value("restarts", s.restarts);
  s.param_tol = j.value("param_tol", s.param_tol);
  s.objective_tol = j.value("objective_tol", s.objective_tol);
  s.max_iterations = j.value("max_iterations", s.max_iterations);
  s.seed = j.value("seed", s.seed);
}

}  // namespace fastgate

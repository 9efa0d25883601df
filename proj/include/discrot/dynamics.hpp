#ifndef DISCROT_DYNAMICS_HPP
#define DISCROT_DYNAMICS_HPP

// Limiting jump rates and the simplex flow
//     c(k, nu')   = exp(beta <e_{2 pi k / q}, M>) / Z_k(beta M)
//     F(nu')(k)   = c(k-1) nu'(k-1) - c(k) nu'(k)
// integrated by an adaptive Dormand-Prince 5(4) pair.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "discrot/consistency.hpp"
#include "discrot/core.hpp"
#include "discrot/simplex.hpp"

namespace discrot {

class StiffnessError : public Error {
 public:
  StiffnessError(const std::string& what, double time, std::vector<double> state)
      : Error(ErrorKind::Stiffness, "dynamics", what), time_(time), state_(std::move(state)) {}
  double time() const noexcept { return time_; }
  const std::vector<double>& state() const noexcept { return state_; }

 private:
  double time_;
  std::vector<double> state_;
};

/// Rates c(k, .) for k = 1..q given an already solved magnetization. No
/// consistency check; see `rates` for the checked entry point.
inline std::vector<double> rates_for_magnetization(const Model& model, Magnetization m) {
  const double beta = model.beta();
  const Vec2 x = beta * m;
  std::vector<double> c(static_cast<std::size_t>(model.q()));
  for (int k = 1; k <= model.q(); ++k)
    c[k - 1] = std::exp(beta * dot(model.boundary_direction(k), m) - model.arc_log_partition(k, x));
  return c;
}

/// Jump rates at nu'. `m` must be the solved magnetization for nu' (residual
/// <= 1e-10); a stale value is rejected as invalid input.
inline std::vector<double> rates(const Model& model, const SimplexVector& nu, Magnetization m) {
  if (nu.size() != model.q()) throw InvalidInput("dynamics", "profile length does not match q");
  if (!is_finite(m)) throw InvalidInput("dynamics", "magnetization must be finite");
  const double r = magnetization_residual(model, nu.weights(), m);
  if (!(r <= 1e-10))
    throw InvalidInput("dynamics", "magnetization is not the fixed point for this profile");
  return rates_for_magnetization(model, m);
}

/// Telescoping field from fluxes f_k = c_k w_k.
inline std::vector<double> field_from_rates(std::span<const double> c, std::span<const double> w) {
  const std::size_t q = w.size();
  std::vector<double> flux(q), out(q);
  for (std::size_t k = 0; k < q; ++k) flux[k] = c[k] * w[k];
  for (std::size_t k = 0; k < q; ++k) out[k] = flux[(k + q - 1) % q] - flux[k];
  return out;
}

struct FieldEvaluation {
  std::vector<double> value;
  Magnetization m;
};

inline FieldEvaluation evaluate_field(const Model& model, std::span<const double> w,
                                      std::optional<Magnetization> warm = std::nullopt) {
  const auto rep = solve_magnetization(model, w, warm);
  const auto c = rates_for_magnetization(model, rep.m);
  return {field_from_rates(c, w), rep.m};
}

inline std::vector<double> vector_field(const Model& model, const SimplexVector& nu) {
  if (nu.size() != model.q()) throw InvalidInput("dynamics", "profile length does not match q");
  return evaluate_field(model, nu.weights()).value;
}

struct FlowOptions {
  double rtol = 1e-9;
  double atol = 1e-9;
  double min_step = 1e-14;
  long max_steps = 50'000'000;
};

struct FlowTrajectory {
  std::vector<double> times;
  std::vector<SimplexVector> states;
  std::vector<Magnetization> magnetizations;
};

namespace detail {

// Dormand-Prince 5(4) tableau.
struct DormandPrince {
  static constexpr std::array<double, 7> c{0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
  static constexpr double a[7][6] = {
      {},
      {1.0 / 5},
      {3.0 / 40, 9.0 / 40},
      {44.0 / 45, -56.0 / 15, 32.0 / 9},
      {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
      {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
      {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
  };
  // b5 - b4
  static constexpr std::array<double, 7> e{71.0 / 57600,      0.0,           -71.0 / 16695,
                                           71.0 / 1920,       -17253.0 / 339200, 22.0 / 525,
                                           -1.0 / 40};
};

}  // namespace detail

/// Integrates d nu'/dt = F(nu') from nu0 over [0, t_final], recording states at
/// every multiple of output_dt (steps are clipped to land on them) and at
/// t_final. After each accepted step, weights are clamped at 0 and
/// renormalized; a step producing a weight below -10 atol is rejected.
inline FlowTrajectory integrate_flow(const Model& model, const SimplexVector& nu0, double t_final,
                                     double output_dt, const FlowOptions& opts = {}) {
  if (nu0.size() != model.q()) throw InvalidInput("dynamics", "profile length does not match q");
  if (!(t_final > 0.0) || !std::isfinite(t_final))
    throw InvalidInput("dynamics", "t_final must be positive");
  if (!(output_dt > 0.0) || !std::isfinite(output_dt))
    throw InvalidInput("dynamics", "output_dt must be positive");
  if (!(opts.rtol > 0.0) || !(opts.atol > 0.0))
    throw InvalidInput("dynamics", "tolerances must be positive");

  using DP = detail::DormandPrince;
  const std::size_t q = static_cast<std::size_t>(model.q());
  std::vector<double> y = nu0.vector();
  Magnetization warm = solve_magnetization(model, y).m;

  const auto rhs = [&](const std::vector<double>& state) {
    auto fe = evaluate_field(model, state, warm);
    warm = fe.m;
    return std::move(fe.value);
  };

  FlowTrajectory traj;
  traj.times.push_back(0.0);
  traj.states.push_back(nu0);
  traj.magnetizations.push_back(warm);

  std::vector<double> targets;
  for (long i = 1;; ++i) {
    const double t = i * output_dt;
    if (t > t_final * (1.0 + 1e-12)) break;
    targets.push_back(std::min(t, t_final));
  }
  if (targets.empty() || targets.back() < t_final * (1.0 - 1e-12)) targets.push_back(t_final);

  std::array<std::vector<double>, 7> k;
  k[0] = rhs(y);
  std::vector<double> stage(q), y5(q);
  double t = 0.0;
  double h = std::min(output_dt, 1e-2);
  long steps = 0;

  for (double target : targets) {
    while (target - t > 1e-13 * std::max(1.0, target)) {
      if (++steps > opts.max_steps)
        throw StiffnessError("step budget exhausted", t, y);
      const bool clipped = h >= target - t;
      const double step = clipped ? target - t : h;
      for (int s = 1; s < 7; ++s) {
        for (std::size_t i = 0; i < q; ++i) {
          double acc = 0.0;
          for (int j = 0; j < s; ++j) acc += DP::a[s][j] * k[j][i];
          stage[i] = y[i] + step * acc;
        }
        k[s] = rhs(stage);
      }
      // Stage 7 is evaluated at the 5th-order solution (FSAL).
      y5 = stage;
      double err = 0.0;
      for (std::size_t i = 0; i < q; ++i) {
        double e = 0.0;
        for (int j = 0; j < 7; ++j) e += DP::e[j] * k[j][i];
        const double sc = opts.atol + opts.rtol * std::max(std::abs(y[i]), std::abs(y5[i]));
        err += (step * e / sc) * (step * e / sc);
      }
      err = std::sqrt(err / static_cast<double>(q));

      const double min_w = *std::min_element(y5.begin(), y5.end());
      if (err <= 1.0 && min_w >= -10.0 * opts.atol) {
        double total = 0.0;
        for (double& v : y5) {
          v = std::max(v, 0.0);
          total += v;
        }
        for (double& v : y5) v /= total;
        y.swap(y5);
        k[0] = k[6];
        t += step;
        const double grow = err > 0.0 ? std::min(5.0, std::max(0.2, 0.9 * std::pow(err, -0.2))) : 5.0;
        h = clipped ? std::max(h, step * grow) : step * grow;
      } else {
        const double shrink =
            err > 1.0 ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.5;
        h = step * shrink;
        // The failed stages moved the warm start; restore it from the last state.
        warm = solve_magnetization(model, y, warm).m;
      }
      if (h < opts.min_step) throw StiffnessError("step size underflow", t, y);
    }
    t = target;
    traj.times.push_back(t);
    traj.states.push_back(SimplexVector::normalized(y));
    warm = solve_magnetization(model, y, warm).m;
    traj.magnetizations.push_back(warm);
  }
  return traj;
}

}  // namespace discrot

#endif  // DISCROT_DYNAMICS_HPP

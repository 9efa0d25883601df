#ifndef DISCROT_CONSISTENCY_HPP
#define DISCROT_CONSISTENCY_HPP

// Mean-field consistency equations. The constrained free-energy minimizer for
// a discrete profile nu' is a per-arc Gibbs measure with a shared
// magnetization M solving
//     M = sum_k nu'(k) m_k(beta M).

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "discrot/core.hpp"
#include "discrot/simplex.hpp"

namespace discrot {

class ConvergenceError : public Error {
 public:
  ConvergenceError(std::string module, const std::string& what, Magnetization last, double residual)
      : Error(ErrorKind::Convergence, std::move(module), what), last_(last), residual_(residual) {}
  Magnetization last_iterate() const noexcept { return last_; }
  double residual() const noexcept { return residual_; }

 private:
  Magnetization last_;
  double residual_;
};

struct FixedPointReport {
  Magnetization m;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

struct SolverOptions {
  double tolerance = 1e-12;
  int max_iter = 10000;
  double newton_threshold = 1e-4;
};

namespace detail {

struct MapEvaluation {
  Vec2 g;               // sum_k nu(k) m_k(beta M)
  double j11, j12, j22;  // sum_k nu(k) beta Cov_k(beta M)
};

inline MapEvaluation evaluate_map(const Model& model, std::span<const double> w, Vec2 m,
                                  bool with_jacobian) {
  MapEvaluation e{{0.0, 0.0}, 0.0, 0.0, 0.0};
  const double beta = model.beta();
  const Vec2 x = beta * m;
  for (int k = 1; k <= model.q(); ++k) {
    const double wk = w[k - 1];
    if (wk == 0.0) continue;
    const ArcMoments mo = model.arc_moments(k, x, with_jacobian);
    e.g += wk * mo.mean;
    if (with_jacobian) {
      e.j11 += wk * beta * mo.cov.a;
      e.j12 += wk * beta * mo.cov.b;
      e.j22 += wk * beta * mo.cov.c;
    }
  }
  return e;
}

}  // namespace detail

/// Magnetization of the beta = 0 constrained minimizer, sum_k nu'(k) m_k(0).
inline Magnetization default_start(const Model& model, std::span<const double> w) {
  Vec2 m;
  const double scale = 1.0 / model.arc_width();
  for (int k = 1; k <= model.q(); ++k) m += (w[k - 1] * scale) * model.arc_integral_of_direction(k);
  return m;
}

/// Residual |M - sum_k nu'(k) m_k(beta M)|.
inline double magnetization_residual(const Model& model, std::span<const double> w, Magnetization m) {
  return norm(m - detail::evaluate_map(model, w, m, false).g);
}

/// Damped Picard iteration with a Newton tail. Accepts raw weights (integrator
/// stages may sit a roundoff away from the simplex). Throws ConvergenceError
/// carrying the last iterate when max_iter is exhausted.
inline FixedPointReport solve_magnetization(const Model& model, std::span<const double> w,
                                            std::optional<Magnetization> warm_start = std::nullopt,
                                            const SolverOptions& opts = {}) {
  if (static_cast<int>(w.size()) != model.q())
    throw InvalidInput("consistency", "profile length does not match q");
  Magnetization m = warm_start ? *warm_start : default_start(model, w);
  if (!is_finite(m)) throw InvalidInput("consistency", "warm start must be finite");

  auto eval = detail::evaluate_map(model, w, m, true);
  double r = norm(m - eval.g);
  double lambda = 1.0;
  int it = 0;
  for (; it < opts.max_iter && !(r <= opts.tolerance); ++it) {
    if (r < opts.newton_threshold) {
      // (I - J) d = G(M) - M
      const double a = 1.0 - eval.j11, b = -eval.j12, d = 1.0 - eval.j22;
      const double det = a * d - b * b;
      if (std::abs(det) > 1e-300) {
        const Vec2 rhs = eval.g - m;
        const Vec2 step{(d * rhs.x - b * rhs.y) / det, (a * rhs.y - b * rhs.x) / det};
        const Vec2 trial = m + step;
        auto te = detail::evaluate_map(model, w, trial, true);
        const double tr = norm(trial - te.g);
        if (tr < r) {
          m = trial;
          eval = te;
          r = tr;
          continue;
        }
      }
    }
    for (;;) {
      const Vec2 trial = m + lambda * (eval.g - m);
      auto te = detail::evaluate_map(model, w, trial, true);
      const double tr = norm(trial - te.g);
      if (tr < r || lambda < 1e-8) {
        m = trial;
        eval = te;
        r = tr;
        lambda = std::min(1.0, 2.0 * lambda);
        break;
      }
      lambda *= 0.5;
    }
  }
  if (!(r <= opts.tolerance))
    throw ConvergenceError("consistency", "magnetization fixed point did not converge", m, r);
  return {m, it, r, true};
}

inline FixedPointReport solve_magnetization(const Model& model, const SimplexVector& nu,
                                            std::optional<Magnetization> warm_start = std::nullopt,
                                            const SolverOptions& opts = {}) {
  return solve_magnetization(model, nu.weights(), warm_start, opts);
}

struct MagnetizationSweep {
  FixedPointReport primary;                 // from the default start
  std::vector<Magnetization> distinct;      // all fixed points found, separated by > 1e-6
};

/// Default solve plus 8 starts on the circle of radius 0.9. Starts that fail
/// to converge are skipped; the primary solve must converge.
inline MagnetizationSweep sweep_magnetization(const Model& model, const SimplexVector& nu,
                                              const SolverOptions& opts = {}) {
  MagnetizationSweep out;
  out.primary = solve_magnetization(model, nu, std::nullopt, opts);
  out.distinct.push_back(out.primary.m);
  for (int j = 0; j < 8; ++j) {
    const Vec2 start = 0.9 * unit_vector(kTwoPi * j / 8.0);
    try {
      const auto rep = solve_magnetization(model, nu, start, opts);
      const bool seen = std::any_of(out.distinct.begin(), out.distinct.end(),
                                    [&](Vec2 v) { return norm(v - rep.m) <= 1e-6; });
      if (!seen) out.distinct.push_back(rep.m);
    } catch (const ConvergenceError&) {
    }
  }
  return out;
}

/// Full-circle ratio A(x) = int cos w e^{x cos w} / int e^{x cos w}, by the
/// periodic trapezoid rule on `resolution` nodes.
inline double circle_mean_ratio(double x, int resolution) {
  double num = 0.0, den = 0.0;
  for (int i = 0; i < resolution; ++i) {
    const double c = std::cos(kTwoPi * i / resolution);
    const double f = std::exp(x * (c - 1.0));
    num += c * f;
    den += f;
  }
  return num / den;
}

/// Order parameter m* of the continuous rotator model: 0 for beta <= 2, else
/// the positive root of m = A(beta m).
inline double continuous_mstar(double beta, int resolution = 512) {
  if (!(beta > 0.0) || !std::isfinite(beta))
    throw InvalidInput("consistency", "beta must be a positive finite number");
  if (resolution < 16) throw InvalidInput("consistency", "resolution must be at least 16");
  if (beta <= 2.0) return 0.0;
  const auto g = [&](double m) { return m - circle_mean_ratio(beta * m, resolution); };
  double lo = 1e-8, hi = 1.0;
  if (g(lo) >= 0.0) return 0.0;  // beta within roundoff of 2
  for (int i = 0; i < 200 && hi - lo > 4e-16; ++i) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// F_q(x) = int_{-pi/q}^{pi/q} sin w e^{x sin w} / int e^{x sin w}.
class CheckerboardMap {
 public:
  CheckerboardMap(int q, int nodes) : q_(q), rule_(gauss_legendre(nodes)) {}

  double operator()(double x) const {
    const double width = kTwoPi / q_;
    const int panels = std::max(1, static_cast<int>(std::ceil(width * std::sqrt(std::abs(x)) / 16.0)));
    const double pw = width / panels;
    double num = 0.0, den = 0.0;
    for (int p = 0; p < panels; ++p) {
      const double mid = -0.5 * width + (p + 0.5) * pw;
      for (std::size_t i = 0; i < rule_.nodes.size(); ++i) {
        const double s = std::sin(mid + 0.5 * pw * rule_.nodes[i]);
        const double f = rule_.weights[i] * std::exp(x * s - std::abs(x));
        num += s * f;
        den += f;
      }
    }
    return num / den;
  }

  /// F_q'(0), the variance of sin w over the arc, by the same quadrature.
  double derivative_at_zero() const {
    double s2 = 0.0, total = 0.0;
    for (std::size_t i = 0; i < rule_.nodes.size(); ++i) {
      const double s = std::sin(0.5 * kTwoPi / q_ * rule_.nodes[i]);
      s2 += rule_.weights[i] * s * s;
      total += rule_.weights[i];
    }
    return s2 / total;
  }

 private:
  int q_;
  GaussLegendreRule rule_;
};

/// Analytic slope F_q'(0) = 1/2 - (q / 4 pi) sin(2 pi / q).
inline double checkerboard_slope_at_zero(int q) {
  return 0.5 - q / (4.0 * std::numbers::pi) * std::sin(kTwoPi / q);
}

/// Roots of m = F_q(beta m) in [-1, 1]: 1e-3 sign scan on (0, 1], bisection,
/// mirrored by antisymmetry. Sorted ascending; always contains 0.
inline std::vector<double> checkerboard_fixed_points(const Model& model) {
  const int q = model.q();
  if (q % 2 != 0) throw InvalidInput("consistency", "checkerboard profile needs even q");
  const CheckerboardMap f(q, model.params().nodes_per_arc);
  const double beta = model.beta();
  const auto h = [&](double m) { return m - f(beta * m); };

  std::vector<double> positive;
  double prev_m = 0.0, prev_h = 0.0;
  for (int i = 1; i <= 1000; ++i) {
    const double m = i / 1000.0;
    const double hm = h(m);
    if (hm == 0.0) {
      positive.push_back(m);
    } else if (i > 1 && prev_h != 0.0 && (hm < 0.0) != (prev_h < 0.0)) {
      double lo = prev_m, hi = m, hlo = prev_h;
      for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double hmid = h(mid);
        if ((hmid < 0.0) == (hlo < 0.0)) {
          lo = mid;
          hlo = hmid;
        } else {
          hi = mid;
        }
      }
      positive.push_back(0.5 * (lo + hi));
    }
    prev_m = m;
    prev_h = hm;
  }
  std::vector<double> roots;
  for (auto it = positive.rbegin(); it != positive.rend(); ++it) roots.push_back(-*it);
  roots.push_back(0.0);
  roots.insert(roots.end(), positive.begin(), positive.end());
  return roots;
}

/// nu' = (delta_1 + delta_{q/2+1}) / 2.
inline SimplexVector checkerboard_profile(int q) {
  if (q % 2 != 0) throw InvalidInput("consistency", "checkerboard profile needs even q");
  std::vector<double> w(static_cast<std::size_t>(q), 0.0);
  w[0] = 0.5;
  w[q / 2] = 0.5;
  return SimplexVector(std::move(w));
}

enum class Regime { UniquenessGuaranteed, NonUniqueness, Unknown };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::UniquenessGuaranteed: return "uniqueness_guaranteed";
    case Regime::NonUniqueness: return "non_uniqueness";
    case Regime::Unknown: return "unknown";
  }
  return "unknown";
}

struct RegimeLabel {
  Regime regime = Regime::Unknown;
  bool uniqueness = false;                   // beta sin^2(pi/q) < 1
  bool non_uniqueness = false;               // beta (1 - q/(2 pi) sin(2 pi/q)) > 2
  bool equidistribution_attractive = false;  // beta (1 - (q/pi)^2 sin^2(pi/q)) > 2
};

inline double uniqueness_indicator(double beta, int q) {
  const double s = std::sin(std::numbers::pi / q);
  return beta * s * s;
}
inline double non_uniqueness_indicator(double beta, int q) {
  return beta * (1.0 - q / kTwoPi * std::sin(kTwoPi / q));
}
inline double attractivity_indicator(double beta, int q) {
  const double s = q / std::numbers::pi * std::sin(std::numbers::pi / q);
  return beta * (1.0 - s * s);
}

inline RegimeLabel classify_regime(double beta, int q) {
  if (!(beta > 0.0) || !std::isfinite(beta))
    throw InvalidInput("consistency", "beta must be a positive finite number");
  if (q < 3) throw InvalidInput("consistency", "q must be at least 3");
  RegimeLabel label;
  label.uniqueness = uniqueness_indicator(beta, q) < 1.0;
  label.non_uniqueness = non_uniqueness_indicator(beta, q) > 2.0;
  label.equidistribution_attractive = attractivity_indicator(beta, q) > 2.0;
  label.regime = label.uniqueness       ? Regime::UniquenessGuaranteed
                 : label.non_uniqueness ? Regime::NonUniqueness
                                        : Regime::Unknown;
  return label;
}

struct RegimeCell {
  double beta = 0.0;
  int q = 0;
  RegimeLabel label;
};

/// Grid over beta in (beta_lo, beta_hi] (beta_steps equal steps, left end
/// excluded) and q in [q_lo, q_hi]. Rows ordered by q, then beta.
inline std::vector<RegimeCell> regime_grid(double beta_lo, double beta_hi, int beta_steps, int q_lo,
                                           int q_hi) {
  if (!(beta_lo >= 2.0))
    throw RegimeViolation("consistency", "regime grid is restricted to beta > 2");
  if (!(beta_hi > beta_lo) || beta_steps < 1)
    throw InvalidInput("consistency", "empty beta range");
  if (q_lo < 3 || q_hi < q_lo) throw InvalidInput("consistency", "q range must satisfy 3 <= q_lo <= q_hi");
  std::vector<RegimeCell> cells;
  cells.reserve(static_cast<std::size_t>(q_hi - q_lo + 1) * beta_steps);
  for (int q = q_lo; q <= q_hi; ++q) {
    for (int i = 1; i <= beta_steps; ++i) {
      const double beta = beta_lo + (beta_hi - beta_lo) * i / beta_steps;
      cells.push_back({beta, q, classify_regime(beta, q)});
    }
  }
  return cells;
}

}  // namespace discrot

#endif  // DISCROT_CONSISTENCY_HPP

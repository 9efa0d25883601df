#ifndef DISCROT_LDP_HPP
#define DISCROT_LDP_HPP

// Path large deviations of the empirical process:
//     H(nu', p) = sum_k nu'(k) c(k, nu') (e^{p(k+1) - p(k)} - 1)
//     L(nu', u) = sup_p <p, u> - H(nu', p)

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "discrot/consistency.hpp"
#include "discrot/core.hpp"
#include "discrot/dynamics.hpp"
#include "discrot/simplex.hpp"

namespace discrot {

inline constexpr double kMaxMomentumGap = 700.0;

/// Momentum on the arcs, gauge-fixed so that p(q) = 0.
class MomentumVector {
 public:
  MomentumVector() = default;
  explicit MomentumVector(std::vector<double> p) : p_(std::move(p)) {
    if (p_.empty()) throw InvalidInput("ldp", "momentum must not be empty");
    const double last = p_.back();
    for (double& v : p_) {
      if (!std::isfinite(v)) throw InvalidInput("ldp", "momentum must be finite");
      v -= last;
    }
  }
  static MomentumVector zero(int q) { return MomentumVector(std::vector<double>(static_cast<std::size_t>(q), 0.0)); }

  int size() const noexcept { return static_cast<int>(p_.size()); }
  double operator()(int k) const { return p_[k - 1]; }
  double operator[](std::size_t i) const { return p_[i]; }
  const std::vector<double>& vector() const noexcept { return p_; }

 private:
  std::vector<double> p_;
};

namespace detail {

// Jump fluxes w_k = nu'(k) c(k, nu').
inline std::vector<double> jump_fluxes(const Model& model, const SimplexVector& nu) {
  const Magnetization m = solve_magnetization(model, nu).m;
  const auto c = rates_for_magnetization(model, m);
  std::vector<double> w(c.size());
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = nu[k] * c[k];
  return w;
}

inline double hamiltonian_from_fluxes(std::span<const double> w, std::span<const double> p) {
  const std::size_t q = w.size();
  double h = 0.0;
  for (std::size_t k = 0; k < q; ++k) {
    const double d = p[(k + 1) % q] - p[k];
    if (std::abs(d) > kMaxMomentumGap)
      throw OverflowError("ldp", "momentum differences exceed the exponent guard");
    h += w[k] * std::expm1(d);
  }
  return h;
}

}  // namespace detail

inline double hamiltonian(const Model& model, const SimplexVector& nu, const MomentumVector& p) {
  if (nu.size() != model.q() || p.size() != model.q())
    throw InvalidInput("ldp", "argument length does not match q");
  const auto w = detail::jump_fluxes(model, nu);
  return detail::hamiltonian_from_fluxes(w, p.vector());
}

struct LagrangianValue {
  double value = 0.0;
  MomentumVector maximizer;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;
};

struct LagrangianOptions {
  double gradient_tolerance = 1e-10;
  int max_iter = 500;
  double boundary_epsilon = 1e-12;
};

/// Maximizes the concave objective <p, u> - H(nu', p) over p with p(q) = 0.
/// Newton steps use the Hessian
///     -sum_k w_k e^{p(k+1) - p(k)} (z(k+1) - z(k))^2
/// restricted to the first q-1 coordinates; a non-ascent Newton direction
/// falls back to the gradient. Profiles on the boundary of the simplex are
/// moved a distance boundary_epsilon toward the equidistribution first.
inline LagrangianValue lagrangian(const Model& model, const SimplexVector& nu,
                                  std::span<const double> u, const LagrangianOptions& opts = {}) {
  const int q = model.q();
  if (nu.size() != q || static_cast<int>(u.size()) != q)
    throw InvalidInput("ldp", "argument length does not match q");
  double usum = 0.0, uscale = 0.0;
  for (double v : u) {
    if (!std::isfinite(v)) throw InvalidInput("ldp", "velocity must be finite");
    usum += v;
    uscale = std::max(uscale, std::abs(v));
  }
  if (std::abs(usum) > 1e-12 * std::max(1.0, uscale))
    throw InvalidInput("ldp", "velocity must sum to zero");

  const SimplexVector base =
      nu.interior() ? nu : mix(nu, SimplexVector::uniform(q), opts.boundary_epsilon);
  const auto w = detail::jump_fluxes(model, base);
  const std::size_t n = static_cast<std::size_t>(q);

  const auto objective = [&](const std::vector<double>& p) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += p[k] * u[k];
    return s - detail::hamiltonian_from_fluxes(w, p);
  };
  // Weighted jump intensities a_k = w_k e^{p(k+1) - p(k)} and the gradient.
  std::vector<double> a(n), grad(n);
  const auto eval_gradient = [&](const std::vector<double>& p) {
    for (std::size_t k = 0; k < n; ++k) a[k] = w[k] * std::exp(p[(k + 1) % n] - p[k]);
    double g2 = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
      grad[l] = u[l] - (a[(l + n - 1) % n] - a[l]);
      if (l + 1 < n) g2 = std::max(g2, std::abs(grad[l]));
    }
    return g2;
  };

  std::vector<double> p(n, 0.0);
  double f = 0.0;
  LagrangianValue out;
  double gnorm = eval_gradient(p);
  int it = 0;
  for (; it < opts.max_iter && gnorm > opts.gradient_tolerance; ++it) {
    // Reduced Hessian of H over p(1..q-1) (p(q) = 0 fixed).
    const int m = q - 1;
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = k, j = (k + 1) % n;  // a_k (z_j - z_i)^2
      if (i < n - 1) hess(i, i) += a[k];
      if (j < n - 1) hess(j, j) += a[k];
      if (i < n - 1 && j < n - 1) {
        hess(i, j) -= a[k];
        hess(j, i) -= a[k];
      }
    }
    Eigen::VectorXd g(m);
    for (int i = 0; i < m; ++i) g(i) = grad[i];
    Eigen::VectorXd dir;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    bool newton = ldlt.info() == Eigen::Success && ldlt.isPositive();
    if (newton) {
      dir = ldlt.solve(g);
      newton = dir.allFinite() && dir.dot(g) > 0.0;
    }
    if (!newton) dir = g;

    double step = 1.0;
    std::vector<double> trial(n, 0.0);
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (int i = 0; i < m; ++i) trial[i] = p[i] + step * dir(i);
      trial[n - 1] = 0.0;
      double ft;
      try {
        ft = objective(trial);
      } catch (const OverflowError&) {
        step *= 0.5;
        continue;
      }
      bool ok = ft >= f + 1e-4 * step * dir.dot(g);
      // Near the optimum the objective gain drops below roundoff; a full Newton
      // step is then judged by the gradient instead.
      if (!ok && newton && step == 1.0) ok = eval_gradient(trial) < 0.5 * gnorm;
      if (ok) {
        p = trial;
        f = ft;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    gnorm = eval_gradient(p);
  }

  out.iterations = it;
  out.gradient_norm = gnorm;
  out.converged = gnorm <= opts.gradient_tolerance;
  if (!out.converged) {
    for (double v : p)
      if (std::abs(v) > kMaxMomentumGap)
        throw OverflowError("ldp", "maximizing momentum exceeds the exponent guard");
    throw Error(ErrorKind::Convergence, "ldp", "Lagrangian maximization did not converge");
  }
  out.value = f;
  out.maximizer = MomentumVector(std::move(p));
  return out;
}

/// dH/dp at momentum p, i.e. the velocity dual to p.
inline std::vector<double> hamiltonian_gradient(const Model& model, const SimplexVector& nu,
                                                const MomentumVector& p) {
  const auto w = detail::jump_fluxes(model, nu);
  const std::size_t n = w.size();
  std::vector<double> a(n), out(n);
  for (std::size_t k = 0; k < n; ++k) a[k] = w[k] * std::exp(p[(k + 1) % n] - p[k]);
  for (std::size_t l = 0; l < n; ++l) out[l] = a[(l + n - 1) % n] - a[l];
  return out;
}

}  // namespace discrot

#endif  // DISCROT_LDP_HPP
